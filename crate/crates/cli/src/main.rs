//! Command-line front end: track a sequence, evaluate a result file, run
//! frame-rate sweeps, or simulate real-time frame skipping.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. All
//! diagnostics go to stderr; data goes to files or stdout.

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rtmot::harness::{self, FrameCost, RunOptions, SweepConfig};
use rtmot::io;
use rtmot::metrics::{evaluate, EvalOptions, MetricsReport};
use rtmot::tracker::{Tracker, TrackerConfig};
use rtmot::{CostConfig, CostMeasure, PredictorKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rtmot",
    about = "Real-time multiple object tracking by detection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one sequence and write a result file.
    Track(TrackArgs),
    /// Evaluate a result file against ground truth and print one report row.
    Eval(EvalArgs),
    /// Run a sweep config: configurations × sampling intervals, CSV reports.
    Sweep(SweepArgs),
    /// Simulate real-time tracking where processing time skips frames.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorArg {
    Kalman,
    Stationary,
    Particle,
}

impl From<PredictorArg> for PredictorKind {
    fn from(v: PredictorArg) -> Self {
        match v {
            PredictorArg::Kalman => PredictorKind::Kalman,
            PredictorArg::Stationary => PredictorKind::Stationary,
            PredictorArg::Particle => PredictorKind::Particle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Iou,
    Linear,
    Exp,
}

impl From<CostArg> for CostMeasure {
    fn from(v: CostArg) -> Self {
        match v {
            CostArg::Iou => CostMeasure::Iou,
            CostArg::Linear => CostMeasure::Linear,
            CostArg::Exp => CostMeasure::Exponential,
        }
    }
}

/// Tracker flags shared by track and simulate.
#[derive(Args)]
struct TrackerArgs {
    /// Motion model for new tracks.
    #[arg(long, value_enum, default_value = "kalman")]
    predictor: PredictorArg,
    /// Similarity measure for association.
    #[arg(long, value_enum, default_value = "iou")]
    cost: CostArg,
    /// Detection confidence threshold (detections below are dropped).
    #[arg(long, default_value_t = 0.4)]
    conf: f64,
    /// Frames a track survives without a detection.
    #[arg(long = "max-age", default_value_t = 1)]
    max_age: u32,
    /// Consecutive hits before a track is reported.
    #[arg(long = "min-hits", default_value_t = 3)]
    min_hits: u32,
    /// Gating threshold override for the chosen cost measure.
    #[arg(long = "gate")]
    gate: Option<f64>,
    /// Seed for the particle filter streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrackerArgs {
    fn to_config(&self) -> TrackerConfig {
        let mut cost = CostConfig::for_measure(self.cost.into());
        if let Some(gate) = self.gate {
            cost.threshold = gate;
        }
        TrackerConfig {
            confidence_threshold: self.conf,
            max_age: self.max_age,
            min_hit_streak: self.min_hits,
            predictor: self.predictor.into(),
            cost,
            seed: self.seed,
            ..TrackerConfig::default()
        }
    }

    fn echo(&self, interval: u64) {
        log::info!(
            "config: predictor={:?} cost={:?} conf={} max-age={} min-hits={} seed={} interval={}",
            PredictorKind::from(self.predictor).label(),
            CostMeasure::from(self.cost).label(),
            self.conf,
            self.max_age,
            self.min_hits,
            self.seed,
            interval
        );
    }
}

#[derive(Args)]
struct TrackArgs {
    /// Sequence config file (key=value; see README).
    #[arg(long)]
    seq: PathBuf,
    /// Override the detection file from the sequence config.
    #[arg(long)]
    det: Option<PathBuf>,
    /// Override the ground-truth file from the sequence config.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Feed ground truth (ids erased) instead of detections.
    #[arg(long = "use-gt", default_value_t = false)]
    use_gt: bool,
    /// Output result file.
    #[arg(long)]
    out: PathBuf,
    /// Process every i-th frame.
    #[arg(long, default_value_t = 1)]
    interval: u64,
    #[command(flatten)]
    tracker: TrackerArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth file.
    #[arg(long)]
    gt: PathBuf,
    /// Tracker result file.
    #[arg(long)]
    res: PathBuf,
    /// Evaluator IoU acceptance threshold.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Score only every i-th frame (the subsample the results were made
    /// with).
    #[arg(long, default_value_t = 1)]
    interval: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config file (TOML; see README).
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV reports and the run manifest.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    /// Worker threads for runs within the sweep.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Sequence config file.
    #[arg(long)]
    seq: PathBuf,
    /// Feed ground truth (ids erased) instead of detections.
    #[arg(long = "use-gt", default_value_t = false)]
    use_gt: bool,
    /// Capture frame rate of the simulated camera.
    #[arg(long = "capture-fps", default_value_t = 30.0)]
    capture_fps: f64,
    /// Deterministic per-frame model cost in seconds; without it the
    /// measured step time drives the frame skipping.
    #[arg(long = "fixed-cost")]
    fixed_cost: Option<f64>,
    /// Optional result file for the processed frames.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tracker: TrackerArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("RT_MOT_LOG")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };

    let result = match cli.command {
        Command::Track(args) => cmd_track(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn load_sequence(
    path: &std::path::Path,
    det: Option<PathBuf>,
    gt: Option<PathBuf>,
    use_gt: bool,
) -> anyhow::Result<io::SequenceConfig> {
    let mut seq = io::load_sequence_config(path)
        .with_context(|| format!("loading sequence config {}", path.display()))?;
    if let Some(det) = det {
        seq.det_path = Some(det);
    }
    if let Some(gt) = gt {
        seq.gt_path = Some(gt);
    }
    if use_gt {
        seq.use_gt_as_detections = true;
    }
    Ok(seq)
}

fn cmd_track(args: TrackArgs) -> anyhow::Result<()> {
    args.tracker.echo(args.interval);
    let seq = load_sequence(&args.seq, args.det, args.gt, args.use_gt)?;
    let detections = seq.load_detections().context("loading detections")?;
    if detections.dropped > 0 {
        log::warn!("dropped {} rows with degenerate boxes", detections.dropped);
    }
    let config = args.tracker.to_config();
    let mut tracker = Tracker::new(config, seq.info.clone()).context("building tracker")?;
    let frames = harness::subsample(seq.info.frame_count, args.interval.max(1));
    let output = harness::track_sequence(&mut tracker, &frames, &detections.by_frame)
        .context("tracking")?;
    io::write_results_file(&args.out, &output.boxes)
        .with_context(|| format!("writing {}", args.out.display()))?;
    log::info!(
        "tracked {} frames in {:.3}s ({:.1} Hz), wrote {} boxes",
        output.frames_processed,
        output.tracking_seconds,
        output.hz(),
        output.boxes.len()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let gt = io::parse_ground_truth_file(&args.gt)
        .with_context(|| format!("parsing {}", args.gt.display()))?;
    let results = {
        let file = std::fs::File::open(&args.res)
            .with_context(|| format!("opening {}", args.res.display()))?;
        io::parse_results(std::io::BufReader::new(file))
            .with_context(|| format!("parsing {}", args.res.display()))?
    };
    let frames = if args.interval > 1 {
        let last = gt
            .tracks
            .iter()
            .filter_map(|t| t.boxes.keys().next_back().copied())
            .max()
            .unwrap_or(0);
        Some(harness::subsample(last, args.interval))
    } else {
        None
    };
    let opts = EvalOptions {
        overlap_threshold: args.threshold,
        frames,
    };
    let report = evaluate(&gt.tracks, &results, &opts).context("evaluating")?;
    println!("{}", MetricsReport::CSV_HEADER);
    println!("{}", report.csv_row(args.interval as f64));
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let config = SweepConfig::load(&args.config)
        .with_context(|| format!("loading sweep config {}", args.config.display()))?;
    let output = harness::sweep(&config, args.jobs.max(1)).context("running sweep")?;
    let written = output
        .write_reports(&args.out_dir)
        .with_context(|| format!("writing reports to {}", args.out_dir.display()))?;
    let failures = output
        .manifest
        .iter()
        .filter(|l| l.outcome != "ok")
        .count();
    for path in &written {
        log::info!("wrote {}", path.display());
    }
    eprintln!(
        "sweep finished: {} runs, {} failures, {} report files",
        output.manifest.len(),
        failures,
        written.len() - 1
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    args.tracker.echo(1);
    let seq = load_sequence(&args.seq, None, None, args.use_gt)?;
    let config = args.tracker.to_config();
    let cost = match args.fixed_cost {
        Some(c) => FrameCost::Fixed(c),
        None => FrameCost::Measured,
    };
    let run = harness::simulate_realtime(
        &seq,
        &config,
        args.capture_fps,
        cost,
        &RunOptions::default(),
    )
    .context("simulating")?;
    if let Some(out) = &args.out {
        io::write_results_file(out, &run.boxes)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    eprintln!(
        "processed {} of {} frames (mean interval {:.2}), tracking {:.3}s",
        run.record.frames_processed,
        seq.info.frame_count,
        run.record.mean_interval,
        run.record.tracking_seconds
    );
    println!("{}", MetricsReport::CSV_HEADER);
    println!("{}", run.record.metrics.csv_row(run.record.mean_interval));
    Ok(())
}

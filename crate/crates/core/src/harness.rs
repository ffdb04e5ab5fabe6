//! Experiment engine: frame-rate subsampling sweeps, real-time
//! frame-skipping simulation, tracking-only throughput measurement and CSV
//! report emission.
//!
//! Only the calls into [`Tracker::step`] are timed; parsing and evaluation
//! stay outside the clock.

use crate::assoc::CostMeasure;
use crate::geom::Detection;
use crate::io::SequenceConfig;
use crate::metrics::{evaluate, EvalOptions, MetricsReport};
use crate::predict::{KalmanModel, PredictorKind};
use crate::tracker::{Tracker, TrackerConfig, TrackedBox, TrackerError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Parse(#[from] crate::io::ParseError),
    #[error(transparent)]
    Config(#[from] crate::io::ConfigError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("write error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid sweep config: {0}")]
    InvalidSweep(String),
}

/// Frames processed at sampling interval `i`: 1, 1+i, 1+2i, … up to
/// `frame_count`.
pub fn subsample(frame_count: u64, interval: u64) -> Vec<u64> {
    assert!(interval >= 1, "interval must be at least 1");
    (1..=frame_count).step_by(interval as usize).collect()
}

/// Output of a timed pass over a sequence.
#[derive(Debug, Clone)]
pub struct TrackOutput {
    pub boxes: Vec<TrackedBox>,
    pub frames_processed: u64,
    /// Wall time accumulated around the step calls only.
    pub tracking_seconds: f64,
    /// Seconds spent inside step() per processed frame.
    pub frame_seconds: Vec<f64>,
}

impl TrackOutput {
    pub fn hz(&self) -> f64 {
        if self.tracking_seconds > 0.0 {
            self.frames_processed as f64 / self.tracking_seconds
        } else {
            f64::INFINITY
        }
    }
}

/// Step a tracker over the given frames with pre-loaded detections, timing
/// only the step calls.
pub fn track_sequence(
    tracker: &mut Tracker,
    frames: &[u64],
    detections: &BTreeMap<u64, Vec<Detection>>,
) -> Result<TrackOutput, TrackerError> {
    let empty: Vec<Detection> = Vec::new();
    let mut boxes = Vec::new();
    let mut tracking_seconds = 0.0;
    let mut frame_seconds = Vec::with_capacity(frames.len());
    for &frame in frames {
        let dets = detections.get(&frame).unwrap_or(&empty);
        let start = Instant::now();
        let out = tracker.step(frame, dets)?;
        let elapsed = start.elapsed().as_secs_f64();
        tracking_seconds += elapsed;
        frame_seconds.push(elapsed);
        boxes.extend(out);
    }
    Ok(TrackOutput {
        boxes,
        frames_processed: frames.len() as u64,
        tracking_seconds,
        frame_seconds,
    })
}

/// Per-run knobs that are not part of the tracker itself.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub interval: u64,
    /// Evaluator acceptance threshold.
    pub overlap_threshold: f64,
    /// When set, each processed frame is charged this many extra seconds
    /// in the Hz accounting (end-to-end style, detector included).
    pub detector_cost: Option<f64>,
    /// Scale the constant-velocity time step by the sampling interval
    /// instead of treating each processed frame as one step.
    pub dt_scales_with_interval: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            interval: 1,
            overlap_threshold: 0.5,
            detector_cost: None,
            dt_scales_with_interval: false,
        }
    }
}

/// One experiment run: configuration labels, timing and metrics.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub sequence: String,
    pub detections: String,
    pub predictor: String,
    pub measure: String,
    pub interval: u64,
    /// Mean gap between processed frames; equals `interval` for fixed
    /// sampling and the measured average for real-time simulation.
    pub mean_interval: f64,
    pub frames_processed: u64,
    pub tracking_seconds: f64,
    pub hz: f64,
    pub metrics: MetricsReport,
}

fn effective_tracker_config(cfg: &TrackerConfig, opts: &RunOptions) -> TrackerConfig {
    let mut cfg = cfg.clone();
    if opts.dt_scales_with_interval && opts.interval > 1 {
        cfg.kalman = KalmanModel::constant_velocity(opts.interval as f64);
        cfg.particle.dt = opts.interval as f64;
    }
    cfg
}

fn finish_record(
    seq: &SequenceConfig,
    cfg: &TrackerConfig,
    opts: &RunOptions,
    frames: &[u64],
    mean_interval: f64,
    interval: u64,
    output: TrackOutput,
) -> Result<RunRecord, HarnessError> {
    let gt = seq.load_ground_truth()?;
    let eval_opts = EvalOptions {
        overlap_threshold: opts.overlap_threshold,
        frames: Some(frames.to_vec()),
    };
    let mut metrics = evaluate(&gt.tracks, &output.boxes, &eval_opts)?;
    let charged = output.tracking_seconds
        + opts.detector_cost.unwrap_or(0.0) * output.frames_processed as f64;
    let hz = if charged > 0.0 {
        output.frames_processed as f64 / charged
    } else {
        f64::INFINITY
    };
    metrics.hz = Some(hz);
    Ok(RunRecord {
        sequence: seq.info.name.clone(),
        detections: if seq.use_gt_as_detections {
            "gt".into()
        } else {
            "det".into()
        },
        predictor: cfg.predictor.label().into(),
        measure: cfg.cost.measure.label().into(),
        interval,
        mean_interval,
        frames_processed: output.frames_processed,
        tracking_seconds: output.tracking_seconds,
        hz,
        metrics,
    })
}

/// Run one configuration at one sampling interval: load detections
/// (untimed), track the subsampled frames, evaluate against the ground
/// truth restricted to the same frames.
pub fn run_once(
    seq: &SequenceConfig,
    cfg: &TrackerConfig,
    opts: &RunOptions,
) -> Result<RunRecord, HarnessError> {
    let detections = seq.load_detections()?;
    let frames = subsample(seq.info.frame_count, opts.interval);
    let cfg_eff = effective_tracker_config(cfg, opts);
    let mut tracker = Tracker::new(cfg_eff, seq.info.clone())?;
    let output = track_sequence(&mut tracker, &frames, &detections.by_frame)?;
    log::info!(
        "run {} interval {}: {} frames in {:.3}s",
        seq.info.name,
        opts.interval,
        output.frames_processed,
        output.tracking_seconds
    );
    finish_record(
        seq,
        cfg,
        opts,
        &frames,
        opts.interval as f64,
        opts.interval,
        output,
    )
}

/// How the per-frame cost of the full model is accounted during real-time
/// simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameCost {
    /// Deterministic synthetic cost in seconds per frame.
    Fixed(f64),
    /// Use the measured step time of this run.
    Measured,
}

/// A real-time simulation run: the record, the emitted boxes, and the
/// processed frames with the seconds charged to each.
#[derive(Debug, Clone)]
pub struct RealtimeRun {
    pub record: RunRecord,
    pub boxes: Vec<TrackedBox>,
    pub schedule: Vec<(u64, f64)>,
}

/// Simulate running the full model in real time: after a frame that took
/// `d` seconds, the next processed frame is the first one captured at
/// least `d` later (skip = ceil(d · capture_fps), at least 1).
pub fn simulate_realtime(
    seq: &SequenceConfig,
    cfg: &TrackerConfig,
    capture_fps: f64,
    cost: FrameCost,
    opts: &RunOptions,
) -> Result<RealtimeRun, HarnessError> {
    assert!(capture_fps > 0.0, "capture_fps must be positive");
    let detections = seq.load_detections()?;
    let cfg_eff = effective_tracker_config(cfg, opts);
    let mut tracker = Tracker::new(cfg_eff, seq.info.clone())?;

    let empty: Vec<Detection> = Vec::new();
    let mut boxes = Vec::new();
    let mut schedule: Vec<(u64, f64)> = Vec::new();
    let mut tracking_seconds = 0.0;
    let mut frame_seconds = Vec::new();
    let mut frame = 1u64;
    while frame <= seq.info.frame_count {
        let dets = detections.by_frame.get(&frame).unwrap_or(&empty);
        let start = Instant::now();
        let out = tracker.step(frame, dets)?;
        let measured = start.elapsed().as_secs_f64();
        tracking_seconds += measured;
        frame_seconds.push(measured);
        boxes.extend(out);

        let charged = match cost {
            FrameCost::Fixed(c) => c,
            FrameCost::Measured => measured,
        };
        schedule.push((frame, charged));
        let skip = (charged * capture_fps).ceil().max(1.0) as u64;
        frame += skip;
    }

    let frames: Vec<u64> = schedule.iter().map(|&(f, _)| f).collect();
    let mean_interval = if frames.len() >= 2 {
        (frames[frames.len() - 1] - frames[0]) as f64 / (frames.len() - 1) as f64
    } else {
        1.0
    };
    let output = TrackOutput {
        boxes: boxes.clone(),
        frames_processed: frames.len() as u64,
        tracking_seconds,
        frame_seconds,
    };
    let record = finish_record(seq, cfg, opts, &frames, mean_interval, 0, output)?;
    Ok(RealtimeRun {
        record,
        boxes,
        schedule,
    })
}

/// Detection source of a sweep configuration entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionSource {
    /// The sequence's detection file.
    Det,
    /// Ground truth with ids erased (a perfect detector).
    Gt,
}

impl DetectionSource {
    pub fn label(&self) -> &'static str {
        match self {
            DetectionSource::Det => "det",
            DetectionSource::Gt => "gt",
        }
    }
}

/// One (detection source, predictor, cost measure) triple of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub detections: DetectionSource,
    pub predictor: PredictorKind,
    pub measure: CostMeasure,
}

/// Declarative sweep: every configuration entry is run at every interval
/// over every sequence, and reports are aggregated per entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default = "default_intervals")]
    pub intervals: Vec<u64>,
    pub configurations: Vec<SweepEntry>,
    /// Paths to sequence config files.
    pub sequences: Vec<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_overlap")]
    pub overlap_threshold: f64,
    #[serde(default)]
    pub confidence_threshold: Option<f64>,
    #[serde(default)]
    pub max_age: Option<u32>,
    #[serde(default)]
    pub min_hit_streak: Option<u32>,
}

fn default_intervals() -> Vec<u64> {
    vec![1, 2, 3, 5, 10, 15, 30]
}

fn default_overlap() -> f64 {
    0.5
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: SweepConfig =
            toml::from_str(text).map_err(|e| HarnessError::InvalidSweep(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // sequence paths are relative to the sweep file
        if let Some(dir) = path.parent() {
            for seq in &mut cfg.sequences {
                if seq.is_relative() {
                    *seq = dir.join(&*seq);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.intervals.is_empty() || self.intervals.iter().any(|&i| i < 1) {
            return Err(HarnessError::InvalidSweep(
                "intervals must be non-empty and at least 1".into(),
            ));
        }
        if self.configurations.is_empty() {
            return Err(HarnessError::InvalidSweep(
                "at least one configuration is required".into(),
            ));
        }
        if self.sequences.is_empty() {
            return Err(HarnessError::InvalidSweep(
                "at least one sequence is required".into(),
            ));
        }
        Ok(())
    }

    fn tracker_config(&self, entry: &SweepEntry) -> TrackerConfig {
        let mut cfg = TrackerConfig {
            predictor: entry.predictor,
            cost: crate::assoc::CostConfig::for_measure(entry.measure),
            seed: self.seed,
            ..TrackerConfig::default()
        };
        if let Some(v) = self.confidence_threshold {
            cfg.confidence_threshold = v;
        }
        if let Some(v) = self.max_age {
            cfg.max_age = v;
        }
        if let Some(v) = self.min_hit_streak {
            cfg.min_hit_streak = v;
        }
        cfg
    }
}

/// Outcome of one (sequence, entry, interval) run inside a sweep. The
/// numeric knobs of the run are echoed for provenance.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestLine {
    pub sequence: String,
    pub detections: &'static str,
    pub predictor: &'static str,
    pub measure: &'static str,
    pub interval: u64,
    pub seed: u64,
    pub confidence_threshold: f64,
    pub max_age: u32,
    pub min_hit_streak: u32,
    pub gate: f64,
    pub overlap_threshold: f64,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mota: Option<f64>,
}

/// Everything a finished sweep produced.
#[derive(Debug)]
pub struct SweepOutput {
    pub records: Vec<RunRecord>,
    pub manifest: Vec<ManifestLine>,
    /// Per configuration entry: one aggregated report row per interval.
    pub tables: Vec<(SweepEntry, Vec<(u64, MetricsReport)>)>,
}

/// Run the full Cartesian product of configurations × intervals ×
/// sequences. Individual run failures are recorded in the manifest and the
/// sweep continues. `jobs` bounds the worker threads.
pub fn sweep(config: &SweepConfig, jobs: usize) -> Result<SweepOutput, HarnessError> {
    config.validate()?;
    let sequences: Vec<SequenceConfig> = config
        .sequences
        .iter()
        .map(|p| crate::io::load_sequence_config(p))
        .collect::<Result<_, _>>()?;

    struct Task {
        entry_idx: usize,
        seq_idx: usize,
        interval: u64,
    }
    let mut tasks = Vec::new();
    for (entry_idx, _) in config.configurations.iter().enumerate() {
        for &interval in &config.intervals {
            for (seq_idx, _) in sequences.iter().enumerate() {
                tasks.push(Task {
                    entry_idx,
                    seq_idx,
                    interval,
                });
            }
        }
    }

    let run_task = |task: &Task| -> (usize, usize, u64, Result<RunRecord, HarnessError>) {
        let entry = &config.configurations[task.entry_idx];
        let mut seq = sequences[task.seq_idx].clone();
        seq.use_gt_as_detections = entry.detections == DetectionSource::Gt;
        let cfg = config.tracker_config(entry);
        let opts = RunOptions {
            interval: task.interval,
            overlap_threshold: config.overlap_threshold,
            ..RunOptions::default()
        };
        let result = run_once(&seq, &cfg, &opts);
        (task.entry_idx, task.seq_idx, task.interval, result)
    };

    let mut results: Vec<(usize, usize, u64, Result<RunRecord, HarnessError>)> =
        if jobs <= 1 || tasks.len() <= 1 {
            tasks.iter().map(run_task).collect()
        } else {
            let next = std::sync::atomic::AtomicUsize::new(0);
            let collected = std::sync::Mutex::new(Vec::with_capacity(tasks.len()));
            std::thread::scope(|scope| {
                for _ in 0..jobs.min(tasks.len()) {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= tasks.len() {
                            break;
                        }
                        let r = run_task(&tasks[i]);
                        collected.lock().unwrap().push(r);
                    });
                }
            });
            collected.into_inner().unwrap()
        };
    results.sort_by_key(|&(e, s, i, _)| (e, i, s));

    let mut records = Vec::new();
    let mut manifest = Vec::new();
    // aggregate per (entry, interval) across sequences
    let mut aggregates: BTreeMap<(usize, u64), MetricsReport> = BTreeMap::new();
    let mut agg_frames: BTreeMap<(usize, u64), (u64, f64)> = BTreeMap::new();

    for (entry_idx, seq_idx, interval, result) in results {
        let entry = &config.configurations[entry_idx];
        let seq_name = sequences[seq_idx].info.name.clone();
        let tracker_cfg = config.tracker_config(entry);
        let base_line = ManifestLine {
            sequence: seq_name,
            detections: entry.detections.label(),
            predictor: entry.predictor.label(),
            measure: entry.measure.label(),
            interval,
            seed: config.seed,
            confidence_threshold: tracker_cfg.confidence_threshold,
            max_age: tracker_cfg.max_age,
            min_hit_streak: tracker_cfg.min_hit_streak,
            gate: tracker_cfg.cost.threshold,
            overlap_threshold: config.overlap_threshold,
            outcome: String::new(),
            hz: None,
            mota: None,
        };
        match result {
            Ok(record) => {
                manifest.push(ManifestLine {
                    outcome: "ok".into(),
                    hz: Some(record.hz),
                    mota: Some(record.metrics.mota()),
                    ..base_line
                });
                aggregates
                    .entry((entry_idx, interval))
                    .or_default()
                    .merge(&record.metrics);
                let slot = agg_frames.entry((entry_idx, interval)).or_insert((0, 0.0));
                slot.0 += record.frames_processed;
                slot.1 += record.tracking_seconds;
                records.push(record);
            }
            Err(err) => {
                manifest.push(ManifestLine {
                    outcome: format!("error: {err}"),
                    ..base_line
                });
            }
        }
    }

    let mut tables = Vec::new();
    for (entry_idx, entry) in config.configurations.iter().enumerate() {
        let mut rows = Vec::new();
        for &interval in &config.intervals {
            if let Some(mut report) = aggregates.remove(&(entry_idx, interval)) {
                if let Some(&(frames, seconds)) = agg_frames.get(&(entry_idx, interval)) {
                    if seconds > 0.0 {
                        report.hz = Some(frames as f64 / seconds);
                    }
                }
                rows.push((interval, report));
            }
        }
        tables.push((entry.clone(), rows));
    }

    Ok(SweepOutput {
        records,
        manifest,
        tables,
    })
}

impl SweepOutput {
    /// Write one CSV per configuration entry plus a JSON-lines manifest
    /// into `dir`.
    pub fn write_reports(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (entry, rows) in &self.tables {
            let name = format!(
                "{}_{}_{}.csv",
                entry.detections.label(),
                entry.predictor.label(),
                entry.measure.label()
            );
            let path = dir.join(name);
            let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            writeln!(file, "{}", MetricsReport::CSV_HEADER)?;
            for (interval, report) in rows {
                writeln!(file, "{}", report.csv_row(*interval as f64))?;
            }
            file.flush()?;
            written.push(path);
        }
        let manifest_path = dir.join("manifest.jsonl");
        let mut file = std::io::BufWriter::new(std::fs::File::create(&manifest_path)?);
        for line in &self.manifest {
            writeln!(file, "{}", serde_json::to_string(line).expect("serializable"))?;
        }
        file.flush()?;
        written.push(manifest_path);
        Ok(written)
    }
}

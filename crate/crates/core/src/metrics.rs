//! CLEAR MOT evaluation: frame-wise correspondence between ground truth
//! and hypotheses with persistence, and accumulation of MOTA, MOTP and the
//! companion counts (FP, FN, ID switches, fragmentations, MT/PT/ML).

use crate::assoc::{solve_assignment, CostConfig, CostMatrix, CostMeasure};
use crate::geom::{iou, BoundingBox};
use crate::tracker::TrackedBox;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("ground truth contains no boxes in the evaluated frames")]
    EmptyGroundTruth,
}

/// One annotated trajectory: a ground-truth id and its box per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTrack {
    pub id: u64,
    pub boxes: BTreeMap<u64, BoundingBox>,
}

impl GroundTruthTrack {
    pub fn new(id: u64) -> Self {
        Self {
            id,
            boxes: BTreeMap::new(),
        }
    }
}

/// Correspondence memory carried from frame to frame.
#[derive(Debug, Default, Clone)]
pub struct MatchState {
    /// Pairs active in the previous frame.
    correspondence: HashMap<u64, u64>,
    /// Hypothesis each ground truth was matched to at its most recent
    /// matched frame (survives gaps, used for switch counting).
    last_matched: HashMap<u64, u64>,
}

/// Error counts and matches found in a single frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStats {
    pub gt_count: usize,
    /// (gt id, hypothesis id, overlap) triples.
    pub matches: Vec<(u64, u64, f64)>,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
}

/// Match one frame: previously corresponding pairs are kept while their
/// overlap stays at or above the threshold, the remainder is matched by
/// maximizing total IoU, and a switch is counted whenever a ground truth
/// pairs with a different hypothesis than in its most recent matched frame.
pub fn match_frame(
    state: &mut MatchState,
    gt: &[(u64, BoundingBox)],
    hyp: &[(u64, BoundingBox)],
    overlap_threshold: f64,
) -> FrameStats {
    let hyp_by_id: HashMap<u64, BoundingBox> = hyp.iter().cloned().collect();

    let mut matches: Vec<(u64, u64, f64)> = Vec::new();
    let mut used_hyp: BTreeSet<u64> = BTreeSet::new();
    let mut matched_gt: BTreeSet<u64> = BTreeSet::new();

    for &(gt_id, gt_box) in gt {
        if let Some(&hyp_id) = state.correspondence.get(&gt_id) {
            if let Some(hyp_box) = hyp_by_id.get(&hyp_id) {
                if used_hyp.contains(&hyp_id) {
                    continue;
                }
                let overlap = iou(&gt_box, hyp_box);
                if overlap >= overlap_threshold {
                    matches.push((gt_id, hyp_id, overlap));
                    used_hyp.insert(hyp_id);
                    matched_gt.insert(gt_id);
                }
            }
        }
    }

    let free_gt: Vec<&(u64, BoundingBox)> =
        gt.iter().filter(|(id, _)| !matched_gt.contains(id)).collect();
    let free_hyp: Vec<&(u64, BoundingBox)> =
        hyp.iter().filter(|(id, _)| !used_hyp.contains(id)).collect();
    if !free_gt.is_empty() && !free_hyp.is_empty() {
        let matrix = CostMatrix::from_fn(free_gt.len(), free_hyp.len(), |i, j| {
            iou(&free_gt[i].1, &free_hyp[j].1)
        });
        let cfg = CostConfig {
            measure: CostMeasure::Iou,
            threshold: overlap_threshold,
            ..CostConfig::iou()
        };
        for (i, j) in solve_assignment(&matrix, &cfg).matches {
            let overlap = matrix.get(i, j);
            matches.push((free_gt[i].0, free_hyp[j].0, overlap));
        }
    }

    let mut id_switches = 0;
    for &(gt_id, hyp_id, _) in &matches {
        if let Some(&prev) = state.last_matched.get(&gt_id) {
            if prev != hyp_id {
                id_switches += 1;
            }
        }
        state.last_matched.insert(gt_id, hyp_id);
    }
    state.correspondence = matches.iter().map(|&(g, h, _)| (g, h)).collect();

    FrameStats {
        gt_count: gt.len(),
        false_positives: hyp.len() - matches.len(),
        false_negatives: gt.len() - matches.len(),
        matches,
        id_switches,
    }
}

/// Accumulated CLEAR MOT quantities for one evaluation. Raw counts are
/// stored so reports from several sequences can be merged before deriving
/// the percentage metrics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub frames: u64,
    /// Σ over frames of the ground-truth object count.
    pub gt_boxes: u64,
    pub matched: u64,
    pub overlap_sum: f64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub id_switches: u64,
    pub fragmentations: u64,
    pub gt_tracks: u64,
    pub mostly_tracked: u64,
    pub partially_tracked: u64,
    pub mostly_lost: u64,
    /// Tracking-only throughput, filled in by the experiment harness.
    pub hz: Option<f64>,
}

impl MetricsReport {
    /// Multiple object tracking accuracy in percent (may be negative).
    pub fn mota(&self) -> f64 {
        let errors = (self.false_negatives + self.false_positives + self.id_switches) as f64;
        (1.0 - errors / self.gt_boxes as f64) * 100.0
    }

    /// Mean overlap of matched pairs in percent.
    pub fn motp(&self) -> f64 {
        if self.matched == 0 {
            0.0
        } else {
            self.overlap_sum / self.matched as f64 * 100.0
        }
    }

    pub fn recall(&self) -> f64 {
        if self.gt_boxes == 0 {
            0.0
        } else {
            self.matched as f64 / self.gt_boxes as f64 * 100.0
        }
    }

    pub fn precision(&self) -> f64 {
        let denom = self.matched + self.false_positives;
        if denom == 0 {
            0.0
        } else {
            self.matched as f64 / denom as f64 * 100.0
        }
    }

    /// False positives per frame.
    pub fn faf(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.false_positives as f64 / self.frames as f64
        }
    }

    /// Fold another report into this one (summing raw counts).
    pub fn merge(&mut self, other: &MetricsReport) {
        self.frames += other.frames;
        self.gt_boxes += other.gt_boxes;
        self.matched += other.matched;
        self.overlap_sum += other.overlap_sum;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self.id_switches += other.id_switches;
        self.fragmentations += other.fragmentations;
        self.gt_tracks += other.gt_tracks;
        self.mostly_tracked += other.mostly_tracked;
        self.partially_tracked += other.partially_tracked;
        self.mostly_lost += other.mostly_lost;
    }

    pub const CSV_HEADER: &'static str =
        "Intv,Rcll,Prcn,FAR,GT,MT,PT,ML,FP,FN,IDs,FM,MOTA,MOTP";

    /// One report row in the standard column order. `interval` fills the
    /// leading Intv column; percentages use one decimal, FAR two.
    pub fn csv_row(&self, interval: f64) -> String {
        let intv = if interval.fract() == 0.0 {
            format!("{}", interval as u64)
        } else {
            format!("{interval}")
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            intv,
            fmt_pct(self.recall()),
            fmt_pct(self.precision()),
            fmt_far(self.faf()),
            self.gt_tracks,
            self.mostly_tracked,
            self.partially_tracked,
            self.mostly_lost,
            self.false_positives,
            self.false_negatives,
            self.id_switches,
            self.fragmentations,
            fmt_pct(self.mota()),
            fmt_pct(self.motp()),
        )
    }
}

/// Round half away from zero at `digits` decimals.
pub fn round_half_up(x: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    let r = (x.abs() * scale + 0.5).floor() / scale;
    if x < 0.0 {
        -r
    } else {
        r
    }
}

fn fmt_pct(x: f64) -> String {
    format!("{:.1}", round_half_up(x, 1))
}

fn fmt_far(x: f64) -> String {
    format!("{:.2}", round_half_up(x, 2))
}

/// How an evaluation is scoped.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Minimum IoU for a ground truth / hypothesis pair to count as a
    /// match. 0.5 is the customary value.
    pub overlap_threshold: f64,
    /// Restrict the evaluation to these frames (e.g. the processed subset
    /// of a subsampled run); `None` evaluates every frame either input
    /// covers.
    pub frames: Option<Vec<u64>>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            overlap_threshold: 0.5,
            frames: None,
        }
    }
}

/// Evaluate a hypothesis stream against ground truth.
///
/// MT counts tracks covered in at least 80% of their evaluated frames
/// regardless of which hypothesis ids covered them, ML at most 20%, PT the
/// rest. Fragmentations count matched → lost → matched transitions.
pub fn evaluate(
    gt_tracks: &[GroundTruthTrack],
    hypotheses: &[TrackedBox],
    opts: &EvalOptions,
) -> Result<MetricsReport, MetricsError> {
    let mut hyp_by_frame: BTreeMap<u64, Vec<(u64, BoundingBox)>> = BTreeMap::new();
    for h in hypotheses {
        hyp_by_frame.entry(h.frame).or_default().push((h.id, h.bbox));
    }

    let frames: Vec<u64> = match &opts.frames {
        Some(list) => {
            let mut f = list.clone();
            f.sort_unstable();
            f.dedup();
            f
        }
        None => {
            let mut set: BTreeSet<u64> = hyp_by_frame.keys().cloned().collect();
            for t in gt_tracks {
                set.extend(t.boxes.keys().cloned());
            }
            set.into_iter().collect()
        }
    };

    let mut report = MetricsReport {
        frames: frames.len() as u64,
        ..MetricsReport::default()
    };
    let mut state = MatchState::default();
    // per gt track: matched flag for every evaluated frame it exists in
    let mut coverage: HashMap<u64, Vec<bool>> = HashMap::new();

    for &frame in &frames {
        let gt: Vec<(u64, BoundingBox)> = gt_tracks
            .iter()
            .filter_map(|t| t.boxes.get(&frame).map(|b| (t.id, *b)))
            .collect();
        let hyp = hyp_by_frame.get(&frame).cloned().unwrap_or_default();
        let stats = match_frame(&mut state, &gt, &hyp, opts.overlap_threshold);

        report.gt_boxes += stats.gt_count as u64;
        report.matched += stats.matches.len() as u64;
        report.false_positives += stats.false_positives as u64;
        report.false_negatives += stats.false_negatives as u64;
        report.id_switches += stats.id_switches as u64;
        for &(_, _, overlap) in &stats.matches {
            report.overlap_sum += overlap;
        }

        let matched_ids: BTreeSet<u64> = stats.matches.iter().map(|&(g, _, _)| g).collect();
        for &(gt_id, _) in &gt {
            coverage
                .entry(gt_id)
                .or_default()
                .push(matched_ids.contains(&gt_id));
        }
    }

    if report.gt_boxes == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }

    for flags in coverage.values() {
        report.gt_tracks += 1;
        let life = flags.len() as f64;
        let covered = flags.iter().filter(|&&m| m).count() as f64;
        let ratio = covered / life;
        if ratio >= 0.8 {
            report.mostly_tracked += 1;
        } else if ratio <= 0.2 {
            report.mostly_lost += 1;
        } else {
            report.partially_tracked += 1;
        }

        let mut seen_match = false;
        let mut in_gap = false;
        for &m in flags {
            if m {
                if seen_match && in_gap {
                    report.fragmentations += 1;
                }
                seen_match = true;
                in_gap = false;
            } else if seen_match {
                in_gap = true;
            }
        }
    }

    Ok(report)
}

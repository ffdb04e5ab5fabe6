//! Association between predicted and detected boxes: similarity measures,
//! cost matrix construction, and gated optimal assignment.
//!
//! All three measures are oriented as similarities (higher = more alike),
//! so a single maximizing solver serves every configuration. Rectangular
//! problems are padded square with zero similarity and the padded pairs
//! discarded from the result.

mod hungarian;

use crate::geom::{iou, BoundingBox};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid cost config: {0}")]
    InvalidCost(String),
}

/// Which box similarity to use when building cost matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMeasure {
    Iou,
    Linear,
    #[serde(alias = "exp")]
    Exponential,
}

impl CostMeasure {
    pub fn label(&self) -> &'static str {
        match self {
            CostMeasure::Iou => "iou",
            CostMeasure::Linear => "linear",
            CostMeasure::Exponential => "exp",
        }
    }
}

/// Similarity measure plus its acceptance threshold and shape weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CostConfig {
    pub measure: CostMeasure,
    /// Matched pairs below this similarity are rejected after solving.
    pub threshold: f64,
    /// Centre-offset weight of the exponential measure.
    pub w1: f64,
    /// Shape-difference weight of the exponential measure.
    pub w2: f64,
    /// Stand-in similarity when a linear-cost distance is exactly zero.
    pub linear_cap: f64,
}

impl CostConfig {
    /// IoU similarity, gated at 0.3.
    pub fn iou() -> Self {
        Self {
            measure: CostMeasure::Iou,
            threshold: 0.3,
            w1: 0.5,
            w2: 1.5,
            linear_cap: 1e12,
        }
    }

    /// Inverted linear cost, gated at 10000.
    pub fn linear() -> Self {
        Self {
            threshold: 10000.0,
            measure: CostMeasure::Linear,
            ..Self::iou()
        }
    }

    /// Exponential similarity, gated at 0.5.
    pub fn exponential() -> Self {
        Self {
            threshold: 0.5,
            measure: CostMeasure::Exponential,
            ..Self::iou()
        }
    }

    pub fn for_measure(measure: CostMeasure) -> Self {
        match measure {
            CostMeasure::Iou => Self::iou(),
            CostMeasure::Linear => Self::linear(),
            CostMeasure::Exponential => Self::exponential(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.threshold.is_finite() {
            return Err(ConfigError::InvalidCost("threshold must be finite".into()));
        }
        if self.w1 <= 0.0 || self.w2 <= 0.0 {
            return Err(ConfigError::InvalidCost(
                "w1 and w2 must be positive".into(),
            ));
        }
        if self.measure == CostMeasure::Linear && self.linear_cap <= self.threshold {
            return Err(ConfigError::InvalidCost(
                "linear_cap must exceed the threshold".into(),
            ));
        }
        Ok(())
    }
}

/// Static facts about a video sequence; the linear cost normalizes by the
/// image diagonal and area.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInfo {
    pub name: String,
    pub image_width: u32,
    pub image_height: u32,
    pub frame_rate: f64,
    pub frame_count: u64,
}

impl SequenceInfo {
    pub fn new(name: &str, width: u32, height: u32, frame_rate: f64, frame_count: u64) -> Self {
        Self {
            name: name.to_string(),
            image_width: width,
            image_height: height,
            frame_rate,
            frame_count,
        }
    }

    /// Image diagonal in pixels.
    pub fn diagonal(&self) -> f64 {
        let w = self.image_width as f64;
        let h = self.image_height as f64;
        (w * w + h * h).sqrt()
    }

    /// Image area in pixels².
    pub fn area(&self) -> f64 {
        self.image_width as f64 * self.image_height as f64
    }
}

/// Inverted linear similarity: (diagonal / centre distance) ·
/// (area / shape distance). Both distances are Euclidean; a zero distance
/// in either factor caps the score at `linear_cap`. Symmetric.
pub fn cost_linear(
    a: &BoundingBox,
    b: &BoundingBox,
    info: &SequenceInfo,
    cfg: &CostConfig,
) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let center_dist = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
    let shape_dist = ((a.h - b.h).powi(2) + (a.w - b.w).powi(2)).sqrt();
    if center_dist == 0.0 || shape_dist == 0.0 {
        return cfg.linear_cap;
    }
    (info.diagonal() / center_dist) * (info.area() / shape_dist)
}

/// Exponential similarity in (0, 1]. Not symmetric: the first argument must
/// be the detection, whose width and height normalize the centre offsets.
pub fn cost_exponential(detection: &BoundingBox, prediction: &BoundingBox, cfg: &CostConfig) -> f64 {
    let (dx, dy) = detection.center();
    let (px, py) = prediction.center();
    let dist = ((dx - px) / detection.w).powi(2) + ((dy - py) / detection.h).powi(2);
    let shape = (detection.h - prediction.h).abs() / (detection.h + prediction.h)
        + (detection.w - prediction.w).abs() / (detection.w + prediction.w);
    (-cfg.w1 * dist).exp() * (-cfg.w2 * shape).exp()
}

/// Row-major predictions × detections grid of similarity scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }
}

/// Similarity of prediction i and detection j under the configured measure.
/// Empty inputs yield an empty matrix.
pub fn build_cost_matrix(
    predictions: &[BoundingBox],
    detections: &[BoundingBox],
    info: &SequenceInfo,
    cfg: &CostConfig,
) -> CostMatrix {
    CostMatrix::from_fn(predictions.len(), detections.len(), |i, j| match cfg.measure {
        CostMeasure::Iou => iou(&predictions[i], &detections[j]),
        CostMeasure::Linear => cost_linear(&predictions[i], &detections[j], info, cfg),
        CostMeasure::Exponential => cost_exponential(&detections[j], &predictions[i], cfg),
    })
}

/// Result of the gated assignment: matched (prediction, detection) index
/// pairs plus the leftovers on both sides. Every index appears exactly once
/// across the three collections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Maximize total similarity over one-to-one matchings, then reject every
/// matched pair whose similarity falls below `cfg.threshold`.
///
/// Equal-total optima are resolved to the lexicographically smallest match
/// set (lowest prediction index first, then lowest detection index).
pub fn solve_assignment(m: &CostMatrix, cfg: &CostConfig) -> Assignment {
    let rows = m.rows();
    let cols = m.cols();
    if m.is_empty() {
        return Assignment {
            matches: Vec::new(),
            unmatched_predictions: (0..rows).collect(),
            unmatched_detections: (0..cols).collect(),
        };
    }

    let best_total = max_matching_total(m, &[], &[]);
    // Tie-break pass: fix each row in turn to the smallest column that still
    // admits an optimal completion.
    let eps = 1e-9 * (1.0 + best_total.abs());
    let mut fixed: Vec<(usize, usize)> = Vec::new();
    let mut used_cols = vec![false; cols];
    let mut fixed_sum = 0.0;
    for i in 0..rows {
        let mut chosen = None;
        for (j, used) in used_cols.iter().enumerate() {
            if *used {
                continue;
            }
            let mut trial_rows: Vec<usize> = fixed.iter().map(|&(r, _)| r).collect();
            trial_rows.push(i);
            let mut trial_cols: Vec<usize> = fixed.iter().map(|&(_, c)| c).collect();
            trial_cols.push(j);
            let rest = max_matching_total(m, &trial_rows, &trial_cols);
            if fixed_sum + m.get(i, j) + rest >= best_total - eps {
                chosen = Some(j);
                break;
            }
        }
        if let Some(j) = chosen {
            fixed_sum += m.get(i, j);
            fixed.push((i, j));
            used_cols[j] = true;
        }
    }

    let mut matches = Vec::new();
    let mut unmatched_predictions = Vec::new();
    let mut unmatched_detections = Vec::new();
    let mut matched_det = vec![false; cols];
    let mut matched_pred = vec![false; rows];
    for (i, j) in fixed {
        if m.get(i, j) >= cfg.threshold {
            matches.push((i, j));
            matched_pred[i] = true;
            matched_det[j] = true;
        }
    }
    for (i, taken) in matched_pred.iter().enumerate() {
        if !taken {
            unmatched_predictions.push(i);
        }
    }
    for (j, taken) in matched_det.iter().enumerate() {
        if !taken {
            unmatched_detections.push(j);
        }
    }
    Assignment {
        matches,
        unmatched_predictions,
        unmatched_detections,
    }
}

/// Best achievable similarity total over the submatrix that excludes the
/// given rows and columns, padding rectangular problems square with zeros.
fn max_matching_total(m: &CostMatrix, skip_rows: &[usize], skip_cols: &[usize]) -> f64 {
    let rows: Vec<usize> = (0..m.rows()).filter(|i| !skip_rows.contains(i)).collect();
    let cols: Vec<usize> = (0..m.cols()).filter(|j| !skip_cols.contains(j)).collect();
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    let n = rows.len().max(cols.len());
    // Maximization by negation; padding contributes zero similarity.
    let assignment = hungarian::minimize(n, |i, j| {
        if i < rows.len() && j < cols.len() {
            -m.get(rows[i], cols[j])
        } else {
            0.0
        }
    });
    let mut total = 0.0;
    for (i, &j) in assignment.iter().enumerate() {
        if i < rows.len() && j < cols.len() {
            total += m.get(rows[i], cols[j]);
        }
    }
    total
}

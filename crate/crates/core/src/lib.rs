//! Real-time multiple object tracking by detection.
//!
//! The crate consumes per-frame detection files, maintains identities via
//! motion prediction (Kalman filter, particle filter or a stationary
//! baseline) and cost-based Hungarian assignment, scores the output with
//! CLEAR MOT metrics, and drives frame-rate degradation and real-time
//! frame-skipping experiments.

pub mod assoc;
pub mod geom;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod predict;
pub mod tracker;

pub use assoc::{
    build_cost_matrix, solve_assignment, Assignment, CostConfig, CostMatrix, CostMeasure,
    SequenceInfo,
};
pub use geom::{iou, BoundingBox, DegenerateState, Detection, Observation};
pub use metrics::{evaluate, EvalOptions, GroundTruthTrack, MetricsReport};
pub use predict::{KalmanFilter, KalmanModel, ParticleFilter, ParticleParams, PredictorKind};
pub use tracker::{TrackedBox, Tracker, TrackerConfig, TrackerError};

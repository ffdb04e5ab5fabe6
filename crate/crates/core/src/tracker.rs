//! The online tracking loop: filter detections by confidence, predict new
//! locations, associate predictions with detections, create and retire
//! tracks, and emit confirmed trackings.

use crate::assoc::{build_cost_matrix, solve_assignment, CostConfig, SequenceInfo};
use crate::geom::{BoundingBox, Detection, Observation};
use crate::predict::{
    KalmanFilter, KalmanModel, ParticleFilter, ParticleParams, Predictor, PredictorKind,
    StationaryPredictor,
};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("frame {frame} does not follow previously processed frame {last}")]
    OutOfOrderFrame { frame: u64, last: u64 },
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
}

/// Tunable behaviour of the tracking loop. Defaults reproduce the baseline
/// setup: Kalman prediction, IoU association gated at 0.3, confidence 0.4,
/// max age 1 and a minimum hit streak of 3.
#[derive(Debug, Clone)]
pub struct TrackerConfig {
    /// Detections scoring below this are dropped (strict comparison: a
    /// detection exactly at the threshold survives).
    pub confidence_threshold: f64,
    /// Frames a track survives without an associated detection.
    pub max_age: u32,
    /// Consecutive hits required before a track's state is reported.
    pub min_hit_streak: u32,
    pub predictor: PredictorKind,
    pub cost: CostConfig,
    pub kalman: KalmanModel,
    pub particle: ParticleParams,
    /// Seed for the per-track particle generators.
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.4,
            max_age: 1,
            min_hit_streak: 3,
            predictor: PredictorKind::Kalman,
            cost: CostConfig::iou(),
            kalman: KalmanModel::default(),
            particle: ParticleParams::default(),
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if self.min_hit_streak < 1 {
            return Err(TrackerError::InvalidConfig(
                "min_hit_streak must be at least 1".into(),
            ));
        }
        if !self.confidence_threshold.is_finite() {
            return Err(TrackerError::InvalidConfig(
                "confidence_threshold must be finite".into(),
            ));
        }
        if self.particle.count < 1 {
            return Err(TrackerError::InvalidConfig(
                "particle count must be at least 1".into(),
            ));
        }
        self.cost
            .validate()
            .map_err(|e| TrackerError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

/// One tracked identity and its lifecycle counters.
#[derive(Debug)]
pub struct Track {
    pub id: u64,
    predictor: Predictor,
    /// Consecutive frames with an associated detection.
    pub hit_streak: u32,
    /// Frames since the last associated detection (0 = matched this frame).
    pub time_since_update: u32,
    /// Total processed frames since creation.
    pub age: u32,
}

/// A confirmed track state emitted for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedBox {
    pub frame: u64,
    pub id: u64,
    pub bbox: BoundingBox,
}

/// Online multi-object tracker processing one sequence.
pub struct Tracker {
    config: TrackerConfig,
    info: SequenceInfo,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig, info: SequenceInfo) -> Result<Self, TrackerError> {
        config.validate()?;
        Ok(Self {
            config,
            info,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn track_count(&self) -> usize {
        self.tracks.len()
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    fn spawn_predictor(&mut self, z: &Observation) -> Predictor {
        match self.config.predictor {
            PredictorKind::Kalman => {
                Predictor::Kalman(Box::new(KalmanFilter::new(z, self.config.kalman.clone())))
            }
            PredictorKind::Stationary => Predictor::Stationary(StationaryPredictor::new(z)),
            PredictorKind::Particle => {
                // distinct deterministic stream per track id
                let seed = self
                    .config
                    .seed
                    .wrapping_add(self.next_id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                Predictor::Particle(Box::new(ParticleFilter::new(
                    z,
                    self.config.particle.clone(),
                    seed,
                )))
            }
        }
    }

    /// Process one frame worth of detections and return the confirmed
    /// trackings. Frame indices must strictly increase across calls; gaps
    /// are legal and each processed frame counts as one time step.
    pub fn step(
        &mut self,
        frame: u64,
        detections: &[Detection],
    ) -> Result<Vec<TrackedBox>, TrackerError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(TrackerError::OutOfOrderFrame { frame, last });
            }
        }
        self.last_frame = Some(frame);

        let kept: Vec<&Detection> = detections
            .iter()
            .filter(|d| d.confidence >= self.config.confidence_threshold)
            .collect();

        let predicted: Vec<BoundingBox> = self
            .tracks
            .iter_mut()
            .map(|t| {
                t.age += 1;
                t.predictor
                    .predict()
                    .to_box()
                    .expect("clamped prediction always forms a valid box")
            })
            .collect();

        let det_boxes: Vec<BoundingBox> = kept.iter().map(|d| d.bbox).collect();
        let matrix = build_cost_matrix(&predicted, &det_boxes, &self.info, &self.config.cost);
        let assignment = solve_assignment(&matrix, &self.config.cost);

        for &(ti, di) in &assignment.matches {
            let track = &mut self.tracks[ti];
            track.predictor.update(&kept[di].bbox.to_observation());
            track.hit_streak += 1;
            track.time_since_update = 0;
        }
        for &ti in &assignment.unmatched_predictions {
            let track = &mut self.tracks[ti];
            track.predictor.coast();
            track.time_since_update += 1;
            track.hit_streak = 0;
        }

        for &di in &assignment.unmatched_detections {
            let z = kept[di].bbox.to_observation();
            let predictor = self.spawn_predictor(&z);
            self.tracks.push(Track {
                id: self.next_id,
                predictor,
                hit_streak: 1,
                time_since_update: 0,
                age: 1,
            });
            self.next_id += 1;
        }

        let max_age = self.config.max_age;
        self.tracks.retain(|t| t.time_since_update <= max_age);

        let min_hits = self.config.min_hit_streak;
        let mut out = Vec::new();
        for track in &mut self.tracks {
            if track.time_since_update == 0 && track.hit_streak >= min_hits {
                let bbox = track
                    .predictor
                    .current()
                    .to_box()
                    .expect("posterior state always forms a valid box");
                out.push(TrackedBox {
                    frame,
                    id: track.id,
                    bbox,
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info() -> SequenceInfo {
        SequenceInfo::new("test", 640, 480, 30.0, 1000)
    }

    fn det(frame: u64, x: f64, y: f64, conf: f64) -> Detection {
        Detection::new(frame, BoundingBox::new(x, y, 20.0, 40.0), conf)
    }

    #[test]
    fn new_tracker_is_empty() {
        let t = Tracker::new(TrackerConfig::default(), info()).unwrap();
        assert_eq!(t.track_count(), 0);
    }

    #[test]
    fn zero_min_hit_streak_rejected() {
        let cfg = TrackerConfig {
            min_hit_streak: 0,
            ..TrackerConfig::default()
        };
        assert!(Tracker::new(cfg, info()).is_err());
    }

    #[test]
    fn id_counters_are_per_instance() {
        let cfg = TrackerConfig {
            min_hit_streak: 1,
            ..TrackerConfig::default()
        };
        let mut a = Tracker::new(cfg.clone(), info()).unwrap();
        let mut b = Tracker::new(cfg, info()).unwrap();
        // two tracks on a, then a fresh track on b still gets id 1
        a.step(1, &[det(1, 10.0, 10.0, 0.9), det(1, 300.0, 10.0, 0.9)])
            .unwrap();
        let out = b.step(1, &[det(1, 10.0, 10.0, 0.9)]).unwrap();
        assert_eq!(out[0].id, 1);
    }

    #[test]
    fn warm_up_then_emit_single_track() {
        // defaults: min_hit_streak 3 — first two frames silent, third emits
        let mut t = Tracker::new(TrackerConfig::default(), info()).unwrap();
        assert!(t.step(1, &[det(1, 100.0, 100.0, 0.9)]).unwrap().is_empty());
        assert!(t.step(2, &[det(2, 101.0, 100.5, 0.9)]).unwrap().is_empty());
        let out = t.step(3, &[det(3, 102.0, 101.0, 0.9)]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, 1);
        assert_eq!(out[0].frame, 3);
    }

    #[test]
    fn removal_after_max_age_and_fresh_id() {
        let mut t = Tracker::new(TrackerConfig::default(), info()).unwrap();
        for f in 1..=3 {
            t.step(f, &[det(f, 100.0, 100.0, 0.9)]).unwrap();
        }
        assert_eq!(t.track_count(), 1);
        // first empty frame: track coasts (time_since_update = 1 <= max_age)
        assert!(t.step(4, &[]).unwrap().is_empty());
        assert_eq!(t.track_count(), 1);
        // second empty frame: removed
        assert!(t.step(5, &[]).unwrap().is_empty());
        assert_eq!(t.track_count(), 0);
        // the object reappears under a new id
        t.step(6, &[det(6, 100.0, 100.0, 0.9)]).unwrap();
        t.step(7, &[det(7, 100.0, 100.0, 0.9)]).unwrap();
        let out = t.step(8, &[det(8, 100.0, 100.0, 0.9)]).unwrap();
        assert_eq!(out[0].id, 2);
    }

    #[test]
    fn below_threshold_confidence_is_absent() {
        let mut strict = Tracker::new(TrackerConfig::default(), info()).unwrap();
        let mut empty = Tracker::new(TrackerConfig::default(), info()).unwrap();
        let low = det(1, 50.0, 50.0, 0.39);
        assert_eq!(
            strict.step(1, &[low]).unwrap(),
            empty.step(1, &[]).unwrap()
        );
        assert_eq!(strict.track_count(), 0);
        // exactly at the threshold survives
        let mut at = Tracker::new(TrackerConfig::default(), info()).unwrap();
        at.step(1, &[det(1, 50.0, 50.0, 0.4)]).unwrap();
        assert_eq!(at.track_count(), 1);
    }

    #[test]
    fn out_of_order_frame_rejected() {
        let mut t = Tracker::new(TrackerConfig::default(), info()).unwrap();
        t.step(5, &[]).unwrap();
        assert!(matches!(
            t.step(5, &[]),
            Err(TrackerError::OutOfOrderFrame { .. })
        ));
        assert!(matches!(
            t.step(4, &[]),
            Err(TrackerError::OutOfOrderFrame { .. })
        ));
        // gaps are fine
        t.step(35, &[]).unwrap();
    }

    #[test]
    fn eager_config_mirrors_detections() {
        // conf 0, min streak 1, max age 0: outputs match inputs one-to-one
        let cfg = TrackerConfig {
            confidence_threshold: 0.0,
            min_hit_streak: 1,
            max_age: 0,
            ..TrackerConfig::default()
        };
        let mut t = Tracker::new(cfg, info()).unwrap();
        for f in 1..=20u64 {
            let dets = vec![
                det(f, 50.0 + f as f64, 50.0, 0.7),
                det(f, 300.0, 200.0 + f as f64, 0.6),
            ];
            let out = t.step(f, &dets).unwrap();
            assert_eq!(out.len(), dets.len(), "frame {f}");
            let mut ids: Vec<u64> = out.iter().map(|b| b.id).collect();
            ids.dedup();
            assert_eq!(ids.len(), out.len());
        }
    }

    #[test]
    fn single_object_keeps_single_id() {
        let mut t = Tracker::new(TrackerConfig::default(), info()).unwrap();
        let mut ids = std::collections::HashSet::new();
        for f in 1..=100u64 {
            let out = t
                .step(f, &[det(f, 10.0 + 2.0 * f as f64, 240.0, 0.9)])
                .unwrap();
            for b in out {
                ids.insert(b.id);
            }
        }
        assert_eq!(ids.len(), 1);
    }

    #[test]
    fn no_output_for_coasting_tracks() {
        let cfg = TrackerConfig {
            max_age: 5,
            ..TrackerConfig::default()
        };
        let mut t = Tracker::new(cfg, info()).unwrap();
        for f in 1..=4 {
            t.step(f, &[det(f, 100.0, 100.0, 0.9)]).unwrap();
        }
        // coasting frames emit nothing even though the track survives
        for f in 5..=8 {
            assert!(t.step(f, &[]).unwrap().is_empty());
            assert_eq!(t.track_count(), 1);
        }
    }

    #[test]
    fn deterministic_with_particle_predictor() {
        let run = || {
            let cfg = TrackerConfig {
                predictor: PredictorKind::Particle,
                min_hit_streak: 1,
                seed: 1234,
                ..TrackerConfig::default()
            };
            let mut t = Tracker::new(cfg, info()).unwrap();
            let mut all = Vec::new();
            for f in 1..=30u64 {
                let out = t
                    .step(f, &[det(f, 10.0 + 3.0 * f as f64, 200.0, 0.9)])
                    .unwrap();
                all.extend(out);
            }
            all
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.bbox, y.bbox);
        }
    }
}

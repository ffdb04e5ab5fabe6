//! Per-track motion models: a Kalman filter, a bootstrap particle filter,
//! and a stationary baseline that trusts each detection fully.

pub mod kalman;
pub mod particle;

pub use kalman::{KalmanDiagnostics, KalmanFilter, KalmanModel};
pub use particle::{ParticleFilter, ParticleParams};

use crate::geom::Observation;
use serde::{Deserialize, Serialize};

/// Which motion model newly created tracks use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Kalman,
    Stationary,
    Particle,
}

impl PredictorKind {
    pub fn label(&self) -> &'static str {
        match self {
            PredictorKind::Kalman => "kalman",
            PredictorKind::Stationary => "stationary",
            PredictorKind::Particle => "particle",
        }
    }
}

/// Baseline that assumes objects do not move: predicting returns the last
/// seen observation and updating replaces it.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPredictor {
    state: Observation,
}

impl StationaryPredictor {
    pub fn new(z: &Observation) -> Self {
        Self { state: *z }
    }

    pub fn predict(&self) -> Observation {
        self.state
    }

    pub fn update(&mut self, z: &Observation) {
        self.state = *z;
    }

    pub fn state(&self) -> Observation {
        self.state
    }
}

/// A track's motion model. Each instance is single-owner mutable state;
/// distinct predictors run independently. The filter variants are boxed to
/// keep the enum small.
#[derive(Debug, Clone)]
pub enum Predictor {
    Kalman(Box<KalmanFilter>),
    Stationary(StationaryPredictor),
    Particle(Box<ParticleFilter>),
}

impl Predictor {
    /// Advance one processed frame and return the predicted observation
    /// used for association.
    pub fn predict(&mut self) -> Observation {
        match self {
            Predictor::Kalman(f) => f.predict(),
            Predictor::Stationary(s) => s.predict(),
            Predictor::Particle(p) => {
                p.propagate();
                p.predicted_observation()
            }
        }
    }

    /// Incorporate an associated detection.
    pub fn update(&mut self, z: &Observation) {
        match self {
            Predictor::Kalman(f) => f.update(z),
            Predictor::Stationary(s) => s.update(z),
            Predictor::Particle(p) => p.update(z),
        }
    }

    /// Complete a frame with no associated detection. The Kalman and
    /// stationary models keep their prediction; the particle filter adds
    /// propagation noise to reflect the growing uncertainty.
    pub fn coast(&mut self) {
        if let Predictor::Particle(p) = self {
            p.diffuse();
        }
    }

    /// The state reported as a tracking this frame (posterior when a
    /// detection was associated).
    pub fn current(&mut self) -> Observation {
        match self {
            Predictor::Kalman(f) => f.observation(),
            Predictor::Stationary(s) => s.state(),
            Predictor::Particle(p) => p.predicted_observation(),
        }
    }
}

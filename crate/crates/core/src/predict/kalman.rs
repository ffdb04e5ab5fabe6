//! Linear Kalman filter over the 7-dimensional box state
//! (cx, cy, s, r, vx, vy, vs): centre, area, aspect ratio, centre velocity
//! and area rate. Observations are the first four components.

use crate::geom::Observation;
use nalgebra::{SMatrix, SVector};

pub const STATE_DIM: usize = 7;
pub const OBS_DIM: usize = 4;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type ObsVector = SVector<f64, OBS_DIM>;
pub type ObsMatrix = SMatrix<f64, OBS_DIM, OBS_DIM>;
pub type ObservationModel = SMatrix<f64, OBS_DIM, STATE_DIM>;
pub type GainMatrix = SMatrix<f64, STATE_DIM, OBS_DIM>;

/// Process matrices and noise covariances of the filter. All fields are
/// public so experiments can override them.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanModel {
    /// State transition A.
    pub transition: StateMatrix,
    /// Observation model H: selects the first four state components.
    pub observation: ObservationModel,
    /// Process noise covariance Q.
    pub process_noise: StateMatrix,
    /// Measurement noise covariance R (must be positive definite).
    pub measurement_noise: ObsMatrix,
    /// Initial estimate error covariance P0.
    pub initial_covariance: StateMatrix,
}

impl KalmanModel {
    /// Constant-velocity transition over one processed frame scaled by
    /// `dt`: centre moves by velocity, area by its rate, ratio constant.
    ///
    /// Noise defaults: velocities are unobserved at init so P0 gives them
    /// large variance; Q keeps the ratio nearly constant; R trusts centres
    /// more than area and ratio.
    pub fn constant_velocity(dt: f64) -> Self {
        let mut a = StateMatrix::identity();
        a[(0, 4)] = dt;
        a[(1, 5)] = dt;
        a[(2, 6)] = dt;

        let mut h = ObservationModel::zeros();
        for i in 0..OBS_DIM {
            h[(i, i)] = 1.0;
        }

        let q = StateMatrix::from_diagonal(&StateVector::from_row_slice(&[
            1.0, 1.0, 1.0, 1e-2, 1e-2, 1e-2, 1e-4,
        ]));
        let r = ObsMatrix::from_diagonal(&ObsVector::from_row_slice(&[1.0, 1.0, 10.0, 10.0]));
        let p0 = StateMatrix::from_diagonal(&StateVector::from_row_slice(&[
            10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4,
        ]));

        Self {
            transition: a,
            observation: h,
            process_noise: q,
            measurement_noise: r,
            initial_covariance: p0,
        }
    }
}

impl Default for KalmanModel {
    fn default() -> Self {
        Self::constant_velocity(1.0)
    }
}

/// Values recorded by the last update, for inspection in tests.
#[derive(Debug, Clone, Default)]
pub struct KalmanDiagnostics {
    pub innovation: Option<ObsVector>,
    pub gain: Option<GainMatrix>,
    /// Largest |P[i][j] - P[j][i]| seen before symmetrization.
    pub covariance_asymmetry: f64,
}

/// One filter instance: state estimate, error covariance and the model.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    model: KalmanModel,
    state: StateVector,
    covariance: StateMatrix,
    last_valid_ratio: f64,
    diagnostics: KalmanDiagnostics,
}

impl KalmanFilter {
    /// Initialize from a first observation: velocities start at zero and
    /// the covariance at P0.
    pub fn new(z: &Observation, model: KalmanModel) -> Self {
        let state = StateVector::from_row_slice(&[z.cx, z.cy, z.s, z.r, 0.0, 0.0, 0.0]);
        let covariance = model.initial_covariance;
        Self {
            model,
            state,
            covariance,
            last_valid_ratio: z.r,
            diagnostics: KalmanDiagnostics::default(),
        }
    }

    /// Prediction step: x ← A x, P ← A P Aᵀ + Q, then clamp non-physical
    /// area/ratio (area stays positive with its rate zeroed; ratio falls
    /// back to its last valid value). Returns the predicted observation.
    pub fn predict(&mut self) -> Observation {
        let prev_area = self.state[2];
        self.state = self.model.transition * self.state;
        self.covariance = self.model.transition * self.covariance * self.model.transition.transpose()
            + self.model.process_noise;

        if self.state[2] <= 0.0 {
            self.state[6] = 0.0;
            self.state[2] = prev_area.max(1.0);
        }
        if self.state[3] <= 0.0 {
            self.state[3] = self.last_valid_ratio;
        } else {
            self.last_valid_ratio = self.state[3];
        }
        self.observation()
    }

    /// Update step: K = P Hᵀ (H P Hᵀ + R)⁻¹, x ← x + K(z − Hx),
    /// P ← (I − K H) P symmetrized.
    pub fn update(&mut self, z: &Observation) {
        let h = self.model.observation;
        let innovation_cov = h * self.covariance * h.transpose() + self.model.measurement_noise;
        let inv = innovation_cov
            .cholesky()
            .expect("innovation covariance is positive definite when R is")
            .inverse();
        let gain = self.covariance * h.transpose() * inv;
        let observed = ObsVector::from_row_slice(&[z.cx, z.cy, z.s, z.r]);
        let innovation = observed - h * self.state;
        self.state += gain * innovation;
        self.covariance = (StateMatrix::identity() - gain * h) * self.covariance;

        let mut asymmetry = 0.0f64;
        for i in 0..STATE_DIM {
            for j in (i + 1)..STATE_DIM {
                asymmetry = asymmetry.max((self.covariance[(i, j)] - self.covariance[(j, i)]).abs());
            }
        }
        self.covariance = (self.covariance + self.covariance.transpose()) * 0.5;

        if self.state[3] > 0.0 {
            self.last_valid_ratio = self.state[3];
        }
        self.diagnostics = KalmanDiagnostics {
            innovation: Some(innovation),
            gain: Some(gain),
            covariance_asymmetry: asymmetry,
        };
    }

    /// Observation-space view of the current state estimate.
    pub fn observation(&self) -> Observation {
        Observation::new(self.state[0], self.state[1], self.state[2], self.state[3])
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn covariance(&self) -> &StateMatrix {
        &self.covariance
    }

    pub fn diagnostics(&self) -> &KalmanDiagnostics {
        &self.diagnostics
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn obs(cx: f64, cy: f64, s: f64, r: f64) -> Observation {
        Observation::new(cx, cy, s, r)
    }

    #[test]
    fn init_zero_velocity() {
        let f = KalmanFilter::new(&obs(5.0, 5.0, 100.0, 1.0), KalmanModel::default());
        assert_eq!(
            f.state().as_slice(),
            &[5.0, 5.0, 100.0, 1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(f.covariance(), &KalmanModel::default().initial_covariance);
    }

    #[test]
    fn predict_moves_by_velocity() {
        let mut f = KalmanFilter::new(&obs(0.0, 0.0, 100.0, 1.0), KalmanModel::default());
        f.state.as_mut_slice()[4] = 2.0; // vx
        let p = f.predict();
        assert_relative_eq!(p.cx, 2.0);
        assert_relative_eq!(p.cy, 0.0);
        assert_relative_eq!(p.s, 100.0);
        assert_relative_eq!(p.r, 1.0);
    }

    #[test]
    fn predict_identity_under_zero_motion() {
        let z = obs(7.0, 9.0, 50.0, 2.0);
        let mut f = KalmanFilter::new(&z, KalmanModel::default());
        let p = f.predict();
        assert_eq!(p, z);
    }

    #[test]
    fn predict_covariance_is_apat_plus_q() {
        // element-wise check on a random PSD covariance
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let model = KalmanModel::default();
        let m = StateMatrix::from_fn(|_, _| rng.random::<f64>() - 0.5);
        let psd = m * m.transpose() + StateMatrix::identity() * 0.1;

        let mut f = KalmanFilter::new(&obs(0.0, 0.0, 100.0, 1.0), model.clone());
        f.covariance = psd;
        f.predict();
        let want = model.transition * psd * model.transition.transpose() + model.process_noise;
        for i in 0..STATE_DIM {
            for j in 0..STATE_DIM {
                assert_relative_eq!(f.covariance()[(i, j)], want[(i, j)], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn update_with_zero_innovation_keeps_state() {
        let mut f = KalmanFilter::new(&obs(10.0, 20.0, 200.0, 0.5), KalmanModel::default());
        f.predict();
        let before = *f.state();
        let z = f.observation();
        f.update(&z);
        for i in 0..STATE_DIM {
            assert_relative_eq!(f.state()[i], before[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_analogue_gain_half() {
        // A = I, H selector, P = I, R = I, Q = 0 reduces each observed
        // component to the textbook scalar case: K = 0.5, P' = 0.5.
        let model = KalmanModel {
            transition: StateMatrix::identity(),
            process_noise: StateMatrix::zeros(),
            measurement_noise: ObsMatrix::identity(),
            initial_covariance: StateMatrix::identity(),
            ..KalmanModel::default()
        };

        let mut f = KalmanFilter::new(&obs(0.0, 0.0, 1.0, 1.0), model);
        f.predict();
        let z = obs(1.0, 0.0, 1.0, 1.0);
        f.update(&z);

        let gain = f.diagnostics().gain.unwrap();
        for i in 0..OBS_DIM {
            assert_relative_eq!(gain[(i, i)], 0.5, max_relative = 1e-12);
        }
        for i in 0..OBS_DIM {
            assert_relative_eq!(f.covariance()[(i, i)], 0.5, max_relative = 1e-12);
        }
        // x' = x + 0.5 (z - x)
        assert_relative_eq!(f.state()[0], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn area_clamp_on_negative_prediction() {
        let mut f = KalmanFilter::new(&obs(0.0, 0.0, 10.0, 1.0), KalmanModel::default());
        f.state.as_mut_slice()[6] = -50.0; // area rate would drive s negative
        let p = f.predict();
        assert!(p.s > 0.0);
        assert_eq!(f.state()[6], 0.0);
        assert!(p.to_box().is_ok());
    }

    #[test]
    fn ratio_clamp_restores_last_valid() {
        let mut f = KalmanFilter::new(&obs(0.0, 0.0, 10.0, 0.75), KalmanModel::default());
        f.state.as_mut_slice()[3] = -0.2;
        let p = f.predict();
        assert_eq!(p.r, 0.75);
    }

    #[test]
    fn covariance_stays_symmetric_and_update_contracts() {
        // 1000 random predict/update cycles: P symmetric PSD throughout,
        // asymmetry before symmetrization tiny, and P⁻ ⪰ P.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let model = KalmanModel::default();
        let mut f = KalmanFilter::new(&obs(50.0, 50.0, 400.0, 1.0), model);
        for _ in 0..1000 {
            f.predict();
            let prior = *f.covariance();
            let z = obs(
                50.0 + rng.random::<f64>() * 20.0,
                50.0 + rng.random::<f64>() * 20.0,
                300.0 + rng.random::<f64>() * 200.0,
                0.5 + rng.random::<f64>(),
            );
            f.update(&z);
            assert!(f.diagnostics().covariance_asymmetry < 1e-8);

            let posterior = *f.covariance();
            let diff = prior - posterior;
            let eig = nalgebra::SymmetricEigen::new(diff);
            let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min_eig > -1e-9, "update increased uncertainty: {min_eig}");

            let eig_post = nalgebra::SymmetricEigen::new(posterior);
            let min_post = eig_post
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min_post > -1e-9, "posterior not PSD: {min_post}");
        }
    }

    #[test]
    fn converges_on_constant_velocity_input() {
        // noiseless constant-velocity observations: the one-step-ahead
        // centre error shrinks monotonically after step 3 and ends far
        // below the per-step displacement.
        let (vx, vy) = (3.0f64, -2.0f64);
        let displacement = (vx * vx + vy * vy).sqrt();
        let truth = |k: u64| obs(100.0 + vx * k as f64, 200.0 + vy * k as f64, 400.0, 0.5);

        let mut f = KalmanFilter::new(&truth(0), KalmanModel::default());
        let mut errors = Vec::new();
        for k in 1..=20 {
            let p = f.predict();
            let z = truth(k);
            errors.push(((p.cx - z.cx).powi(2) + (p.cy - z.cy).powi(2)).sqrt());
            f.update(&z);
        }
        for k in 3..errors.len() {
            assert!(
                errors[k] <= errors[k - 1],
                "error rose at step {}: {} -> {}",
                k + 1,
                errors[k - 1],
                errors[k]
            );
        }
        assert!(errors[19] < 1e-3 * displacement);
    }
}

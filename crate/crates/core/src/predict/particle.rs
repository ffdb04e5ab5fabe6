//! Bootstrap particle filter over the same 7-dimensional box state as the
//! Kalman filter. Particles share the constant-velocity transition; the
//! resampling weight of a particle is the IoU between its box and the
//! detected box.

use crate::geom::{BoundingBox, Observation};
use crate::predict::kalman::{StateVector, STATE_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Particle count and the per-component standard deviations used at
/// initialization and during detection-less propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleParams {
    pub count: usize,
    /// Spread around the first observation (velocities around zero).
    pub init_spread: [f64; STATE_DIM],
    /// Noise added when propagating without an associated detection.
    pub process_noise: [f64; STATE_DIM],
    /// Time step of the constant-velocity transition.
    pub dt: f64,
}

impl Default for ParticleParams {
    fn default() -> Self {
        Self {
            count: 100,
            init_spread: [5.0, 5.0, 20.0, 0.05, 1.0, 1.0, 1.0],
            process_noise: [2.0, 2.0, 10.0, 0.01, 0.5, 0.5, 0.5],
            dt: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParticleFilter {
    particles: Vec<StateVector>,
    params: ParticleParams,
    rng: ChaCha8Rng,
    last_valid_ratio: f64,
}

impl ParticleFilter {
    /// Spawn `count` particles normally distributed around the first
    /// observation. Deterministic for a given seed.
    pub fn new(z: &Observation, params: ParticleParams, seed: u64) -> Self {
        assert!(params.count >= 1, "particle count must be at least 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = [z.cx, z.cy, z.s, z.r, 0.0, 0.0, 0.0];
        let particles = (0..params.count)
            .map(|_| {
                StateVector::from_fn(|i, _| {
                    let sigma = params.init_spread[i];
                    if sigma > 0.0 {
                        Normal::new(mean[i], sigma).unwrap().sample(&mut rng)
                    } else {
                        mean[i]
                    }
                })
            })
            .collect();
        Self {
            particles,
            params,
            rng,
            last_valid_ratio: z.r,
        }
    }

    /// Propagate every particle one constant-velocity step. When no
    /// detection is pending, per-component Gaussian noise is added to
    /// account for the growing position uncertainty. Returns the unweighted
    /// particle mean projected to observation space.
    pub fn predict(&mut self, has_pending_detection: bool) -> Observation {
        self.propagate();
        if !has_pending_detection {
            self.diffuse();
        }
        self.mean_observation()
    }

    /// Deterministic constant-velocity step for every particle.
    pub fn propagate(&mut self) {
        let dt = self.params.dt;
        for p in &mut self.particles {
            p[0] += dt * p[4];
            p[1] += dt * p[5];
            p[2] += dt * p[6];
        }
    }

    /// The no-detection branch of propagation: add the configured
    /// per-component noise to every particle.
    pub fn diffuse(&mut self) {
        for i in 0..self.particles.len() {
            for c in 0..STATE_DIM {
                let sigma = self.params.process_noise[c];
                if sigma > 0.0 {
                    self.particles[i][c] += Normal::new(0.0, sigma).unwrap().sample(&mut self.rng);
                }
            }
        }
    }

    /// Weight every particle by the IoU of its box with the detection,
    /// normalize, and resample with replacement. Degenerate particles (or a
    /// detection no particle overlaps) fall back to uniform weights.
    pub fn update(&mut self, z: &Observation) {
        let detected = match z.to_box() {
            Ok(b) => b,
            Err(_) => return,
        };
        let weights: Vec<f64> = self
            .particles
            .iter()
            .map(|p| match particle_box(p) {
                Some(b) => crate::geom::iou(&b, &detected),
                None => 0.0,
            })
            .collect();
        let total: f64 = weights.iter().sum();

        let n = self.particles.len();
        let mut resampled = Vec::with_capacity(n);
        if total > 0.0 {
            let mut cumulative = Vec::with_capacity(n);
            let mut acc = 0.0;
            for w in &weights {
                acc += w / total;
                cumulative.push(acc);
            }
            for _ in 0..n {
                let u = self.rng.random::<f64>();
                let idx = cumulative.partition_point(|&c| c < u).min(n - 1);
                resampled.push(self.particles[idx]);
            }
        } else {
            for _ in 0..n {
                let idx = self.rng.random_range(0..n);
                resampled.push(self.particles[idx]);
            }
        }
        self.particles = resampled;
    }

    /// Unweighted mean of the particle set, projected to observation space.
    pub fn mean_observation(&self) -> Observation {
        let n = self.particles.len() as f64;
        let mut sum = StateVector::zeros();
        for p in &self.particles {
            sum += p;
        }
        let mean = sum / n;
        Observation::new(mean[0], mean[1], mean[2], mean[3])
    }

    /// Mean observation clamped so it always converts to a valid box:
    /// non-positive area is floored at one pixel², non-positive ratio falls
    /// back to the last valid mean ratio.
    pub fn predicted_observation(&mut self) -> Observation {
        let mut obs = self.mean_observation();
        if obs.s <= 0.0 {
            obs.s = 1.0;
        }
        if obs.r <= 0.0 {
            obs.r = self.last_valid_ratio;
        } else {
            self.last_valid_ratio = obs.r;
        }
        obs
    }

    pub fn particles(&self) -> &[StateVector] {
        &self.particles
    }
}

fn particle_box(p: &StateVector) -> Option<BoundingBox> {
    Observation::new(p[0], p[1], p[2], p[3]).to_box().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn zero_noise_params(count: usize) -> ParticleParams {
        ParticleParams {
            count,
            init_spread: [0.0; 7],
            process_noise: [0.0; 7],
            dt: 1.0,
        }
    }

    #[test]
    fn single_stationary_particle_predicts_itself() {
        let z = Observation::new(5.0, 5.0, 100.0, 1.0);
        let mut pf = ParticleFilter::new(&z, zero_noise_params(1), 1);
        let p = pf.predict(true);
        assert_eq!(p, z);
    }

    #[test]
    fn shared_velocity_shifts_prediction() {
        let z = Observation::new(10.0, 10.0, 100.0, 1.0);
        let mut pf = ParticleFilter::new(&z, zero_noise_params(4), 1);
        for p in &mut pf.particles {
            p[4] = 3.0;
            p[5] = -1.0;
        }
        let pred = pf.predict(true);
        assert_relative_eq!(pred.cx, 13.0);
        assert_relative_eq!(pred.cy, 9.0);
        assert_relative_eq!(pred.s, 100.0);
    }

    #[test]
    fn mean_matches_sum_divide_oracle() {
        let z = Observation::new(50.0, 60.0, 300.0, 0.8);
        let pf = ParticleFilter::new(&z, ParticleParams::default(), 42);
        let n = pf.particles().len() as f64;
        let mut expect = [0.0f64; 4];
        for p in pf.particles() {
            for (c, e) in expect.iter_mut().enumerate() {
                *e += p[c];
            }
        }
        let mean = pf.mean_observation();
        assert_relative_eq!(mean.cx, expect[0] / n, max_relative = 1e-12);
        assert_relative_eq!(mean.cy, expect[1] / n, max_relative = 1e-12);
        assert_relative_eq!(mean.s, expect[2] / n, max_relative = 1e-12);
        assert_relative_eq!(mean.r, expect[3] / n, max_relative = 1e-12);
    }

    #[test]
    fn update_keeps_identical_particles() {
        let z = Observation::new(5.0, 5.0, 100.0, 1.0);
        let mut pf = ParticleFilter::new(&z, zero_noise_params(10), 3);
        let before = pf.particles().to_vec();
        pf.update(&z);
        assert_eq!(pf.particles(), &before[..]);
    }

    #[test]
    fn update_keeps_only_overlapping_particle() {
        // two particles: one on the detection, one disjoint; the
        // hand-computed weight vector is (1, 0) after normalization.
        let z = Observation::new(5.0, 5.0, 100.0, 1.0);
        let mut pf = ParticleFilter::new(&z, zero_noise_params(2), 3);
        pf.particles[1][0] = 500.0;
        pf.particles[1][1] = 500.0;
        let survivor = pf.particles[0];
        pf.update(&z);
        assert_eq!(pf.particles().len(), 2);
        for p in pf.particles() {
            assert_eq!(p, &survivor);
        }
    }

    #[test]
    fn update_is_deterministic_for_seed() {
        let z = Observation::new(5.0, 5.0, 100.0, 1.0);
        let run = || {
            let mut pf = ParticleFilter::new(&z, ParticleParams::default(), 77);
            pf.predict(true);
            pf.update(&Observation::new(6.0, 5.5, 110.0, 1.0));
            pf.particles().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn resample_preserves_count_and_membership() {
        let z = Observation::new(20.0, 20.0, 200.0, 1.0);
        let mut pf = ParticleFilter::new(&z, ParticleParams::default(), 9);
        let before = pf.particles().to_vec();
        pf.update(&z);
        assert_eq!(pf.particles().len(), before.len());
        for p in pf.particles() {
            assert!(before.iter().any(|b| b == p), "resampled particle not in source set");
        }
    }

    #[test]
    fn all_zero_weights_fall_back_to_uniform() {
        let z = Observation::new(5.0, 5.0, 100.0, 1.0);
        let mut pf = ParticleFilter::new(&z, zero_noise_params(5), 3);
        // move every particle away from the detection
        for p in &mut pf.particles {
            p[0] = 900.0;
        }
        let far = Observation::new(5.0, 5.0, 100.0, 1.0);
        pf.update(&far);
        assert_eq!(pf.particles().len(), 5);
    }

    #[test]
    fn mean_stays_inside_particle_hull() {
        let z = Observation::new(30.0, 40.0, 500.0, 1.2);
        let mut pf = ParticleFilter::new(&z, ParticleParams::default(), 21);
        pf.predict(false);
        let mean = pf.mean_observation();
        for (c, v) in [mean.cx, mean.cy, mean.s, mean.r].into_iter().enumerate() {
            let lo = pf.particles().iter().map(|p| p[c]).fold(f64::INFINITY, f64::min);
            let hi = pf
                .particles()
                .iter()
                .map(|p| p[c])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= v && v <= hi, "component {c}: {v} outside [{lo}, {hi}]");
        }
    }
}

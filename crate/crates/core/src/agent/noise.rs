//! Ornstein-Uhlenbeck exploration noise and its amplitude schedule.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuConfig {
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self {
            theta: 0.15,
            mu: 0.0,
            sigma: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    pub config: OuConfig,
    state: Vec<f64>,
}

impl OuNoise {
    pub fn new(config: OuConfig, dim: usize) -> Self {
        Self {
            state: vec![config.mu; dim],
            config,
        }
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.state.len(), "noise dimension");
        self.state.copy_from_slice(x);
    }

    pub fn reset(&mut self) {
        self.state.fill(self.config.mu);
    }

    /// `x ← x + θ(μ − x) + σ·N(0, 1)` per dimension; returns the new state.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        let c = self.config;
        for x in self.state.iter_mut() {
            let n: f64 = if c.sigma == 0.0 {
                0.0
            } else {
                rng.sample(StandardNormal)
            };
            *x += c.theta * (c.mu - *x) + c.sigma * n;
        }
        &self.state
    }
}

/// Noise amplitude that falls linearly from 1 to `floor` over the first
/// `decay_fraction` of `total` iterations and then stays at `floor`.
pub fn noise_scale(iteration: usize, total: usize, decay_fraction: f64, floor: f64) -> f64 {
    let span = (total as f64 * decay_fraction).max(1.0);
    let t = (iteration as f64 / span).min(1.0);
    1.0 - (1.0 - floor) * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_process_decays_geometrically() {
        let mut ou = OuNoise::new(
            OuConfig {
                theta: 0.15,
                mu: 0.0,
                sigma: 0.0,
            },
            2,
        );
        ou.set_state(&[1.0, -2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in 1..=10 {
            let x = ou.sample(&mut rng).to_vec();
            let f = 0.85f64.powi(k);
            assert!((x[0] - f).abs() < 1e-12 && (x[1] + 2.0 * f).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_sequence_reproducible() {
        let run = || {
            let mut ou = OuNoise::new(OuConfig::default(), 3);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..20)
                .flat_map(|_| ou.sample(&mut rng).to_vec())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(noise_scale(0, 1000, 0.6, 0.1), 1.0);
        assert!((noise_scale(300, 1000, 0.6, 0.1) - 0.55).abs() < 1e-12);
        assert!((noise_scale(600, 1000, 0.6, 0.1) - 0.1).abs() < 1e-12);
        assert!((noise_scale(999, 1000, 0.6, 0.1) - 0.1).abs() < 1e-12);
    }
}

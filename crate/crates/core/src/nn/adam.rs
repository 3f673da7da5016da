//! Adam with optional global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global L2 norm cap applied across all parameter groups.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(1.0),
        }
    }
}

/// Scales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_by_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= s;
            }
        }
    }
    norm
}

/// Moment accumulators for one or more parameter buffers updated together.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. `grads` is consumed as scratch (it gets clipped in place).
    /// Returns the pre-clip gradient norm.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &mut [&mut [f64]]) -> Result<f64> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Dimension {
                expected: self.first.len(),
                got: params.len(),
            });
        }
        for ((p, g), m) in params.iter().zip(grads.iter()).zip(&self.first) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::Dimension {
                    expected: m.len(),
                    got: p.len().min(g.len()),
                });
            }
        }
        if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("gradients"));
        }
        let norm = match self.config.clip_norm {
            Some(c) => clip_by_global_norm(grads, c),
            None => clip_by_global_norm(grads, f64::INFINITY),
        };
        self.step += 1;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(self.step as i32);
        let bias2 = 1.0 - c.beta2.powi(self.step as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads.iter()).enumerate() {
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let mhat = m[i] / bias1;
                let vhat = v[i] / bias2;
                p[i] -= c.learning_rate * mhat / (vhat.sqrt() + c.epsilon);
            }
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = Adam::new(AdamConfig::default(), &[3]);
        let mut p = vec![1.0, -2.0, 3.0];
        let mut g = vec![0.0; 3];
        adam.step(&mut [&mut p], &mut [&mut g]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn clipping_scales_to_cap() {
        let mut a = vec![6.0, 0.0];
        let mut b = vec![8.0];
        let n = clip_by_global_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(n, 10.0);
        assert!((a[0] - 0.6).abs() < 1e-15 && (b[0] - 0.8).abs() < 1e-15);
        let mut small = vec![0.3];
        clip_by_global_norm(&mut [&mut small], 1.0);
        assert_eq!(small[0], 0.3);
    }

    #[test]
    fn scalar_trajectory_matches_recurrence() {
        // Reference trajectory from a direct evaluation of the Adam recurrence
        // (lr 0.1, β₁ 0.9, β₂ 0.999, ε 1e-8).
        let expected = [
            0.900000002,
            0.8654394181165108,
            0.8109953836811554,
            0.7454493037194923,
            0.7591668492191144,
        ];
        let cfg = AdamConfig {
            learning_rate: 0.1,
            clip_norm: Some(1.0),
            ..Default::default()
        };
        let mut adam = Adam::new(cfg, &[1]);
        let mut p = vec![1.0];
        for (g, want) in [0.5, -0.2, 0.3, 0.3, -1.0].into_iter().zip(expected) {
            let mut gv = vec![g];
            adam.step(&mut [&mut p], &mut [&mut gv]).unwrap();
            assert!((p[0] - want).abs() < 1e-12, "{} vs {want}", p[0]);
        }
    }

    #[test]
    fn non_finite_rejected() {
        let mut adam = Adam::new(AdamConfig::default(), &[1]);
        let mut p = vec![0.0];
        let mut g = vec![f64::NAN];
        assert!(adam.step(&mut [&mut p], &mut [&mut g]).is_err());
    }
}

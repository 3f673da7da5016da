//! Achievable NOMA rates under SIC ordering and the feasibility of a power
//! allocation.
//!
//! Users inside a group are indexed by location order: index 1 is decoded
//! last, receives the least power and sees no intra-group interference.
//! Index `i > 1` treats the signals of orders `1..i` as noise.

use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

use crate::channel::{AccessPoint, ReceiverProfile};
use crate::error::{Error, Result};

/// Tolerance on `Σα = 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Slack allowed on box and ordering checks for round-off.
pub const ORDER_TOLERANCE: f64 = 1e-12;

/// IM/DD tight-bound constant `e / 2π`.
pub fn imdd_factor() -> f64 {
    E / (2.0 * PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub group_id: usize,
    /// `alphas[0]` belongs to order index 1.
    pub alphas: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(group_id: usize, alphas: Vec<f64>) -> Self {
        Self { group_id, alphas }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Sum, box and ordering constraints only (no rate requirement).
    pub fn is_structurally_feasible(&self) -> bool {
        structural_violations(&self.alphas).is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// AWGN standard deviation at the photodetector output, amps.
    pub sigma_t: f64,
}

/// Identifies one failed constraint. Indices are 1-based order indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    SumToOne,
    Box(usize),
    Ordering(usize),
    MinRate(usize),
    /// `(m', i)`: user `i` decoding the layer of user `m'`.
    CrossRate(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    /// Rate shortfalls are relative to γ_min; allocation gaps are in α units.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl Feasibility {
    /// Sum of all violation magnitudes.
    pub fn total(&self) -> f64 {
        self.violations.iter().map(|v| v.magnitude).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub group_id: usize,
    /// bit/s, indexed by order.
    pub per_user_rates: Vec<f64>,
    /// `cross_rates[i][m']` for `m' < i` (0-based); other entries are zero.
    pub cross_rates: Vec<Vec<f64>>,
    pub group_sum: f64,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Electrical SNR scale `ℜ² h² P_t² / σ_t²` of a user with gain `gain`.
fn snr_scale(gain: f64, ap: &AccessPoint, rx: &ReceiverProfile, noise: &NoiseModel) -> f64 {
    let amp = rx.responsivity * gain * ap.transmit_power;
    amp * amp / (noise.sigma_t * noise.sigma_t)
}

fn rate(bandwidth: f64, signal: f64, interference: f64, scale: f64) -> f64 {
    // Dividing through by σ² keeps the ratio well conditioned for tiny gains.
    let sinr = imdd_factor() * scale * signal / (scale * interference + 1.0);
    bandwidth * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Rate of the order-1 user; all intra-group interference is cancelled.
pub fn user_rate_top(
    order1_gain: f64,
    alpha1: f64,
    ap: &AccessPoint,
    rx: &ReceiverProfile,
    noise: &NoiseModel,
) -> f64 {
    let scale = snr_scale(order1_gain, ap, rx, noise);
    rate(ap.bandwidth, alpha1 * alpha1, 0.0, scale)
}

/// Rate of the user at order `i >= 2`, given its own effective gain.
pub fn user_rate_sic(
    i: usize,
    gain: f64,
    alloc: &PowerAllocation,
    ap: &AccessPoint,
    rx: &ReceiverProfile,
    noise: &NoiseModel,
) -> Result<f64> {
    let m = alloc.alphas.len();
    if i < 2 || i > m {
        return Err(Error::Index(format!(
            "SIC rate needs 2 <= i <= {m}, got {i}"
        )));
    }
    let a = &alloc.alphas;
    let interference: f64 = a[..i - 1].iter().map(|x| x * x).sum();
    let scale = snr_scale(gain, ap, rx, noise);
    Ok(rate(ap.bandwidth, a[i - 1] * a[i - 1], interference, scale))
}

/// Rate at which user `i` (gain `gain_i`) decodes the layer of user `m'`.
pub fn cross_decoding_rate(
    m_prime: usize,
    i: usize,
    gain_i: f64,
    alloc: &PowerAllocation,
    ap: &AccessPoint,
    rx: &ReceiverProfile,
    noise: &NoiseModel,
) -> Result<f64> {
    let m = alloc.alphas.len();
    if m_prime < 1 || m_prime >= i || i > m {
        return Err(Error::Index(format!(
            "cross rate needs 1 <= m' < i <= {m}, got m'={m_prime}, i={i}"
        )));
    }
    let a = &alloc.alphas;
    let interference: f64 = a[m_prime - 1..i - 1].iter().map(|x| x * x).sum();
    let scale = snr_scale(gain_i, ap, rx, noise);
    let signal = a[m_prime - 1] * a[m_prime - 1];
    Ok(rate(ap.bandwidth, signal, interference, scale))
}

/// `(1/K) Σ_k Σ_i γ_i^k`.
pub fn system_average_sum_rate(reports: &[RateReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::Empty("rate reports"));
    }
    let total: f64 = reports.iter().map(|r| r.group_sum).sum();
    Ok(total / reports.len() as f64)
}

fn structural_violations(alphas: &[f64]) -> Vec<Violation> {
    let mut out = Vec::new();
    let sum: f64 = alphas.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        out.push(Violation {
            constraint: Constraint::SumToOne,
            magnitude: (sum - 1.0).abs(),
        });
    }
    for (k, &a) in alphas.iter().enumerate() {
        let gap = if a < 0.0 {
            -a
        } else if a > 1.0 {
            a - 1.0
        } else {
            0.0
        };
        if gap > ORDER_TOLERANCE {
            out.push(Violation {
                constraint: Constraint::Box(k + 1),
                magnitude: gap,
            });
        }
    }
    for (k, w) in alphas.windows(2).enumerate() {
        let gap = w[0] - w[1];
        if gap > ORDER_TOLERANCE {
            out.push(Violation {
                constraint: Constraint::Ordering(k + 1),
                magnitude: gap,
            });
        }
    }
    out
}

/// Checks the sum, box, ordering and minimum-rate constraints.
///
/// Cross-decoding rates are held to `gamma_min` only when `include_cross` is
/// set.
pub fn check_constraints(
    alloc: &PowerAllocation,
    report: &RateReport,
    gamma_min: f64,
    include_cross: bool,
) -> Feasibility {
    let mut violations = structural_violations(&alloc.alphas);
    for (k, &r) in report.per_user_rates.iter().enumerate() {
        if r < gamma_min {
            violations.push(Violation {
                constraint: Constraint::MinRate(k + 1),
                magnitude: (gamma_min - r) / gamma_min,
            });
        }
    }
    if include_cross {
        for (i, row) in report.cross_rates.iter().enumerate() {
            for (mp, &r) in row.iter().enumerate().take(i) {
                if r < gamma_min {
                    violations.push(Violation {
                        constraint: Constraint::CrossRate(mp + 1, i + 1),
                        magnitude: (gamma_min - r) / gamma_min,
                    });
                }
            }
        }
    }
    Feasibility {
        feasible: violations.is_empty(),
        violations,
    }
}

/// Everything needed to evaluate rates for one group: its AP, the shared
/// receiver profile and noise, and the members' effective gains in order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLink {
    pub group_id: usize,
    pub ap: AccessPoint,
    pub rx: ReceiverProfile,
    pub noise: NoiseModel,
    /// Effective gains `h'`, `gains[0]` is order index 1.
    pub gains: Vec<f64>,
    pub user_ids: Vec<usize>,
}

impl GroupLink {
    pub fn size(&self) -> usize {
        self.gains.len()
    }

    pub fn user_rates(&self, alphas: &[f64]) -> Vec<f64> {
        let mut interference = 0.0;
        let mut out = Vec::with_capacity(alphas.len());
        for (k, (&a, &g)) in alphas.iter().zip(&self.gains).enumerate() {
            let scale = snr_scale(g, &self.ap, &self.rx, &self.noise);
            let r = if k == 0 {
                rate(self.ap.bandwidth, a * a, 0.0, scale)
            } else {
                rate(self.ap.bandwidth, a * a, interference, scale)
            };
            out.push(r);
            interference += a * a;
        }
        out
    }

    pub fn group_sum(&self, alphas: &[f64]) -> f64 {
        self.user_rates(alphas).iter().sum()
    }

    pub fn cross_rates(&self, alphas: &[f64]) -> Vec<Vec<f64>> {
        let m = alphas.len();
        let mut out = vec![vec![0.0; m]; m];
        for i in 1..m {
            let scale = snr_scale(self.gains[i], &self.ap, &self.rx, &self.noise);
            for mp in 0..i {
                let interference: f64 = alphas[mp..i].iter().map(|x| x * x).sum();
                out[i][mp] = rate(
                    self.ap.bandwidth,
                    alphas[mp] * alphas[mp],
                    interference,
                    scale,
                );
            }
        }
        out
    }

    /// Rates plus feasibility of `alloc`.
    pub fn report(
        &self,
        alloc: &PowerAllocation,
        gamma_min: f64,
        include_cross: bool,
    ) -> RateReport {
        let per_user_rates = self.user_rates(&alloc.alphas);
        let cross_rates = self.cross_rates(&alloc.alphas);
        let group_sum = per_user_rates.iter().sum();
        let mut report = RateReport {
            group_id: self.group_id,
            per_user_rates,
            cross_rates,
            group_sum,
            feasible: false,
            violations: Vec::new(),
        };
        let f = check_constraints(alloc, &report, gamma_min, include_cross);
        report.feasible = f.feasible;
        report.violations = f.violations;
        report
    }

    /// Whether the minimum-rate constraints hold (no structural checks).
    pub fn rates_feasible(&self, alphas: &[f64], gamma_min: f64, include_cross: bool) -> bool {
        if self.user_rates(alphas).iter().any(|&r| r < gamma_min) {
            return false;
        }
        if include_cross {
            let cross = self.cross_rates(alphas);
            for (i, row) in cross.iter().enumerate() {
                if row.iter().take(i).any(|&r| r < gamma_min) {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ap() -> AccessPoint {
        AccessPoint {
            id: 0,
            position: [0.0, 0.0, 3.0],
            half_power_semi_angle: 60f64.to_radians(),
            transmit_power: 3.0,
            bandwidth: 1e8,
        }
    }

    fn rx() -> ReceiverProfile {
        ReceiverProfile::default()
    }

    const NOISE: NoiseModel = NoiseModel { sigma_t: 1e-8 };

    fn link(gains: Vec<f64>) -> GroupLink {
        let n = gains.len();
        GroupLink {
            group_id: 0,
            ap: ap(),
            rx: rx(),
            noise: NOISE,
            gains,
            user_ids: (0..n).collect(),
        }
    }

    // Reference values below come from a standalone high-precision evaluation
    // of B·log2(1 + (e/2π)·ℜ²h²α_s²P² / (Σ ℜ²h²α_j²P² + σ²)).

    #[test]
    fn top_rate_reference() {
        assert_eq!(user_rate_top(1e-6, 0.0, &ap(), &rx(), &NOISE), 0.0);
        assert_eq!(user_rate_top(0.0, 0.3, &ap(), &rx(), &NOISE), 0.0);
        let r = user_rate_top(1e-6, 0.1, &ap(), &rx(), &NOISE);
        assert!((r - TOP_REF).abs() < 1e-6 * TOP_REF, "{r}");
    }

    #[test]
    fn sic_rate_reference() {
        let alloc = PowerAllocation::new(0, vec![0.5, 0.5]);
        let r = user_rate_sic(2, 1e-6, &alloc, &ap(), &rx(), &NOISE).unwrap();
        assert!((r - SIC_REF).abs() < 1e-6 * SIC_REF, "{r}");
        assert!(user_rate_sic(1, 1e-6, &alloc, &ap(), &rx(), &NOISE).is_err());
        assert!(user_rate_sic(3, 1e-6, &alloc, &ap(), &rx(), &NOISE).is_err());
    }

    #[test]
    fn sic_rate_without_interference_matches_top() {
        let alloc = PowerAllocation::new(0, vec![0.0, 0.0, 0.7]);
        let r = user_rate_sic(3, 2e-6, &alloc, &ap(), &rx(), &NOISE).unwrap();
        let t = user_rate_top(2e-6, 0.7, &ap(), &rx(), &NOISE);
        assert!((r - t).abs() < 1e-9 * t);
        let zero = PowerAllocation::new(0, vec![0.5, 0.0]);
        assert_eq!(
            user_rate_sic(2, 2e-6, &zero, &ap(), &rx(), &NOISE).unwrap(),
            0.0
        );
    }

    #[test]
    fn cross_rate_reference() {
        let alloc = PowerAllocation::new(0, vec![0.1, 0.3, 0.6]);
        let r = cross_decoding_rate(1, 3, 1e-6, &alloc, &ap(), &rx(), &NOISE).unwrap();
        assert!((r - CROSS_REF).abs() < 1e-6 * CROSS_REF, "{r}");
        assert!(cross_decoding_rate(3, 3, 1e-6, &alloc, &ap(), &rx(), &NOISE).is_err());
        assert!(cross_decoding_rate(0, 2, 1e-6, &alloc, &ap(), &rx(), &NOISE).is_err());
        let z = PowerAllocation::new(0, vec![0.0, 0.3, 0.7]);
        assert_eq!(
            cross_decoding_rate(1, 3, 1e-6, &z, &ap(), &rx(), &NOISE).unwrap(),
            0.0
        );
        // Adjacent layer: single-term interference sum.
        let r2 = cross_decoding_rate(2, 3, 1e-6, &alloc, &ap(), &rx(), &NOISE).unwrap();
        let l = link(vec![1e-6, 1e-6, 1e-6]);
        assert!((l.cross_rates(&alloc.alphas)[2][1] - r2).abs() < 1e-9 * r2);
    }

    #[test]
    fn link_matches_free_functions() {
        let l = link(vec![3e-6, 2e-6, 1.5e-6, 1e-6]);
        let alloc = PowerAllocation::new(0, vec![0.1, 0.2, 0.3, 0.4]);
        let rates = l.user_rates(&alloc.alphas);
        assert!((rates[0] - user_rate_top(3e-6, 0.1, &ap(), &rx(), &NOISE)).abs() < 1e-6);
        for i in 2..=4 {
            let r = user_rate_sic(i, l.gains[i - 1], &alloc, &ap(), &rx(), &NOISE).unwrap();
            assert!((rates[i - 1] - r).abs() < 1e-6);
        }
    }

    #[test]
    fn average_sum_rate() {
        let mk = |rates: Vec<f64>| RateReport {
            group_id: 0,
            group_sum: rates.iter().sum(),
            per_user_rates: rates,
            cross_rates: vec![],
            feasible: true,
            violations: vec![],
        };
        let one = mk(vec![1e9, 2e9, 3e9]);
        assert_eq!(
            system_average_sum_rate(std::slice::from_ref(&one)).unwrap(),
            6e9
        );
        assert_eq!(
            system_average_sum_rate(&[one.clone(), one.clone()]).unwrap(),
            6e9
        );
        let other = mk(vec![0.5e9]);
        let a = system_average_sum_rate(&[one.clone(), other.clone()]).unwrap();
        let b = system_average_sum_rate(&[other, one]).unwrap();
        assert_eq!(a, b);
        assert!(system_average_sum_rate(&[]).is_err());
    }

    #[test]
    fn constraint_examples() {
        let l = link(vec![8e-6, 7e-6, 6e-6, 5e-6]);
        let eq = PowerAllocation::new(0, vec![0.25; 4]);
        let rep = l.report(&eq, 1.0, false);
        assert!(rep.feasible, "{:?}", rep.violations);

        let bad_order = PowerAllocation::new(0, vec![0.3, 0.2, 0.3, 0.2]);
        let rep = l.report(&bad_order, 1.0, false);
        assert!(!rep.feasible);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.constraint == Constraint::Ordering(1) && (v.magnitude - 0.1).abs() < 1e-12));

        let short = PowerAllocation::new(0, vec![0.2, 0.2, 0.25, 0.25]);
        let rep = l.report(&short, 1.0, false);
        let sum = rep
            .violations
            .iter()
            .find(|v| v.constraint == Constraint::SumToOne)
            .unwrap();
        assert!((sum.magnitude - 0.1).abs() < 1e-12);
    }

    #[test]
    fn min_rate_violation_magnitude() {
        let report = RateReport {
            group_id: 0,
            per_user_rates: vec![80e6, 300e6],
            cross_rates: vec![vec![0.0; 2]; 2],
            group_sum: 380e6,
            feasible: false,
            violations: vec![],
        };
        let alloc = PowerAllocation::new(0, vec![0.4, 0.6]);
        let f = check_constraints(&alloc, &report, 100e6, false);
        assert_eq!(f.violations.len(), 1);
        assert!((f.total() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cross_constraints_optional() {
        let l = link(vec![8e-6, 7e-6]);
        let alloc = PowerAllocation::new(0, vec![0.1, 0.9]);
        let own = l.report(&alloc, 1e6, false);
        let both = l.report(&alloc, 1e9, true);
        assert!(own.feasible);
        assert!(both
            .violations
            .iter()
            .any(|v| matches!(v.constraint, Constraint::CrossRate(1, 2))));
    }

    #[test]
    fn monotone_in_own_and_interfering_power() {
        let l = link(vec![4e-6, 3e-6, 2e-6]);
        for user in 0..3 {
            let mut prev = -1.0;
            for s in 1..50 {
                let mut a = vec![0.2, 0.3, 0.5];
                a[user] = s as f64 * 0.02;
                let r = l.user_rates(&a)[user];
                assert!(r > prev);
                prev = r;
            }
        }
        for victim in 1..3 {
            for interferer in 0..victim {
                let mut prev = f64::INFINITY;
                for s in 0..50 {
                    let mut a = vec![0.2, 0.3, 0.5];
                    a[interferer] = s as f64 * 0.02;
                    let r = l.user_rates(&a)[victim];
                    assert!(r < prev);
                    prev = r;
                }
            }
        }
    }

    const TOP_REF: f64 = 678_623_933.014_805_9;
    const SIC_REF: f64 = 51_859_511.100_331_88;
    const CROSS_REF: f64 = 6_107_896.445_511_192;
}

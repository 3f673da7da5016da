//! Euclidean projection onto the ordered probability simplex
//! `{α : Σα = 1, 0 ≤ α ≤ 1, α_1 ≤ … ≤ α_M}`.
//!
//! Isotonic regression commutes with constant shifts and preserves the
//! mean, and simplex projection of a non-decreasing vector stays
//! non-decreasing, so PAVA followed by simplex projection lands on the joint
//! projection. The loop re-checks feasibility rather than assuming it.

use crate::error::{Error, Result};
use crate::rates::{PowerAllocation, ORDER_TOLERANCE, SUM_TOLERANCE};

const MAX_ITERATIONS: usize = 50;

/// Non-decreasing least-squares fit (pool adjacent violators, unit weights).
pub fn isotonic_nondecreasing(y: &[f64]) -> Vec<f64> {
    // Blocks of (mean, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().unwrap() = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// Projection onto `{x ≥ 0, Σx = 1}` by the sort-and-threshold method.
pub fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn is_feasible(a: &[f64]) -> bool {
    let sum: f64 = a.iter().sum();
    (sum - 1.0).abs() <= SUM_TOLERANCE
        && a.iter()
            .all(|&x| (-ORDER_TOLERANCE..=1.0 + ORDER_TOLERANCE).contains(&x))
        && a.windows(2).all(|w| w[0] <= w[1] + ORDER_TOLERANCE)
}

/// Projects raw power fractions onto the feasible set.
pub fn project_alphas(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::Empty("allocation"));
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("allocation"));
    }
    let mut a = raw.to_vec();
    for _ in 0..MAX_ITERATIONS {
        a = simplex_projection(&isotonic_nondecreasing(&a));
        if is_feasible(&a) {
            break;
        }
    }
    // Renormalize away accumulated round-off in the sum.
    let sum: f64 = a.iter().sum();
    if sum > 0.0 {
        for x in a.iter_mut() {
            *x /= sum;
        }
    }
    Ok(a)
}

pub fn project_feasible(group_id: usize, raw: &[f64]) -> Result<PowerAllocation> {
    Ok(PowerAllocation::new(group_id, project_alphas(raw)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist2(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// Feasible points on a fine lattice for M = 2 or 3.
    fn lattice(m: usize, steps: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let h = 1.0 / steps as f64;
        match m {
            2 => {
                for i in 0..=steps / 2 {
                    let a = i as f64 * h;
                    out.push(vec![a, 1.0 - a]);
                }
            }
            3 => {
                for i in 0..=steps {
                    for j in i..=steps {
                        let a = i as f64 * h;
                        let b = j as f64 * h;
                        let c = 1.0 - a - b;
                        if c >= b - 1e-12 {
                            out.push(vec![a, b, c]);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        out
    }

    #[test]
    fn examples() {
        let p = project_alphas(&[0.6, 0.4]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        let p = project_alphas(&[-1.0, 2.0]).unwrap();
        assert!(p[0].abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
        let f = [0.1, 0.2, 0.3, 0.4];
        let p = project_alphas(&f).unwrap();
        assert!(dist2(&p, &f) < 1e-24);
        assert!(project_alphas(&[f64::NAN, 1.0]).is_err());
        assert!(project_alphas(&[]).is_err());
    }

    #[test]
    fn brute_force_minimizer_two_dims() {
        // Fine-grid oracle for (0.6, 0.4): nearest feasible lattice point.
        let raw = [0.6, 0.4];
        let best = lattice(2, 20_000)
            .into_iter()
            .min_by(|a, b| dist2(a, &raw).total_cmp(&dist2(b, &raw)))
            .unwrap();
        let p = project_alphas(&raw).unwrap();
        assert!(dist2(&p, &best).sqrt() < 1e-4);
    }

    #[test]
    fn brute_force_three_dims() {
        let grid = lattice(3, 300);
        for raw in [
            [0.9, 0.05, 0.05],
            [0.5, -0.2, 0.1],
            [0.3, 0.3, 0.3],
            [2.0, 1.0, -3.0],
        ] {
            let best = grid
                .iter()
                .min_by(|a, b| dist2(a, &raw).total_cmp(&dist2(b, &raw)))
                .unwrap();
            let p = project_alphas(&raw).unwrap();
            assert!(
                dist2(&p, &raw) <= dist2(best, &raw) + 1e-12,
                "{raw:?} {p:?} {best:?}"
            );
            assert!(dist2(&p, best).sqrt() < 5e-3);
        }
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_idempotent(raw in prop::collection::vec(-3.0f64..3.0, 1..8)) {
            let p = project_alphas(&raw).unwrap();
            prop_assert!(is_feasible(&p));
            let q = project_alphas(&p).unwrap();
            prop_assert!(dist2(&p, &q).sqrt() < 1e-12);
        }

        #[test]
        fn projection_is_nearest_lattice_point(raw in prop::collection::vec(-1.0f64..2.0, 3)) {
            let p = project_alphas(&raw).unwrap();
            for z in lattice(3, 40) {
                prop_assert!(dist2(&p, &raw) <= dist2(&z, &raw) + 1e-12);
                // Non-expansive toward any feasible point.
                prop_assert!(dist2(&p, &z) <= dist2(&raw, &z) + 1e-12);
            }
        }
    }
}

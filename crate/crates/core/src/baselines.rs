//! Non-learning allocators: gain-ratio power allocation, a fixed split and
//! exhaustive search over a quantized allocation grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::project_alphas;
use crate::rates::{GroupLink, PowerAllocation};

/// Default grid denominator: 50 for groups of up to two users, 20 beyond.
pub fn default_grid(group_size: usize) -> usize {
    if group_size <= 2 {
        50
    } else {
        20
    }
}

/// Gain-ratio allocation: `α_i ∝ (h_1 / h_i)^i`.
///
/// Weaker users (larger order index) get geometrically more power; the
/// result is normalized and already ordered, as gains are non-increasing.
pub fn grpa_allocation(link: &GroupLink) -> Result<PowerAllocation> {
    let g = &link.gains;
    if g.is_empty() {
        return Err(Error::Empty("group"));
    }
    if g.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain("GRPA needs positive gains".into()));
    }
    let raw: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(k, &h)| (g[0] / h).powi(k as i32 + 1))
        .collect();
    let sum: f64 = raw.iter().sum();
    let normalized: Vec<f64> = raw.iter().map(|x| x / sum).collect();
    // Ordered gains give an ordered allocation; projection covers ties in
    // floating point and user-supplied unordered gains.
    Ok(PowerAllocation::new(
        link.group_id,
        project_alphas(&normalized)?,
    ))
}

/// The given split projected onto the feasible set, or the equal split.
pub fn fixed_allocation(link: &GroupLink, alphas: Option<&[f64]>) -> Result<PowerAllocation> {
    let m = link.size();
    let a = match alphas {
        Some(a) if a.len() != m => {
            return Err(Error::Dimension {
                expected: m,
                got: a.len(),
            })
        }
        Some(a) => project_alphas(a)?,
        None => vec![1.0 / m as f64; m],
    };
    Ok(PowerAllocation::new(link.group_id, a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSearch {
    pub group_id: usize,
    /// Best feasible allocation and its group sum rate, if any grid point
    /// is feasible.
    pub best: Option<(Vec<f64>, f64)>,
    pub evaluated: usize,
}

/// Visits every non-decreasing composition `n_1 ≤ … ≤ n_M` with `Σ n = g`,
/// in lexicographic order.
fn for_each_composition(m: usize, g: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(
        parts: &mut Vec<usize>,
        m: usize,
        remaining: usize,
        min: usize,
        f: &mut impl FnMut(&[usize]),
    ) {
        let left = m - parts.len();
        if left == 1 {
            if remaining >= min {
                parts.push(remaining);
                f(parts);
                parts.pop();
            }
            return;
        }
        // The remaining parts are all at least `n`, so `n·left ≤ remaining`.
        let mut n = min;
        while n * left <= remaining {
            parts.push(n);
            rec(parts, m, remaining - n, n, f);
            parts.pop();
            n += 1;
        }
    }
    if m == 0 {
        return;
    }
    rec(&mut Vec::with_capacity(m), m, g, 0, f);
}

/// Number of grid points visited for `m` users at quantization `g`.
pub fn grid_size(m: usize, g: usize) -> usize {
    let mut n = 0;
    for_each_composition(m, g, &mut |_| n += 1);
    n
}

/// Best feasible point of the ordered grid `{n/g}` for one group.
///
/// Ties keep the lexicographically smallest allocation.
pub fn exhaustive_group(
    link: &GroupLink,
    gamma_min: f64,
    include_cross: bool,
    grid: usize,
) -> Result<GroupSearch> {
    if link.size() == 0 {
        return Err(Error::Empty("group"));
    }
    if grid < link.size() {
        return Err(Error::Domain(format!(
            "grid denominator {grid} is below the group size {}",
            link.size()
        )));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluated = 0;
    let mut alphas = vec![0.0; link.size()];
    for_each_composition(link.size(), grid, &mut |parts| {
        evaluated += 1;
        for (a, &n) in alphas.iter_mut().zip(parts) {
            *a = n as f64 / grid as f64;
        }
        if !link.rates_feasible(&alphas, gamma_min, include_cross) {
            return;
        }
        let sum = link.group_sum(&alphas);
        if best.as_ref().is_none_or(|(_, b)| sum > *b) {
            best = Some((alphas.clone(), sum));
        }
    });
    Ok(GroupSearch {
        group_id: link.group_id,
        best,
        evaluated,
    })
}

/// Exhaustive search over every group. Fails if some group has no feasible
/// grid point.
pub fn exhaustive_search(
    links: &[GroupLink],
    gamma_min: f64,
    include_cross: bool,
    grid: usize,
) -> Result<Vec<PowerAllocation>> {
    let mut out = Vec::with_capacity(links.len());
    for link in links {
        let s = exhaustive_group(link, gamma_min, include_cross, grid)?;
        match s.best {
            Some((a, _)) => out.push(PowerAllocation::new(link.group_id, a)),
            None => {
                return Err(Error::Scenario(format!(
                    "group {}: no feasible point on the grid with resolution {grid}",
                    link.group_id
                )))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{AccessPoint, ReceiverProfile};
    use crate::rates::NoiseModel;

    fn link(gains: Vec<f64>) -> GroupLink {
        GroupLink {
            group_id: 3,
            ap: AccessPoint {
                id: 3,
                position: [0.0, 0.0, 3.0],
                half_power_semi_angle: 60f64.to_radians(),
                transmit_power: 1.0,
                bandwidth: 5e8,
            },
            rx: ReceiverProfile::default(),
            noise: NoiseModel { sigma_t: 4.7154e-7 },
            user_ids: (0..gains.len()).collect(),
            gains,
        }
    }

    #[test]
    fn grpa_follows_gain_ratios() {
        let l = link(vec![4e-6, 2e-6, 1e-6]);
        let a = grpa_allocation(&l).unwrap().alphas;
        // Raw weights 1, 2^2, 4^3.
        let s = 1.0 + 4.0 + 64.0;
        let expect = [1.0 / s, 4.0 / s, 64.0 / s];
        for (x, e) in a.iter().zip(expect) {
            assert!((x - e).abs() < 1e-12);
        }
        assert!(grpa_allocation(&link(vec![1e-6, 0.0])).is_err());
    }

    #[test]
    fn grpa_two_user_example_and_scale_invariance() {
        let a = grpa_allocation(&link(vec![2e-6, 1e-6])).unwrap().alphas;
        assert!((a[0] - 0.2).abs() < 1e-12 && (a[1] - 0.8).abs() < 1e-12);
        let g = vec![3.1e-6, 2.2e-6, 1.7e-6, 0.9e-6];
        let a = grpa_allocation(&link(g.clone())).unwrap().alphas;
        let b = grpa_allocation(&link(g.iter().map(|x| x * 37.0).collect()))
            .unwrap()
            .alphas;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_user_gets_everything() {
        let l = link(vec![2e-6]);
        assert_eq!(grpa_allocation(&l).unwrap().alphas, vec![1.0]);
        assert_eq!(fixed_allocation(&l, None).unwrap().alphas, vec![1.0]);
        let s = exhaustive_group(&l, 1e8, false, 5).unwrap();
        assert_eq!(s.best.unwrap().0, vec![1.0]);
    }

    #[test]
    fn two_user_grid_of_four() {
        let l = link(vec![3e-6, 1.5e-6]);
        let s = exhaustive_group(&l, 0.0, false, 4).unwrap();
        assert_eq!(s.evaluated, 3);
        let candidates = [[0.0, 1.0], [0.25, 0.75], [0.5, 0.5]];
        let best = candidates.iter().map(|c| (c, l.group_sum(c))).fold(
            (&candidates[0], f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        );
        assert_eq!(s.best.unwrap().0, best.0.to_vec());
        assert!(exhaustive_group(&l, 0.0, false, 1).is_err());
    }

    #[test]
    fn finer_grid_never_worse() {
        let l = link(vec![3e-6, 2.2e-6, 1.6e-6]);
        let coarse = exhaustive_group(&l, 1e8, false, 10)
            .unwrap()
            .best
            .unwrap()
            .1;
        let fine = exhaustive_group(&l, 1e8, false, 40)
            .unwrap()
            .best
            .unwrap()
            .1;
        assert!(fine >= coarse);
    }

    #[test]
    fn equal_gains_give_equal_split() {
        let a = grpa_allocation(&link(vec![1e-6; 4])).unwrap().alphas;
        assert!(a.iter().all(|&x| (x - 0.25).abs() < 1e-12));
    }

    #[test]
    fn fixed_allocation_defaults_and_projects() {
        let l = link(vec![2e-6, 1e-6]);
        assert_eq!(fixed_allocation(&l, None).unwrap().alphas, vec![0.5, 0.5]);
        let l4 = link(vec![1e-6; 4]);
        assert_eq!(fixed_allocation(&l4, None).unwrap().alphas, vec![0.25; 4]);
        let a = fixed_allocation(&l, Some(&[0.8, 0.2])).unwrap().alphas;
        assert!((a[0] - 0.5).abs() < 1e-12);
        assert!(fixed_allocation(&l, Some(&[1.0])).is_err());
    }

    #[test]
    fn composition_counts() {
        // Partitions of 4 into at most 2 parts: 0+4, 1+3, 2+2.
        assert_eq!(grid_size(2, 4), 3);
        // Partitions of 20 into at most 4 parts.
        assert_eq!(grid_size(4, 20), 108);
        let mut seen = Vec::new();
        for_each_composition(3, 6, &mut |p| seen.push(p.to_vec()));
        let mut sorted = seen.clone();
        sorted.sort();
        assert_eq!(seen, sorted);
        assert!(seen
            .iter()
            .all(|p| p.iter().sum::<usize>() == 6 && p.windows(2).all(|w| w[0] <= w[1])));
    }

    #[test]
    fn exhaustive_beats_every_feasible_grid_point() {
        let l = link(vec![3e-6, 2.2e-6, 1.6e-6]);
        let gamma = 1e8;
        let s = exhaustive_group(&l, gamma, false, 30).unwrap();
        let (best, sum) = s.best.unwrap();
        assert!(l.rates_feasible(&best, gamma, false));
        for_each_composition(3, 30, &mut |p| {
            let a: Vec<f64> = p.iter().map(|&n| n as f64 / 30.0).collect();
            if l.rates_feasible(&a, gamma, false) {
                assert!(l.group_sum(&a) <= sum);
            }
        });
    }

    #[test]
    fn infeasible_group_reported() {
        let l = link(vec![1e-9, 1e-9]);
        let s = exhaustive_group(&l, 1e8, false, 10).unwrap();
        assert!(s.best.is_none());
        let err = exhaustive_search(&[l], 1e8, false, 10)
            .unwrap_err()
            .to_string();
        assert!(err.contains("no feasible point"), "{err}");
    }
}

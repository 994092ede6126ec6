// SPDX-License-Identifier: Apache-2.0

//! Wasserstein distances between equal-weight empirical measures.
//!
//! Samples are row-major slices of `count × dim` reals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest sample size the exact assignment solver accepts.
pub const ASSIGNMENT_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    Exact1d,
    AssignmentExact,
    /// Sliced W₂; a lower bound on W₂.
    Sliced,
    /// Square root of a coupling cost; an upper bound on W₂.
    CoupledUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub method: DistanceMethod,
    pub p: u32,
    pub value: f64,
    pub samples_per_side: usize,
    #[serde(default)]
    pub n_projections: usize,
    /// The smaller sample was padded by resampling to equalize counts.
    #[serde(default)]
    pub padded: bool,
}

fn check_p(p: u32) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }
    Ok(())
}

fn pad_to(sample: &[f64], dim: usize, count: usize, seed: u64) -> Vec<f64> {
    let have = sample.len() / dim;
    let mut out = sample.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in have..count {
        let r = rng.random_range(0..have);
        out.extend_from_slice(&sample[r * dim..(r + 1) * dim]);
    }
    out
}

/// Exact `W_p` on the line via the quantile coupling. Unequal sample sizes
/// are equalized by resampling the smaller side with a fixed seed.
pub fn wasserstein_1d(a: &[f64], b: &[f64], p: u32) -> Result<DistanceEstimate> {
    check_p(p)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let padded = a.len() != b.len();
    let count = a.len().max(b.len());
    let mut sa = pad_to(a, 1, count, 0x5eed_a);
    let mut sb = pad_to(b, 1, count, 0x5eed_b);
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let cost: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs().powi(p as i32)).sum();
    Ok(DistanceEstimate {
        method: DistanceMethod::Exact1d,
        p,
        value: (cost / count as f64).powf(1.0 / p as f64),
        samples_per_side: count,
        n_projections: 0,
        padded,
    })
}

fn cost_matrix(a: &[f64], b: &[f64], dim: usize, p: f64) -> Vec<f64> {
    let n = a.len() / dim;
    let mut c = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = &a[i * dim..(i + 1) * dim];
        for j in 0..n {
            let y = &b[j * dim..(j + 1) * dim];
            let d2: f64 = x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
            c.push(if p == 2.0 { d2 } else { d2.sqrt().powf(p) });
        }
    }
    c
}

/// Minimum-cost perfect matching of a square cost matrix by the
/// shortest-augmenting-path Hungarian method. Returns `assign[i] = j`.
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based rows/columns; column 0 is the virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[row_of[j] - 1] = j - 1;
    }
    assign
}

/// Optimal matching between two equal-size samples under cost `|x − y|^p`:
/// `(assign, total cost)` with row `i` of `a` matched to row `assign[i]` of `b`.
pub fn optimal_assignment(a: &[f64], b: &[f64], dim: usize, p: f64) -> Result<(Vec<usize>, f64)> {
    if dim == 0 || a.len() % dim != 0 || a.len() != b.len() {
        return Err(Error::InvalidArgument(
            "assignment needs two samples with equal counts and dimension".into(),
        ));
    }
    let n = a.len() / dim;
    if n > ASSIGNMENT_CAP {
        return Err(Error::AssignmentTooLarge {
            count: n,
            cap: ASSIGNMENT_CAP,
        });
    }
    let cost = cost_matrix(a, b, dim, p);
    let assign = hungarian(&cost, n);
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((assign, total))
}

/// Exact `W_p` between two equal-size empirical measures in any dimension.
pub fn assignment_exact(a: &[f64], b: &[f64], dim: usize, p: u32) -> Result<DistanceEstimate> {
    check_p(p)?;
    let (_, total) = optimal_assignment(a, b, dim, p as f64)?;
    let n = a.len() / dim;
    Ok(DistanceEstimate {
        method: DistanceMethod::AssignmentExact,
        p,
        value: (total.max(0.0) / n as f64).powf(1.0 / p as f64),
        samples_per_side: n,
        n_projections: 0,
        padded: false,
    })
}

/// Sliced W₂: root mean of squared 1-D distances along `n_projections`
/// random unit directions drawn from `seed`. Never exceeds W₂.
pub fn sliced_w2(a: &[f64], b: &[f64], dim: usize, n_projections: usize, seed: u64) -> Result<DistanceEstimate> {
    if dim < 2 {
        return Err(Error::InvalidArgument("sliced W2 is for dimension >= 2; use wasserstein_1d".into()));
    }
    if n_projections == 0 || a.len() % dim != 0 || b.len() % dim != 0 {
        return Err(Error::InvalidArgument("bad sample shape or zero projections".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; dim];
    let mut total = 0.0;
    let mut padded = false;
    for _ in 0..n_projections {
        loop {
            theta.iter_mut().for_each(|t| *t = rng.sample(StandardNormal));
            let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
            if norm > 1e-12 {
                theta.iter_mut().for_each(|t| *t /= norm);
                break;
            }
        }
        let proj = |s: &[f64]| -> Vec<f64> {
            s.chunks_exact(dim)
                .map(|x| x.iter().zip(&theta).map(|(u, t)| u * t).sum())
                .collect()
        };
        let e = wasserstein_1d(&proj(a), &proj(b), 2)?;
        padded |= e.padded;
        total += e.value * e.value;
    }
    Ok(DistanceEstimate {
        method: DistanceMethod::Sliced,
        p: 2,
        value: (total / n_projections as f64).sqrt(),
        samples_per_side: (a.len() / dim).max(b.len() / dim),
        n_projections,
        padded,
    })
}

/// `√ξ` for a coupling cost `ξ = (1/N) Σ |a_i − b_i|²`; an upper bound on W₂.
pub fn coupled_upper(xi: f64, samples_per_side: usize) -> DistanceEstimate {
    DistanceEstimate {
        method: DistanceMethod::CoupledUpper,
        p: 2,
        value: xi.max(0.0).sqrt(),
        samples_per_side,
        n_projections: 0,
        padded: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn random_sample(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
        (0..count).map(|_| rng.random_range(-3.0..3.0)).collect()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..n {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force(a: &[f64], b: &[f64], dim: usize, p: u32) -> f64 {
        let n = a.len() / dim;
        let cost = cost_matrix(a, b, dim, p as f64);
        let best = permutations(n)
            .iter()
            .map(|perm| perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        (best / n as f64).powf(1.0 / p as f64)
    }

    #[test]
    fn shifted_pair_on_the_line() {
        let e = wasserstein_1d(&[0.0, 1.0], &[1.0, 2.0], 2).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.method, DistanceMethod::Exact1d);
    }

    #[test]
    fn identical_samples_are_at_distance_zero() {
        let a = [0.3, -1.0, 2.5, 0.0];
        assert_eq!(wasserstein_1d(&a, &a, 1).unwrap().value, 0.0);
        let (assign, cost) = optimal_assignment(&a, &a, 2, 2.0).unwrap();
        assert_eq!(assign, vec![0, 1]);
        assert_eq!(cost, 0.0);
        assert_eq!(sliced_w2(&a, &a, 2, 16, 1).unwrap().value, 0.0);
    }

    #[test]
    fn permuted_points_match_at_zero_cost() {
        let a = [0.0, 0.0, 1.0, 0.0];
        let b = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(assignment_exact(&a, &b, 2, 2).unwrap().value, 0.0);
    }

    #[test]
    fn exact_1d_agrees_with_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = random_sample(&mut rng, 8);
            let b = random_sample(&mut rng, 8);
            for p in [1, 2] {
                let x = wasserstein_1d(&a, &b, p).unwrap().value;
                let y = assignment_exact(&a, &b, 1, p).unwrap().value;
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn assignment_agrees_with_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let a = random_sample(&mut rng, 12);
            let b = random_sample(&mut rng, 12);
            let got = assignment_exact(&a, &b, 2, 2).unwrap().value;
            assert!((got - brute_force(&a, &b, 2, 2)).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let a = vec![0.0; 65];
        match assignment_exact(&a, &a, 1, 2) {
            Err(Error::AssignmentTooLarge { count: 65, cap: 64 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unequal_sizes_are_padded_and_flagged() {
        let e = wasserstein_1d(&[0.0, 1.0, 2.0], &[0.0, 1.0], 2).unwrap();
        assert!(e.padded);
        assert_eq!(e.samples_per_side, 3);
    }

    /// Averaging (θ·v)² over the unit sphere gives |v|²/d.
    #[test]
    fn sliced_translation_recovers_sphere_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 3;
        let a = random_sample(&mut rng, 20 * d);
        let v = [1.0, -2.0, 0.5];
        let b: Vec<f64> = a.chunks(d).flat_map(|x| x.iter().zip(&v).map(|(p, q)| p + q)).collect();
        let s = sliced_w2(&a, &b, d, 20_000, 4).unwrap();
        let expect = v.iter().map(|x| x * x).sum::<f64>() / d as f64;
        assert!((s.value * s.value - expect).abs() < 0.03 * expect, "{}", s.value * s.value);
    }

    #[test]
    fn sliced_is_a_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..100 {
            let a = random_sample(&mut rng, 32);
            let b = random_sample(&mut rng, 32);
            let s = sliced_w2(&a, &b, 2, 50, k).unwrap().value;
            let w = assignment_exact(&a, &b, 2, 2).unwrap().value;
            assert!(s <= w + 1e-12);
        }
    }

    #[test]
    fn sliced_rejects_one_dimension() {
        assert!(sliced_w2(&[0.0, 1.0], &[1.0, 0.0], 1, 10, 0).is_err());
    }

    proptest! {
        #[test]
        fn triangle_inequality(seed in 0u64..1000, p in 1u32..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (random_sample(&mut rng, 10), random_sample(&mut rng, 10), random_sample(&mut rng, 10));
            let w = |x: &[f64], y: &[f64]| assignment_exact(x, y, 2, p).unwrap().value;
            prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-9);
            let w1 = |x: &[f64], y: &[f64]| wasserstein_1d(x, y, p).unwrap().value;
            prop_assert!(w1(&a, &c) <= w1(&a, &b) + w1(&b, &c) + 1e-9);
        }

        #[test]
        fn scale_equivariance(seed in 0u64..1000, s in -4.0f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = (random_sample(&mut rng, 12), random_sample(&mut rng, 12));
            let scale = |x: &[f64]| x.iter().map(|v| v * s).collect::<Vec<_>>();
            for p in [1, 2] {
                let base = assignment_exact(&a, &b, 2, p).unwrap().value;
                let scaled = assignment_exact(&scale(&a), &scale(&b), 2, p).unwrap().value;
                prop_assert!((scaled - s.abs() * base).abs() <= 1e-9 * (1.0 + base));
                let base = wasserstein_1d(&a, &b, p).unwrap().value;
                let scaled = wasserstein_1d(&scale(&a), &scale(&b), p).unwrap().value;
                prop_assert!((scaled - s.abs() * base).abs() <= 1e-9 * (1.0 + base));
            }
        }
    }
}

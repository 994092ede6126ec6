// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo estimates of `E exp(δ|X_t − Y_t|²)` for independent copies
//! started at the same point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of batches behind the median-of-means estimate.
pub const BATCHES: usize = 10;

/// A sample is heavy-tailed when its largest term carries more than this
/// share of the sum.
pub const HEAVY_TAIL_SHARE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentPoint {
    pub time: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// Median of the means of [`BATCHES`] contiguous batches.
    pub batch_median: f64,
    pub heavy_tail: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentSeries {
    pub delta: f64,
    pub points: Vec<ExpMomentPoint>,
}

/// `1 + (Ad + C + 1) exp(δ(Ad + C + 1)/(λ − 2δA))`, the uniform-in-time
/// bound on the exponential square moment of two independent copies of a
/// diffusion with drift satisfying `(x−y)·(b(x)−b(y)) ≤ −λ|x−y|² + C` and
/// diffusion matrix of Hilbert–Schmidt norm at most `A`.
pub fn prop_t1_bound(delta: f64, lambda: f64, c: f64, diffusion_bound_a: f64, dim: usize) -> Result<f64> {
    let limit = lambda / (2.0 * diffusion_bound_a);
    if !(delta > 0.0 && delta < limit) {
        return Err(Error::BoundRegime { delta, limit });
    }
    let k = diffusion_bound_a * dim as f64 + c + 1.0;
    Ok(1.0 + k * (delta * k / (lambda - 2.0 * delta * diffusion_bound_a)).exp())
}

/// Estimates at each time from the squared distances of independent coupled
/// pairs. When `regime = Some((λ, A))` is given, `δ ≥ λ/(2A)` is refused.
pub fn exp_square_moment(
    times: &[f64],
    squared_distances: &[Vec<f64>],
    delta: f64,
    regime: Option<(f64, f64)>,
) -> Result<ExpMomentSeries> {
    if times.len() != squared_distances.len() {
        return Err(Error::InvalidArgument("one sample per time is required".into()));
    }
    if let Some((lambda, a)) = regime {
        let limit = lambda / (2.0 * a);
        if !(delta < limit) {
            return Err(Error::BoundRegime { delta, limit });
        }
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be > 0, got {delta}")));
    }
    let mut points = Vec::with_capacity(times.len());
    for (&time, sample) in times.iter().zip(squared_distances) {
        if sample.is_empty() {
            return Err(Error::InvalidArgument(format!("no samples at t = {time}")));
        }
        let terms: Vec<f64> = sample.iter().map(|s| (delta * s).exp()).collect();
        let n = terms.len() as f64;
        let sum: f64 = terms.iter().sum();
        let mean = sum / n;
        let var = if terms.len() > 1 {
            terms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let max = terms.iter().cloned().fold(0.0, f64::max);
        points.push(ExpMomentPoint {
            time,
            estimate: mean,
            stderr: (var / n).sqrt(),
            batch_median: batch_median(&terms),
            heavy_tail: terms.len() > 1 && max > HEAVY_TAIL_SHARE * sum,
            samples: terms.len(),
        });
    }
    Ok(ExpMomentSeries { delta, points })
}

fn batch_median(terms: &[f64]) -> f64 {
    let batches = BATCHES.min(terms.len());
    let size = terms.len() / batches;
    let mut means: Vec<f64> = (0..batches)
        .map(|b| {
            let end = if b + 1 == batches { terms.len() } else { (b + 1) * size };
            let chunk = &terms[b * size..end];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    if batches % 2 == 1 {
        means[batches / 2]
    } else {
        0.5 * (means[batches / 2 - 1] + means[batches / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_start_gives_exactly_one() {
        let s = exp_square_moment(&[0.0], &[vec![0.0; 50]], 0.1, None).unwrap();
        assert_eq!(s.points[0].estimate, 1.0);
        assert_eq!(s.points[0].stderr, 0.0);
        assert_eq!(s.points[0].batch_median, 1.0);
        assert!(!s.points[0].heavy_tail);
    }

    #[test]
    fn refuses_outside_the_bound_regime() {
        match exp_square_moment(&[1.0], &[vec![1.0]], 0.3, Some((1.0, 2.0))) {
            Err(Error::BoundRegime { limit, .. }) => assert_eq!(limit, 0.25),
            other => panic!("{other:?}"),
        }
        assert!(prop_t1_bound(0.25, 1.0, 0.0, 2.0, 1).is_err());
    }

    #[test]
    fn bound_value_for_the_ou_benchmark() {
        // Ad + C + 1 = 3, λ − 2δA = 0.6
        let b = prop_t1_bound(0.1, 1.0, 0.0, 2.0, 1).unwrap();
        assert!((b - (1.0 + 3.0 * 0.5f64.exp())).abs() < 1e-12);
    }

    #[test]
    fn flags_samples_dominated_by_one_term() {
        let mut sample = vec![0.0; 20];
        sample[3] = 80.0;
        let s = exp_square_moment(&[1.0], &[sample], 0.1, None).unwrap();
        assert!(s.points[0].heavy_tail);
        assert!(s.points[0].batch_median < s.points[0].estimate);
    }

    #[test]
    fn median_of_batches() {
        let terms: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert_eq!(batch_median(&terms), 4.5);
        assert_eq!(batch_median(&[2.0, 7.0, 3.0]), 3.0);
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Ordinary least squares on `(x, y)` points.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    pub points: usize,
}

/// Least-squares line through `pts`. Needs at least two distinct `x`.
pub fn linear_fit(pts: &[(f64, f64)]) -> LinearFit {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    let slope_stderr = if pts.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LinearFit {
        slope,
        intercept,
        slope_stderr,
        points: pts.len(),
    }
}

/// Weighted least squares with weights `w_i` (e.g. inverse variances).
pub fn weighted_linear_fit(pts: &[(f64, f64)], weights: &[f64]) -> LinearFit {
    let sw: f64 = weights.iter().sum();
    let mx = pts.iter().zip(weights).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let my = pts.iter().zip(weights).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().zip(weights).map(|(p, w)| w * (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().zip(weights).map(|(p, w)| w * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    LinearFit {
        slope,
        intercept: my - slope * mx,
        slope_stderr: (1.0 / sxx).sqrt(),
        points: pts.len(),
    }
}

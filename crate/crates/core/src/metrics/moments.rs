// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::dynamics::{ParticleEnsemble, Snapshot};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub order_2k: u32,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

fn check_order(order_2k: u32) -> Result<()> {
    if order_2k < 2 || order_2k % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "moment order must be an even integer >= 2, got {order_2k}"
        )));
    }
    Ok(())
}

#[inline]
fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Per-particle terms `|x_i|^{2k}`.
fn particle_terms(ens: &ParticleEnsemble, order_2k: u32) -> Vec<f64> {
    let k = (order_2k / 2) as i32;
    ens.positions
        .chunks_exact(ens.dim)
        .map(|x| sq_norm(x).powi(k))
        .collect()
}

/// Per-pair terms `|x_i − x_j|^{2k}`, `i < j`.
fn pair_terms(ens: &ParticleEnsemble, order_2k: u32) -> Vec<f64> {
    let k = (order_2k / 2) as i32;
    let mut out = Vec::with_capacity(ens.n * (ens.n - 1) / 2);
    for i in 0..ens.n {
        let xi = ens.particle(i);
        for j in i + 1..ens.n {
            let d: f64 = xi.iter().zip(ens.particle(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            out.push(d.powi(k));
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean and standard error of `v`.
fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (m, (var / v.len() as f64).sqrt())
}

/// `(1/N) Σ |x_i|^{2k}` for one ensemble.
pub fn ensemble_moment(ens: &ParticleEnsemble, order_2k: u32) -> Result<f64> {
    check_order(order_2k)?;
    Ok(mean(&particle_terms(ens, order_2k)))
}

/// Average of `|x_i − x_j|^{2k}` over unordered pairs.
pub fn ensemble_pairwise_moment(ens: &ParticleEnsemble, order_2k: u32) -> Result<f64> {
    check_order(order_2k)?;
    Ok(mean(&pair_terms(ens, order_2k)))
}

fn series(
    runs: &[Vec<Snapshot>],
    order_2k: u32,
    terms: fn(&ParticleEnsemble, u32) -> Vec<f64>,
) -> Result<MomentSeries> {
    check_order(order_2k)?;
    let Some(first) = runs.first() else {
        return Err(Error::InvalidArgument("no runs to average".into()));
    };
    if runs.iter().any(|r| r.len() != first.len()) {
        return Err(Error::InvalidArgument("runs have different snapshot counts".into()));
    }
    let mut out = MomentSeries {
        times: first.iter().map(|s| s.time).collect(),
        order_2k,
        values: Vec::with_capacity(first.len()),
        stderr: Vec::with_capacity(first.len()),
    };
    for t in 0..first.len() {
        let (value, err) = if runs.len() == 1 {
            // one run: the spread over particles is all there is
            mean_stderr(&terms(&runs[0][t].ensemble, order_2k))
        } else {
            let per_run: Vec<f64> = runs.iter().map(|r| mean(&terms(&r[t].ensemble, order_2k))).collect();
            mean_stderr(&per_run)
        };
        out.values.push(value);
        out.stderr.push(err);
    }
    Ok(out)
}

/// `E|X_t|^{2k}` averaged over particles and runs; the standard error comes
/// from the run-to-run spread.
pub fn moment(runs: &[Vec<Snapshot>], order_2k: u32) -> Result<MomentSeries> {
    series(runs, order_2k, particle_terms)
}

/// `E|X^i_t − X^j_t|^{2k}` averaged over unordered pairs and runs.
pub fn pairwise_moment(runs: &[Vec<Snapshot>], order_2k: u32) -> Result<MomentSeries> {
    series(runs, order_2k, pair_terms)
}

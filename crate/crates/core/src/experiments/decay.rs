// SPDX-License-Identifier: Apache-2.0

//! Decay of the synchronously coupled distance `ξ(t)` between two copies of
//! the projected system started from different laws.
//!
//! With `W` satisfying C(A, α) the squared distance first contracts
//! exponentially at rate `A(α) = 3A/2^{2+α}` while it exceeds 1, and for all
//! times obeys `ξ(t) ≤ (ξ(0)^{−α/2} + B(α) t)^{−2/α}` with
//! `B(α) = A (α/(2+α))^{1+α/2}`. For `α = 0` the second envelope is read as
//! its limit `ξ(0) e^{−At}`.

use serde::{Deserialize, Serialize};

use super::fit::linear_fit;
use crate::config::SimConfig;
use crate::dynamics::{coupled_simulate, CoupledSnapshot};
use crate::error::{Error, Result};
use crate::potentials::check_condition_c;

/// Log-space fit restricted to a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub window: (f64, f64),
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayResult {
    pub times: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_stderr: Vec<f64>,
    pub envelope_poly: Vec<f64>,
    pub envelope_exp: Vec<f64>,
    #[serde(rename = "A")]
    pub a: f64,
    pub alpha: f64,
    #[serde(rename = "A_alpha")]
    pub a_alpha: f64,
    #[serde(rename = "B_alpha")]
    pub b_alpha: f64,
    pub t1_bound: f64,
    /// First snapshot with `ξ ≤ 1`.
    pub t1_empirical: Option<f64>,
    /// Fit of `ln ξ` against `t`.
    pub exp_fit: Option<WindowFit>,
    pub exp_rate: Option<f64>,
    /// `2A`, set by [`uniform_convex_decay`].
    pub expected_rate: Option<f64>,
    /// Fit of `ln ξ` against `ln t` on the last decade of times.
    pub tail_fit: Option<WindowFit>,
    pub predicted_tail_slope: Option<f64>,
    /// Largest `ξ(t_{k+1}) − ξ(t_k)`.
    pub max_increase: f64,
    pub monotone: bool,
    pub envelope_ok: bool,
    pub first_violation: Option<f64>,
    pub runs: usize,
    pub n: usize,
    pub dt: f64,
}

impl DecayResult {
    pub fn passed(&self) -> bool {
        self.monotone && self.envelope_ok
    }
}

/// `A(α) = (3A/4)(1/2)^α`.
pub fn a_alpha(a: f64, alpha: f64) -> f64 {
    0.75 * a * 0.5f64.powf(alpha)
}

/// `B(α) = A (α/(2+α))^{1+α/2}`.
pub fn b_alpha(a: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    a * (alpha / (2.0 + alpha)).powf(1.0 + alpha / 2.0)
}

/// All-time envelope on the squared distance.
pub fn envelope_poly(xi0: f64, a: f64, alpha: f64, t: f64) -> f64 {
    if xi0 <= 0.0 {
        return 0.0;
    }
    if alpha == 0.0 {
        return xi0 * (-a * t).exp();
    }
    (xi0.powf(-alpha / 2.0) + b_alpha(a, alpha) * t).powf(-2.0 / alpha)
}

/// Upper bound on the time at which the squared distance drops below 1.
pub fn t1_bound(xi0: f64, a: f64, alpha: f64) -> f64 {
    if xi0 <= 1.0 {
        return 0.0;
    }
    2f64.powf(2.0 + alpha) / 3.0 * xi0.ln() / a
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn window_fit(pts: &[(f64, f64)], window: (f64, f64)) -> Option<WindowFit> {
    if pts.len() < 3 {
        return None;
    }
    let f = linear_fit(pts);
    Some(WindowFit {
        slope: f.slope,
        intercept: f.intercept,
        slope_stderr: f.slope_stderr,
        window,
        points: pts.len(),
    })
}

/// `ξ` values below this are treated as exact coupling; logarithms of them
/// carry no information.
const XI_FLOOR: f64 = 1e-280;

fn summarize(cfg: &SimConfig, runs: &[Vec<CoupledSnapshot>]) -> Result<DecayResult> {
    let w = cfg.w();
    let (a, alpha) = (w.declared_a, w.declared_alpha);
    let count = runs.first().map_or(0, Vec::len);
    let times: Vec<f64> = runs[0].iter().map(|s| s.time).collect();
    let mut xi = Vec::with_capacity(count);
    let mut xi_stderr = Vec::with_capacity(count);
    for t in 0..count {
        let sample: Vec<f64> = runs.iter().map(|r| r[t].xi).collect();
        let (m, e) = mean_stderr(&sample);
        xi.push(m);
        xi_stderr.push(e);
    }
    let xi0 = xi[0];
    let envelope_poly: Vec<f64> = times.iter().map(|&t| envelope_poly(xi0, a, alpha, t)).collect();
    let envelope_exp: Vec<f64> = times.iter().map(|&t| xi0 * (-a_alpha(a, alpha) * t).exp()).collect();
    let t1_empirical = times.iter().zip(&xi).find(|(_, x)| **x <= 1.0).map(|(t, _)| *t);

    let mut first_violation = None;
    for k in 0..count {
        let slack = 3.0 * xi_stderr[k];
        let in_exp_phase = t1_empirical.map_or(true, |t1| times[k] < t1);
        let bad = xi[k] > envelope_poly[k] + slack || (in_exp_phase && xi[k] > envelope_exp[k] + slack);
        if bad {
            first_violation = Some(times[k]);
            break;
        }
    }

    let dt = cfg.dynamics.dt;
    let mut max_increase = f64::NEG_INFINITY;
    let mut monotone = true;
    for k in 1..count {
        let diffs: Vec<f64> = runs.iter().map(|r| r[k].xi - r[k - 1].xi).collect();
        let (inc, se) = mean_stderr(&diffs);
        max_increase = max_increase.max(inc);
        if inc > 3.0 * se + 5.0 * dt {
            monotone = false;
        }
    }
    if count < 2 {
        max_increase = 0.0;
    }

    let t_last = *times.last().unwrap_or(&0.0);
    let tail_window = (t_last / 10.0, t_last);
    let tail_pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&xi)
        .filter(|(t, x)| **t > 0.0 && **t >= tail_window.0 && **x > XI_FLOOR)
        .map(|(t, x)| (t.ln(), x.ln()))
        .collect();
    let tail_fit = if alpha > 0.0 { window_fit(&tail_pts, tail_window) } else { None };

    Ok(DecayResult {
        times,
        xi,
        xi_stderr,
        envelope_poly,
        envelope_exp,
        a,
        alpha,
        a_alpha: a_alpha(a, alpha),
        b_alpha: b_alpha(a, alpha),
        t1_bound: t1_bound(xi0, a, alpha),
        t1_empirical,
        exp_fit: None,
        exp_rate: None,
        expected_rate: None,
        tail_fit,
        predicted_tail_slope: (alpha > 0.0).then(|| -2.0 / alpha),
        max_increase,
        monotone,
        envelope_ok: first_violation.is_none(),
        first_violation,
        runs: runs.len(),
        n: cfg.n(),
        dt,
    })
}

fn exp_fit(res: &DecayResult, window: (f64, f64)) -> Option<WindowFit> {
    let pts: Vec<(f64, f64)> = res
        .times
        .iter()
        .zip(&res.xi)
        .filter(|(t, x)| **t >= window.0 && **t <= window.1 && **x > XI_FLOOR)
        .map(|(t, x)| (*t, x.ln()))
        .collect();
    window_fit(&pts, window)
}

fn require_condition_c(cfg: &SimConfig, need_alpha_zero: bool) -> Result<()> {
    let w = cfg.w();
    if !(w.declared_a > 0.0) {
        return Err(Error::InvalidArgument(
            "the decay experiments need W to declare condition C(A, alpha) with A > 0".into(),
        ));
    }
    if need_alpha_zero && w.declared_alpha != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "uniform convex decay needs alpha = 0, W declares {}",
            w.declared_alpha
        )));
    }
    if !cfg.projected() {
        return Err(Error::InvalidArgument("the decay experiments run in projected mode".into()));
    }
    if !cfg.checks.unchecked {
        let report = check_condition_c(w, cfg.dim(), w.declared_a, w.declared_alpha, &cfg.probe_spec(), &cfg.checks.eps_grid)?;
        if !report.satisfied() {
            return Err(Error::InvalidArgument(format!(
                "declared C(A = {}, alpha = {}) fails its probe check (worst violation {:.3e})",
                w.declared_a, w.declared_alpha, report.worst_violation
            )));
        }
    }
    Ok(())
}

/// Coupled runs from `cfg.initial` and `cfg.initial_b`, paired by
/// `cfg.experiment.coupling`, with both envelopes evaluated from the
/// declared `(A, α)` and the measured `ξ(0)`.
pub fn decay_experiment(cfg: &SimConfig) -> Result<DecayResult> {
    require_condition_c(cfg, false)?;
    let runs = coupled_simulate(cfg, cfg.experiment.coupling)?;
    let mut res = summarize(cfg, &runs)?;
    if res.xi[0] > 0.0 {
        let end = match res.t1_empirical {
            Some(t1) if res.xi[0] > 1.0 => t1,
            _ => *res.times.last().unwrap(),
        };
        res.exp_fit = exp_fit(&res, (0.0, end));
        res.exp_rate = res.exp_fit.as_ref().map(|f| -f.slope);
    }
    Ok(res)
}

/// Decay under uniform convexity (`α = 0`): fits an exponential rate over
/// the whole horizon and compares it with `2A`.
pub fn uniform_convex_decay(cfg: &SimConfig) -> Result<DecayResult> {
    require_condition_c(cfg, true)?;
    let runs = coupled_simulate(cfg, cfg.experiment.coupling)?;
    let mut res = summarize(cfg, &runs)?;
    res.expected_rate = Some(2.0 * res.a);
    if res.xi[0] > 0.0 {
        let window = (0.0, *res.times.last().unwrap());
        res.exp_fit = exp_fit(&res, window);
        res.exp_rate = res.exp_fit.as_ref().map(|f| -f.slope);
    }
    Ok(res)
}

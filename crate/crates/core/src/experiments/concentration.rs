// SPDX-License-Identifier: Apache-2.0

//! Deviation of the empirical average `(1/N) Σ f(X^k_T)` of a 1-Lipschitz
//! function over independent trials, against `exp(−N r²/𝔠)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decay::envelope_poly;
use crate::config::{SimConfig, TestFunction};
use crate::dynamics::{initial_ensemble, Simulation};
use crate::error::{Error, Result};
use crate::metrics::prop_t1_bound;
use crate::rng::derive_seed;

/// Trials below which a tail probability is too small to estimate: grid
/// points whose expected count under the fitted bound is below this are
/// flagged.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

/// Independent long runs behind the stationary reference.
const STATIONARY_RUNS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationResult {
    pub n: usize,
    pub horizon: f64,
    pub trials: usize,
    pub lipschitz_f: TestFunction,
    pub clamp_radius: f64,
    pub r_grid: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub tail_stderr: Vec<f64>,
    pub unreliable: Vec<bool>,
    /// Pooled estimate of `E f(X^1_T)`.
    pub reference: f64,
    pub reference_stderr: f64,
    pub c_fitted: f64,
    pub bound_fitted: Vec<f64>,
    pub c_pipeline: Option<f64>,
    pub bound_pipeline: Vec<f64>,
    /// Fraction of grid points with `empirical_tail ≤ bound_pipeline`.
    pub pipeline_coverage: Option<f64>,
    pub shifted: ShiftedTail,
}

/// Tail around an estimate of the stationary mean `∫ f du_∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedTail {
    pub stationary_reference: f64,
    pub stationary_stderr: f64,
    /// `(K/N^{1/(1+α)})^{1/2}`.
    pub chaos_offset: f64,
    /// `√β(T)`.
    pub decay_offset: f64,
    /// `P(S − ∫f du_∞ ≥ r − offsets)` for grid points `r ≥ offsets`.
    pub empirical_tail: Vec<Option<f64>>,
    pub bound_ok: Option<bool>,
}

impl ConcentrationResult {
    pub fn passed(&self) -> bool {
        let fitted_ok = self
            .empirical_tail
            .iter()
            .zip(&self.bound_fitted)
            .all(|(t, b)| t <= b);
        fitted_ok && self.pipeline_coverage.map_or(true, |c| c >= 0.95)
    }
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

/// Twelve points spaced by a quarter of `1/√N`, the scale of the
/// fluctuations of an average of `N` weakly correlated unit-variance terms.
pub fn default_r_grid(n: usize) -> Vec<f64> {
    (1..=12).map(|k| 0.25 * k as f64 / (n as f64).sqrt()).collect()
}

/// Smallest `𝔠` with `tail(r) ≤ exp(−N r²/𝔠)` at every grid point.
pub fn fit_constant(n: usize, r_grid: &[f64], tail: &[f64]) -> f64 {
    let mut c = 0.0f64;
    for (&r, &p) in r_grid.iter().zip(tail) {
        if p <= 0.0 {
            continue;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        c = c.max(n as f64 * r * r / -p.ln());
    }
    // exp(ln p) may round below p
    c * (1.0 + 1e-12)
}

/// `𝔠 = (2/δ)(1 + ln B)` with `B` the uniform bound on the exponential
/// square moment at `δ = λ/(4A)`, using the summed convexity constants of
/// `V` and `W` (the latter's `C` halved, as it enters once per pair).
pub fn pipeline_constant(cfg: &SimConfig) -> Option<f64> {
    let (v, w) = (cfg.v(), cfg.w());
    let lambda = v.declared_lambda + w.declared_lambda;
    let c = v.declared_c + 0.5 * w.declared_c;
    let a = cfg.experiment.diffusion_bound_a;
    if !(lambda > 0.0) {
        return None;
    }
    let delta = lambda / (4.0 * a);
    let b = prop_t1_bound(delta, lambda, c, a, cfg.dim()).ok()?;
    Some(2.0 / delta * (1.0 + b.ln()))
}

fn statistic(f: TestFunction, radius: f64, positions: &[f64], dim: usize) -> f64 {
    let n = positions.len() / dim;
    positions.chunks_exact(dim).map(|x| f.eval(x, radius)).sum::<f64>() / n as f64
}

/// Mean of `f` and of `|x|²` over the final ensembles of long runs.
fn stationary_reference(cfg: &SimConfig) -> Result<(f64, f64, f64)> {
    let e = &cfg.experiment;
    let mut long = cfg.clone();
    long.system.n = e.stationary_n;
    long.time.horizon = e.stationary_horizon;
    long.time.observation_times = vec![e.stationary_horizon];
    long.seed = derive_seed(cfg.seed, "stationary", 0);
    let finals: Vec<(f64, f64)> = (0..STATIONARY_RUNS)
        .into_par_iter()
        .map(|run| {
            let snap = Simulation::new(&long, run)?
                .last()
                .expect("one observation")?;
            let pos = &snap.ensemble.positions;
            Ok((
                statistic(e.test_function, e.clamp_radius, pos, cfg.dim()),
                snap.observables.second_moment,
            ))
        })
        .collect::<Result<_>>()?;
    let fs: Vec<f64> = finals.iter().map(|p| p.0).collect();
    let (m, se) = mean_stderr(&fs);
    let m2 = finals.iter().map(|p| p.1).sum::<f64>() / finals.len() as f64;
    Ok((m, se, m2))
}

/// Runs `trials` independent systems of `cfg.system.n` particles to time
/// `horizon` and tabulates the upper deviation tail of the empirical mean of
/// `f` over `r_grid`.
pub fn concentration_suite(
    cfg: &SimConfig,
    f: TestFunction,
    horizon: f64,
    r_grid: &[f64],
    trials: usize,
) -> Result<ConcentrationResult> {
    if trials < 200 {
        return Err(Error::InvalidArgument(format!("need at least 200 trials, got {trials}")));
    }
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0)) || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("r grid must be positive and increasing".into()));
    }
    let radius = cfg.experiment.clamp_radius;
    let mut run_cfg = cfg.clone();
    run_cfg.time.horizon = horizon;
    run_cfg.time.observation_times = vec![horizon];
    let n = cfg.n();

    let stats: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let snap = Simulation::new(&run_cfg, trial)?.last().expect("one observation")?;
            Ok(statistic(f, radius, &snap.ensemble.positions, cfg.dim()))
        })
        .collect::<Result<_>>()?;
    let (reference, reference_stderr) = mean_stderr(&stats);
    let t = trials as f64;
    let tail_at = |center: f64, r: f64| stats.iter().filter(|s| **s - center >= r).count() as f64 / t;
    let empirical_tail: Vec<f64> = r_grid.iter().map(|&r| tail_at(reference, r)).collect();
    let tail_stderr: Vec<f64> = empirical_tail.iter().map(|p| (p * (1.0 - p) / t).sqrt()).collect();

    let bound = |c: f64, r: f64| if c == 0.0 { 0.0 } else { (-(n as f64) * r * r / c).exp() };
    let c_fitted = fit_constant(n, r_grid, &empirical_tail);
    let bound_fitted: Vec<f64> = r_grid.iter().map(|&r| bound(c_fitted, r)).collect();
    let unreliable = bound_fitted.iter().map(|b| t * b < MIN_EXPECTED_COUNT).collect();
    let c_pipeline = pipeline_constant(cfg);
    let bound_pipeline: Vec<f64> = match c_pipeline {
        Some(c) => r_grid.iter().map(|&r| bound(c, r)).collect(),
        None => Vec::new(),
    };
    let pipeline_coverage = c_pipeline.map(|_| {
        let ok = empirical_tail.iter().zip(&bound_pipeline).filter(|(p, b)| p <= b).count();
        ok as f64 / r_grid.len() as f64
    });

    let shifted = if f == TestFunction::Constant {
        ShiftedTail {
            stationary_reference: 0.0,
            stationary_stderr: 0.0,
            chaos_offset: 0.0,
            decay_offset: 0.0,
            empirical_tail: r_grid.iter().map(|_| Some(0.0)).collect(),
            bound_ok: Some(true),
        }
    } else {
        let (stationary_reference, stationary_stderr, m2_inf) = stationary_reference(cfg)?;
        let (v, w) = (cfg.v(), cfg.w());
        let (a, alpha) = if w.declared_a >= v.declared_a {
            (w.declared_a, w.declared_alpha)
        } else {
            (v.declared_a, v.declared_alpha)
        };
        let chaos_offset = (cfg.experiment.chaos_constant / (n as f64).powf(1.0 / (1.0 + alpha))).sqrt();
        let init = initial_ensemble(cfg, &cfg.initial, 0)?;
        let m2_0 = init.positions.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // W₂(u_0, u_∞) ≤ √m2(u_0) + √m2(u_∞)
        let xi0 = (m2_0.sqrt() + m2_inf.sqrt()).powi(2);
        let beta = if a > 0.0 { envelope_poly(xi0, a, alpha, horizon) } else { xi0 };
        let decay_offset = beta.sqrt();
        let offset = chaos_offset + decay_offset;
        let empirical_tail: Vec<Option<f64>> = r_grid
            .iter()
            .map(|&r| (r >= offset).then(|| tail_at(stationary_reference, r - offset)))
            .collect();
        let bound_ok = c_pipeline.map(|c| {
            r_grid
                .iter()
                .zip(&empirical_tail)
                .all(|(&r, p)| p.map_or(true, |p| p <= bound(c, r)))
        });
        ShiftedTail {
            stationary_reference,
            stationary_stderr,
            chaos_offset,
            decay_offset,
            empirical_tail,
            bound_ok,
        }
    };

    Ok(ConcentrationResult {
        n,
        horizon,
        trials,
        lipschitz_f: f,
        clamp_radius: radius,
        r_grid: r_grid.to_vec(),
        empirical_tail,
        tail_stderr,
        unreliable,
        reference,
        reference_stderr,
        c_fitted,
        bound_fitted,
        c_pipeline,
        bound_pipeline,
        pipeline_coverage,
        shifted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_with_seed;

    fn config(n: usize) -> SimConfig {
        let text = format!(
            r#"
[system]
n = {n}
[potential.v]
kind = "quadratic"
stiffness = 1.0
[potential.w]
kind = "quadratic"
stiffness = 1.0
[dynamics]
dt = 0.02
[time]
horizon = 1.0
[initial]
kind = "gaussian"
variance = 1.0
[experiment]
stationary_n = 32
stationary_horizon = 2.0
"#
        );
        parse_with_seed(&text, Some(23)).unwrap()
    }

    #[test]
    fn constant_function_has_empty_tail() {
        let res = concentration_suite(&config(8), TestFunction::Constant, 0.5, &[0.05, 0.1, 0.2], 200).unwrap();
        assert!(res.empirical_tail.iter().all(|p| *p == 0.0));
        assert_eq!(res.c_fitted, 0.0);
        assert!(res.passed());
    }

    #[test]
    fn fitted_constant_makes_the_bound_hold() {
        let grid: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
        let res = concentration_suite(&config(16), TestFunction::ClampedCoordinate, 1.0, &grid, 200).unwrap();
        for (p, b) in res.empirical_tail.iter().zip(&res.bound_fitted) {
            assert!(p <= b, "{res:?}");
        }
        let tails = &res.empirical_tail;
        assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.c_pipeline.unwrap() > res.c_fitted);
        assert_eq!(res.pipeline_coverage, Some(1.0));
    }

    #[test]
    fn fit_constant_is_tight() {
        let grid = [0.1, 0.2];
        let tail = [0.5, 0.1];
        let c = fit_constant(10, &grid, &tail);
        let at = |r: f64| (-(10.0) * r * r / c).exp();
        assert!(at(0.1) >= 0.5 && at(0.2) >= 0.1);
        assert!((at(0.1) - 0.5).abs() < 1e-12 || (at(0.2) - 0.1).abs() < 1e-12);
        assert_eq!(fit_constant(10, &grid, &[1.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn rejects_small_trial_counts() {
        assert!(concentration_suite(&config(8), TestFunction::SinCoordinate, 0.5, &[0.1], 100).is_err());
    }

    #[test]
    fn pipeline_constant_for_two_quadratics() {
        // λ = 4, C = 0, A = 2, d = 1: δ = 1/2, B = 1 + 3e^{3/4}
        let c = pipeline_constant(&config(8)).unwrap();
        let b = 1.0 + 3.0 * 0.75f64.exp();
        assert!((c - 4.0 * (1.0 + b.ln())).abs() < 1e-12);
    }
}

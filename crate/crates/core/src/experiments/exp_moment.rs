// SPDX-License-Identifier: Apache-2.0

//! Exponential square moment of two independent copies of the confined
//! diffusion started at the same point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::dynamics::{initial_ensemble, ParticleEnsemble, Simulation};
use crate::error::{Error, Result};
use crate::metrics::{exp_square_moment, prop_t1_bound, ExpMomentSeries};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentResult {
    pub series: ExpMomentSeries,
    pub start: Vec<f64>,
    pub lambda: f64,
    pub c: f64,
    pub diffusion_bound_a: f64,
    pub bound: f64,
    pub below_bound: bool,
    pub warnings: Vec<String>,
}

impl ExpMomentResult {
    pub fn passed(&self) -> bool {
        self.below_bound
    }
}

/// With `W = 0` the particles of one system are independent copies, so each
/// run contributes `N` pairs `(X^i, Y^i)` from two systems that share the
/// start point and nothing else.
pub fn exp_moment_experiment(cfg: &SimConfig) -> Result<ExpMomentResult> {
    if !cfg.w().is_zero() {
        return Err(Error::InvalidArgument(
            "the exponential moment experiment needs a zero interaction potential".into(),
        ));
    }
    if cfg.projected() {
        return Err(Error::InvalidArgument("the exponential moment experiment runs in raw mode".into()));
    }
    let v = cfg.v();
    let (lambda, c) = (v.declared_lambda, v.declared_c);
    let a = cfg.experiment.diffusion_bound_a;
    let delta = cfg.experiment.delta;
    let bound = prop_t1_bound(delta, lambda, c, a, cfg.dim())?;

    let (n, dim) = (cfg.n(), cfg.dim());
    let start = initial_ensemble(cfg, &cfg.initial, 0)?.particle(0).to_vec();
    let positions: Vec<f64> = start.iter().cycle().take(n * dim).copied().collect();
    let times: Vec<f64> = cfg.observation_steps().iter().map(|p| p.1).collect();

    let per_run: Vec<Vec<Vec<f64>>> = (0..cfg.system.runs)
        .into_par_iter()
        .map(|run| {
            let ens = |label: &str| {
                ParticleEnsemble::new(positions.clone(), n, dim, derive_seed(cfg.seed, label, run as u64))
            };
            let xs = Simulation::from_ensemble(cfg, run, ens("copy_x")?)?;
            let ys = Simulation::from_ensemble(cfg, run, ens("copy_y")?)?;
            xs.zip(ys)
                .map(|(x, y)| {
                    let (x, y) = (x?, y?);
                    Ok(x.ensemble
                        .positions
                        .chunks_exact(dim)
                        .zip(y.ensemble.positions.chunks_exact(dim))
                        .map(|(p, q)| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum())
                        .collect())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let samples: Vec<Vec<f64>> = (0..times.len())
        .map(|k| per_run.iter().flat_map(|r| r[k].iter().copied()).collect())
        .collect();

    let series = exp_square_moment(&times, &samples, delta, Some((lambda, a)))?;
    let below_bound = series.points.iter().all(|p| p.estimate <= bound + 3.0 * p.stderr);
    let warnings = series
        .points
        .iter()
        .filter(|p| p.heavy_tail)
        .map(|p| format!("t = {}: estimate dominated by a single sample", p.time))
        .collect();
    Ok(ExpMomentResult {
        series,
        start,
        lambda,
        c,
        diffusion_bound_a: a,
        bound,
        below_bound,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_with_seed;

    fn ou(extra: &str) -> SimConfig {
        let text = format!(
            r#"
[system]
n = 2000
runs = 2
[potential.v]
kind = "quadratic"
stiffness = 0.5
[potential.w]
kind = "zero"
[dynamics]
scheme = "euler_maruyama"
dt = 0.005
[time]
horizon = 1.0
observation_times = [0.0, 0.5, 1.0]
[initial]
kind = "gaussian"
variance = 1.0
{extra}
"#
        );
        parse_with_seed(&text, Some(5)).unwrap()
    }

    #[test]
    fn matches_the_gaussian_integral() {
        let res = exp_moment_experiment(&ou("")).unwrap();
        assert_eq!(res.series.points[0].estimate, 1.0);
        for p in &res.series.points[1..] {
            // (1 − 2δ·2(1 − e^{−2t}))^{−1/2}
            let v = 2.0 * (1.0 - (-2.0 * p.time).exp());
            let exact = (1.0 - 2.0 * 0.1 * v).powf(-0.5);
            assert!((p.estimate - exact).abs() < 4.0 * p.stderr + 2e-3, "{p:?} vs {exact}");
        }
        assert!(res.passed());
    }

    #[test]
    fn refuses_delta_outside_regime() {
        let cfg = ou("[experiment]\ndelta = 0.3");
        assert!(matches!(exp_moment_experiment(&cfg), Err(Error::BoundRegime { .. })));
    }
}

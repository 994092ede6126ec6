// SPDX-License-Identifier: Apache-2.0

//! Propagation-of-chaos scan.
//!
//! For each system size `N` the projected `N`-particle system runs next to
//! `N` proxies of the nonlinear process: proxy `i` starts at particle `i`,
//! sees particle `i`'s raw Brownian increments, and feels the interaction
//! through an auxiliary projected system of `M` particles with its own
//! noise. The recorded error is `sup_t E (1/N) Σ_i |Y^i_t − X̄^i_t|²`.
//!
//! The auxiliary system of run `r` is shared by every `N` of that run. A
//! second pass with `2M` on the largest `N` estimates how much of the error
//! is proxy bias.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::linear_fit;
use crate::config::SimConfig;
use crate::dynamics::{fill_noise, Integrator, ParticleEnsemble, Scheme};
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::rng::derive_seed;

/// Relative proxy bias above which the result carries a warning.
pub const PROXY_BIAS_LIMIT: f64 = 0.2;

/// Runs used by the `2M` doubling pass.
const DOUBLING_RUNS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosScanResult {
    #[serde(rename = "N_values")]
    pub n_values: Vec<usize>,
    pub errors: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Time at which each error attains its supremum.
    pub sup_times: Vec<f64>,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    pub predicted_slope: f64,
    /// Smallest `K` with `errors ≤ K N^{−1/(1+α)}` at every `N`.
    #[serde(rename = "K_fitted")]
    pub k_fitted: f64,
    #[serde(rename = "reference_size_M")]
    pub m_reference: usize,
    #[serde(rename = "runs_per_N")]
    pub runs_per_n: usize,
    pub horizon: f64,
    /// `|e(M) − e(2M)| / e(M)` at the largest `N`.
    pub proxy_bias: Option<f64>,
    /// Errors non-increasing in `N` up to two combined standard errors.
    pub errors_decreasing: bool,
    pub warnings: Vec<String>,
}

impl ChaosScanResult {
    pub fn passed(&self) -> bool {
        self.errors_decreasing && self.fitted_slope <= self.predicted_slope + 0.15
    }
}

/// One proxy step: `x ← x + b h (tamed or not) + √(2h) ξ` with
/// `b = −∇V(x) − (1/M) Σ_k ∇W(x − z_k)`.
fn advance_proxies(
    proxies: &mut [f64],
    cloud: &[f64],
    noise: &[f64],
    dim: usize,
    v: &Potential,
    w: &Potential,
    h: f64,
    tamed: bool,
) -> Result<()> {
    let m = (cloud.len() / dim) as f64;
    let sigma = (2.0 * h).sqrt();
    let mut diff = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    for (x, xi) in proxies.chunks_exact_mut(dim).zip(noise.chunks_exact(dim)) {
        b.iter_mut().for_each(|c| *c = 0.0);
        for z in cloud.chunks_exact(dim) {
            for c in 0..dim {
                diff[c] = x[c] - z[c];
            }
            w.grad_into(&diff, &mut g)?;
            for c in 0..dim {
                b[c] -= g[c];
            }
        }
        b.iter_mut().for_each(|c| *c /= m);
        if !v.is_zero() {
            v.grad_into(x, &mut g)?;
            for c in 0..dim {
                b[c] -= g[c];
            }
        }
        let scale = if tamed {
            h / (1.0 + h * b.iter().map(|c| c * c).sum::<f64>().sqrt())
        } else {
            h
        };
        for c in 0..dim {
            x[c] += b[c] * scale + sigma * xi[c];
        }
    }
    if proxies.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { i: 0, j: 0, time: f64::NAN });
    }
    Ok(())
}

fn centered_ensemble(cfg: &SimConfig, n: usize, init_seed: u64, noise_seed: u64) -> Result<ParticleEnsemble> {
    let mut law = cfg.initial.clone();
    law.center_to_zero = true;
    let positions = law.sample(n, cfg.dim(), init_seed)?;
    let mut e = ParticleEnsemble::new(positions, n, cfg.dim(), noise_seed)?;
    e.project_in_place();
    Ok(e)
}

/// Per-`N`, per-snapshot errors of one run.
fn scan_run(cfg: &SimConfig, n_values: &[usize], m: usize, run: usize) -> Result<Vec<Vec<f64>>> {
    let (v, w, dim) = (cfg.v(), cfg.w(), cfg.dim());
    let policy = cfg.dynamics;
    let tamed = policy.scheme == Scheme::TamedEuler;
    let r = run as u64;
    let mut aux = centered_ensemble(
        cfg,
        m,
        derive_seed(cfg.seed, "chaos_aux_init", r),
        derive_seed(cfg.seed, "chaos_aux_noise", r),
    )?;
    let mut systems = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let e = centered_ensemble(
            cfg,
            n,
            derive_seed(derive_seed(cfg.seed, "chaos_init", r), "n", n as u64),
            derive_seed(derive_seed(cfg.seed, "chaos_noise", r), "n", n as u64),
        )?;
        let proxies = e.positions.clone();
        systems.push((e, proxies));
    }

    let observe = cfg.observation_steps();
    let total = observe.last().map_or(0, |o| o.0);
    let mut integ = Integrator::new(v, w, policy)?;
    let mut noise = Vec::new();
    let mut errors = vec![Vec::with_capacity(observe.len()); n_values.len()];
    let mut next_obs = 0;
    for step in 0..=total {
        if next_obs < observe.len() && observe[next_obs].0 == step {
            for (k, (e, proxies)) in systems.iter().enumerate() {
                let err = e.positions.iter().zip(proxies).map(|(y, x)| (y - x) * (y - x)).sum::<f64>() / e.n as f64;
                errors[k].push(err);
            }
            next_obs += 1;
        }
        if step == total {
            break;
        }
        for (e, proxies) in systems.iter_mut() {
            // raw increments of the particles, before projection
            let mut raw = e.clone();
            raw.centered = false;
            noise.resize(e.positions.len(), 0.0);
            fill_noise(&raw, step, 0, &mut noise);
            advance_proxies(proxies, &aux.positions, &noise, dim, v, w, policy.dt, tamed)
                .map_err(|err| err.in_run(run))?;
            integ.advance(e).map_err(|err| err.in_run(run))?;
        }
        integ.advance(&mut aux).map_err(|err| err.in_run(run))?;
    }
    Ok(errors)
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

/// Run-averaged error at every snapshot; returns `(sup, stderr at the sup,
/// time of the sup)` per `N`.
fn sup_errors(per_run: &[Vec<Vec<f64>>], times: &[f64]) -> Vec<(f64, f64, f64)> {
    let n_count = per_run[0].len();
    (0..n_count)
        .map(|k| {
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
            for (t, &time) in times.iter().enumerate() {
                let sample: Vec<f64> = per_run.iter().map(|r| r[k][t]).collect();
                let (m, e) = mean_stderr(&sample);
                if m > best.0 {
                    best = (m, e, time);
                }
            }
            best
        })
        .collect()
}

pub fn chaos_scan(cfg: &SimConfig, n_values: &[usize], m_reference: usize, runs_per_n: usize) -> Result<ChaosScanResult> {
    let w = cfg.w();
    if n_values.is_empty() || n_values.windows(2).any(|p| p[1] <= p[0]) || n_values[0] < 2 {
        return Err(Error::InvalidArgument("N values must be >= 2 and strictly increasing".into()));
    }
    let n_max = *n_values.last().unwrap();
    if m_reference < 8 * n_max {
        return Err(Error::InvalidArgument(format!(
            "reference size M = {m_reference} must be at least 8 max(N) = {}",
            8 * n_max
        )));
    }
    if !(w.declared_a > 0.0) {
        return Err(Error::InvalidArgument(
            "the chaos scan needs W to declare condition C(A, alpha)".into(),
        ));
    }
    if !cfg.projected() {
        return Err(Error::InvalidArgument("the chaos scan runs the projected system".into()));
    }
    if cfg.dynamics.scheme == Scheme::AdaptiveEuler {
        return Err(Error::InvalidArgument(
            "the chaos scan steps proxies on the base grid; use euler_maruyama or tamed_euler".into(),
        ));
    }
    if runs_per_n < 2 {
        return Err(Error::InvalidArgument("need at least two runs per N".into()));
    }
    let times: Vec<f64> = cfg.observation_steps().iter().map(|o| o.1).collect();

    let per_run: Vec<Vec<Vec<f64>>> = (0..runs_per_n)
        .into_par_iter()
        .map(|r| scan_run(cfg, n_values, m_reference, r))
        .collect::<Result<_>>()?;
    let sups = sup_errors(&per_run, &times);
    let errors: Vec<f64> = sups.iter().map(|s| s.0).collect();
    let stderr: Vec<f64> = sups.iter().map(|s| s.1).collect();

    let mut warnings = Vec::new();
    let doubling_runs = runs_per_n.min(DOUBLING_RUNS);
    let largest = &n_values[n_values.len() - 1..];
    let base: Vec<Vec<Vec<f64>>> = per_run[..doubling_runs].iter().map(|r| vec![r[r.len() - 1].clone()]).collect();
    let doubled: Vec<Vec<Vec<f64>>> = (0..doubling_runs)
        .into_par_iter()
        .map(|r| scan_run(cfg, largest, 2 * m_reference, r))
        .collect::<Result<_>>()?;
    let e_m = sup_errors(&base, &times)[0].0;
    let e_2m = sup_errors(&doubled, &times)[0].0;
    let proxy_bias = (e_m > 0.0).then(|| (e_m - e_2m).abs() / e_m);
    if let Some(b) = proxy_bias {
        if b >= PROXY_BIAS_LIMIT {
            warnings.push(format!(
                "reference size M = {m_reference} may be too small: doubling it moves the N = {n_max} error by {:.0}%",
                100.0 * b
            ));
        }
    }

    let errors_decreasing = errors
        .windows(2)
        .zip(stderr.windows(2))
        .all(|(e, s)| e[1] <= e[0] + 2.0 * (s[0] * s[0] + s[1] * s[1]).sqrt());
    let positive: Vec<(f64, f64)> = n_values
        .iter()
        .zip(&errors)
        .filter(|(_, e)| **e > 0.0)
        .map(|(n, e)| ((*n as f64).ln(), e.ln()))
        .collect();
    let (fitted_slope, slope_stderr) = if positive.len() >= 2 {
        let f = linear_fit(&positive);
        (f.slope, f.slope_stderr)
    } else {
        warnings.push("errors vanish; nothing to fit".into());
        (f64::NAN, f64::NAN)
    };
    let rate = 1.0 / (1.0 + w.declared_alpha);
    let k_fitted = n_values
        .iter()
        .zip(&errors)
        .map(|(n, e)| e * (*n as f64).powf(rate))
        .fold(0.0, f64::max);

    Ok(ChaosScanResult {
        n_values: n_values.to_vec(),
        errors,
        stderr,
        sup_times: sups.iter().map(|s| s.2).collect(),
        fitted_slope,
        slope_stderr,
        predicted_slope: -rate,
        k_fitted,
        m_reference,
        runs_per_n,
        horizon: cfg.time.horizon,
        proxy_bias,
        errors_decreasing,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_with_seed;

    fn config(w: &str, law: &str, horizon: f64) -> SimConfig {
        let text = format!(
            r#"
[system]
n = 8
mode = "projected"
[potential.w]
{w}
[dynamics]
dt = 0.01
[time]
horizon = {horizon}
observation_stride = 0.25
[initial]
{law}
"#
        );
        parse_with_seed(&text, Some(17)).unwrap()
    }

    #[test]
    fn point_mass_start_has_small_errors() {
        let cfg = config("kind = \"quadratic\"\nstiffness = 1.0", "kind = \"point\"", 0.5);
        let res = chaos_scan(&cfg, &[4, 8], 64, 4).unwrap();
        assert_eq!(res.errors.len(), 2);
        assert!(res.errors.iter().all(|e| *e >= 0.0 && *e < 0.5), "{res:?}");
    }

    #[test]
    fn quadratic_errors_fall_roughly_like_one_over_n() {
        let cfg = config("kind = \"quadratic\"\nstiffness = 1.0", "kind = \"gaussian\"\nvariance = 1.0", 1.0);
        let res = chaos_scan(&cfg, &[4, 8, 16], 256, 12).unwrap();
        assert!(res.errors_decreasing, "{res:?}");
        assert_eq!(res.predicted_slope, -1.0);
        assert!(res.fitted_slope < -0.6 && res.fitted_slope > -1.4, "{res:?}");
    }

    #[test]
    fn reference_must_dwarf_the_largest_system() {
        let cfg = config("kind = \"quadratic\"\nstiffness = 1.0", "kind = \"point\"", 0.5);
        assert!(chaos_scan(&cfg, &[4, 8], 63, 4).is_err());
        assert!(chaos_scan(&cfg, &[8, 4], 512, 4).is_err());
    }

    #[test]
    fn proxy_with_single_point_cloud_feels_that_point() {
        let w = Potential::quadratic(1.0);
        let mut x = vec![1.0];
        advance_proxies(&mut x, &[0.0, 0.0], &[0.0], 1, &Potential::zero(), &w, 0.1, false).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15);
    }
}

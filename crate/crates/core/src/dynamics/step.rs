// SPDX-License-Identifier: Apache-2.0

//! Explicit integrators for `dX = b(X) dt + √2 dB`.
//!
//! * `EulerMaruyama`: `x ← x + b h + √(2h) ξ`.
//! * `TamedEuler`: `x ← x + b h / (1 + h|b|) + √(2h) ξ`, with `|b|` the
//!   particle's own drift norm. The increment is bounded by 1 per step
//!   whatever the drift, which keeps superlinear interactions finite.
//! * `AdaptiveEuler`: splits each step dyadically until `max_i |b_i| h` is
//!   below the drift cap, then takes Euler sub-steps with their own noise
//!   counters.
//!
//! Ensembles advanced together share one sub-step schedule, so coupled
//! copies driven by the same noise source see identical increments.

use serde::{Deserialize, Serialize};

use super::drift::DriftWorkspace;
use super::ensemble::{center_rows, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::rng::BrownianSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    TamedEuler,
    AdaptiveEuler,
}

/// Finest dyadic subdivision of one step used by the adaptive scheme.
const MAX_SPLIT_LEVEL: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub scheme: Scheme,
    pub dt: f64,
    /// Upper bound on `|b| h` for the adaptive scheme.
    pub adaptive_drift_cap: f64,
    pub dt_min: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            scheme: Scheme::TamedEuler,
            dt: 0.01,
            adaptive_drift_cap: 0.5,
            dt_min: 1e-7,
        }
    }
}

impl StepPolicy {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        StepPolicy {
            scheme,
            dt,
            ..Default::default()
        }
    }

    /// `min(0.01, 0.1/λ)` for a fitted convexity constant `λ`.
    pub fn default_dt(lambda: f64) -> f64 {
        if lambda > 0.0 {
            (0.1 / lambda).min(0.01)
        } else {
            0.01
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.adaptive_drift_cap.is_finite() && self.adaptive_drift_cap > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "adaptive_drift_cap must be > 0, got {}",
                self.adaptive_drift_cap
            )));
        }
        if !(self.dt_min.is_finite() && self.dt_min > 0.0 && self.dt_min <= self.dt) {
            return Err(Error::InvalidArgument(format!(
                "dt_min must lie in (0, dt], got {}",
                self.dt_min
            )));
        }
        Ok(())
    }
}

/// Reusable buffers plus the model being integrated.
pub struct Integrator<'a> {
    v: &'a Potential,
    w: &'a Potential,
    policy: StepPolicy,
    workspace: DriftWorkspace,
    drifts: Vec<Vec<f64>>,
    noises: Vec<Vec<f64>>,
}

impl<'a> Integrator<'a> {
    pub fn new(v: &'a Potential, w: &'a Potential, policy: StepPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(Integrator {
            v,
            w,
            policy,
            workspace: DriftWorkspace::new(),
            drifts: Vec::new(),
            noises: Vec::new(),
        })
    }

    pub fn policy(&self) -> &StepPolicy {
        &self.policy
    }

    /// Advances one ensemble by `dt`, drawing noise from its own lineage.
    pub fn advance(&mut self, ens: &mut ParticleEnsemble) -> Result<()> {
        self.advance_group(&mut [ens])
    }

    /// Advances two ensembles with a shared step schedule.
    pub fn advance_pair(&mut self, a: &mut ParticleEnsemble, b: &mut ParticleEnsemble) -> Result<()> {
        self.advance_group(&mut [a, b])
    }

    /// Advances every ensemble of `group` by `dt`. Ensembles whose lineages
    /// coincide receive identical Brownian increments.
    pub fn advance_group(&mut self, group: &mut [&mut ParticleEnsemble]) -> Result<()> {
        let count = group.len();
        self.drifts.resize_with(count, Vec::new);
        self.noises.resize_with(count, Vec::new);
        let dt = self.policy.dt;
        let step = group.first().map_or(0, |e| e.steps_taken);

        match self.policy.scheme {
            Scheme::EulerMaruyama | Scheme::TamedEuler => {
                self.compute_drifts(group)?;
                self.draw_noise(group, step, 0);
                let tamed = self.policy.scheme == Scheme::TamedEuler;
                for (k, ens) in group.iter_mut().enumerate() {
                    apply_update(ens, &self.drifts[k], &self.noises[k], dt, tamed);
                }
            }
            Scheme::AdaptiveEuler => {
                let full: u64 = 1 << MAX_SPLIT_LEVEL;
                let mut done: u64 = 0;
                let mut substep: u32 = 1;
                while done < full {
                    self.compute_drifts(group)?;
                    let (mut worst, mut who, mut which) = (0.0f64, 0usize, 0usize);
                    for (k, (d, ens)) in self.drifts.iter().zip(group.iter()).enumerate() {
                        for (i, row) in d.chunks_exact(ens.dim).enumerate() {
                            let nb = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                            if nb > worst {
                                worst = nb;
                                who = i;
                                which = k;
                            }
                        }
                    }
                    let remaining = full - done;
                    let mut level = 0u32;
                    let mut units = full;
                    loop {
                        let h = dt * (units.min(remaining) as f64) / full as f64;
                        if worst * h <= self.policy.adaptive_drift_cap {
                            break;
                        }
                        if level == MAX_SPLIT_LEVEL || h / 2.0 < self.policy.dt_min {
                            let ens = &group[which];
                            return Err(Error::Stability {
                                particle: who,
                                drift_norm: worst,
                                dt_min: self.policy.dt_min,
                                time: ens.time + dt * done as f64 / full as f64,
                            });
                        }
                        level += 1;
                        units >>= 1;
                    }
                    let units = units.min(remaining);
                    let h = dt * units as f64 / full as f64;
                    self.draw_noise(group, step, substep);
                    for (k, ens) in group.iter_mut().enumerate() {
                        apply_update(ens, &self.drifts[k], &self.noises[k], h, false);
                    }
                    done += units;
                    substep += 1;
                }
            }
        }

        for ens in group.iter_mut() {
            if ens.centered {
                center_rows(&mut ens.positions, ens.dim);
            }
            ens.steps_taken += 1;
            ens.time = ens.steps_taken as f64 * dt;
        }
        Ok(())
    }

    fn compute_drifts(&mut self, group: &[&mut ParticleEnsemble]) -> Result<()> {
        for (k, ens) in group.iter().enumerate() {
            let buf = &mut self.drifts[k];
            buf.resize(ens.positions.len(), 0.0);
            self.workspace
                .compute(&ens.positions, ens.dim, self.v, self.w, ens.time, buf)?;
        }
        Ok(())
    }

    fn draw_noise(&mut self, group: &[&mut ParticleEnsemble], step: u64, substep: u32) {
        for k in 0..group.len() {
            let ens = &*group[k];
            if let Some(prev) = (0..k).find(|&p| {
                group[p].rng_lineage == ens.rng_lineage
                    && group[p].n == ens.n
                    && group[p].dim == ens.dim
                    && group[p].centered == ens.centered
            }) {
                let copy = self.noises[prev].clone();
                self.noises[k] = copy;
                continue;
            }
            let buf = &mut self.noises[k];
            buf.resize(ens.positions.len(), 0.0);
            fill_noise(ens, step, substep, buf);
        }
    }
}

/// Standard normal increments for every particle of `ens`; projected onto
/// the zero-mean hyperplane for centered ensembles.
pub fn fill_noise(ens: &ParticleEnsemble, step: u64, substep: u32, out: &mut [f64]) {
    fill_noise_from(&ens.rng_lineage.source(), ens, step, substep, out)
}

fn fill_noise_from(
    src: &BrownianSource,
    ens: &ParticleEnsemble,
    step: u64,
    substep: u32,
    out: &mut [f64],
) {
    let d = ens.dim;
    if ens.rng_lineage.stream_map.is_none() {
        src.fill_block(ens.rng_lineage.stream_offset, step, substep, d, out);
    } else {
        for (i, row) in out.chunks_exact_mut(d).enumerate() {
            src.fill(ens.rng_lineage.stream(i), step, substep, row);
        }
    }
    if ens.centered {
        center_rows(out, d);
    }
}

fn apply_update(ens: &mut ParticleEnsemble, drift: &[f64], noise: &[f64], h: f64, tamed: bool) {
    let d = ens.dim;
    let sigma = (2.0 * h).sqrt();
    for ((x, b), xi) in ens
        .positions
        .chunks_exact_mut(d)
        .zip(drift.chunks_exact(d))
        .zip(noise.chunks_exact(d))
    {
        let scale = if tamed {
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            h / (1.0 + h * nb)
        } else {
            h
        };
        for c in 0..d {
            x[c] += b[c] * scale + sigma * xi[c];
        }
    }
}

/// One step of `ensemble` with increments from `noise` (instead of the
/// ensemble's own lineage). Returns the advanced ensemble.
pub fn step(
    ensemble: &ParticleEnsemble,
    v: &Potential,
    w: &Potential,
    policy: &StepPolicy,
    noise: &BrownianSource,
) -> Result<ParticleEnsemble> {
    let mut next = ensemble.clone();
    next.rng_lineage.seed = noise.seed;
    Integrator::new(v, w, *policy)?.advance(&mut next)?;
    next.rng_lineage.seed = ensemble.rng_lineage.seed;
    Ok(next)
}

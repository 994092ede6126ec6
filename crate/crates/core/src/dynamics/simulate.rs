// SPDX-License-Identifier: Apache-2.0

//! Runs configured systems and emits snapshots at the observation times.
//!
//! Run `r` draws its initial sample from `derive_seed(seed, "init", r)` and
//! its Brownian increments from `derive_seed(seed, "noise", r)`, so runs are
//! independent of each other and of how they are scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::ParticleEnsemble;
use super::law::InitialLaw;
use super::step::Integrator;
use crate::config::{Coupling, SimConfig};
use crate::error::{Error, Result};
use crate::metrics::wasserstein::optimal_assignment;
use crate::rng::derive_seed;

/// Per-snapshot summary statistics of one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub mean: Vec<f64>,
    /// `(1/N) Σ |x_i|²`.
    pub second_moment: f64,
    /// Average of `|x_i − x_j|²` over ordered pairs `i ≠ j`.
    pub pairwise_second_moment: f64,
}

impl Observables {
    pub fn of(ens: &ParticleEnsemble) -> Self {
        let n = ens.n as f64;
        let mean = ens.mean();
        let m2 = ens.positions.iter().map(|x| x * x).sum::<f64>() / n;
        let mean_sq: f64 = mean.iter().map(|m| m * m).sum();
        // Σ_{i≠j} |x_i − x_j|² = 2N Σ|x_i|² − 2|Σ x_i|²
        let pairwise = (2.0 * n / (n - 1.0) * (m2 - mean_sq)).max(0.0);
        Observables {
            mean,
            second_moment: m2,
            pairwise_second_moment: pairwise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub run: usize,
    pub step: u64,
    pub time: f64,
    pub observables: Observables,
    pub ensemble: ParticleEnsemble,
}

/// Initial ensemble of run `run` drawn from `law`.
pub fn initial_ensemble(cfg: &SimConfig, law: &InitialLaw, run: usize) -> Result<ParticleEnsemble> {
    let positions = law.sample(cfg.n(), cfg.dim(), derive_seed(cfg.seed, "init", run as u64))?;
    let mut ens = ParticleEnsemble::new(
        positions,
        cfg.n(),
        cfg.dim(),
        derive_seed(cfg.seed, "noise", run as u64),
    )?;
    if cfg.projected() {
        ens.project_in_place();
    }
    Ok(ens)
}

fn check_mode(cfg: &SimConfig) -> Result<()> {
    if cfg.projected() && !cfg.v().is_zero() {
        return Err(Error::InvalidArgument(
            "projected mode requires a zero confinement potential".into(),
        ));
    }
    Ok(())
}

/// Snapshot stream of a single run.
pub struct Simulation<'a> {
    run: usize,
    integrator: Integrator<'a>,
    ensemble: ParticleEnsemble,
    observe: Vec<(u64, f64)>,
    next: usize,
    project_on_output: bool,
    failed: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: &'a SimConfig, run: usize) -> Result<Self> {
        Self::from_ensemble(cfg, run, initial_ensemble(cfg, &cfg.initial, run)?)
    }

    /// Starts from a given ensemble instead of sampling the initial law.
    pub fn from_ensemble(cfg: &'a SimConfig, run: usize, ensemble: ParticleEnsemble) -> Result<Self> {
        check_mode(cfg)?;
        Ok(Simulation {
            run,
            integrator: Integrator::new(cfg.v(), cfg.w(), cfg.dynamics)?,
            ensemble,
            observe: cfg.observation_steps(),
            next: 0,
            project_on_output: false,
            failed: false,
        })
    }

    /// Simulates the unprojected system and projects each snapshot, the
    /// alternative route to the projected dynamics.
    pub fn projected_via_raw(cfg: &'a SimConfig, run: usize) -> Result<Self> {
        check_mode(cfg)?;
        let mut ens = initial_ensemble(cfg, &cfg.initial, run)?;
        ens.centered = false;
        let mut sim = Self::from_ensemble(cfg, run, ens)?;
        sim.project_on_output = true;
        Ok(sim)
    }

    pub fn ensemble(&self) -> &ParticleEnsemble {
        &self.ensemble
    }
}

impl Iterator for Simulation<'_> {
    type Item = Result<Snapshot>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next >= self.observe.len() {
            return None;
        }
        let (target, time) = self.observe[self.next];
        self.next += 1;
        while self.ensemble.steps_taken < target {
            if let Err(e) = self.integrator.advance(&mut self.ensemble) {
                self.failed = true;
                return Some(Err(e.in_run(self.run)));
            }
        }
        let ensemble = if self.project_on_output {
            self.ensemble.project()
        } else {
            self.ensemble.clone()
        };
        Some(Ok(Snapshot {
            run: self.run,
            step: target,
            time,
            observables: Observables::of(&ensemble),
            ensemble,
        }))
    }
}

/// Every run of `cfg`, each as its list of snapshots.
pub fn simulate(cfg: &SimConfig) -> Result<Vec<Vec<Snapshot>>> {
    (0..cfg.system.runs)
        .into_par_iter()
        .map(|run| Simulation::new(cfg, run)?.collect::<Result<Vec<_>>>())
        .collect()
}

/// Squared coupling distance `(1/N) Σ |a_i − b_i|²`.
pub fn coupling_distance(a: &ParticleEnsemble, b: &ParticleEnsemble) -> f64 {
    a.positions
        .iter()
        .zip(&b.positions)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSnapshot {
    pub run: usize,
    pub step: u64,
    pub time: f64,
    pub xi: f64,
    pub a: ParticleEnsemble,
    pub b: ParticleEnsemble,
}

/// Draws both initial ensembles of run `run` and pairs their particles
/// according to `coupling`. Both ensembles share one noise lineage. When
/// the two laws are equal both sides get the same sample.
pub fn coupled_initial(
    cfg: &SimConfig,
    law_a: &InitialLaw,
    law_b: &InitialLaw,
    coupling: Coupling,
    run: usize,
) -> Result<(ParticleEnsemble, ParticleEnsemble)> {
    let (n, d) = (cfg.n(), cfg.dim());
    let a = law_a.sample(n, d, derive_seed(cfg.seed, "init", run as u64))?;
    // equal laws share the sample, so the coupled copies coincide
    let label = if law_a == law_b { "init" } else { "init_b" };
    let b = law_b.sample(n, d, derive_seed(cfg.seed, label, run as u64))?;
    // pair the centered samples, which is what gets simulated
    let (mut a_centered, mut b_centered) = (a.clone(), b.clone());
    if cfg.projected() {
        super::ensemble::center_rows(&mut a_centered, d);
        super::ensemble::center_rows(&mut b_centered, d);
    }
    let order: Vec<usize> = match coupling {
        Coupling::Independent => (0..n).collect(),
        Coupling::Comonotone1d => {
            if d != 1 {
                return Err(Error::InvalidArgument(format!(
                    "comonotone coupling needs dimension 1, got {d}"
                )));
            }
            let mut ia: Vec<usize> = (0..n).collect();
            let mut ib: Vec<usize> = (0..n).collect();
            ia.sort_by(|&i, &j| a_centered[i].total_cmp(&a_centered[j]));
            ib.sort_by(|&i, &j| b_centered[i].total_cmp(&b_centered[j]));
            let mut order = vec![0; n];
            for (ra, rb) in ia.iter().zip(&ib) {
                order[*ra] = *rb;
            }
            order
        }
        Coupling::OptimalSmallN => optimal_assignment(&a_centered, &b_centered, d, 2.0)?.0,
    };
    let mut paired = Vec::with_capacity(n * d);
    for &j in &order {
        paired.extend_from_slice(&b[j * d..(j + 1) * d]);
    }
    let noise = derive_seed(cfg.seed, "noise", run as u64);
    let mut ea = ParticleEnsemble::new(a, n, d, noise)?;
    let mut eb = ParticleEnsemble::new(paired, n, d, noise)?;
    if cfg.projected() {
        ea.project_in_place();
        eb.project_in_place();
    }
    Ok((ea, eb))
}

/// Snapshot stream of one synchronously coupled run.
pub struct CoupledSimulation<'a> {
    run: usize,
    integrator: Integrator<'a>,
    a: ParticleEnsemble,
    b: ParticleEnsemble,
    observe: Vec<(u64, f64)>,
    next: usize,
    failed: bool,
}

impl<'a> CoupledSimulation<'a> {
    pub fn new(
        cfg: &'a SimConfig,
        law_a: &InitialLaw,
        law_b: &InitialLaw,
        coupling: Coupling,
        run: usize,
    ) -> Result<Self> {
        let (a, b) = coupled_initial(cfg, law_a, law_b, coupling, run)?;
        Self::from_pair(cfg, run, a, b)
    }

    pub fn from_pair(cfg: &'a SimConfig, run: usize, a: ParticleEnsemble, b: ParticleEnsemble) -> Result<Self> {
        check_mode(cfg)?;
        if a.n != b.n || a.dim != b.dim {
            return Err(Error::InvalidArgument("coupled ensembles differ in shape".into()));
        }
        Ok(CoupledSimulation {
            run,
            integrator: Integrator::new(cfg.v(), cfg.w(), cfg.dynamics)?,
            a,
            b,
            observe: cfg.observation_steps(),
            next: 0,
            failed: false,
        })
    }
}

impl Iterator for CoupledSimulation<'_> {
    type Item = Result<CoupledSnapshot>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next >= self.observe.len() {
            return None;
        }
        let (target, time) = self.observe[self.next];
        self.next += 1;
        while self.a.steps_taken < target {
            if let Err(e) = self.integrator.advance_pair(&mut self.a, &mut self.b) {
                self.failed = true;
                return Some(Err(e.in_run(self.run)));
            }
        }
        Some(Ok(CoupledSnapshot {
            run: self.run,
            step: target,
            time,
            xi: coupling_distance(&self.a, &self.b),
            a: self.a.clone(),
            b: self.b.clone(),
        }))
    }
}

/// Every run of a coupled experiment. Uses `cfg.initial` and
/// `cfg.initial_b` (falling back to `cfg.initial`).
pub fn coupled_simulate(cfg: &SimConfig, coupling: Coupling) -> Result<Vec<Vec<CoupledSnapshot>>> {
    let law_a = &cfg.initial;
    let law_b = cfg.initial_b.as_ref().unwrap_or(law_a);
    (0..cfg.system.runs)
        .into_par_iter()
        .map(|run| CoupledSimulation::new(cfg, law_a, law_b, coupling, run)?.collect::<Result<Vec<_>>>())
        .collect()
}

// SPDX-License-Identifier: Apache-2.0

//! Particle systems, integrators and synchronous couplings.

pub mod drift;
pub mod ensemble;
pub mod law;
pub mod simulate;
pub mod step;

pub use drift::{drift, DriftWorkspace};
pub use ensemble::{ParticleEnsemble, RngLineage};
pub use law::{InitialLaw, LawKind};
pub use simulate::{
    coupled_initial, coupled_simulate, coupling_distance, initial_ensemble, simulate, CoupledSimulation,
    CoupledSnapshot, Observables, Simulation, Snapshot,
};
pub use step::{fill_noise, step, Integrator, Scheme, StepPolicy};

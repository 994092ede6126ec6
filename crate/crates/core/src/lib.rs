// SPDX-License-Identifier: Apache-2.0

//! Particle simulation of granular-media McKean–Vlasov dynamics.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod output;
pub mod potentials;
pub mod rng;

pub use config::{Coupling, Mode, SimConfig};
pub use dynamics::{InitialLaw, ParticleEnsemble, Scheme, StepPolicy};
pub use error::{Error, Result};
pub use potentials::{ConditionReport, Potential, PotentialKind};
pub use rng::BrownianSource;

// SPDX-License-Identifier: Apache-2.0

pub mod chaos;
pub mod concentration;
pub mod decay;
pub mod exp_moment;
pub mod fit;

pub use chaos::{chaos_scan, ChaosScanResult};
pub use concentration::{concentration_suite, default_r_grid, ConcentrationResult, ShiftedTail};
pub use decay::{decay_experiment, uniform_convex_decay, DecayResult, WindowFit};
pub use exp_moment::{exp_moment_experiment, ExpMomentResult};
pub use fit::{linear_fit, weighted_linear_fit, LinearFit};

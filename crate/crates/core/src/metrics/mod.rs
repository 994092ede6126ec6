// SPDX-License-Identifier: Apache-2.0

//! Moment estimators, Wasserstein distances and exponential square moments.

pub mod expmoment;
pub mod moments;
pub mod wasserstein;

pub use expmoment::{exp_square_moment, prop_t1_bound, ExpMomentPoint, ExpMomentSeries};
pub use moments::{ensemble_moment, ensemble_pairwise_moment, moment, pairwise_moment, MomentSeries};
pub use wasserstein::{
    assignment_exact, coupled_upper, optimal_assignment, sliced_w2, wasserstein_1d, DistanceEstimate,
    DistanceMethod, ASSIGNMENT_CAP,
};

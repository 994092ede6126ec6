// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A tabulated potential was queried outside its grid.
    #[error("coordinate {coordinate} = {value} lies outside the tabulated range [-{range}, {range}]")]
    Domain {
        coordinate: usize,
        value: f64,
        range: f64,
    },

    #[error("non-finite interaction gradient between particles {i} and {j} at t = {time}")]
    NonFinite { i: usize, j: usize, time: f64 },

    /// The adaptive scheme could not meet its drift cap above `dt_min`.
    #[error(
        "adaptive step hit dt_min = {dt_min} at t = {time}: particle {particle} has |b| = {drift_norm}"
    )]
    Stability {
        particle: usize,
        drift_norm: f64,
        dt_min: f64,
        time: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("assignment solver is capped at {cap} points per side (got {count}); use sliced_w2 for larger samples")]
    AssignmentTooLarge { count: usize, cap: usize },

    /// Requested exponential moment is outside the regime covered by the bound.
    #[error("delta = {delta} is not below lambda / (2 A) = {limit}; the exponential square moment bound does not apply")]
    BoundRegime { delta: f64, limit: f64 },

    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn in_run(self, run: usize) -> Self {
        match self {
            e @ Error::Run { .. } => e,
            e => Error::Run {
                run,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

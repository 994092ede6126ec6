// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ensemble::center_rows;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawKind {
    /// Isotropic Gaussian; an empty `mean` means the origin.
    Gaussian {
        #[serde(default)]
        mean: Vec<f64>,
        variance: f64,
    },
    /// Uniform on `[−h, h]^d`.
    Uniform { half_width: f64 },
    /// Point `a` with probability `weight`, else point `b`.
    TwoPoint { a: Vec<f64>, b: Vec<f64>, weight: f64 },
    /// Empirical law of the rows of a whitespace- or comma-separated file.
    SampleFile { path: PathBuf },
    /// Dirac mass at a point (empty means the origin).
    Point {
        #[serde(default)]
        at: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialLaw {
    #[serde(flatten)]
    pub kind: LawKind,
    /// Shift drawn samples so that their empirical mean is exactly zero.
    #[serde(default)]
    pub center_to_zero: bool,
}

impl InitialLaw {
    pub fn gaussian(variance: f64) -> Self {
        InitialLaw {
            kind: LawKind::Gaussian {
                mean: Vec::new(),
                variance,
            },
            center_to_zero: false,
        }
    }

    pub fn uniform(half_width: f64) -> Self {
        InitialLaw {
            kind: LawKind::Uniform { half_width },
            center_to_zero: false,
        }
    }

    pub fn two_point(a: Vec<f64>, b: Vec<f64>, weight: f64) -> Self {
        InitialLaw {
            kind: LawKind::TwoPoint { a, b, weight },
            center_to_zero: false,
        }
    }

    pub fn point(at: Vec<f64>) -> Self {
        InitialLaw {
            kind: LawKind::Point { at },
            center_to_zero: false,
        }
    }

    pub fn centered(mut self) -> Self {
        self.center_to_zero = true;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let check_point = |p: &[f64], name: &str| -> Result<()> {
            if !p.is_empty() && p.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "initial law `{name}` has {} coordinates, dimension is {dim}",
                    p.len()
                )));
            }
            Ok(())
        };
        match &self.kind {
            LawKind::Gaussian { mean, variance } => {
                check_point(mean, "mean")?;
                if !(variance.is_finite() && *variance >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "gaussian variance must be >= 0, got {variance}"
                    )));
                }
            }
            LawKind::Uniform { half_width } => {
                if !(half_width.is_finite() && *half_width >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "uniform half_width must be >= 0, got {half_width}"
                    )));
                }
            }
            LawKind::TwoPoint { a, b, weight } => {
                check_point(a, "a")?;
                check_point(b, "b")?;
                if a.is_empty() || b.is_empty() {
                    return Err(Error::InvalidArgument("two_point needs both points".into()));
                }
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::InvalidArgument(format!(
                        "two_point weight must lie in [0, 1], got {weight}"
                    )));
                }
            }
            LawKind::SampleFile { .. } => {}
            LawKind::Point { at } => check_point(at, "at")?,
        }
        Ok(())
    }

    /// Draws `n` i.i.d. points, row-major.
    pub fn sample(&self, n: usize, dim: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let at = |p: &[f64], k: usize| if p.is_empty() { 0.0 } else { p[k] };
        let mut out = Vec::with_capacity(n * dim);
        match &self.kind {
            LawKind::Gaussian { mean, variance } => {
                let sd = variance.sqrt();
                for _ in 0..n {
                    for k in 0..dim {
                        let z: f64 = rng.sample(StandardNormal);
                        out.push(at(mean, k) + sd * z);
                    }
                }
            }
            LawKind::Uniform { half_width } => {
                for _ in 0..n * dim {
                    out.push(half_width * (2.0 * rng.random::<f64>() - 1.0));
                }
            }
            LawKind::TwoPoint { a, b, weight } => {
                for _ in 0..n {
                    let p = if rng.random::<f64>() < *weight { a } else { b };
                    out.extend_from_slice(p);
                }
            }
            LawKind::SampleFile { path } => {
                let rows = read_sample_file(path, dim)?;
                for _ in 0..n {
                    let r = rng.random_range(0..rows.len());
                    out.extend_from_slice(&rows[r]);
                }
            }
            LawKind::Point { at: p } => {
                for _ in 0..n {
                    for k in 0..dim {
                        out.push(at(p, k));
                    }
                }
            }
        }
        if self.center_to_zero {
            center_rows(&mut out, dim);
        }
        Ok(out)
    }
}

fn read_sample_file(path: &PathBuf, dim: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        let row = row.map_err(|e| Error::InvalidArgument(format!(
            "{}:{}: {e}",
            path.display(),
            line_no + 1
        )))?;
        if row.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "{}:{}: expected {dim} columns, found {}",
                path.display(),
                line_no + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no samples", path.display())));
    }
    Ok(rows)
}

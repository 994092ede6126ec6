// SPDX-License-Identifier: Apache-2.0

//! Mean-field drift `b_i = −∇V(x_i) − (1/N) Σ_j ∇W(x_i − x_j)`.
//!
//! Each unordered pair is evaluated once: `g_ij = ∇W(x_i − x_j)` for `i < j`
//! goes into a packed upper-triangular buffer, and row `i` then reads
//! `g_ij` for `j > i` and `−g_ji` for `j < i`. Every row is summed in
//! ascending `j`, so the result does not depend on how rows are spread over
//! threads.

use rayon::prelude::*;

use super::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::potentials::Potential;

/// Rows per parallel task; below this many particles everything is serial.
const PARALLEL_THRESHOLD: usize = 128;

#[derive(Debug, Default)]
pub struct DriftWorkspace {
    pairs: Vec<f64>,
}

#[inline]
fn row_offset(i: usize, n: usize) -> usize {
    // number of pairs (a, b), a < b, with a < i
    i * n - i * (i + 1) / 2
}

impl DriftWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the drift of every particle into `out` (row-major, `n × dim`).
    pub fn compute(
        &mut self,
        positions: &[f64],
        dim: usize,
        v: &Potential,
        w: &Potential,
        time: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let n = positions.len() / dim;
        debug_assert_eq!(out.len(), positions.len());
        let parallel = n >= PARALLEL_THRESHOLD;

        if w.is_zero() {
            out.iter_mut().for_each(|o| *o = 0.0);
        } else {
            let npairs = n * (n - 1) / 2;
            self.pairs.resize(npairs * dim, 0.0);
            let fill_row = |i: usize, chunk: &mut [f64]| -> Result<()> {
                let xi = &positions[i * dim..(i + 1) * dim];
                let mut diff = [0.0f64; 8];
                let mut heap;
                let diff: &mut [f64] = if dim <= 8 {
                    &mut diff[..dim]
                } else {
                    heap = vec![0.0; dim];
                    &mut heap
                };
                for (k, g) in chunk.chunks_exact_mut(dim).enumerate() {
                    let j = i + 1 + k;
                    let xj = &positions[j * dim..(j + 1) * dim];
                    for c in 0..dim {
                        diff[c] = xi[c] - xj[c];
                    }
                    w.grad_into(diff, g)?;
                }
                Ok(())
            };
            let chunks = split_rows(&mut self.pairs, n, dim);
            if parallel {
                chunks
                    .into_par_iter()
                    .enumerate()
                    .try_for_each(|(i, c)| fill_row(i, c))?;
            } else {
                for (i, c) in chunks.into_iter().enumerate() {
                    fill_row(i, c)?;
                }
            }

            let pairs = &self.pairs;
            let inv_n = 1.0 / n as f64;
            let sum_row = |i: usize, row: &mut [f64]| {
                row.iter_mut().for_each(|r| *r = 0.0);
                for j in 0..i {
                    let base = (row_offset(j, n) + (i - j - 1)) * dim;
                    for c in 0..dim {
                        row[c] -= pairs[base + c];
                    }
                }
                let base = row_offset(i, n) * dim;
                for g in pairs[base..base + (n - 1 - i) * dim].chunks_exact(dim) {
                    for c in 0..dim {
                        row[c] += g[c];
                    }
                }
                for r in row.iter_mut() {
                    *r *= -inv_n;
                }
            };
            if parallel {
                out.par_chunks_mut(dim)
                    .enumerate()
                    .for_each(|(i, row)| sum_row(i, row));
            } else {
                for (i, row) in out.chunks_mut(dim).enumerate() {
                    sum_row(i, row);
                }
            }
        }

        if !v.is_zero() {
            let mut g = vec![0.0; dim];
            for (i, row) in out.chunks_mut(dim).enumerate() {
                v.grad_into(&positions[i * dim..(i + 1) * dim], &mut g)?;
                for c in 0..dim {
                    row[c] -= g[c];
                }
            }
        }

        if let Some(bad) = out.iter().position(|x| !x.is_finite()) {
            return Err(self.locate_non_finite(positions, dim, v, w, bad / dim, time));
        }
        Ok(())
    }

    fn locate_non_finite(
        &self,
        positions: &[f64],
        dim: usize,
        v: &Potential,
        w: &Potential,
        i: usize,
        time: f64,
    ) -> Error {
        let n = positions.len() / dim;
        let xi = &positions[i * dim..(i + 1) * dim];
        if let Ok(g) = v.grad(xi) {
            if g.iter().any(|x| !x.is_finite()) {
                return Error::NonFinite { i, j: i, time };
            }
        }
        for j in 0..n {
            let diff: Vec<f64> = xi
                .iter()
                .zip(&positions[j * dim..(j + 1) * dim])
                .map(|(a, b)| a - b)
                .collect();
            if w.grad(&diff).map_or(true, |g| g.iter().any(|x| !x.is_finite())) {
                return Error::NonFinite { i, j, time };
            }
        }
        // the overflow happened in the accumulation itself
        Error::NonFinite { i, j: i, time }
    }
}

fn split_rows(buf: &mut [f64], n: usize, dim: usize) -> Vec<&mut [f64]> {
    let mut rest = buf;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let len = (n - 1 - i) * dim;
        let (head, tail) = rest.split_at_mut(len);
        rows.push(head);
        rest = tail;
    }
    rows
}

/// Drift of every particle of `ensemble`, row-major.
pub fn drift(ensemble: &ParticleEnsemble, v: &Potential, w: &Potential) -> Result<Vec<f64>> {
    let mut out = vec![0.0; ensemble.positions.len()];
    DriftWorkspace::new().compute(
        &ensemble.positions,
        ensemble.dim,
        v,
        w,
        ensemble.time,
        &mut out,
    )?;
    Ok(out)
}

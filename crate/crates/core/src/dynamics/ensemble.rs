// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::BrownianSource;

/// Where a particle's Brownian increments come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngLineage {
    pub seed: u64,
    /// Particle `i` draws from stream `stream_offset + i` unless a
    /// `stream_map` assigns streams explicitly.
    pub stream_offset: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream_map: Option<Vec<u64>>,
}

impl RngLineage {
    pub fn new(seed: u64) -> Self {
        RngLineage {
            seed,
            stream_offset: 0,
            stream_map: None,
        }
    }

    pub fn source(&self) -> BrownianSource {
        BrownianSource::new(self.seed)
    }

    #[inline]
    pub fn stream(&self, particle: usize) -> u64 {
        match &self.stream_map {
            Some(map) => map[particle],
            None => self.stream_offset + particle as u64,
        }
    }
}

/// Positions of `n` particles in `ℝ^dim` at one time point, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub time: f64,
    pub steps_taken: u64,
    /// Set for projected ensembles; stepping then keeps the mean at zero.
    pub centered: bool,
    pub rng_lineage: RngLineage,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>, n: usize, dim: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need N >= 2 particles, got {n}")));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if positions.len() != n * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} coordinates for N = {n}, d = {dim}, got {}",
                n * dim,
                positions.len()
            )));
        }
        if let Some(k) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite initial coordinate at particle {}",
                k / dim
            )));
        }
        Ok(ParticleEnsemble {
            positions,
            n,
            dim,
            time: 0.0,
            steps_taken: 0,
            centered: false,
            rng_lineage: RngLineage::new(seed),
        })
    }

    #[inline]
    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean(&self) -> Vec<f64> {
        mean_rows(&self.positions, self.dim)
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().all(|v| v.is_finite())
    }

    /// Subtracts the ensemble mean from every particle and marks the
    /// ensemble as centered.
    pub fn project(&self) -> ParticleEnsemble {
        let mut out = self.clone();
        out.project_in_place();
        out
    }

    pub fn project_in_place(&mut self) {
        center_rows(&mut self.positions, self.dim);
        self.centered = true;
    }

    /// Relabels particles: new particle `k` is old particle `perm[k]`, and
    /// it keeps the old particle's noise stream.
    pub fn permuted(&self, perm: &[usize]) -> ParticleEnsemble {
        let d = self.dim;
        let mut positions = Vec::with_capacity(self.positions.len());
        for &p in perm {
            positions.extend_from_slice(self.particle(p));
        }
        let streams = perm.iter().map(|&p| self.rng_lineage.stream(p)).collect();
        let mut out = self.clone();
        out.positions = positions;
        out.rng_lineage.stream_map = Some(streams);
        debug_assert_eq!(out.positions.len(), self.n * d);
        out
    }
}

pub(crate) fn mean_rows(values: &[f64], dim: usize) -> Vec<f64> {
    let n = values.len() / dim;
    let mut mean = vec![0.0; dim];
    for row in values.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

pub(crate) fn center_rows(values: &mut [f64], dim: usize) {
    let mean = mean_rows(values, dim);
    for row in values.chunks_exact_mut(dim) {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_subtracts_mean() {
        let e = ParticleEnsemble::new(vec![1.0, 2.0, 3.0], 3, 1, 0).unwrap();
        let p = e.project();
        assert_eq!(p.positions, vec![-1.0, 0.0, 1.0]);
        assert!(p.centered);
        assert_eq!(p.project().positions, p.positions);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ParticleEnsemble::new(vec![1.0], 1, 1, 0).is_err());
        assert!(ParticleEnsemble::new(vec![1.0, 2.0, 3.0], 2, 1, 0).is_err());
        assert!(ParticleEnsemble::new(vec![1.0, f64::NAN], 2, 1, 0).is_err());
    }

    #[test]
    fn permuted_keeps_streams_with_particles() {
        let e = ParticleEnsemble::new(vec![1.0, 2.0, 3.0], 3, 1, 0).unwrap();
        let p = e.permuted(&[2, 0, 1]);
        assert_eq!(p.positions, vec![3.0, 1.0, 2.0]);
        assert_eq!(p.rng_lineage.stream(0), 2);
        assert_eq!(p.rng_lineage.stream(1), 0);
    }
}

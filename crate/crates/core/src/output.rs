// SPDX-License-Identifier: Apache-2.0

//! Result files. Every experiment writes `<experiment>-<hash>.json`, a
//! summary echoing the canonical config, next to `<experiment>-<hash>.csv`
//! with columns `time,value,stderr,method,p` followed by experiment-specific
//! ones. Snapshots go to JSONL and, optionally, to a binary file of frames:
//!
//! | offset | type      | field              |
//! |--------|-----------|--------------------|
//! | 0      | `[u8; 4]` | magic `GMPE`       |
//! | 4      | `u32`     | version            |
//! | 8      | `u64`     | N                  |
//! | 16     | `u64`     | d                  |
//! | 24     | `f64`     | time               |
//! | 32     | `f64 × N·d` | positions, row-major |
//!
//! All integers and floats are little-endian.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::dynamics::{CoupledSnapshot, ParticleEnsemble, Snapshot};
use crate::error::{Error, Result};
use crate::experiments::{ChaosScanResult, ConcentrationResult, DecayResult, ExpMomentResult};
use crate::metrics::MomentSeries;

pub const BIN_MAGIC: [u8; 4] = *b"GMPE";
pub const BIN_VERSION: u32 = 1;
pub const BIN_HEADER_LEN: usize = 32;

/// An output directory. File names are checked so that nothing lands
/// outside it.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path of a plain file name inside the directory.
    pub fn path(&self, name: &str) -> Result<PathBuf> {
        let plain = !name.is_empty()
            && name != "."
            && name != ".."
            && !name.contains(['/', '\\'])
            && Path::new(name).components().count() == 1;
        if !plain {
            return Err(Error::InvalidArgument(format!("`{name}` is not a plain file name")));
        }
        Ok(self.root.join(name))
    }

    fn create_file(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.path(name)?;
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok((path, BufWriter::new(file)))
    }

    /// Writes `<experiment>-<hash>.json`.
    pub fn write_summary<T: Serialize>(&self, summary: &Summary<T>) -> Result<PathBuf> {
        let name = format!("{}-{}.json", summary.experiment, summary.config_hash);
        let (path, mut w) = self.create_file(&name)?;
        serde_json::to_writer_pretty(&mut w, summary).map_err(|e| Error::io(&path, e.into()))?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Writes `<experiment>-<hash>.csv`.
    pub fn write_csv(&self, experiment: &str, hash: &str, table: &SeriesTable) -> Result<PathBuf> {
        let (path, w) = self.create_file(&format!("{experiment}-{hash}.csv"))?;
        let mut out = csv::Writer::from_writer(w);
        let wrap = |e: csv::Error| Error::io(&path, e.into());
        let mut header = vec!["time", "value", "stderr", "method", "p"];
        header.extend(table.extra_columns.iter().map(String::as_str));
        out.write_record(&header).map_err(wrap)?;
        for row in &table.rows {
            let mut rec = vec![
                row.time.to_string(),
                row.value.to_string(),
                row.stderr.to_string(),
                row.method.clone(),
                row.p.map(|p| p.to_string()).unwrap_or_default(),
            ];
            rec.extend(row.extra.iter().cloned());
            out.write_record(&rec).map_err(wrap)?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Writes one JSON object per snapshot to `<experiment>-<hash>.jsonl`.
    pub fn write_snapshots_jsonl(
        &self,
        experiment: &str,
        hash: &str,
        runs: &[Vec<Snapshot>],
        positions: bool,
    ) -> Result<PathBuf> {
        let (path, mut w) = self.create_file(&format!("{experiment}-{hash}.jsonl"))?;
        for snap in runs.iter().flatten() {
            let line = SnapshotLine {
                run: snap.run,
                step: snap.step,
                time: snap.time,
                observables: &snap.observables,
                positions: positions.then_some(snap.ensemble.positions.as_slice()),
            };
            serde_json::to_writer(&mut w, &line).map_err(|e| Error::io(&path, e.into()))?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Writes the frames of one run to `<experiment>-<hash>-run<run>.bin`.
    pub fn write_snapshots_bin(&self, experiment: &str, hash: &str, run: &[Snapshot]) -> Result<PathBuf> {
        let index = run.first().map_or(0, |s| s.run);
        let (path, mut w) = self.create_file(&format!("{experiment}-{hash}-run{index}.bin"))?;
        for snap in run {
            write_frame(&mut w, &snap.ensemble, snap.time).map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct SnapshotLine<'a> {
    run: usize,
    step: u64,
    time: f64,
    observables: &'a crate::dynamics::Observables,
    #[serde(skip_serializing_if = "Option::is_none")]
    positions: Option<&'a [f64]>,
}

pub fn write_frame(w: &mut impl Write, ens: &ParticleEnsemble, time: f64) -> std::io::Result<()> {
    w.write_all(&BIN_MAGIC)?;
    w.write_all(&BIN_VERSION.to_le_bytes())?;
    w.write_all(&(ens.n as u64).to_le_bytes())?;
    w.write_all(&(ens.dim as u64).to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    for x in &ens.positions {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// One decoded binary frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub n: usize,
    pub dim: usize,
    pub time: f64,
    pub positions: Vec<f64>,
}

/// Decodes every frame of a binary snapshot file.
pub fn read_frames(path: &Path) -> Result<Vec<Frame>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::InvalidArgument(format!("{}: {what}", path.display()));
    let u64_at = |b: &[u8], at: usize| u64::from_le_bytes(b[at..at + 8].try_into().unwrap());
    let mut frames = Vec::new();
    let mut rest = bytes.as_slice();
    while !rest.is_empty() {
        if rest.len() < BIN_HEADER_LEN || rest[..4] != BIN_MAGIC {
            return Err(bad("bad frame header"));
        }
        let version = u32::from_le_bytes(rest[4..8].try_into().unwrap());
        if version != BIN_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let (n, dim) = (u64_at(rest, 8) as usize, u64_at(rest, 16) as usize);
        let time = f64::from_bits(u64_at(rest, 24));
        let len = n.checked_mul(dim).and_then(|c| c.checked_mul(8)).ok_or_else(|| bad("frame too large"))?;
        let body = rest.get(BIN_HEADER_LEN..BIN_HEADER_LEN + len).ok_or_else(|| bad("truncated frame"))?;
        let positions = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        frames.push(Frame { n, dim, time, positions });
        rest = &rest[BIN_HEADER_LEN + len..];
    }
    Ok(frames)
}

/// JSON summary of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary<T> {
    pub experiment: String,
    pub config_hash: String,
    pub passed: bool,
    /// Canonical TOML of the config that produced the result.
    pub config: String,
    pub result: T,
}

impl<T> Summary<T> {
    pub fn new(experiment: &str, cfg: &SimConfig, passed: bool, result: T) -> Self {
        Summary {
            experiment: experiment.to_string(),
            config_hash: cfg.content_hash(),
            passed,
            config: cfg.canonical(),
            result,
        }
    }
}

/// Parses a summary file and re-validates its config echo, checking that
/// the recorded hash matches.
pub fn revalidate_summary(text: &str) -> Result<(Summary<serde_json::Value>, SimConfig)> {
    let summary: Summary<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("not a summary: {e}")))?;
    let cfg = SimConfig::parse(&summary.config).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if cfg.content_hash() != summary.config_hash {
        return Err(Error::InvalidArgument(format!(
            "config hash {} does not match the echoed config ({})",
            summary.config_hash,
            cfg.content_hash()
        )));
    }
    Ok((summary, cfg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub time: f64,
    pub value: f64,
    pub stderr: f64,
    pub method: String,
    pub p: Option<u32>,
    pub extra: Vec<String>,
}

/// Rows under the fixed leading columns plus `extra_columns`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesTable {
    pub extra_columns: Vec<String>,
    pub rows: Vec<SeriesRow>,
}

impl SeriesTable {
    fn new(extra: &[&str]) -> Self {
        SeriesTable {
            extra_columns: extra.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, time: f64, value: f64, stderr: f64, method: &str, p: Option<u32>, extra: Vec<String>) {
        debug_assert_eq!(extra.len(), self.extra_columns.len());
        self.rows.push(SeriesRow { time, value, stderr, method: method.into(), p, extra });
    }

    pub fn moments(series: &[MomentSeries], methods: &[&str]) -> Self {
        let mut t = SeriesTable::new(&[]);
        for (s, m) in series.iter().zip(methods) {
            for k in 0..s.times.len() {
                t.push(s.times[k], s.values[k], s.stderr[k], m, Some(s.order_2k), vec![]);
            }
        }
        t
    }

    pub fn decay(r: &DecayResult) -> Self {
        let mut t = SeriesTable::new(&["envelope_poly", "envelope_exp"]);
        for k in 0..r.times.len() {
            t.push(
                r.times[k],
                r.xi[k],
                r.xi_stderr[k],
                "coupled",
                Some(2),
                vec![r.envelope_poly[k].to_string(), r.envelope_exp[k].to_string()],
            );
        }
        t
    }

    /// Run-averaged `ξ(t)` of raw coupled snapshots.
    pub fn coupled(runs: &[Vec<CoupledSnapshot>]) -> Self {
        let mut t = SeriesTable::new(&[]);
        let Some(first) = runs.first() else { return t };
        let r = runs.len() as f64;
        for (k, snap) in first.iter().enumerate() {
            let xs: Vec<f64> = runs.iter().map(|run| run[k].xi).collect();
            let mean = xs.iter().sum::<f64>() / r;
            let var = if runs.len() > 1 {
                xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0)
            } else {
                0.0
            };
            t.push(snap.time, mean, (var / r).sqrt(), "coupled", Some(2), vec![]);
        }
        t
    }

    pub fn chaos(r: &ChaosScanResult) -> Self {
        let mut t = SeriesTable::new(&["N"]);
        for k in 0..r.n_values.len() {
            t.push(r.sup_times[k], r.errors[k], r.stderr[k], "proxy", Some(2), vec![r.n_values[k].to_string()]);
        }
        t
    }

    pub fn concentration(r: &ConcentrationResult) -> Self {
        let mut t = SeriesTable::new(&["r", "bound_fitted", "bound_pipeline", "unreliable", "shifted_tail"]);
        for k in 0..r.r_grid.len() {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            t.push(
                r.horizon,
                r.empirical_tail[k],
                r.tail_stderr[k],
                "tail",
                None,
                vec![
                    r.r_grid[k].to_string(),
                    r.bound_fitted[k].to_string(),
                    opt(r.bound_pipeline.get(k).copied()),
                    r.unreliable[k].to_string(),
                    opt(r.shifted.empirical_tail[k]),
                ],
            );
        }
        t
    }

    pub fn exp_moment(r: &ExpMomentResult) -> Self {
        let mut t = SeriesTable::new(&["batch_median", "heavy_tail", "bound"]);
        for p in &r.series.points {
            t.push(
                p.time,
                p.estimate,
                p.stderr,
                "exp_square",
                Some(2),
                vec![p.batch_median.to_string(), p.heavy_tail.to_string(), r.bound.to_string()],
            );
        }
        t
    }
}

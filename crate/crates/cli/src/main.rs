// SPDX-License-Identifier: Apache-2.0

//! `granular`: command-line front end to granular-core.
//!
//! Exit status is 0 when every pass/fail flag of the run holds, 2 when an
//! experiment reports a bound violation, and 1 on usage, config or runtime
//! errors. Diagnostics go to stderr; stdout carries only machine output
//! (JSON for `check-potential`, written paths otherwise).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use granular_core::config::{parse_overriding, OutputFormat};
use granular_core::dynamics::simulate;
use granular_core::experiments::{
    chaos_scan, concentration_suite, decay_experiment, default_r_grid, exp_moment_experiment,
    uniform_convex_decay,
};
use granular_core::metrics::{moment, pairwise_moment};
use granular_core::output::{revalidate_summary, OutputDir, SeriesTable, Summary};
use granular_core::SimConfig;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "granular", version, about = "Granular-media particle simulations and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probe the declared constants of V and W and print the reports.
    CheckPotential(Common),
    /// Simulate the particle system and write snapshots and moments.
    Simulate(Common),
    /// Coupled two-law decay of ξ(t) against its envelopes.
    Decay(Common),
    /// Propagation-of-chaos error scan over N.
    ChaosScan(Common),
    /// Deviation tails of the empirical average of a test function.
    Concentration(Common),
    /// Exponential square moment of two copies started together.
    ExpMoment(Common),
    /// Re-validate the summaries in an output directory and tabulate them.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "U64")]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, value_name = "INT")]
    threads: Option<usize>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Skip the probe checks of declared potential constants.
    #[arg(long)]
    unchecked: bool,
    /// Snapshot formats, overriding `output.formats`.
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, value_name = "INT")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
    Bin,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Jsonl => OutputFormat::Jsonl,
            Format::Bin => OutputFormat::Bin,
        }
    }
}

enum Outcome {
    Passed,
    Violated,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Violated) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::CheckPotential(c) => check_potential(&c),
        Command::Simulate(c) => with_pool(c.threads, || simulate_cmd(&c)),
        Command::Decay(c) => with_pool(c.threads, || decay_cmd(&c)),
        Command::ChaosScan(c) => with_pool(c.threads, || chaos_cmd(&c)),
        Command::Concentration(c) => with_pool(c.threads, || concentration_cmd(&c)),
        Command::ExpMoment(c) => with_pool(c.threads, || exp_moment_cmd(&c)),
        Command::Report(r) => with_pool(r.threads, || report(&r.out)),
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(t);
    }
    builder.build().context("building the worker pool")?.install(f)
}

fn load(c: &Common, force_unchecked: bool) -> Result<SimConfig> {
    let text = fs::read_to_string(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
    let mut cfg = parse_overriding(&text, Some(c.seed), c.unchecked || force_unchecked)
        .map_err(|e| anyhow::anyhow!("{}:\n{e}", c.config.display()))?;
    if !c.format.is_empty() {
        cfg.output.formats = c.format.iter().map(|f| (*f).into()).collect();
    }
    Ok(cfg)
}

fn out_dir(c: &Common, cfg: &SimConfig) -> Result<OutputDir> {
    let root = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok(OutputDir::create(root)?)
}

/// Writes a line to stdout, ignoring a closed pipe.
fn out_line(line: impl std::fmt::Display) {
    let _ = writeln!(io::stdout().lock(), "{line}");
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        out_line(p.display());
    }
}

/// Writes summary and CSV, prints their paths, and maps the flag to the
/// outcome.
fn finish<T: Serialize>(
    c: &Common,
    cfg: &SimConfig,
    experiment: &str,
    passed: bool,
    result: &T,
    table: &SeriesTable,
) -> Result<Outcome> {
    let out = out_dir(c, cfg)?;
    let hash = cfg.content_hash();
    let paths = [
        out.write_summary(&Summary::new(experiment, cfg, passed, result))?,
        out.write_csv(experiment, &hash, table)?,
    ];
    print_paths(&paths);
    if passed {
        Ok(Outcome::Passed)
    } else {
        eprintln!("{experiment}: bound violated, see {}", paths[0].display());
        Ok(Outcome::Violated)
    }
}

fn check_potential(c: &Common) -> Result<Outcome> {
    let cfg = load(c, true)?;
    let reports = cfg.condition_reports()?;
    out_line(serde_json::to_string_pretty(&reports)?);
    let bad: Vec<_> = reports.iter().filter(|r| !r.satisfied).collect();
    for r in &bad {
        eprintln!(
            "{}: {:?} not satisfied (worst violation {:.3e})",
            r.potential, r.report.condition_name, r.report.worst_violation
        );
    }
    Ok(if bad.is_empty() { Outcome::Passed } else { Outcome::Violated })
}

fn simulate_cmd(c: &Common) -> Result<Outcome> {
    let cfg = load(c, false)?;
    let runs = simulate(&cfg)?;
    let series = [moment(&runs, 2)?, pairwise_moment(&runs, 2)?];
    let out = out_dir(c, &cfg)?;
    let hash = cfg.content_hash();
    let mut paths = vec![out.write_summary(&Summary::new("simulate", &cfg, true, &series))?];
    for f in &cfg.output.formats {
        match f {
            OutputFormat::Csv => paths.push(out.write_csv(
                "simulate",
                &hash,
                &SeriesTable::moments(&series, &["moment", "pairwise_moment"]),
            )?),
            OutputFormat::Jsonl => {
                paths.push(out.write_snapshots_jsonl("simulate", &hash, &runs, cfg.output.positions)?)
            }
            OutputFormat::Bin => {
                for run in &runs {
                    paths.push(out.write_snapshots_bin("simulate", &hash, run)?);
                }
            }
        }
    }
    print_paths(&paths);
    Ok(Outcome::Passed)
}

fn decay_cmd(c: &Common) -> Result<Outcome> {
    let cfg = load(c, false)?;
    let w = cfg.w();
    let res = if cfg.projected() && w.declared_a > 0.0 && w.declared_alpha == 0.0 {
        uniform_convex_decay(&cfg)?
    } else {
        decay_experiment(&cfg)?
    };
    if let Some(rate) = res.exp_rate {
        eprintln!("decay: fitted exponential rate {rate:.4}");
    }
    if let Some(fit) = &res.tail_fit {
        eprintln!("decay: log-log tail slope {:.4}", fit.slope);
    }
    finish(c, &cfg, "decay", res.passed(), &res, &SeriesTable::decay(&res))
}

fn chaos_cmd(c: &Common) -> Result<Outcome> {
    let cfg = load(c, false)?;
    let e = &cfg.experiment;
    let res = chaos_scan(&cfg, &e.n_values, e.m_reference, e.runs_per_n)?;
    for w in &res.warnings {
        eprintln!("chaos-scan: warning: {w}");
    }
    eprintln!("chaos-scan: fitted slope {:.4} ± {:.4}", res.fitted_slope, res.slope_stderr);
    finish(c, &cfg, "chaos-scan", res.passed(), &res, &SeriesTable::chaos(&res))
}

fn concentration_cmd(c: &Common) -> Result<Outcome> {
    let cfg = load(c, false)?;
    let e = &cfg.experiment;
    let grid = if e.r_grid.is_empty() { default_r_grid(cfg.n()) } else { e.r_grid.clone() };
    let res = concentration_suite(&cfg, e.test_function, cfg.time.horizon, &grid, e.trials)?;
    eprintln!("concentration: fitted constant {:.4}", res.c_fitted);
    finish(c, &cfg, "concentration", res.passed(), &res, &SeriesTable::concentration(&res))
}

fn exp_moment_cmd(c: &Common) -> Result<Outcome> {
    let cfg = load(c, false)?;
    let res = exp_moment_experiment(&cfg)?;
    for w in &res.warnings {
        eprintln!("exp-moment: warning: {w}");
    }
    finish(c, &cfg, "exp-moment", res.passed(), &res, &SeriesTable::exp_moment(&res))
}

fn report(dir: &Path) -> Result<Outcome> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let mut failed = false;
    let mut invalid = false;
    out_line("experiment,config_hash,passed,file");
    for path in names {
        let text = fs::read_to_string(&path)?;
        match revalidate_summary(&text) {
            Ok((s, _)) => {
                failed |= !s.passed;
                out_line(format_args!("{},{},{},{}", s.experiment, s.config_hash, s.passed, path.display()));
            }
            Err(e) => {
                invalid = true;
                eprintln!("{}: {e}", path.display());
            }
        }
    }
    if invalid {
        bail!("some summaries do not re-validate");
    }
    Ok(if failed { Outcome::Violated } else { Outcome::Passed })
}

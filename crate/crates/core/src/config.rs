// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration.
//!
//! Configs are TOML documents with a fixed set of sections:
//!
//! ```toml
//! seed = 7
//!
//! [system]
//! n = 16
//! dim = 1
//! mode = "projected"      # or "raw"
//! runs = 4
//!
//! [potential.v]
//! kind = "zero"
//!
//! [potential.w]
//! kind = "power_law"
//! exponent = 4.0          # declared_* constants default from the kind
//!
//! [dynamics]
//! scheme = "tamed_euler"  # euler_maruyama | tamed_euler | adaptive_euler
//! dt = 0.01               # default min(0.01, 0.1/λ̂)
//!
//! [time]
//! horizon = 1.0
//! observation_stride = 0.1  # or observation_times = [...]
//!
//! [initial]
//! kind = "gaussian"
//! variance = 1.0
//! center_to_zero = true
//! ```
//!
//! Parsing resolves every default, so [`SimConfig::canonical`] writes a
//! document in which nothing is implicit; parsing it again yields the same
//! config.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::dynamics::law::{InitialLaw, LawKind};
use crate::dynamics::step::{Scheme, StepPolicy};
use crate::potentials::{
    check_condition_c, check_convexity_at_infinity, check_polynomial_growth,
    verify_declared_convexity, ConditionReport, Potential, PotentialKind, ProbeSpec,
};

/// A [`ConditionReport`] labelled with the potential it was run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    pub potential: String,
    pub satisfied: bool,
    pub report: ConditionReport,
}

/// Every problem found in a config document.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", .errors.join("\n"))]
pub struct ConfigError {
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Raw,
    Projected,
}

/// How the two initial samples of a coupled run are paired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    Independent,
    Comonotone1d,
    OptimalSmallN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Jsonl,
    Bin,
}

/// 1-Lipschitz test functions for the deviation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `x ↦ clamp(x₁, −R, R)`.
    ClampedCoordinate,
    /// `x ↦ min(|x|, R)`.
    ClampedNorm,
    /// `x ↦ sin(x₁)`.
    SinCoordinate,
    /// `x ↦ 0`.
    Constant,
}

impl TestFunction {
    pub fn eval(&self, x: &[f64], radius: f64) -> f64 {
        match self {
            TestFunction::ClampedCoordinate => x[0].clamp(-radius, radius),
            TestFunction::ClampedNorm => x.iter().map(|v| v * v).sum::<f64>().sqrt().min(radius),
            TestFunction::SinCoordinate => x[0].sin(),
            TestFunction::Constant => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSection {
    pub n: usize,
    pub dim: usize,
    pub mode: Mode,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSection {
    pub v: Potential,
    pub w: Potential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSection {
    pub horizon: f64,
    pub observation_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSection {
    pub probes: usize,
    pub extent: f64,
    pub probe_seed: u64,
    pub eps_grid: Vec<f64>,
    pub unchecked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
    /// Include particle positions in JSONL snapshots.
    pub positions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub coupling: Coupling,
    pub n_values: Vec<usize>,
    pub m_reference: usize,
    pub runs_per_n: usize,
    /// δ of the exponential square moment.
    pub delta: f64,
    /// Bound `A` on the diffusion's Hilbert–Schmidt norm.
    pub diffusion_bound_a: f64,
    pub test_function: TestFunction,
    pub clamp_radius: f64,
    pub trials: usize,
    pub r_grid: Vec<f64>,
    /// Constant `K` of the propagation-of-chaos bound, used for the
    /// stationary-shifted tail.
    pub chaos_constant: f64,
    pub stationary_horizon: f64,
    pub stationary_n: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            coupling: Coupling::Independent,
            n_values: vec![8, 16, 32, 64],
            m_reference: 512,
            runs_per_n: 32,
            delta: 0.1,
            diffusion_bound_a: 2.0,
            test_function: TestFunction::ClampedCoordinate,
            clamp_radius: 10.0,
            trials: 400,
            r_grid: Vec::new(),
            chaos_constant: 1.0,
            stationary_horizon: 20.0,
            stationary_n: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub system: SystemSection,
    pub potential: PotentialSection,
    pub dynamics: StepPolicy,
    pub time: TimeSection,
    pub initial: InitialLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_b: Option<InitialLaw>,
    pub checks: CheckSection,
    pub output: OutputSection,
    pub experiment: ExperimentSection,
}

mod seed_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        if *seed <= i64::MAX as u64 {
            s.serialize_i64(*seed as i64)
        } else {
            s.serialize_str(&seed.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) if v >= 0 => Ok(v as u64),
            Repr::Int(v) => Err(serde::de::Error::custom(format!("seed must be >= 0, got {v}"))),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl SimConfig {
    pub fn v(&self) -> &Potential {
        &self.potential.v
    }

    pub fn w(&self) -> &Potential {
        &self.potential.w
    }

    pub fn n(&self) -> usize {
        self.system.n
    }

    pub fn dim(&self) -> usize {
        self.system.dim
    }

    pub fn projected(&self) -> bool {
        self.system.mode == Mode::Projected
    }

    /// Canonical TOML text: fully resolved, stable field order.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Content hash of the canonical text, hashed like a git blob.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = self.canonical();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", text.len()).as_bytes());
        h.update(text.as_bytes());
        hex::encode(h.finalize())[..12].to_string()
    }

    /// Observation times snapped to the step grid (nearest grid point not
    /// after the requested time), as `(step, snapped time)`, deduplicated.
    pub fn observation_steps(&self) -> Vec<(u64, f64)> {
        let dt = self.dynamics.dt;
        let mut out: Vec<(u64, f64)> = Vec::new();
        for &t in &self.time.observation_times {
            let k = (t / dt + 1e-9).floor() as u64;
            if out.last().map_or(true, |(last, _)| *last != k) {
                out.push((k, k as f64 * dt));
            }
        }
        out
    }

    pub fn total_steps(&self) -> u64 {
        (self.time.horizon / self.dynamics.dt + 1e-9).floor() as u64
    }

    pub fn probe_spec(&self) -> ProbeSpec {
        ProbeSpec::new(self.checks.probes, self.checks.extent, self.checks.probe_seed)
    }

    /// Parses and validates a config document.
    /// Probe reports for every non-zero potential: growth, convexity at
    /// infinity (fitted when nothing is declared) and, when `A > 0` is
    /// declared, `C(A, α)`.
    pub fn condition_reports(&self) -> crate::error::Result<Vec<NamedReport>> {
        let probe = self.probe_spec();
        let dim = self.dim();
        let mut out = Vec::new();
        for (name, p) in [("potential.v", self.v()), ("potential.w", self.w())] {
            if p.is_zero() {
                continue;
            }
            let mut push = |report: ConditionReport| {
                out.push(NamedReport {
                    potential: name.to_string(),
                    satisfied: report.satisfied(),
                    report,
                })
            };
            push(check_polynomial_growth(p, dim, p.growth_exponent_m, &probe)?);
            if p.declared_lambda > 0.0 || p.declared_c > 0.0 {
                push(verify_declared_convexity(p, dim, p.declared_lambda, p.declared_c, &probe)?);
            } else {
                push(check_convexity_at_infinity(p, dim, &probe)?);
            }
            if p.declared_a > 0.0 {
                push(check_condition_c(p, dim, p.declared_a, p.declared_alpha, &probe, &self.checks.eps_grid)?);
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<SimConfig, ConfigError> {
        parse_with_seed(text, None)
    }
}

/// Parses `text`, with `seed` (when given) taking precedence over the
/// document's own `seed` key.
pub fn parse_with_seed(text: &str, seed: Option<u64>) -> Result<SimConfig, ConfigError> {
    parse_overriding(text, seed, false)
}

/// As [`parse_with_seed`]; `unchecked = true` additionally skips the probe
/// checks of declared constants and records `checks.unchecked = true`.
pub fn parse_overriding(text: &str, seed: Option<u64>, unchecked: bool) -> Result<SimConfig, ConfigError> {
    let mut errors = Vec::new();
    let table: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            return Err(ConfigError {
                errors: vec![format!("syntax: {e}")],
            })
        }
    };
    check_keys(&table, &mut errors);
    let mut cfg = resolve(&table, seed, &mut errors);
    if let Some(cfg) = &mut cfg {
        cfg.checks.unchecked |= unchecked;
        validate(cfg, &mut errors);
        if errors.is_empty() && !cfg.checks.unchecked {
            run_condition_checks(cfg, &mut errors);
        }
    }
    match cfg {
        Some(cfg) if errors.is_empty() => Ok(cfg),
        _ => Err(ConfigError { errors }),
    }
}

const TOP_KEYS: &[&str] = &[
    "seed",
    "system",
    "potential",
    "dynamics",
    "time",
    "initial",
    "initial_b",
    "checks",
    "output",
    "experiment",
];
const SYSTEM_KEYS: &[&str] = &["n", "dim", "mode", "runs"];
const DYNAMICS_KEYS: &[&str] = &["scheme", "dt", "adaptive_drift_cap", "dt_min"];
const TIME_KEYS: &[&str] = &[
    "horizon",
    "observation_times",
    "observation_stride",
    "observation_count",
];
const CHECK_KEYS: &[&str] = &["probes", "extent", "probe_seed", "eps_grid", "unchecked"];
const OUTPUT_KEYS: &[&str] = &["dir", "formats", "positions"];
const EXPERIMENT_KEYS: &[&str] = &[
    "coupling",
    "n_values",
    "m_reference",
    "runs_per_n",
    "delta",
    "diffusion_bound_a",
    "test_function",
    "clamp_radius",
    "trials",
    "r_grid",
    "chaos_constant",
    "stationary_horizon",
    "stationary_n",
];
const POTENTIAL_COMMON: &[&str] = &[
    "kind",
    "growth_exponent_m",
    "declared_lambda",
    "declared_c",
    "declared_a",
    "declared_alpha",
];

fn potential_keys(kind: Option<&str>) -> Vec<&'static str> {
    let mut keys = POTENTIAL_COMMON.to_vec();
    keys.extend_from_slice(match kind {
        Some("power_law") => &["exponent"],
        Some("quadratic") => &["stiffness"],
        Some("uniform_plus_bump") => &["stiffness", "amplitude", "radius"],
        Some("sampled") => &["spacing", "derivative"],
        Some("zero") => &[],
        _ => &["exponent", "stiffness", "amplitude", "radius", "spacing", "derivative"],
    });
    keys
}

fn law_keys(kind: Option<&str>) -> Vec<&'static str> {
    let mut keys = vec!["kind", "center_to_zero"];
    keys.extend_from_slice(match kind {
        Some("gaussian") => &["mean", "variance"],
        Some("uniform") => &["half_width"],
        Some("two_point") => &["a", "b", "weight"],
        Some("sample_file") => &["path"],
        Some("point") => &["at"],
        _ => &["mean", "variance", "half_width", "a", "b", "weight", "path", "at"],
    });
    keys
}

fn check_section(table: &Table, path: &str, allowed: &[&str], errors: &mut Vec<String>) {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            let nearest = allowed
                .iter()
                .min_by_key(|k| strsim::levenshtein(k, key))
                .map(|k| format!("; did you mean `{}`?", join_path(path, k)))
                .unwrap_or_default();
            errors.push(format!("unknown key `{}`{nearest}", join_path(path, key)));
        }
    }
}

fn join_path(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn kind_of(table: &Table) -> Option<&str> {
    table.get("kind").and_then(Value::as_str)
}

fn check_keys(table: &Table, errors: &mut Vec<String>) {
    check_section(table, "", TOP_KEYS, errors);
    let sections: [(&str, &[&str]); 5] = [
        ("system", SYSTEM_KEYS),
        ("dynamics", DYNAMICS_KEYS),
        ("time", TIME_KEYS),
        ("checks", CHECK_KEYS),
        ("output", OUTPUT_KEYS),
    ];
    for (name, keys) in sections {
        if let Some(Value::Table(t)) = table.get(name) {
            check_section(t, name, keys, errors);
        }
    }
    if let Some(Value::Table(t)) = table.get("experiment") {
        check_section(t, "experiment", EXPERIMENT_KEYS, errors);
    }
    if let Some(Value::Table(p)) = table.get("potential") {
        check_section(p, "potential", &["v", "w"], errors);
        for which in ["v", "w"] {
            if let Some(Value::Table(t)) = p.get(which) {
                let path = format!("potential.{which}");
                check_section(t, &path, &potential_keys(kind_of(t)), errors);
            }
        }
    }
    for name in ["initial", "initial_b"] {
        if let Some(Value::Table(t)) = table.get(name) {
            check_section(t, name, &law_keys(kind_of(t)), errors);
        }
    }
}

#[derive(Deserialize)]
struct RawSystem {
    n: usize,
    #[serde(default = "one")]
    dim: usize,
    #[serde(default = "raw_mode")]
    mode: Mode,
    #[serde(default = "one")]
    runs: usize,
}

fn one() -> usize {
    1
}

fn raw_mode() -> Mode {
    Mode::Raw
}

#[derive(Deserialize)]
struct RawPotential {
    #[serde(flatten)]
    kind: PotentialKind,
    growth_exponent_m: Option<u32>,
    declared_lambda: Option<f64>,
    declared_c: Option<f64>,
    declared_a: Option<f64>,
    declared_alpha: Option<f64>,
}

impl RawPotential {
    fn resolve(self) -> Potential {
        let mut p = match &self.kind {
            PotentialKind::PowerLaw { exponent } => Potential::power_law(*exponent),
            PotentialKind::Quadratic { stiffness } => Potential::quadratic(*stiffness),
            PotentialKind::UniformPlusBump {
                stiffness,
                amplitude,
                radius,
            } => Potential::uniform_plus_bump(*stiffness, *amplitude, *radius),
            PotentialKind::Zero => Potential::zero(),
            PotentialKind::Sampled { .. } => Potential::sampled(0.0, Vec::new()),
        };
        p.kind = self.kind;
        if let Some(m) = self.growth_exponent_m {
            p.growth_exponent_m = m;
        }
        if let Some(v) = self.declared_lambda {
            p.declared_lambda = v;
        }
        if let Some(v) = self.declared_c {
            p.declared_c = v;
        }
        if let Some(v) = self.declared_a {
            p.declared_a = v;
        }
        if let Some(v) = self.declared_alpha {
            p.declared_alpha = v;
        }
        p
    }
}

#[derive(Deserialize)]
struct RawDynamics {
    #[serde(default = "tamed")]
    scheme: Scheme,
    dt: Option<f64>,
    adaptive_drift_cap: Option<f64>,
    dt_min: Option<f64>,
}

fn tamed() -> Scheme {
    Scheme::TamedEuler
}

#[derive(Deserialize)]
struct RawTime {
    horizon: f64,
    observation_times: Option<Vec<f64>>,
    observation_stride: Option<f64>,
    observation_count: Option<usize>,
}

#[derive(Deserialize)]
#[serde(default)]
struct RawChecks {
    probes: usize,
    extent: f64,
    probe_seed: u64,
    eps_grid: Vec<f64>,
    unchecked: bool,
}

impl Default for RawChecks {
    fn default() -> Self {
        RawChecks {
            probes: 512,
            extent: 4.0,
            probe_seed: 0,
            eps_grid: vec![0.05, 0.1, 0.2, 0.4, 0.8],
            unchecked: false,
        }
    }
}

#[derive(Deserialize)]
#[serde(default)]
struct RawOutput {
    dir: PathBuf,
    formats: Vec<OutputFormat>,
    positions: bool,
}

impl Default for RawOutput {
    fn default() -> Self {
        RawOutput {
            dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Jsonl],
            positions: false,
        }
    }
}

fn section<T: for<'de> Deserialize<'de>>(
    table: &Table,
    name: &str,
    errors: &mut Vec<String>,
) -> Option<T> {
    let value = table
        .get(name)
        .cloned()
        .unwrap_or_else(|| Value::Table(Table::new()));
    match value.try_into::<T>() {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("[{name}]: {}", e.to_string().trim()));
            None
        }
    }
}

fn section_opt<T: for<'de> Deserialize<'de>>(
    table: &Table,
    name: &str,
    errors: &mut Vec<String>,
) -> Option<Option<T>> {
    match table.get(name) {
        None => Some(None),
        Some(_) => section(table, name, errors).map(Some),
    }
}

fn resolve(table: &Table, seed_override: Option<u64>, errors: &mut Vec<String>) -> Option<SimConfig> {
    let seed = match seed_override {
        Some(s) => Some(s),
        None => match table.get("seed") {
            Some(v) => match v.clone().try_into::<SeedOnly>() {
                Ok(s) => Some(s.0),
                Err(e) => {
                    errors.push(format!("seed: {e}"));
                    None
                }
            },
            None => {
                errors.push("seed is required (no implicit seeding)".into());
                None
            }
        },
    };

    let system: Option<RawSystem> = section(table, "system", errors);
    let potentials = match table.get("potential") {
        Some(Value::Table(p)) => {
            let v: Option<RawPotential> = match p.get("v") {
                Some(_) => section(p, "v", errors),
                None => Some(RawPotential {
                    kind: PotentialKind::Zero,
                    growth_exponent_m: None,
                    declared_lambda: None,
                    declared_c: None,
                    declared_a: None,
                    declared_alpha: None,
                }),
            };
            let w: Option<RawPotential> = section(p, "w", errors);
            v.zip(w)
        }
        _ => {
            errors.push("[potential.w] is required".into());
            None
        }
    };
    let dynamics: Option<RawDynamics> = section(table, "dynamics", errors);
    let time: Option<RawTime> = section(table, "time", errors);
    let initial: Option<InitialLaw> = section(table, "initial", errors);
    let initial_b: Option<Option<InitialLaw>> = section_opt(table, "initial_b", errors);
    let checks: Option<RawChecks> = section(table, "checks", errors);
    let output: Option<RawOutput> = section(table, "output", errors);
    let experiment: Option<ExperimentSection> = match table.get("experiment") {
        None => Some(ExperimentSection::default()),
        Some(v) => {
            // fill defaults key by key
            let mut merged = match Value::try_from(ExperimentSection::default()) {
                Ok(Value::Table(t)) => t,
                _ => Table::new(),
            };
            if let Value::Table(user) = v {
                for (k, val) in user {
                    merged.insert(k.clone(), val.clone());
                }
            }
            match Value::Table(merged).try_into::<ExperimentSection>() {
                Ok(e) => Some(e),
                Err(e) => {
                    errors.push(format!("[experiment]: {}", e.to_string().trim()));
                    None
                }
            }
        }
    };

    let (seed, system, (v, w), dynamics, time, initial, initial_b, checks, output, experiment) = (
        seed?, system?, potentials?, dynamics?, time?, initial?, initial_b?, checks?, output?, experiment?,
    );
    let v = v.resolve();
    let w = w.resolve();

    let observation_times = match (time.observation_times, time.observation_stride) {
        (Some(list), None) => list,
        (None, Some(stride)) if stride > 0.0 => {
            let count = time
                .observation_count
                .unwrap_or((time.horizon / stride + 1e-9).floor() as usize);
            (0..=count).map(|k| k as f64 * stride).collect()
        }
        (None, Some(stride)) => {
            errors.push(format!("time.observation_stride must be > 0, got {stride}"));
            return None;
        }
        (None, None) if time.horizon > 0.0 => vec![0.0, time.horizon],
        (None, None) => vec![0.0],
        (Some(_), Some(_)) => {
            errors.push("give either time.observation_times or time.observation_stride, not both".into());
            return None;
        }
    };

    let probe = ProbeSpec::new(checks.probes.max(1), checks.extent.abs().max(1e-12), checks.probe_seed);
    let dt = match dynamics.dt {
        Some(dt) => dt,
        None => {
            let mut lambda = 0.0f64;
            for p in [&v, &w] {
                if p.validate().is_ok() && !p.is_zero() {
                    if let Ok(r) = check_convexity_at_infinity(p, system.dim.max(1), &probe) {
                        lambda = lambda.max(r.fitted_constants["lambda"]);
                    }
                }
            }
            StepPolicy::default_dt(lambda)
        }
    };
    let defaults = StepPolicy::default();
    let policy = StepPolicy {
        scheme: dynamics.scheme,
        dt,
        adaptive_drift_cap: dynamics.adaptive_drift_cap.unwrap_or(defaults.adaptive_drift_cap),
        dt_min: dynamics.dt_min.unwrap_or(defaults.dt_min.min(dt)),
    };

    Some(SimConfig {
        seed,
        system: SystemSection {
            n: system.n,
            dim: system.dim,
            mode: system.mode,
            runs: system.runs,
        },
        potential: PotentialSection { v, w },
        dynamics: policy,
        time: TimeSection {
            horizon: time.horizon,
            observation_times,
        },
        initial,
        initial_b,
        checks: CheckSection {
            probes: checks.probes,
            extent: checks.extent,
            probe_seed: checks.probe_seed,
            eps_grid: checks.eps_grid,
            unchecked: checks.unchecked,
        },
        output: OutputSection {
            dir: output.dir,
            formats: output.formats,
            positions: output.positions,
        },
        experiment,
    })
}

#[derive(Deserialize)]
struct SeedOnly(#[serde(with = "seed_repr")] u64);

fn validate(cfg: &SimConfig, errors: &mut Vec<String>) {
    let s = &cfg.system;
    if s.n < 2 {
        errors.push(format!("system.n must be >= 2 (got {})", s.n));
    }
    if s.dim < 1 {
        errors.push("system.dim must be >= 1".into());
    }
    if s.runs < 1 {
        errors.push("system.runs must be >= 1".into());
    }
    if s.mode == Mode::Projected && !cfg.v().is_zero() {
        errors.push(
            "mode = \"projected\" requires potential.v to be zero: the centered system is only \
             defined without confinement"
                .into(),
        );
    }
    for (name, p) in [("potential.v", cfg.v()), ("potential.w", cfg.w())] {
        if let Err(e) = p.validate() {
            errors.push(format!("{name}: {e}"));
        }
    }
    if let Err(e) = cfg.dynamics.validate() {
        errors.push(format!("dynamics: {e}"));
    }
    let t = &cfg.time;
    if !(t.horizon.is_finite() && t.horizon >= 0.0) {
        errors.push(format!("time.horizon must be >= 0 (got {})", t.horizon));
    }
    let times = &t.observation_times;
    if times.iter().any(|x| !(*x >= 0.0 && *x <= t.horizon + 1e-12)) {
        errors.push("observation times must lie in [0, horizon]".into());
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        errors.push("observation times must be sorted and unique".into());
    }
    for (name, law) in [("initial", Some(&cfg.initial)), ("initial_b", cfg.initial_b.as_ref())] {
        if let Some(law) = law {
            if let Err(e) = law.validate(s.dim) {
                errors.push(format!("{name}: {e}"));
            }
            if let LawKind::SampleFile { path } = &law.kind {
                if !path.exists() {
                    errors.push(format!("{name}.path: {} does not exist", path.display()));
                }
            }
        }
    }
    let c = &cfg.checks;
    if c.probes < 1 {
        errors.push("checks.probes must be >= 1".into());
    }
    if !(c.extent > 0.0) {
        errors.push("checks.extent must be > 0".into());
    }
    if c.eps_grid.is_empty() || c.eps_grid.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        errors.push("checks.eps_grid entries must lie in (0, 1)".into());
    }
    let e = &cfg.experiment;
    if e.n_values.windows(2).any(|w| w[1] <= w[0]) || e.n_values.iter().any(|n| *n < 2) {
        errors.push("experiment.n_values must be strictly increasing and >= 2".into());
    }
    if !(e.delta > 0.0) || !(e.diffusion_bound_a > 0.0) {
        errors.push("experiment.delta and experiment.diffusion_bound_a must be > 0".into());
    }
    if !(e.clamp_radius > 0.0) {
        errors.push("experiment.clamp_radius must be > 0".into());
    }
    if e.r_grid.iter().any(|r| !(*r > 0.0)) || e.r_grid.windows(2).any(|w| w[1] <= w[0]) {
        errors.push("experiment.r_grid must be positive and increasing".into());
    }
}

fn run_condition_checks(cfg: &SimConfig, errors: &mut Vec<String>) {
    let probe = cfg.probe_spec();
    let dim = cfg.dim();
    for (name, p) in [("potential.v", cfg.v()), ("potential.w", cfg.w())] {
        if p.is_zero() {
            continue;
        }
        let mut fail = |what: &str, detail: String| {
            errors.push(format!(
                "{name}: declared {what} fails its probe check ({detail}); fix the declaration or pass --unchecked"
            ))
        };
        match check_polynomial_growth(p, dim, p.growth_exponent_m, &probe) {
            Ok(r) if !r.satisfied() => fail(
                "growth exponent m",
                format!("C_hat grows by {:.3} when the probe box doubles", r.fitted_constants["growth_ratio"]),
            ),
            Err(e) => fail("growth exponent m", e.to_string()),
            _ => {}
        }
        if p.declared_lambda > 0.0 || p.declared_c > 0.0 {
            match verify_declared_convexity(p, dim, p.declared_lambda, p.declared_c, &probe) {
                Ok(r) if !r.satisfied() => fail(
                    "convexity at infinity (lambda, C)",
                    format!("worst violation {:.3e}", r.worst_violation),
                ),
                Err(e) => fail("convexity at infinity (lambda, C)", e.to_string()),
                _ => {}
            }
        }
        if p.declared_a > 0.0 {
            match check_condition_c(p, dim, p.declared_a, p.declared_alpha, &probe, &cfg.checks.eps_grid) {
                Ok(r) if !r.satisfied() => fail(
                    "condition C(A, alpha)",
                    format!("worst violation {:.3e}", r.worst_violation),
                ),
                Err(e) => fail("condition C(A, alpha)", e.to_string()),
                _ => {}
            }
        }
    }
}

/// Lists every key a config document may contain, for documentation.
pub fn documented_keys() -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for k in TOP_KEYS {
        out.insert(k.to_string());
    }
    for (s, keys) in [
        ("system", SYSTEM_KEYS),
        ("dynamics", DYNAMICS_KEYS),
        ("time", TIME_KEYS),
        ("checks", CHECK_KEYS),
        ("output", OUTPUT_KEYS),
        ("experiment", EXPERIMENT_KEYS),
    ] {
        for k in keys {
            out.insert(format!("{s}.{k}"));
        }
    }
    out
}

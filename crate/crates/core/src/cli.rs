//! Command-line front end.
//!
//! Every subcommand reads an optional JSON job file (`--config`) whose keys
//! mirror the long flags in snake_case; flags given on the command line win.
//! Structured results are JSON documents and curves are CSV, both carrying
//! the config hash and seed. No timestamps are written, so a rerun with the
//! same job reproduces its output byte for byte.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 computation
//! error, 4 I/O error. Failures print one JSON object on stderr:
//! `{"error": <kind>, "message": <text>, "exit_code": <code>}`.
//!
//! The worker count comes from `--workers`, then the job file, then the
//! `MORSE_ENTROPY_WORKERS` environment variable; 0 means all cores.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::decompose::{epsilon_sweep, DecompositionConfig};
use crate::error::Error;
use crate::measure::{
    analytic_volume, estimate_beta, estimate_log_volume_slope, estimate_structure_integral,
    estimate_sublevel_volume, EstimatorKind, SamplerConfig,
};
use crate::morse::{euler_from_multiplicities, find_critical_points, CriticalCatalog, SearchConfig};
use crate::neckgeom::{coefficient_table, NeighborhoodCoefficients};
use crate::potential::{BoxSpec, BuiltinKind, ModelSpec, Potential, PotentialModel};
use crate::thermo::{curve_csv, detect_transition, entropy_curve, scaling_scan, uniform_grid, ScanConfig};

pub const WORKERS_ENV: &str = "MORSE_ENTROPY_WORKERS";

/// Version tag of the CSV column layouts.
pub const CSV_SCHEMA: u32 = 1;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "morse-entropy", version, about = "Critical points, sub-level topology and configurational entropy of potentials")]
pub struct Cli {
    /// JSON job file; command-line flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multistart critical-point search; writes a catalog.
    Critpoints(CritpointsArgs),
    /// χ and Morse multiplicities of M_v over a grid of levels, from a catalog.
    EulerCurve(EulerArgs),
    /// Volume of M_v (or the structure integral with the thin-shell estimator).
    Volume(VolumeArgs),
    /// Microcanonical average of the Federer integrand on M_v.
    Beta(BetaArgs),
    /// Entropy curve S(v̄) with finite-difference derivatives.
    EntropyScan(EntropyArgs),
    /// Sup-norms of entropy derivatives across system sizes.
    Scaling(ScalingArgs),
    /// Tables of the neighborhood coefficients A and B.
    Coeffs(CoeffsArgs),
    /// Decomposition residual over a sweep of ε₀.
    VerifyDecomposition(DecompositionArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Critpoints(_) => "critpoints",
            Command::EulerCurve(_) => "euler-curve",
            Command::Volume(_) => "volume",
            Command::Beta(_) => "beta",
            Command::EntropyScan(_) => "entropy-scan",
            Command::Scaling(_) => "scaling",
            Command::Coeffs(_) => "coeffs",
            Command::VerifyDecomposition(_) => "verify-decomposition",
        }
    }
}

/// Model selection flags.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Built-in model name, or `dsl` together with `--source`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Potential expression in the model language.
    #[arg(long)]
    pub source: Option<String>,
    /// Uniform domain box `lo,hi`.
    #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true)]
    pub domain_box: Option<Vec<f64>>,
    /// Model parameter `name=value` (repeatable).
    #[arg(long = "param")]
    pub params: Vec<String>,
    /// Linear tilt `a_1,...,a_N` added as `a·q`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub tilt: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct CritpointsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub vmax: Option<f64>,
    /// Newton starts (default scales with N).
    #[arg(long)]
    pub starts: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EulerArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub vmin: Option<f64>,
    #[arg(long)]
    pub vmax: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct VolumeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// hit_or_miss, thin_shell or analytic.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Thin-shell half-width.
    #[arg(long)]
    pub shell_halfwidth: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct BetaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub grad_floor: Option<f64>,
    /// Also estimate Ω/M and d log M/dv.
    #[arg(long)]
    pub triangle: bool,
    /// Step of the d log M/dv stencil and thin-shell half-width.
    #[arg(long)]
    pub shell_halfwidth: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Lower end of the v̄ = v/N grid.
    #[arg(long)]
    pub vmin: Option<f64>,
    #[arg(long)]
    pub vmax: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// hit_or_miss or analytic.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Catalog used to flag grid points inside critical bands.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub eps0: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "N-list", alias = "n-list", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// v̄ window `lo,hi`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub estimator: Option<String>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct CoeffsArgs {
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Δv steps of the B table across [−ε₀, ε₀].
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct DecompositionArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Catalog; searched afresh when absent.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long = "eps-list", value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Samples per cylinder for the per-cylinder MC check (0 = skip).
    #[arg(long)]
    pub cylinder_samples: Option<u64>,
}

/// Job file schema. Keys match the long flags in snake_case.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub model: Option<ModelSpec>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub vmin: Option<f64>,
    pub vmax: Option<f64>,
    pub v: Option<f64>,
    pub steps: Option<usize>,
    pub samples: Option<u64>,
    pub starts: Option<usize>,
    pub estimator: Option<EstimatorKind>,
    pub shell_halfwidth: Option<f64>,
    pub grad_floor: Option<f64>,
    pub triangle: Option<bool>,
    #[serde(rename = "N_list", alias = "n_list")]
    pub n_list: Option<Vec<usize>>,
    pub window: Option<[f64; 2]>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub eps0: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub r: Option<f64>,
    pub cylinder_samples: Option<u64>,
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the job without `output` and `workers`, which do not
    /// change results.
    pub fn hash(&self, command: &str) -> String {
        let text = serde_json::to_string(&json!({ "command": command, "job": self.canonical() })).unwrap_or_default();
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// The job as recorded in artifacts: nulls, `output` and `workers` removed.
    fn canonical(&self) -> Value {
        let mut job = self.clone();
        job.output = None;
        job.workers = None;
        strip_nulls(to_value(&job))
    }

    fn workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|s| s.trim().parse().ok()))
            .unwrap_or(0)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn sampler(&self, default_samples: u64) -> SamplerConfig {
        let mut s = SamplerConfig::new(self.samples.unwrap_or(default_samples), self.seed());
        s.workers = self.workers();
        s.shell_halfwidth = self.shell_halfwidth;
        if let Some(g) = self.grad_floor {
            s.grad_floor = g;
        }
        s
    }

    fn require<T: Copy>(value: Option<T>, name: &str) -> Result<T, CliError> {
        value.ok_or_else(|| CliError::config(format!("missing required parameter `{name}`")))
    }

    fn model(&self) -> Result<PotentialModel, CliError> {
        let spec = self.model.as_ref().ok_or_else(|| CliError::config("missing model (`--model` or `model` key)"))?;
        Ok(spec.build()?)
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            Value::Object(m.into_iter().filter(|(_, x)| !x.is_null()).map(|(k, x)| (k, strip_nulls(x))).collect())
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, kind: "ConfigError".into(), message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError { code: EXIT_IO, kind: "IoError".into(), message: format!("{}: {e}", path.display()) }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "message": self.message, "exit_code": self.code }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::Config(_)
            | Error::Json(_)
            | Error::Syntax { .. }
            | Error::Index { .. }
            | Error::UnknownIdentifier { .. }
            | Error::InvalidModel(_)
            | Error::InvalidArgument(_) => EXIT_CONFIG,
            _ => EXIT_COMPUTE,
        };
        CliError { code, kind: e.kind().into(), message: e.to_string() }
    }
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, CliError> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| CliError::config(format!("unknown estimator `{s}` (hit_or_miss, thin_shell, analytic)")))
}

/// Applies model flags on top of the job's model, or builds one from them.
fn apply_model_args(job: &mut JobConfig, a: &ModelArgs) -> Result<(), CliError> {
    let base = job.model.take();
    let mut spec = match (&a.model, a.source.as_deref(), base) {
        (Some(name), source, base) => {
            let n = a.n.or(base.as_ref().map(|s| s.n)).ok_or_else(|| CliError::config("`--N` is required"))?;
            if name == "dsl" || source.is_some() {
                let src = source.ok_or_else(|| CliError::config("`--model dsl` needs `--source`"))?;
                ModelSpec::dsl(src, n)
            } else {
                let kind = BuiltinKind::from_name(name)
                    .ok_or_else(|| CliError::config(format!("unknown model `{name}`")))?;
                ModelSpec::builtin(kind, n)
            }
        }
        (None, Some(src), base) => {
            let n = a.n.or(base.as_ref().map(|s| s.n)).ok_or_else(|| CliError::config("`--N` is required"))?;
            ModelSpec::dsl(src, n)
        }
        (None, None, Some(mut base)) => {
            if let Some(n) = a.n {
                base.n = n;
            }
            base
        }
        (None, None, None) => {
            if a.n.is_some() || a.domain_box.is_some() || !a.params.is_empty() || a.tilt.is_some() {
                return Err(CliError::config("model flags given without `--model`"));
            }
            return Ok(());
        }
    };
    if let Some(b) = &a.domain_box {
        if b.len() != 2 {
            return Err(CliError::config("`--box` takes exactly `lo,hi`"));
        }
        spec.domain_box = Some(BoxSpec::Uniform([b[0], b[1]]));
    }
    for p in &a.params {
        let (k, v) = p.split_once('=').ok_or_else(|| CliError::config(format!("parameter `{p}` is not name=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| CliError::config(format!("parameter `{p}` has no numeric value")))?;
        spec = spec.with_parameter(k.trim(), v);
    }
    if let Some(t) = &a.tilt {
        spec.tilt = Some(t.clone());
    }
    job.model = Some(spec);
    Ok(())
}

/// Job file merged with command-line flags.
pub fn resolve_job(cli: &Cli) -> Result<JobConfig, CliError> {
    let mut job = match &cli.config {
        Some(p) => JobConfig::load(p)?,
        None => JobConfig::default(),
    };
    macro_rules! set {
        ($($field:ident = $value:expr),* $(,)?) => {
            $( if let Some(x) = $value { job.$field = Some(x); } )*
        };
    }
    set!(seed = cli.seed, workers = cli.workers, output = cli.output.clone());
    match &cli.command {
        Command::Critpoints(a) => {
            apply_model_args(&mut job, &a.model)?;
            set!(vmax = a.vmax, starts = a.starts);
        }
        Command::EulerCurve(a) => {
            set!(catalog = a.catalog.clone(), vmin = a.vmin, vmax = a.vmax, steps = a.steps);
        }
        Command::Volume(a) => {
            apply_model_args(&mut job, &a.model)?;
            let est = a.estimator.as_deref().map(parse_estimator).transpose()?;
            set!(v = a.v, samples = a.samples, estimator = est, shell_halfwidth = a.shell_halfwidth);
        }
        Command::Beta(a) => {
            apply_model_args(&mut job, &a.model)?;
            set!(v = a.v, samples = a.samples, grad_floor = a.grad_floor, shell_halfwidth = a.shell_halfwidth);
            if a.triangle {
                job.triangle = Some(true);
            }
        }
        Command::EntropyScan(a) => {
            apply_model_args(&mut job, &a.model)?;
            let est = a.estimator.as_deref().map(parse_estimator).transpose()?;
            set!(
                vmin = a.vmin,
                vmax = a.vmax,
                steps = a.steps,
                samples = a.samples,
                estimator = est,
                catalog = a.catalog.clone(),
                eps0 = a.eps0,
            );
        }
        Command::Scaling(a) => {
            // the template model only needs some N; each scan point replaces it
            let mut margs = a.model.clone();
            margs.n = margs.n.or(a.n_list.as_ref().and_then(|l| l.first().copied()));
            apply_model_args(&mut job, &margs)?;
            let est = a.estimator.as_deref().map(parse_estimator).transpose()?;
            let window = match a.window.as_deref() {
                Some([lo, hi]) => Some([*lo, *hi]),
                Some(_) => return Err(CliError::config("`--window` takes exactly `lo,hi`")),
                None => None,
            };
            set!(n_list = a.n_list.clone(), window = window, steps = a.steps, samples = a.samples, estimator = est);
        }
        Command::Coeffs(a) => {
            set!(n = a.n, eps0 = a.eps0, r = a.r, steps = a.steps);
        }
        Command::VerifyDecomposition(a) => {
            apply_model_args(&mut job, &a.model)?;
            set!(
                catalog = a.catalog.clone(),
                v = a.v,
                eps0 = a.eps0,
                eps_list = a.eps_list.clone(),
                r = a.r,
                samples = a.samples,
                cylinder_samples = a.cylinder_samples,
            );
        }
    }
    Ok(job)
}

/// Reads a catalog written by `critpoints` (or a bare catalog JSON).
pub fn load_catalog(path: &Path) -> Result<CriticalCatalog, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let inner = match value {
        Value::Object(mut m) if m.contains_key("result") => m.remove("result").unwrap_or(Value::Null),
        other => other,
    };
    Ok(CriticalCatalog::from_json(&inner.to_string())?)
}

/// What a command produced.
pub enum Artifact {
    Json(Value),
    Csv { schema: &'static str, body: String },
}

fn envelope(command: &str, job: &JobConfig, result: Value) -> Value {
    json!({
        "tool": "morse-entropy",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_hash": job.hash(command),
        "seed": job.seed(),
        "config": job.canonical(),
        "result": result,
    })
}

/// Renders an artifact with its provenance header.
pub fn render(command: &str, job: &JobConfig, artifact: Artifact) -> String {
    match artifact {
        Artifact::Json(v) => {
            let mut s = serde_json::to_string_pretty(&envelope(command, job, v)).unwrap_or_default();
            s.push('\n');
            s
        }
        Artifact::Csv { schema, body } => format!(
            "# morse-entropy {} command={command} schema={schema}/v{CSV_SCHEMA} config_hash={} seed={}\n{body}",
            env!("CARGO_PKG_VERSION"),
            job.hash(command),
            job.seed(),
        ),
    }
}

/// Runs a resolved job.
pub fn execute(command: &Command, job: &JobConfig) -> Result<Artifact, CliError> {
    let workers = job.workers();
    match command {
        Command::Critpoints(_) => {
            let model = job.model()?;
            let vmax = JobConfig::require(job.vmax, "vmax")?;
            let cfg = SearchConfig { starts: job.starts, workers, ..SearchConfig::with_seed(job.seed()) };
            let cat = find_critical_points(&model, vmax, &cfg)?;
            log::info!("{} critical points below {vmax}", cat.points.len());
            Ok(Artifact::Json(to_value(&cat)))
        }
        Command::EulerCurve(_) => {
            let path = job.catalog.as_deref().ok_or_else(|| CliError::config("missing `catalog`"))?;
            let cat = load_catalog(path)?;
            let vmin = JobConfig::require(job.vmin, "vmin")?;
            let vmax = JobConfig::require(job.vmax, "vmax")?;
            let steps = job.steps.unwrap_or(64);
            let n = cat.dim();
            // Levels above the catalog cutoff get empty cells and covered = 0.
            let mut out = String::from("v,vbar,covered,chi");
            for i in 0..=n {
                out.push_str(&format!(",mu_{i}"));
            }
            out.push('\n');
            let mut uncovered = 0;
            for v in uniform_grid(vmin, vmax, steps) {
                out.push_str(&format!("{v:?},{:?}", v / n as f64));
                match cat.multiplicities_below(v) {
                    Ok(mu) => {
                        out.push_str(&format!(",1,{}", euler_from_multiplicities(&mu)));
                        for m in &mu {
                            out.push_str(&format!(",{m}"));
                        }
                    }
                    Err(Error::CutoffExceeded { .. }) => {
                        uncovered += 1;
                        out.push_str(",0,");
                        out.push_str(&",".repeat(n + 1));
                    }
                    Err(e) => return Err(e.into()),
                }
                out.push('\n');
            }
            if uncovered > 0 {
                log::warn!("{uncovered} levels lie above the catalog cutoff {} and are left empty", cat.v_max);
            }
            Ok(Artifact::Csv { schema: "euler-curve", body: out })
        }
        Command::Volume(_) => {
            let model = job.model()?;
            let v = JobConfig::require(job.v, "v")?;
            let sampler = job.sampler(1_000_000);
            let kind = job.estimator.unwrap_or(EstimatorKind::HitOrMiss);
            let (quantity, est) = match kind {
                EstimatorKind::HitOrMiss => ("volume", estimate_sublevel_volume(&model, v, &sampler)?),
                EstimatorKind::Analytic => ("volume", analytic_volume(&model, v)?),
                EstimatorKind::ThinShell => ("structure_integral", estimate_structure_integral(&model, v, &sampler)?),
            };
            let mut row = to_value(&est);
            if let Value::Object(m) = &mut row {
                m.insert("model_hash".into(), Value::String(model.hash()));
                m.insert("v".into(), json!(v));
                m.insert("quantity".into(), json!(quantity));
            }
            Ok(Artifact::Json(row))
        }
        Command::Beta(_) => {
            let model = job.model()?;
            let v = JobConfig::require(job.v, "v")?;
            let sampler = job.sampler(1_000_000);
            let beta = estimate_beta(&model, v, &sampler)?;
            let mut result = json!({ "model_hash": model.hash(), "v": v, "beta": beta });
            if job.triangle.unwrap_or(false) {
                let h = job.shell_halfwidth.unwrap_or(0.02 * v.abs().max(0.1));
                let shell = SamplerConfig { shell_halfwidth: Some(h), ..sampler };
                let omega = estimate_structure_integral(&model, v, &shell)?;
                let vol = estimate_sublevel_volume(&model, v, &sampler)?;
                let (slope, slope_err) = estimate_log_volume_slope(&model, v, h, &sampler)?;
                let ratio = omega.mean / vol.mean;
                let ratio_err = ratio * omega.rel_err().hypot(vol.rel_err());
                result["omega_over_m"] = json!({ "mean": ratio, "stderr": ratio_err, "h": h });
                result["dlogm_dv"] = json!({ "mean": slope, "stderr": slope_err, "h": h });
            }
            Ok(Artifact::Json(result))
        }
        Command::EntropyScan(_) => {
            let model = job.model()?;
            let vmin = JobConfig::require(job.vmin, "vmin")?;
            let vmax = JobConfig::require(job.vmax, "vmax")?;
            let grid = uniform_grid(vmin, vmax, job.steps.unwrap_or(40));
            let kind = job.estimator.unwrap_or(EstimatorKind::HitOrMiss);
            let curve = entropy_curve(&model, &grid, kind, &job.sampler(1_000_000))?;
            let in_band = match &job.catalog {
                Some(p) => {
                    let cat = load_catalog(p)?;
                    let eps0 = match job.eps0 {
                        Some(e) => e,
                        None => cat.epsilon0()?,
                    };
                    let nf = model.dim() as f64;
                    Some(
                        grid.iter()
                            .map(|vb| cat.critical_values.iter().any(|c| (nf * vb - c).abs() < eps0))
                            .collect::<Vec<_>>(),
                    )
                }
                None => None,
            };
            Ok(Artifact::Csv { schema: "entropy-curve", body: curve_csv(&curve, in_band.as_deref()) })
        }
        Command::Scaling(_) => {
            let spec = job.model.clone().ok_or_else(|| CliError::config("missing model"))?;
            let n_list = job.n_list.clone().ok_or_else(|| CliError::config("missing `N_list`"))?;
            let cfg = ScanConfig {
                sampler: job.sampler(1_000_000),
                estimator: job.estimator.unwrap_or(EstimatorKind::HitOrMiss),
                steps: job.steps.unwrap_or(40),
                band_search: None,
            };
            let family = |n: usize| {
                let mut s = spec.clone();
                s.n = n;
                if s.tilt.as_ref().is_some_and(|t| t.len() != n) {
                    return Err(Error::InvalidArgument("a tilt cannot be used across several N".into()));
                }
                s.build()
            };
            let report = scaling_scan(family, &n_list, job.window.unwrap_or([0.5, 1.5]), &cfg)?;
            let verdicts = detect_transition(&report);
            Ok(Artifact::Json(json!({ "report": report, "verdicts": verdicts })))
        }
        Command::Coeffs(_) => {
            let n = JobConfig::require(job.n, "N")?;
            let eps0 = JobConfig::require(job.eps0, "eps0")?;
            let r = JobConfig::require(job.r, "r")?;
            let steps = job.steps.unwrap_or(8);
            let table = coefficient_table(n, eps0, r)?;
            let coeffs = NeighborhoodCoefficients::new(n, eps0, r)?;
            let mut b_rows = Vec::new();
            for k in 0..=n {
                for dv in uniform_grid(-eps0, eps0, steps) {
                    b_rows.push(json!({ "k": k, "dv": dv, "B": coeffs.B(k, dv, 1.0)? }));
                }
            }
            Ok(Artifact::Json(json!({ "N": n, "eps0": eps0, "r": r, "A": table, "B_unit_jacobian": b_rows })))
        }
        Command::VerifyDecomposition(_) => {
            let v = JobConfig::require(job.v, "v")?;
            let r = job.r.unwrap_or(1.0);
            let loaded = job.catalog.as_deref().map(load_catalog).transpose()?;
            let model = match (&job.model, &loaded) {
                (Some(spec), _) => spec.build()?,
                (None, Some(cat)) => cat.model.build()?,
                (None, None) => return Err(CliError::config("missing model or catalog")),
            };
            let eps_list = match (&job.eps_list, job.eps0) {
                (Some(l), _) => l.clone(),
                (None, Some(e)) => vec![e],
                (None, None) => Vec::new(),
            };
            let catalog = match loaded {
                Some(c) => c,
                None => {
                    let top = eps_list.iter().cloned().fold(0.0, f64::max);
                    let cfg = SearchConfig { workers, ..SearchConfig::with_seed(job.seed()) };
                    find_critical_points(&model, v + 2.0 * top.max(0.25), &cfg)?
                }
            };
            let eps_list = if eps_list.is_empty() { vec![catalog.epsilon0()?] } else { eps_list };
            let cfg = DecompositionConfig {
                sampler: job.sampler(1_000_000),
                cylinder_samples: job.cylinder_samples.unwrap_or(0),
                ..Default::default()
            };
            let reports = epsilon_sweep(&model, &catalog, v, &eps_list, r, &cfg)?;
            for w in reports.iter().flat_map(|r| &r.warnings) {
                log::warn!("{w}");
            }
            let table: Vec<Value> = reports
                .iter()
                .map(|r| {
                    json!({
                        "eps0": r.eps0,
                        "r_eff": r.r_eff,
                        "residual_rel": r.residual_rel,
                        "residual_stderr": r.residual_stderr,
                        "residual_vs_mc_rel": r.residual_vs_mc_rel,
                        "S_decomposed": r.s_decomposed,
                        "S_direct": r.s_direct,
                    })
                })
                .collect();
            Ok(Artifact::Json(json!({ "table": table, "reports": reports })))
        }
    }
}

fn write_output(job: &JobConfig, text: &str) -> Result<(), CliError> {
    match &job.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError {
                code: EXIT_IO,
                kind: "IoError".into(),
                message: e.to_string(),
            })
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let job = resolve_job(cli)?;
    let artifact = execute(&cli.command, &job)?;
    write_output(&job, &render(cli.command.name(), &job, artifact))
}

/// Parses `args`, runs, and returns the process exit code. Errors go to
/// stderr as JSON.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", CliError::config(e.to_string().trim_end()).to_json());
            return EXIT_CONFIG;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("morse-entropy").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_job_file() {
        let dir = std::env::temp_dir().join(format!("me-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("job.json");
        std::fs::write(&path, r#"{"model": {"kind": "harmonic", "N": 4}, "v": 2.0, "samples": 10, "seed": 3}"#).unwrap();
        let cli = parse(&["volume", "--config", path.to_str().unwrap(), "--v", "1", "--N", "3"]);
        let job = resolve_job(&cli).unwrap();
        assert_eq!(job.v, Some(1.0));
        assert_eq!(job.seed, Some(3));
        assert_eq!(job.model.as_ref().unwrap().n, 3);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<JobConfig>(r#"{"sample": 5}"#);
        assert!(err.is_err());
    }

    #[test]
    fn hash_ignores_output_and_workers() {
        let a = JobConfig { v: Some(1.0), ..Default::default() };
        let b = JobConfig { v: Some(1.0), workers: Some(7), output: Some("x".into()), ..Default::default() };
        assert_eq!(a.hash("volume"), b.hash("volume"));
        assert_ne!(a.hash("volume"), a.hash("beta"));
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::SingleLevel).code, EXIT_COMPUTE);
        assert_eq!(CliError::from(Error::Config("x".into())).code, EXIT_CONFIG);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::from(Error::Io(io)).code, EXIT_IO);
    }

    #[test]
    fn negative_levels_parse() {
        let cli = parse(&["euler-curve", "--catalog", "c.json", "--vmin", "-1", "--vmax", "0.5"]);
        let job = resolve_job(&cli).unwrap();
        assert_eq!(job.vmin, Some(-1.0));
    }
}

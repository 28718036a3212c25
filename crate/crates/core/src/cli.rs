//! The `thermo` command-line front end.
//!
//! Exit codes: 0 success, 1 golden-value mismatch (`tables`), 2 unreadable
//! or malformed input and usage errors, 3 domain errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::bath::{parse_ohmicity, BathModel, S_ONE_PLUS};
use crate::error::Error;
use crate::estimate::{
    crb_benchmark_with, fi_score_variance_mc_with, mle, mle_bosonic_with, Engine, EstimationConfig, ZetaForm,
};
use crate::fisher::{empirical_fi_rate, equilibrium_fi, equilibrium_optimum, fi_rate_exact, Variant};
use crate::optimize::{
    default_restarts, optimize_asymptotic, optimize_global, optimize_two_level_variant, GLOBAL_MAX_LEVELS,
};
use crate::robustness::robustness_sweep;
use crate::spectrum::{EnergySpectrum, SpectrumFile, TwoLevelAnsatz};
use crate::trajectory::{
    read_jsonl, replica_rng, simulate_stats_streaming, simulate_with_rng, sufficient_stats, write_jsonl, Initial,
    SufficientStats, TrajectoryHeader,
};

#[derive(Debug, Parser)]
#[command(
    name = "thermo",
    version,
    about = "Thermometry with continuously monitored N-level probes"
)]
pub struct Cli {
    /// JSON object whose keys are long flag names; explicit flags take
    /// precedence over its entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Output format (default: csv for tabular commands, json otherwise).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write results here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Seed for every random draw.
    #[arg(long, global = true, env = "THERMO_SEED", default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BathKind {
    Fermionic,
    Bosonic,
}

#[derive(Debug, Clone, Args)]
pub struct BathArgs {
    #[arg(long, value_enum, default_value = "fermionic")]
    pub bath: BathKind,

    /// Bosonic ohmicity; `1+` means the right limit at one.
    #[arg(long = "s", value_parser = parse_ohmicity, default_value = "1+")]
    pub s: f64,

    /// Coupling γ (rate units).
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    /// Bath JSON file, e.g. {"bath": "bosonic", "gamma": 1, "s": "1+"};
    /// replaces --bath, --s and --gamma.
    #[arg(long, value_name = "FILE")]
    pub bath_file: Option<PathBuf>,
}

impl BathArgs {
    fn model(&self) -> Result<BathModel, CliError> {
        if let Some(path) = &self.bath_file {
            return BathModel::read(path).map_err(read_error(path));
        }
        let bath = match self.bath {
            BathKind::Fermionic => BathModel::fermionic(self.gamma),
            BathKind::Bosonic => BathModel::bosonic(self.gamma, self.s),
        };
        bath.map_err(CliError::Domain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingMode {
    TwoLevel,
    Global,
    Equilibrium,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizeMode {
    Asymptotic,
    TwoLevel,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Monitored,
    Empirical,
    Equilibrium,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Monitored => Variant::Monitored,
            VariantArg::Empirical => Variant::Empirical,
            VariantArg::Equilibrium => Variant::Equilibrium,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Coarse,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZetaArg {
    Rederived,
    AsPrinted,
}

/// Probe description shared by `estimate` and `crb`.
#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    /// Two-level spectrum file; its gap is the physical gap ε.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["levels", "n0", "epsilon"])]
    pub spectrum: Option<PathBuf>,

    /// Number of levels N.
    #[arg(long)]
    pub levels: Option<usize>,

    /// Ground-manifold degeneracy N0.
    #[arg(long)]
    pub n0: Option<usize>,

    /// Physical gap ε (energy units, k_B = 1).
    #[arg(long)]
    pub epsilon: Option<f64>,
}

impl ProbeArgs {
    // Optimal fermionic probe with 64 levels.
    const DEFAULT: (usize, usize, f64) = (64, 12, 2.9682);

    fn ansatz(&self) -> Result<TwoLevelAnsatz, CliError> {
        if let Some(path) = &self.spectrum {
            let file = SpectrumFile::read(path).map_err(read_error(path))?;
            return file.ansatz().ok_or_else(|| {
                CliError::Input(Error::InvalidSpectrum(format!(
                    "{} is not a two-level spectrum file",
                    path.display()
                )))
            });
        }
        let (n, n0, eps) = Self::DEFAULT;
        TwoLevelAnsatz::new(
            self.levels.unwrap_or(n),
            self.n0.unwrap_or(n0),
            self.epsilon.unwrap_or(eps),
        )
        .map_err(CliError::Domain)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fisher-information rate of a spectrum given in units of k_B T.
    Fisher {
        #[arg(long, value_name = "FILE")]
        spectrum: PathBuf,
        #[command(flatten)]
        bath: BathArgs,
        /// Temperature for the dimensional Fisher information.
        #[arg(long, requires = "tau")]
        temperature: Option<f64>,
        /// Record duration for the dimensional Fisher information.
        #[arg(long, requires = "temperature")]
        tau: Option<f64>,
        /// Also report the population-only (empirical) rate.
        #[arg(long)]
        empirical: bool,
        /// Also report the single-measurement equilibrium Fisher information.
        #[arg(long)]
        equilibrium: bool,
    },
    /// Optimal gaps, degeneracy fractions and coefficients for every bath,
    /// checked against reference values.
    Tables,
    /// Optimal FI rate against the number of levels N = 2^n.
    Scaling {
        #[command(flatten)]
        bath: BathArgs,
        /// Smallest exponent n.
        #[arg(long, default_value_t = 2)]
        n_min: u32,
        /// Largest exponent n.
        #[arg(long, default_value_t = 10)]
        n_max: u32,
        #[arg(long, value_enum, default_value = "two-level")]
        mode: ScalingMode,
        /// Multi-start count for the global mode.
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Optimize a probe spectrum.
    Optimize {
        #[command(flatten)]
        bath: BathArgs,
        #[arg(long, value_enum, default_value = "asymptotic")]
        mode: OptimizeMode,
        #[arg(long, value_enum, default_value = "monitored")]
        variant: VariantArg,
        /// Number of levels (two-level and global modes).
        #[arg(long)]
        levels: Option<usize>,
        /// Multi-start count for the global mode.
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Simulate a monitored trajectory; spectrum levels are energies.
    Simulate {
        #[arg(long, value_name = "FILE")]
        spectrum: PathBuf,
        #[command(flatten)]
        bath: BathArgs,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        /// Observation horizon in units of 1/γ.
        #[arg(long)]
        tau: f64,
        /// `thermal` or a level index.
        #[arg(long, default_value = "thermal", value_parser = parse_initial)]
        initial: Initial,
        /// Emit only the sufficient statistics (two-level spectra).
        #[arg(long)]
        stats_only: bool,
        /// Also write the sufficient statistics of the trajectory here.
        #[arg(long, value_name = "FILE")]
        stats_output: Option<PathBuf>,
    },
    /// Maximum-likelihood temperature from recorded data.
    Estimate {
        /// Sufficient statistics JSON: {"k", "l", "tau0", "tau"}.
        #[arg(long, value_name = "FILE", required_unless_present = "trajectory")]
        stats: Option<PathBuf>,
        /// Trajectory JSONL as written by `simulate`.
        #[arg(long, value_name = "FILE", conflicts_with = "stats")]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        probe: ProbeArgs,
        #[command(flatten)]
        bath: BathArgs,
        /// Bosonic coefficient expression.
        #[arg(long, value_enum, default_value = "rederived")]
        zeta: ZetaArg,
    },
    /// Compare the estimator's mean squared error with the Cramér–Rao bound.
    Crb {
        #[command(flatten)]
        probe: ProbeArgs,
        #[command(flatten)]
        bath: BathArgs,
        /// True temperature of the simulated sample.
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = 1e5)]
        tau: f64,
        /// Independent replicas (at least 100).
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        #[arg(long, value_enum, default_value = "coarse")]
        engine: EngineArg,
        /// Also estimate the Fisher information as the score variance.
        #[arg(long)]
        score_variance: bool,
    },
    /// FI rate of Gaussian-perturbed optimal probes with N = 2^n levels.
    Robustness {
        #[command(flatten)]
        bath: BathArgs,
        /// Exponent n of the level count N = 2^n.
        #[arg(long, default_value_t = 10)]
        n: u32,
        /// Comma-separated disorder strengths, in units of k_B T.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
        sigmas: Vec<f64>,
        /// Perturbed spectra per disorder strength (at least 10).
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fisher { .. } => "fisher",
            Command::Tables => "tables",
            Command::Scaling { .. } => "scaling",
            Command::Optimize { .. } => "optimize",
            Command::Simulate { .. } => "simulate",
            Command::Estimate { .. } => "estimate",
            Command::Crb { .. } => "crb",
            Command::Robustness { .. } => "robustness",
        }
    }
}

fn parse_initial(text: &str) -> Result<Initial, String> {
    match text.trim() {
        "thermal" => Ok(Initial::Thermal),
        other => other
            .parse::<usize>()
            .map(Initial::Fixed)
            .map_err(|_| format!("expected `thermal` or a level index, got {other:?}")),
    }
}

/// Failure of a command, mapped onto the exit-code contract.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("golden check failed: {0}")]
    Golden(String),
    #[error("{0}")]
    Input(Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Golden(_) => 1,
            CliError::Input(_) | CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e)
        } else {
            CliError::Domain(e)
        }
    }
}

/// Names the offending file in I/O and parse failures.
fn read_error(path: impl AsRef<std::path::Path>) -> impl FnOnce(Error) -> CliError {
    let shown = path.as_ref().display().to_string();
    move |e| match e {
        Error::Io(e) => CliError::Input(Error::Io(io::Error::new(e.kind(), format!("{shown}: {e}")))),
        Error::Json(e) => CliError::Input(Error::InvalidArgument(format!("{shown}: {e}"))),
        other => CliError::Input(other),
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(Error::Io(e))
    }
}

fn subcommand_names() -> Vec<String> {
    Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect()
}

/// Splices the entries of a `--config` file into the argument list, right
/// after the subcommand. Keys already given on the command line are skipped,
/// so explicit flags win. A `command` key supplies the subcommand when the
/// command line has none.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strings: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let path = strings.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strings.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| read_error(&path)(Error::Io(e)))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(Error::Json(e)))?;
    let Value::Object(map) = value else {
        return Err(CliError::Input(Error::InvalidArgument(format!(
            "config file {path} must hold a JSON object"
        ))));
    };

    let explicit = |key: &str| {
        let flag = format!("--{key}");
        strings.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}=")))
    };
    let names = subcommand_names();
    let mut out = args.clone();
    let mut at = match strings.iter().skip(1).position(|a| names.contains(a)) {
        Some(p) => p + 2,
        None => match map.get("command").and_then(Value::as_str) {
            Some(cmd) => {
                out.push(cmd.into());
                out.len()
            }
            None => return Err(CliError::Usage("no subcommand given".into())),
        },
    };
    for (key, v) in &map {
        if key == "command" || key == "config" || explicit(key) {
            continue;
        }
        let flag = OsString::from(format!("--{key}"));
        let text = match v {
            Value::Null | Value::Bool(false) => continue,
            Value::Bool(true) => None,
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            Value::Array(items) => Some(
                items
                    .iter()
                    .map(|i| match i {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            Value::Object(_) => {
                return Err(CliError::Input(Error::InvalidArgument(format!(
                    "config key {key:?} holds an object"
                ))))
            }
        };
        out.insert(at, flag);
        at += 1;
        if let Some(t) = text {
            out.insert(at, t.into());
            at += 1;
        }
    }
    Ok(out)
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let expanded = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("thermo: {e}");
            return e.exit_code();
        }
    };
    let matches = match Cli::command().args_override_self(true).try_get_matches_from(&expanded) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    let invocation: Vec<String> = expanded
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(&cli, invocation) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("thermo: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, invocation: Vec<String>) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let out = Emitter {
        provenance: json!({
            "tool": "thermo",
            "version": env!("CARGO_PKG_VERSION"),
            "git": option_env!("THERMO_GIT_REV").unwrap_or("unknown"),
            "command": cli.command.name(),
            "seed": cli.seed,
            "args": invocation,
        }),
        output: cli.output.clone(),
        format: cli.format,
    };
    pool.install(|| dispatch(cli, &out))
}

fn dispatch(cli: &Cli, out: &Emitter) -> Result<(), CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::Fisher {
            spectrum,
            bath,
            temperature,
            tau,
            empirical,
            equilibrium,
        } => cmd_fisher(
            out,
            spectrum,
            &bath.model()?,
            *temperature,
            *tau,
            *empirical,
            *equilibrium,
        ),
        Command::Tables => cmd_tables(out),
        Command::Scaling {
            bath,
            n_min,
            n_max,
            mode,
            restarts,
        } => cmd_scaling(out, &bath.model()?, *n_min, *n_max, *mode, *restarts, seed),
        Command::Optimize {
            bath,
            mode,
            variant,
            levels,
            restarts,
        } => cmd_optimize(out, &bath.model()?, *mode, (*variant).into(), *levels, *restarts, seed),
        Command::Simulate {
            spectrum,
            bath,
            temperature,
            tau,
            initial,
            stats_only,
            stats_output,
        } => cmd_simulate(
            out,
            spectrum,
            &bath.model()?,
            *temperature,
            *tau,
            *initial,
            *stats_only,
            stats_output.as_deref(),
            seed,
        ),
        Command::Estimate {
            stats,
            trajectory,
            probe,
            bath,
            zeta,
        } => cmd_estimate(
            out,
            stats.as_deref(),
            trajectory.as_deref(),
            probe,
            &bath.model()?,
            *zeta,
        ),
        Command::Crb {
            probe,
            bath,
            temperature,
            tau,
            replicas,
            engine,
            score_variance,
        } => {
            let cfg = EstimationConfig::new(probe.ansatz()?, bath.model()?)?;
            let engine = match engine {
                EngineArg::Coarse => Engine::Coarse,
                EngineArg::Full => Engine::Full,
            };
            let report = crb_benchmark_with(&cfg, *temperature, *tau, *replicas, seed, engine)?;
            let mut value = serde_json::to_value(report).map_err(Error::Json)?;
            if *score_variance {
                let fi = fi_score_variance_mc_with(&cfg, *temperature, *tau, *replicas, seed, engine)?;
                value["score_variance"] = serde_json::to_value(fi).map_err(Error::Json)?;
            }
            value["probe"] = serde_json::to_value(cfg).map_err(Error::Json)?;
            out.object(value)
        }
        Command::Robustness {
            bath,
            n,
            sigmas,
            trials,
        } => {
            if *trials < 10 {
                return Err(CliError::Usage("--trials must be at least 10".into()));
            }
            let rows = robustness_sweep(levels_from_exponent(*n)?, &bath.model()?, sigmas, *trials, seed)?;
            out.table(&rows)
        }
    }
}

fn levels_from_exponent(n: u32) -> Result<usize, CliError> {
    if !(1..=20).contains(&n) {
        return Err(CliError::Usage(format!("n must lie in 1..=20, got {n}")));
    }
    Ok(1usize << n)
}

fn read_spectrum(path: &Path) -> Result<(SpectrumFile, EnergySpectrum), CliError> {
    let file = SpectrumFile::read(path).map_err(read_error(path))?;
    let spec = file.to_spectrum().map_err(CliError::Input)?;
    Ok((file, spec))
}

#[derive(Serialize)]
struct FisherReport {
    levels: usize,
    spectrum_sha256: String,
    bath: BathModel,
    fi_rate: f64,
    fi_per_level: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fisher_information: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical_fi_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    equilibrium_fi: Option<f64>,
}

fn cmd_fisher(
    out: &Emitter,
    path: &Path,
    bath: &BathModel,
    temperature: Option<f64>,
    tau: Option<f64>,
    empirical: bool,
    equilibrium: bool,
) -> Result<(), CliError> {
    let (_, spec) = read_spectrum(path)?;
    let fi = fi_rate_exact(&spec, bath);
    let fisher_information = match (temperature, tau) {
        (Some(t), Some(tau)) => {
            if !(t > 0.0 && tau > 0.0) {
                return Err(CliError::Domain(Error::InvalidArgument(
                    "temperature and tau must be > 0".into(),
                )));
            }
            Some(fi.dimensional(bath, t, tau))
        }
        _ => None,
    };
    let empirical_fi_rate = if empirical {
        Some(empirical_fi_rate(&spec, bath)?.value())
    } else {
        None
    };
    out.object(FisherReport {
        levels: spec.len(),
        spectrum_sha256: spec.digest(),
        bath: *bath,
        fi_rate: fi.value(),
        fi_per_level: fi.value() / spec.len() as f64,
        fisher_information,
        empirical_fi_rate,
        equilibrium_fi: equilibrium.then(|| equilibrium_fi(&spec)),
    })
}

/// One row of the optimal-coefficient tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub variant: Variant,
    pub bath: String,
    pub s: String,
    pub x_star: f64,
    pub c_star: f64,
    pub coefficient: f64,
    pub reference_x_star: f64,
    pub reference_c_star: f64,
    pub reference_coefficient: f64,
    pub tolerance: f64,
    pub pass: bool,
}

// (variant, s or None for fermionic, x*, C*, coefficient, tolerance)
const REFERENCE: [(Variant, Option<f64>, f64, f64, f64, f64); 10] = [
    (Variant::Monitored, None, 2.9682, 0.1848, 0.2596, 2e-3),
    (Variant::Monitored, Some(S_ONE_PLUS), 3.0880, 0.1760, 1.0508, 1e-2),
    (Variant::Monitored, Some(1.5), 3.7195, 0.1347, 1.9403, 5e-3),
    (Variant::Monitored, Some(2.0), 4.2681, 0.1058, 3.8782, 5e-3),
    (Variant::Monitored, Some(3.0), 5.2706, 0.0669, 18.4880, 5e-3),
    (Variant::Empirical, None, 2.7233, 0.2040, 0.1448, 5e-3),
    (Variant::Empirical, Some(S_ONE_PLUS), 3.4079, 0.1539, 0.4851, 5e-3),
    (Variant::Empirical, Some(1.5), 3.9050, 0.1243, 0.9274, 5e-3),
    (Variant::Empirical, Some(2.0), 4.3850, 0.1004, 1.8879, 5e-3),
    (Variant::Empirical, Some(3.0), 5.3215, 0.0653, 9.1514, 5e-3),
];

/// Recomputes every reference row.
pub fn reference_tables() -> Result<Vec<TableRow>, Error> {
    REFERENCE
        .iter()
        .map(|&(variant, s, x, c, coef, tol)| {
            let bath = match s {
                None => BathModel::fermionic(1.0)?,
                Some(s) => BathModel::bosonic(1.0, s)?,
            };
            let r = optimize_asymptotic(&bath, variant)?;
            let c_star = r.c_star.unwrap_or(f64::NAN);
            let pass = (r.x_star - x).abs() <= tol
                && (c_star - c).abs() <= tol
                && (r.coefficient_per_level - coef).abs() <= tol;
            Ok(TableRow {
                variant,
                bath: if s.is_some() { "bosonic" } else { "fermionic" }.into(),
                s: match s {
                    None => String::new(),
                    Some(v) if v == S_ONE_PLUS => "1+".into(),
                    Some(v) => v.to_string(),
                },
                x_star: r.x_star,
                c_star,
                coefficient: r.coefficient_per_level,
                reference_x_star: x,
                reference_c_star: c,
                reference_coefficient: coef,
                tolerance: tol,
                pass,
            })
        })
        .collect()
}

fn cmd_tables(out: &Emitter) -> Result<(), CliError> {
    let rows = reference_tables()?;
    out.table(&rows)?;
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{:?} {} s={}", r.variant, r.bath, r.s))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Golden(failed.join(", ")))
    }
}

#[derive(Serialize)]
struct ScalingRow {
    n: u32,
    levels: usize,
    fi_star: f64,
    fi_per_level: f64,
    x_star: f64,
    n0_star: Option<usize>,
}

fn cmd_scaling(
    out: &Emitter,
    bath: &BathModel,
    n_min: u32,
    n_max: u32,
    mode: ScalingMode,
    restarts: Option<usize>,
    seed: u64,
) -> Result<(), CliError> {
    if n_min > n_max {
        return Err(CliError::Usage(format!("--n-min {n_min} exceeds --n-max {n_max}")));
    }
    let max_global = GLOBAL_MAX_LEVELS.trailing_zeros();
    if mode == ScalingMode::Global && n_max > max_global {
        return Err(CliError::Usage(format!("global mode supports n <= {max_global}")));
    }
    let mut rows = Vec::new();
    for n in n_min..=n_max {
        let levels = levels_from_exponent(n)?;
        let (fi, x, n0) = match mode {
            ScalingMode::TwoLevel | ScalingMode::Empirical => {
                let variant = if mode == ScalingMode::TwoLevel {
                    Variant::Monitored
                } else {
                    Variant::Empirical
                };
                let r = optimize_two_level_variant(levels, bath, variant)?;
                (r.fi_rate, r.x_star, r.n0_star)
            }
            ScalingMode::Global => {
                let r = optimize_global(levels, bath, restarts.unwrap_or(default_restarts(levels)), seed)?;
                (r.fi_rate, r.x_star, r.n0_star)
            }
            ScalingMode::Equilibrium => {
                let r = equilibrium_optimum(levels)?;
                (r.fi, r.x, Some(r.n0))
            }
        };
        rows.push(ScalingRow {
            n,
            levels,
            fi_star: fi,
            fi_per_level: fi / levels as f64,
            x_star: x,
            n0_star: n0,
        });
    }
    out.table(&rows)
}

fn cmd_optimize(
    out: &Emitter,
    bath: &BathModel,
    mode: OptimizeMode,
    variant: Variant,
    levels: Option<usize>,
    restarts: Option<usize>,
    seed: u64,
) -> Result<(), CliError> {
    let need_levels = || levels.ok_or_else(|| CliError::Usage("--levels is required for this mode".into()));
    let result = match mode {
        OptimizeMode::Asymptotic => optimize_asymptotic(bath, variant)?,
        OptimizeMode::TwoLevel => optimize_two_level_variant(need_levels()?, bath, variant)?,
        OptimizeMode::Global => {
            if variant != Variant::Monitored {
                return Err(CliError::Usage("global mode optimizes the monitored rate only".into()));
            }
            let n = need_levels()?;
            optimize_global(n, bath, restarts.unwrap_or(default_restarts(n)), seed)?
        }
    };
    out.object(result)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    out: &Emitter,
    path: &Path,
    bath: &BathModel,
    temperature: f64,
    tau: f64,
    initial: Initial,
    stats_only: bool,
    stats_output: Option<&Path>,
    seed: u64,
) -> Result<(), CliError> {
    let (file, spec) = read_spectrum(path)?;
    let ansatz = file.ansatz();
    let mut rng = replica_rng(seed, 0);
    if stats_only {
        let a = ansatz.ok_or_else(|| CliError::Usage("--stats-only needs a two-level spectrum file".into()))?;
        let stats = simulate_stats_streaming(&spec, &a, bath, temperature, tau, initial, &mut rng)?;
        return out.object(stats);
    }
    let traj = simulate_with_rng(&spec, bath, temperature, tau, initial, &mut rng)?;
    let header = TrajectoryHeader {
        spectrum_sha256: spec.digest(),
        bath: *bath,
        temperature,
        tau,
        seed,
        levels: spec.levels().to_vec(),
        jumps: traj.jump_count(),
        provenance: Some(out.provenance.clone()),
    };
    write_jsonl(&traj, &header, out.sink()?)?;
    if let Some(stats_path) = stats_output {
        let a = ansatz.ok_or_else(|| CliError::Usage("--stats-output needs a two-level spectrum file".into()))?;
        let stats = sufficient_stats(&traj, &a)?;
        let mut file = BufWriter::new(File::create(stats_path)?);
        serde_json::to_writer_pretty(&mut file, &out.with_provenance(stats)?).map_err(Error::Json)?;
        writeln!(file)?;
        file.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateReport {
    t_hat: f64,
    occupation_hat: f64,
    valid: bool,
    log_likelihood_at_hat: f64,
    stats: SufficientStats,
    probe: EstimationConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    zeta_form: Option<ZetaForm>,
}

fn cmd_estimate(
    out: &Emitter,
    stats_path: Option<&Path>,
    trajectory: Option<&Path>,
    probe: &ProbeArgs,
    bath: &BathModel,
    zeta: ZetaArg,
) -> Result<(), CliError> {
    let cfg = EstimationConfig::new(probe.ansatz()?, *bath)?;
    let stats = match (stats_path, trajectory) {
        (Some(p), _) => SufficientStats::read(p).map_err(read_error(p))?,
        (None, Some(p)) => {
            let (_, traj) = read_jsonl(p).map_err(read_error(p))?;
            sufficient_stats(&traj, &cfg.probe())?
        }
        (None, None) => return Err(CliError::Usage("give --stats or --trajectory".into())),
    };
    let (result, zeta_form) = if bath.is_fermionic() {
        (mle(&stats, &cfg)?, None)
    } else {
        let form = match zeta {
            ZetaArg::Rederived => ZetaForm::Rederived,
            ZetaArg::AsPrinted => ZetaForm::AsPrinted,
        };
        (mle_bosonic_with(&stats, &cfg, form)?, Some(form))
    };
    out.object(EstimateReport {
        t_hat: result.t_hat,
        occupation_hat: result.occupation_hat,
        valid: result.valid,
        log_likelihood_at_hat: result.log_likelihood_at_hat,
        stats,
        probe: cfg,
        zeta_form,
    })
}

/// Writes results with embedded provenance.
struct Emitter {
    provenance: Value,
    output: Option<PathBuf>,
    format: Option<Format>,
}

impl Emitter {
    fn sink(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.output {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn with_provenance(&self, result: impl Serialize) -> Result<Value, CliError> {
        let mut value = serde_json::to_value(result).map_err(Error::Json)?;
        match &mut value {
            Value::Object(map) => {
                map.insert("provenance".into(), self.provenance.clone());
                Ok(value)
            }
            _ => Ok(json!({ "result": value, "provenance": self.provenance })),
        }
    }

    /// A single result, always JSON.
    fn object(&self, result: impl Serialize) -> Result<(), CliError> {
        if self.format == Some(Format::Csv) {
            return self.table(&[result]);
        }
        let value = self.with_provenance(result)?;
        let mut w = self.sink()?;
        serde_json::to_writer_pretty(&mut w, &value).map_err(Error::Json)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Rows of a table: CSV unless JSON was requested.
    fn table<R: Serialize>(&self, rows: &[R]) -> Result<(), CliError> {
        let values: Vec<Value> = rows
            .iter()
            .map(serde_json::to_value)
            .collect::<Result<_, _>>()
            .map_err(Error::Json)?;
        let mut w = self.sink()?;
        if self.format == Some(Format::Json) {
            let doc = json!({ "rows": values, "provenance": self.provenance });
            serde_json::to_writer_pretty(&mut w, &doc).map_err(Error::Json)?;
            writeln!(w)?;
            w.flush()?;
            return Ok(());
        }
        writeln!(w, "# provenance: {}", self.provenance)?;
        write_csv(&values, &mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        other => other.to_string(),
    }
}

// Header from the keys of the first row; rows must share its keys.
fn write_csv(rows: &[Value], w: &mut dyn Write) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    let empty = Map::new();
    let keys: Vec<String> = rows
        .first()
        .and_then(Value::as_object)
        .unwrap_or(&empty)
        .keys()
        .cloned()
        .collect();
    let csv_err = |e: csv::Error| CliError::Input(Error::Io(io::Error::other(e)));
    out.write_record(&keys).map_err(csv_err)?;
    for row in rows {
        let record: Vec<String> = keys
            .iter()
            .map(|k| csv_cell(row.get(k).unwrap_or(&Value::Null)))
            .collect();
        out.write_record(&record).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

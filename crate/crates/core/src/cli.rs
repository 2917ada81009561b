//! Configuration-driven experiment runner behind the `udcat` binary.
//!
//! A run is described by an [`ExperimentConfig`] (a TOML file, every key
//! optional) plus command-line overrides. It is resolved into an
//! [`Experiment`], whose canonical TOML form is hashed into the metadata
//! line of every CSV.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coherent::SymmetricState;
use crate::fock::{basis_dimension, FockBasis, DEFAULT_CAPACITY};
use crate::husimi::{
    branch_points, find_humps, husimi_grid, moment_analytic, moment_mc, wehrl_entropy, GridSpec, IntegrationSpec,
    MethodTag, Slice, MIN_SAMPLES,
};
use crate::lmg::{diagonalize, spectrum_sweep, LMGParams, LmgOperators};
use crate::parity::ParityLabel;
use crate::selftest::{self, SelftestOptions};
use crate::variational::{critical_point, fidelity_curve, lowest_per_sector, variational_cat_in};
use crate::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Capacity(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Capacity { .. } => CliError::Capacity(e.to_string()),
            Error::ZeroProjection { .. } | Error::DivisionHazard { .. } | Error::Numerical(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("output: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("output: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Fidelity,
    Husimi,
    Localization,
    Selftest,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Spectrum => "spectrum",
            Command::Fidelity => "fidelity",
            Command::Husimi => "husimi",
            Command::Localization => "localization",
            Command::Selftest => "selftest",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// Which state a phase-space command looks at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Variational,
    Numerical,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub levels: Option<usize>,
    pub particles: Option<Vec<u32>>,
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSection {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub steps: Option<usize>,
    pub scale: Option<Scale>,
    /// Explicit grid; takes precedence over min/max/steps.
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    pub method: Option<String>,
    pub samples: Option<usize>,
    pub batch: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub keep: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelitySection {
    pub maximize: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HusimiSection {
    pub half_width: Option<f64>,
    pub resolution: Option<usize>,
    pub slice: Option<String>,
    pub source: Option<Source>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationSection {
    pub nu: Option<u32>,
    pub wehrl: Option<bool>,
    pub numerical: Option<bool>,
}

/// Raw configuration file; every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub parity: Option<Vec<String>>,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub lambda: LambdaSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub fidelity: FidelitySection,
    #[serde(default)]
    pub husimi: HusimiSection,
    #[serde(default)]
    pub localization: LocalizationSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub particles: Option<Vec<u32>>,
    pub levels: Option<usize>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub lambda_steps: Option<usize>,
    pub lambda_scale: Option<Scale>,
    pub parity: Option<Vec<String>>,
    pub samples: Option<usize>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = &$src {
                    $dst = Some(v.clone());
                }
            };
        }
        set!(self.out, o.out);
        set!(self.seed, o.seed);
        set!(self.workers, o.workers);
        set!(self.system.particles, o.particles);
        set!(self.system.levels, o.levels);
        set!(self.parity, o.parity);
        set!(self.integration.samples, o.samples);
        if o.lambda_min.is_some() || o.lambda_max.is_some() || o.lambda_steps.is_some() || o.lambda_scale.is_some() {
            // flags describe a range, which replaces an explicit list from the file
            self.lambda.values = None;
        }
        set!(self.lambda.min, o.lambda_min);
        set!(self.lambda.max, o.lambda_max);
        set!(self.lambda.steps, o.lambda_steps);
        set!(self.lambda.scale, o.lambda_scale);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegrationSettings {
    #[serde(serialize_with = "as_debug")]
    pub method: MethodTag,
    pub samples: usize,
    pub batch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HusimiSettings {
    pub half_width: f64,
    pub resolution: usize,
    #[serde(serialize_with = "as_debug")]
    pub slice: Slice,
    pub source: Source,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationSettings {
    pub nu: u32,
    pub wehrl: bool,
    pub numerical: bool,
}

/// Fully resolved run description. Fields that cannot change the output
/// (worker count, output path) are left out of the digest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Experiment {
    pub command: Command,
    pub levels: usize,
    pub particles: Vec<u32>,
    pub epsilon: f64,
    pub lambdas: Vec<f64>,
    #[serde(serialize_with = "labels_as_strings")]
    pub parities: Vec<ParityLabel>,
    pub seed: Option<u64>,
    pub keep: usize,
    pub maximize: bool,
    pub integration: IntegrationSettings,
    pub husimi: HusimiSettings,
    pub localization: LocalizationSettings,
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn as_debug<T: fmt::Debug, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:?}"))
}

fn labels_as_strings<S: serde::Serializer>(labels: &[ParityLabel], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(labels.iter().map(|l| l.to_string()))
}

fn lambda_grid(l: &LambdaSection) -> CliResult<Vec<f64>> {
    let grid = match &l.values {
        Some(v) => v.clone(),
        None => {
            let min = l.min.unwrap_or(0.0);
            let max = l.max.unwrap_or(3.0);
            let steps = l.steps.unwrap_or(31);
            if steps == 0 {
                return Err(CliError::Config("lambda grid needs at least one step".into()));
            }
            if max < min {
                return Err(CliError::Config(format!("lambda max {max} is below min {min}")));
            }
            let t = |k: usize| if steps == 1 { 0.0 } else { k as f64 / (steps - 1) as f64 };
            match l.scale.unwrap_or_default() {
                Scale::Linear => (0..steps).map(|k| min + (max - min) * t(k)).collect(),
                Scale::Log => {
                    if min <= 0.0 {
                        return Err(CliError::Config("log lambda grid needs min > 0".into()));
                    }
                    let (a, b) = (min.ln(), max.ln());
                    (0..steps).map(|k| (a + (b - a) * t(k)).exp()).collect()
                }
            }
        }
    };
    if grid.is_empty() {
        return Err(CliError::Config("empty lambda grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(CliError::Config("lambda values must be finite and nonnegative".into()));
    }
    Ok(grid)
}

impl Experiment {
    /// Resolves defaults and checks the invariants of `command`.
    pub fn resolve(command: Command, cfg: &ExperimentConfig) -> CliResult<Self> {
        let levels = cfg.system.levels.unwrap_or(3);
        if !(2..=32).contains(&levels) {
            return Err(CliError::Config(format!("D = {levels} is outside 2..=32")));
        }
        let particles = cfg.system.particles.clone().unwrap_or_else(|| vec![20]);
        if particles.is_empty() {
            return Err(CliError::Config("empty particle-number list".into()));
        }
        let epsilon = cfg.system.epsilon.unwrap_or(1.0);
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(CliError::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let uses_parity = matches!(command, Command::Fidelity | Command::Husimi | Command::Localization);
        if uses_parity && levels != 3 {
            return Err(CliError::Config(format!("{command} is defined for D = 3")));
        }
        let parities = match &cfg.parity {
            // 2^(D-1) labels, only materialized where they are used
            None if uses_parity => ParityLabel::all(levels - 1),
            None => Vec::new(),
            Some(list) => list
                .iter()
                .map(|s| {
                    let l: ParityLabel = s.parse().map_err(|e: Error| CliError::Config(e.to_string()))?;
                    if l.len() != levels - 1 {
                        return Err(CliError::Config(format!("parity {s} needs {} bits", levels - 1)));
                    }
                    Ok(l)
                })
                .collect::<CliResult<Vec<_>>>()?,
        };
        if uses_parity && parities.is_empty() {
            return Err(CliError::Config("empty parity list".into()));
        }
        let method: MethodTag = match &cfg.integration.method {
            None => MethodTag::ImportanceMc,
            Some(s) => s.parse().map_err(|e: Error| CliError::Config(e.to_string()))?,
        };
        if method == MethodTag::Analytic {
            return Err(CliError::Config("integration method must be haar_mc or importance_mc".into()));
        }
        let integration = IntegrationSettings {
            method,
            samples: cfg.integration.samples.unwrap_or(100_000),
            batch: cfg.integration.batch.unwrap_or(16_384),
        };
        if integration.samples < MIN_SAMPLES || integration.batch == 0 {
            return Err(CliError::Config(format!(
                "integration needs samples >= {MIN_SAMPLES} and batch > 0"
            )));
        }
        let slice = match &cfg.husimi.slice {
            None => Slice::Position,
            Some(s) => s.parse().map_err(|e: Error| CliError::Config(e.to_string()))?,
        };
        let husimi = HusimiSettings {
            half_width: cfg.husimi.half_width.unwrap_or(1.5),
            resolution: cfg.husimi.resolution.unwrap_or(128),
            slice,
            source: cfg.husimi.source.unwrap_or_default(),
        };
        if !(husimi.half_width > 0.0) || husimi.resolution < 2 {
            return Err(CliError::Config("husimi grid needs half_width > 0 and resolution >= 2".into()));
        }
        let localization = LocalizationSettings {
            nu: cfg.localization.nu.unwrap_or(2),
            wehrl: cfg.localization.wehrl.unwrap_or(true),
            numerical: cfg.localization.numerical.unwrap_or(true),
        };
        if localization.nu < 2 {
            return Err(CliError::Config("moment order nu must be at least 2".into()));
        }
        let exp = Experiment {
            command,
            levels,
            particles,
            epsilon,
            lambdas: lambda_grid(&cfg.lambda)?,
            parities,
            seed: cfg.seed,
            keep: cfg.spectrum.keep.unwrap_or(6),
            maximize: cfg.fidelity.maximize.unwrap_or(true),
            integration,
            husimi,
            localization,
            workers: cfg.workers,
            out: cfg.out.clone(),
        };
        exp.check_command()?;
        Ok(exp)
    }

    fn check_command(&self) -> CliResult<()> {
        if self.command != Command::Selftest && self.particles.iter().any(|&n| n < 2) {
            return Err(CliError::Config("the Hamiltonian density needs N >= 2".into()));
        }
        if self.command == Command::Spectrum && self.keep == 0 {
            return Err(CliError::Config("spectrum keep must be positive".into()));
        }
        if self.command != Command::Selftest {
            for &n in &self.particles {
                let dim = basis_dimension(self.levels, n).unwrap_or(u128::MAX);
                if dim > DEFAULT_CAPACITY as u128 {
                    return Err(CliError::Capacity(format!(
                        "D = {}, N = {n} needs {dim} basis states, cap is {DEFAULT_CAPACITY}",
                        self.levels
                    )));
                }
            }
        }
        if self.needs_seed() && self.seed.is_none() {
            return Err(CliError::Config(format!("{} requires a seed", self.command)));
        }
        Ok(())
    }

    fn needs_seed(&self) -> bool {
        // moments fall back to sampling when the analytic route exceeds capacity
        self.command == Command::Localization
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("experiment serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn metadata_line(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# udcat {} command={} config_sha256={} seed={}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.digest(),
            seed
        )
    }

    fn integration_spec(&self, centers: Vec<crate::coherent::PhasePoint>, seed: u64) -> IntegrationSpec {
        let mut spec = match self.integration.method {
            MethodTag::HaarMc => IntegrationSpec::haar(self.integration.samples, seed),
            _ => IntegrationSpec::importance(centers, self.integration.samples, seed),
        };
        spec.batch = self.integration.batch;
        spec
    }
}

/// Runs `exp`, writing CSV (or the selftest report) to `out`.
/// Returns whether the command succeeded; only selftest can report `false`.
pub fn execute<W: Write + Send>(exp: &Experiment, out: &mut W) -> CliResult<bool> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = exp.workers {
            if w == 0 {
                return Err(CliError::Config("workers must be positive".into()));
            }
            b = b.num_threads(w);
        }
        b.build().map_err(|e| CliError::Config(e.to_string()))?
    };
    pool.install(|| match exp.command {
        Command::Selftest => run_selftest(exp, out),
        _ => {
            writeln!(out, "{}", exp.metadata_line())?;
            let mut w = csv::Writer::from_writer(&mut *out);
            match exp.command {
                Command::Spectrum => cmd_spectrum(exp, &mut w)?,
                Command::Fidelity => cmd_fidelity(exp, &mut w)?,
                Command::Husimi => cmd_husimi(exp, &mut w)?,
                Command::Localization => cmd_localization(exp, &mut w)?,
                Command::Selftest => unreachable!(),
            }
            w.flush()?;
            Ok(true)
        }
    })
}

type Csv<'a, W> = csv::Writer<&'a mut W>;

fn cmd_spectrum<W: Write>(exp: &Experiment, w: &mut Csv<'_, W>) -> CliResult<()> {
    let k = exp.keep;
    let mut header = vec!["N".to_string(), "lambda".to_string()];
    header.extend((0..k).map(|i| format!("E{i}")));
    header.extend((0..k).map(|i| format!("parity{i}")));
    w.write_record(&header)?;
    for &n in &exp.particles {
        let mut template = LMGParams::new(exp.levels, n, 0.0);
        template.epsilon = exp.epsilon;
        for row in spectrum_sweep(&template, &exp.lambdas, k)? {
            let (energies, parities) = row.result?;
            let mut rec = vec![n.to_string(), row.lambda.to_string()];
            for i in 0..k {
                rec.push(energies.get(i).map_or(String::new(), |e| e.to_string()));
            }
            for i in 0..k {
                rec.push(parities.get(i).map_or(String::new(), |(l, _)| l.to_string()));
            }
            w.write_record(&rec)?;
        }
    }
    Ok(())
}

fn cmd_fidelity<W: Write>(exp: &Experiment, w: &mut Csv<'_, W>) -> CliResult<()> {
    w.write_record(["N", "lambda", "state", "parity", "F_at_critical", "F_max", "z1_max", "z2_max"])?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for &n in &exp.particles {
        for rows in fidelity_curve(exp.levels, n, exp.epsilon, &exp.lambdas, exp.maximize)? {
            for r in rows?.into_iter().filter(|r| exp.parities.contains(&r.parity)) {
                w.write_record([
                    n.to_string(),
                    r.lambda.to_string(),
                    r.state.to_string(),
                    r.parity.to_string(),
                    r.f_critical.to_string(),
                    opt(r.f_max),
                    opt(r.z_max.map(|z| z.0)),
                    opt(r.z_max.map(|z| z.1)),
                ])?;
            }
        }
    }
    Ok(())
}

/// Jobs of the phase-space commands, in output order.
fn jobs(exp: &Experiment) -> Vec<(u32, f64, ParityLabel)> {
    let mut out = Vec::new();
    for &n in &exp.particles {
        for &l in &exp.lambdas {
            for c in &exp.parities {
                out.push((n, l, *c));
            }
        }
    }
    out
}

/// Lowest eigenstate of sector `c`.
fn numerical_state(ops: &LmgOperators, epsilon: f64, lambda: f64, c: &ParityLabel) -> crate::Result<SymmetricState> {
    let levels = ops.basis().levels();
    let keep = 4 * (1usize << (levels - 1));
    let spec = diagonalize(&ops.hamiltonian(epsilon, lambda), keep)?;
    let (i, _) = lowest_per_sector(&spec, levels)?
        .into_iter()
        .find(|(_, l)| l == c)
        .expect("every sector is listed");
    Ok(spec.eigenstates[i].clone())
}

fn operators(exp: &Experiment) -> CliResult<Vec<(u32, Arc<FockBasis>, LmgOperators)>> {
    exp.particles
        .iter()
        .map(|&n| {
            let ops = LmgOperators::new(exp.levels, n)?;
            Ok((n, ops.basis().clone(), ops))
        })
        .collect()
}

fn cmd_husimi<W: Write>(exp: &Experiment, w: &mut Csv<'_, W>) -> CliResult<()> {
    let (h1, h2) = match exp.husimi.slice {
        Slice::Position => ("x1", "x2"),
        Slice::Momentum => ("p1", "p2"),
    };
    w.write_record(["N", "lambda", "parity", "humps", h1, h2, "Q"])?;
    let ops = operators(exp)?;
    let mut grid = GridSpec::new(exp.husimi.half_width, exp.husimi.resolution);
    if exp.husimi.slice == Slice::Momentum {
        grid = grid.momentum();
    }
    let results: Vec<crate::Result<(usize, Vec<crate::husimi::GridRow>)>> = jobs(exp)
        .par_iter()
        .map(|&(n, lambda, c)| {
            let (_, basis, op) = ops.iter().find(|(m, _, _)| *m == n).expect("operators per N");
            let state = match exp.husimi.source {
                Source::Variational => variational_cat_in(basis, &c, exp.epsilon, lambda)?,
                Source::Numerical => numerical_state(op, exp.epsilon, lambda, &c)?,
            };
            let humps = find_humps(&state, &grid)?;
            if humps.ambiguous {
                log::warn!("N={n} lambda={lambda} parity={c}: nearly degenerate maxima, hump count may be unstable");
            }
            Ok((humps.count(), husimi_grid(&state, &grid)?))
        })
        .collect();
    for ((n, lambda, c), res) in jobs(exp).into_iter().zip(results) {
        let (humps, rows) = res?;
        for r in rows {
            w.write_record([
                n.to_string(),
                lambda.to_string(),
                c.to_string(),
                humps.to_string(),
                r.a.to_string(),
                r.b.to_string(),
                format!("{:e}", r.q),
            ])?;
        }
    }
    Ok(())
}

struct LocalizationRow {
    state: Source,
    method: MethodTag,
    moment: f64,
    moment_err: f64,
    wehrl: Option<(f64, f64)>,
}

fn cmd_localization<W: Write>(exp: &Experiment, w: &mut Csv<'_, W>) -> CliResult<()> {
    let nu = exp.localization.nu;
    let m = format!("M{nu}");
    let m_err = format!("M{nu}_err");
    w.write_record(["N", "lambda", "state", "parity", "method", &m, &m_err, "S_W", "S_W_err"])?;
    let ops = operators(exp)?;
    let seed = exp.seed.expect("checked at resolution");
    let mut sources = vec![Source::Variational];
    if exp.localization.numerical {
        sources.push(Source::Numerical);
    }
    let all = jobs(exp);
    let results: Vec<crate::Result<Vec<LocalizationRow>>> = all
        .par_iter()
        .enumerate()
        .map(|(job, &(n, lambda, c))| {
            let (_, basis, op) = ops.iter().find(|(m, _, _)| *m == n).expect("operators per N");
            let cp = critical_point(exp.epsilon, lambda)?;
            let centers = branch_points(&cp.point());
            let mut rows = Vec::new();
            for (k, &src) in sources.iter().enumerate() {
                let state = match src {
                    Source::Variational => variational_cat_in(basis, &c, exp.epsilon, lambda)?,
                    Source::Numerical => numerical_state(op, exp.epsilon, lambda, &c)?,
                };
                // distinct, reproducible stream per (job, source, quantity)
                let row_seed = |q: u64| seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul((job * 4 + k * 2) as u64 + q + 1));
                let (method, moment, moment_err) = match moment_analytic(&state, nu) {
                    Ok(r) => (r.method, r.value, r.std_error),
                    Err(Error::Capacity { .. }) => {
                        let spec = exp.integration_spec(centers.clone(), row_seed(0));
                        let r = moment_mc(&state, nu as f64, &spec)?;
                        (r.method, r.value, r.std_error)
                    }
                    Err(e) => return Err(e),
                };
                let wehrl = if exp.localization.wehrl {
                    Some(wehrl_entropy(&state, &exp.integration_spec(centers.clone(), row_seed(1)))?)
                } else {
                    None
                };
                rows.push(LocalizationRow {
                    state: src,
                    method,
                    moment,
                    moment_err,
                    wehrl,
                });
            }
            Ok(rows)
        })
        .collect();
    for ((n, lambda, c), res) in all.into_iter().zip(results) {
        for r in res? {
            let state = match r.state {
                Source::Variational => "variational",
                Source::Numerical => "numerical",
            };
            let (s, se) = r.wehrl.map_or((String::new(), String::new()), |(s, e)| (s.to_string(), e.to_string()));
            w.write_record([
                n.to_string(),
                lambda.to_string(),
                state.to_string(),
                c.to_string(),
                r.method.to_string(),
                r.moment.to_string(),
                r.moment_err.to_string(),
                s,
                se,
            ])?;
        }
    }
    Ok(())
}

fn run_selftest<W: Write>(exp: &Experiment, out: &mut W) -> CliResult<bool> {
    let mut opts = SelftestOptions::default();
    if let Some(s) = exp.seed {
        opts.seed = s;
    }
    let checks = selftest::run(&opts);
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    Ok(ok)
}

impl FromStr for Command {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "spectrum" => Ok(Command::Spectrum),
            "fidelity" => Ok(Command::Fidelity),
            "husimi" => Ok(Command::Husimi),
            "localization" => Ok(Command::Localization),
            "selftest" => Ok(Command::Selftest),
            other => Err(CliError::Config(format!("unknown command '{other}'"))),
        }
    }
}

//! Batch sweeps driven by a JSON run configuration.
//!
//! A configuration expands into cells `(λ, θ, association, engine)`; cells are
//! evaluated independently (optionally on a worker pool) and emitted in grid
//! order: λ outermost, then θ, association and engine.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{Analytic, CoverageResult, Scenario};
use crate::error::Error;
use crate::model::{db_to_linear, AssociationPolicy, FadingModel, LosModel, NetworkConfig, PathLossModel};
use crate::montecarlo::{estimate_coverage, SimSpec, WindowRadius};
use crate::quadrature::QuadSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// Exact CSV header.
pub const CSV_HEADER: &str = "lambda,theta_db,association,engine,pcov,err,flag,wall_ms";

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "UDN_COVERAGE_WORKERS";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{}", match .line { Some(l) => format!("config line {l}: {message}"), None => format!("config: {message}") })]
    Config { line: Option<usize>, message: String },

    #[error("io: {0}")]
    Io(String),

    #[error("numerical failure in cell {cell}: {source}")]
    Numerical { cell: String, source: Error },
}

impl SweepError {
    /// Process exit code: 2 config, 3 numerical, 1 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            SweepError::Config { .. } => 2,
            SweepError::Numerical { .. } => 3,
            SweepError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for SweepError {
    fn from(e: std::io::Error) -> Self {
        SweepError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    UpperBound,
    Montecarlo,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::UpperBound => "upper_bound",
            Engine::Montecarlo => "montecarlo",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "analytic" => Ok(Engine::Analytic),
            "upper_bound" => Ok(Engine::UpperBound),
            "montecarlo" => Ok(Engine::Montecarlo),
            other => Err(format!("unknown engine '{other}' (expected analytic|upper_bound|montecarlo)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(format!("unknown format '{other}' (expected csv|jsonl)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AssociationKey {
    Closest,
    Strongest,
}

impl From<AssociationKey> for AssociationPolicy {
    fn from(a: AssociationKey) -> Self {
        match a {
            AssociationKey::Closest => AssociationPolicy::Closest,
            AssociationKey::Strongest => AssociationPolicy::Strongest,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathLossConfig {
    exponents: Vec<f64>,
    #[serde(default)]
    transitions: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LosConfig {
    None,
    Constant { p: f64 },
    Umi {
        #[serde(default = "umi_d1")]
        d1: f64,
        #[serde(default = "umi_d2")]
        d2: f64,
    },
    Step { d: f64 },
}

fn umi_d1() -> f64 {
    LosModel::UMI_D1
}

fn umi_d2() -> f64 {
    LosModel::UMI_D2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FadingConfig {
    Shape {
        m: u32,
    },
    Rician {
        k_db: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioConfig {
    path_loss: PathLossConfig,
    los: LosConfig,
    fading: FadingConfig,
    associations: Vec<AssociationKey>,
    /// Signal-to-noise ratio at unit distance; absent for the SIR case.
    #[serde(default)]
    snr_db: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum LambdaGridConfig {
    List(Vec<f64>),
    Log {
        start: f64,
        stop: f64,
        points_per_decade: u32,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum WindowConfig {
    Keyword(String),
    Fixed(f64),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct McConfig {
    #[serde(default)]
    n_realizations: Option<u64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    window_radius: Option<WindowConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputConfig {
    #[serde(default)]
    path: Option<String>,
    #[serde(default)]
    format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadConfig {
    #[serde(default)]
    rel_tol: Option<f64>,
    #[serde(default)]
    abs_tol: Option<f64>,
    #[serde(default)]
    max_subdivisions: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    #[serde(default, rename = "_comment")]
    _comment: Option<serde_json::Value>,
    scenario: ScenarioConfig,
    lambda_grid: LambdaGridConfig,
    theta_grid_db: Vec<f64>,
    engines: Vec<Engine>,
    #[serde(default)]
    mc: McConfig,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default)]
    quadrature: Option<QuadConfig>,
}

/// Monte Carlo settings shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub n_realizations: u64,
    pub seed: u64,
    pub window_radius: WindowRadius,
}

/// One unit of work.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lambda: f64,
    pub theta_db: f64,
    pub association: AssociationPolicy,
    pub engine: Engine,
    /// Position of `(λ, θ, association)` in the grid; seeds the MC stream.
    pub point_index: usize,
    pub scenario: Scenario,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lambda={:?} theta_db={:?} association={} engine={}",
            self.lambda, self.theta_db, self.association, self.engine
        )
    }
}

/// Validated, fully expanded run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub lambdas: Vec<f64>,
    pub thetas_db: Vec<f64>,
    pub associations: Vec<AssociationPolicy>,
    pub engines: Vec<Engine>,
    /// Template at the first grid point.
    pub template: Scenario,
    pub mc: Option<McSettings>,
    pub quad: QuadSpec,
    pub output_path: Option<String>,
    pub format: OutputFormat,
}

/// 1-based line of the first occurrence of the key path, searched in order.
fn key_line(text: &str, path: &[&str]) -> Option<usize> {
    let mut pos = 0;
    for key in path {
        let needle = format!("\"{key}\"");
        pos += text[pos..].find(&needle)?;
    }
    Some(text[..pos].matches('\n').count() + 1)
}

fn config_error(text: &str, path: &[&str], message: impl Into<String>) -> SweepError {
    let mut line = None;
    for n in (1..=path.len()).rev() {
        if let Some(l) = key_line(text, &path[..n]) {
            line = Some(l);
            break;
        }
    }
    SweepError::Config {
        line,
        message: message.into(),
    }
}

fn expand_lambda(text: &str, grid: &LambdaGridConfig) -> Result<Vec<f64>, SweepError> {
    let lambdas = match *grid {
        LambdaGridConfig::List(ref v) => v.clone(),
        LambdaGridConfig::Log {
            start,
            stop,
            points_per_decade,
        } => {
            if !(start.is_finite() && stop.is_finite() && start > 0.0 && stop >= start) {
                return Err(config_error(
                    text,
                    &["lambda_grid"],
                    format!("log grid needs 0 < start <= stop, got start={start} stop={stop}"),
                ));
            }
            if points_per_decade == 0 {
                return Err(config_error(text, &["lambda_grid", "points_per_decade"], "points_per_decade must be >= 1"));
            }
            let ppd = points_per_decade as f64;
            let lo = start.log10();
            let n = ((stop.log10() - lo) * ppd + 1e-9).floor() as usize + 1;
            (0..n).map(|i| 10f64.powf(lo + i as f64 / ppd)).collect()
        }
    };
    if lambdas.is_empty() {
        return Err(config_error(text, &["lambda_grid"], "lambda_grid must not be empty"));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(config_error(text, &["lambda_grid"], format!("density must be > 0, got {bad}")));
    }
    Ok(lambdas)
}

impl RunConfig {
    /// Parses and validates a configuration document. `engines` overrides the
    /// engine list of the document when given.
    pub fn parse(text: &str, engines: Option<&[Engine]>) -> Result<Self, SweepError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| SweepError::Config {
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(config_error(
                text,
                &["schema_version"],
                format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", raw.schema_version),
            ));
        }

        let sc = &raw.scenario;
        let pl = PathLossModel::multi(sc.path_loss.exponents.clone(), sc.path_loss.transitions.clone())
            .map_err(|e| config_error(text, &["scenario", "path_loss"], e.to_string()))?;
        if pl.far_field_exponent() <= 2.0 {
            return Err(config_error(
                text,
                &["scenario", "path_loss", "exponents"],
                format!(
                    "far-field path loss exponent must be > 2 for finite interference, got {}",
                    pl.far_field_exponent()
                ),
            ));
        }
        let los = match sc.los {
            LosConfig::None => LosModel::None,
            LosConfig::Constant { p } => LosModel::Constant(p),
            LosConfig::Umi { d1, d2 } => LosModel::Umi { d1, d2 },
            LosConfig::Step { d } => LosModel::Step(d),
        };
        los.validate()
            .map_err(|e| config_error(text, &["scenario", "los"], e.to_string()))?;
        let fading = match sc.fading {
            FadingConfig::Shape { m } => FadingModel::nakagami(m),
            FadingConfig::Rician { k_db } => FadingModel::from_k_db(k_db),
        }
        .map_err(|e| config_error(text, &["scenario", "fading"], e.to_string()))?;
        let sigma2 = match sc.snr_db {
            None => 0.0,
            Some(snr) if snr.is_finite() => 1.0 / db_to_linear(snr),
            Some(snr) => {
                return Err(config_error(text, &["scenario", "snr_db"], format!("snr_db must be finite, got {snr}")))
            }
        };
        if sc.associations.is_empty() {
            return Err(config_error(text, &["scenario", "associations"], "associations must not be empty"));
        }
        let associations: Vec<AssociationPolicy> = sc.associations.iter().map(|&a| a.into()).collect();

        let lambdas = expand_lambda(text, &raw.lambda_grid)?;
        if raw.theta_grid_db.is_empty() {
            return Err(config_error(text, &["theta_grid_db"], "theta_grid_db must not be empty"));
        }
        if let Some(bad) = raw.theta_grid_db.iter().find(|t| !t.is_finite()) {
            return Err(config_error(text, &["theta_grid_db"], format!("threshold must be finite, got {bad}")));
        }

        let engines = engines.map(<[Engine]>::to_vec).unwrap_or(raw.engines);
        if engines.is_empty() {
            return Err(config_error(text, &["engines"], "engines must not be empty"));
        }
        if engines.contains(&Engine::UpperBound) && !matches!(los, LosModel::Step(_)) {
            return Err(config_error(text, &["engines"], "engine upper_bound requires los kind \"step\""));
        }

        let mc = if engines.contains(&Engine::Montecarlo) {
            let seed = raw.mc.seed.ok_or_else(|| {
                config_error(text, &["mc"], "mc.seed is required when the montecarlo engine is used")
            })?;
            let n_realizations = raw.mc.n_realizations.unwrap_or(SimSpec::DEFAULT_REALIZATIONS);
            if n_realizations == 0 {
                return Err(config_error(text, &["mc", "n_realizations"], "n_realizations must be >= 1"));
            }
            let window_radius = match raw.mc.window_radius {
                None => WindowRadius::Auto,
                Some(WindowConfig::Keyword(ref k)) if k == "auto" => WindowRadius::Auto,
                Some(WindowConfig::Keyword(ref k)) => {
                    return Err(config_error(
                        text,
                        &["mc", "window_radius"],
                        format!("window_radius must be \"auto\" or a number, got \"{k}\""),
                    ))
                }
                Some(WindowConfig::Fixed(r)) if r.is_finite() && r > 0.0 => WindowRadius::Fixed(r),
                Some(WindowConfig::Fixed(r)) => {
                    return Err(config_error(text, &["mc", "window_radius"], format!("window_radius must be > 0, got {r}")))
                }
            };
            Some(McSettings {
                n_realizations,
                seed,
                window_radius,
            })
        } else {
            None
        };

        let quad = match raw.quadrature {
            None => QuadSpec::default(),
            Some(ref q) => {
                let d = QuadSpec::default();
                QuadSpec::new(
                    q.rel_tol.unwrap_or(d.rel_tol),
                    q.abs_tol.unwrap_or(d.abs_tol),
                    q.max_subdivisions.unwrap_or(d.max_subdivisions),
                )
                .map_err(|e| config_error(text, &["quadrature"], e.to_string()))?
            }
        };

        let template_net = NetworkConfig::new(lambdas[0], sigma2, associations[0], db_to_linear(raw.theta_grid_db[0]))
            .map_err(|e| config_error(text, &["scenario"], e.to_string()))?;
        let template = Scenario {
            net: template_net,
            pl,
            los,
            fading,
        };
        let cfg = RunConfig {
            lambdas,
            thetas_db: raw.theta_grid_db,
            associations,
            engines,
            template,
            mc,
            quad,
            output_path: raw.output.path,
            format: raw.output.format.unwrap_or_default(),
        };
        for (point, scn) in cfg.points() {
            scn.validate().map_err(|e| {
                let key = match e {
                    Error::InvalidParameter(ref m) if m.contains("association") => "associations",
                    _ => "scenario",
                };
                let (lambda, theta_db, assoc) = point;
                config_error(
                    text,
                    &["scenario", key],
                    format!("grid point lambda={lambda:?} theta_db={theta_db:?} association={assoc}: {e}"),
                )
            })?;
        }
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path, engines: Option<&[Engine]>) -> Result<Self, SweepError> {
        let text = std::fs::read_to_string(path).map_err(|e| SweepError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, engines)
    }

    /// Grid points `(λ, θ_dB, association)` with their scenarios, in order.
    pub fn points(&self) -> Vec<((f64, f64, AssociationPolicy), Scenario)> {
        let mut out = Vec::with_capacity(self.lambdas.len() * self.thetas_db.len() * self.associations.len());
        for &lambda in &self.lambdas {
            for &theta_db in &self.thetas_db {
                for &assoc in &self.associations {
                    let scn = self
                        .template
                        .with_lambda(lambda)
                        .with_theta(db_to_linear(theta_db))
                        .with_association(assoc);
                    out.push(((lambda, theta_db, assoc), scn));
                }
            }
        }
        out
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (point_index, ((lambda, theta_db, association), scenario)) in self.points().into_iter().enumerate() {
            for &engine in &self.engines {
                out.push(Cell {
                    lambda,
                    theta_db,
                    association,
                    engine,
                    point_index,
                    scenario: scenario.clone(),
                });
            }
        }
        out
    }

    /// Human-readable validation report.
    pub fn report(&self) -> String {
        let cells = self.cells();
        let mut s = format!("OK, {} cells\n", cells.len());
        let pl = &self.template.pl;
        s.push_str(&format!(
            "path loss exponents {:?} transitions {:?}; los {:?}; nakagami m = {}; sigma2 = {:?}\n",
            pl.exponents(),
            pl.transitions(),
            self.template.los,
            self.template.fading.m,
            self.template.net.sigma2
        ));
        if let Some(mc) = &self.mc {
            s.push_str(&format!(
                "montecarlo: {} realizations, seed {}, window {:?}\n",
                mc.n_realizations, mc.seed, mc.window_radius
            ));
        }
        for ((lambda, theta_db, assoc), _) in self.points() {
            let engines: Vec<&str> = self.engines.iter().map(|e| e.as_str()).collect();
            s.push_str(&format!(
                "  lambda={lambda:?} theta_db={theta_db:?} association={assoc} engines={}\n",
                engines.join(",")
            ));
        }
        s
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub lambda: f64,
    pub theta_db: f64,
    pub association: &'static str,
    pub engine: &'static str,
    pub pcov: f64,
    /// Quadrature error estimate (analytic) or standard error (Monte Carlo).
    pub err: f64,
    pub flag: String,
    pub wall_ms: Option<f64>,
}

fn analytic_row(res: CoverageResult) -> (f64, f64, String) {
    (res.pcov, res.quad_error, res.flags.labels().join("|"))
}

/// Derived per-cell MC seed so cells use independent streams.
pub fn cell_seed(base: u64, point_index: usize) -> u64 {
    base.wrapping_add(point_index as u64)
}

/// Evaluates a single cell.
pub fn evaluate(cell: &Cell, quad: &QuadSpec, mc: Option<&McSettings>, timing: bool) -> Result<Row, Error> {
    let start = Instant::now();
    let scn = &cell.scenario;
    let analytic = Analytic::new(*quad).with_noise(scn.net.sigma2 > 0.0);
    let (pcov, err, flag) = match cell.engine {
        Engine::Analytic => {
            let res = match scn.los {
                LosModel::None => analytic.coverage_nlos(scn)?,
                LosModel::Step(_) if scn.pl.is_single_slope() => analytic.coverage_step_simplified(scn)?,
                _ if scn.pl.is_single_slope() => analytic.coverage(scn)?,
                _ => analytic.coverage_multislope(scn)?,
            };
            analytic_row(res)
        }
        Engine::UpperBound => analytic_row(analytic.coverage_upper_bound(scn)?),
        Engine::Montecarlo => {
            let mc = mc.ok_or(Error::Unsupported("Monte Carlo settings"))?;
            let spec = SimSpec::new(scn.clone(), mc.n_realizations, cell_seed(mc.seed, cell.point_index))?
                .with_window(mc.window_radius);
            let est = estimate_coverage(&spec)?;
            (est.pcov_hat, est.stderr, String::new())
        }
    };
    Ok(Row {
        lambda: cell.lambda,
        theta_db: cell.theta_db,
        association: cell.association.as_str(),
        engine: cell.engine.as_str(),
        pcov,
        err,
        flag,
        wall_ms: timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Outcome of a sweep: rows for every successful cell in grid order plus
/// the failed cells.
#[derive(Debug)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub failures: Vec<(Cell, Error)>,
}

/// Evaluates every cell on a pool of `workers` threads.
pub fn execute(cfg: &RunConfig, workers: usize, timing: bool) -> Result<Outcome, SweepError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SweepError::Io(format!("cannot start worker pool: {e}")))?;
    let cells = cfg.cells();
    let mc = cfg.mc.as_ref();
    let results: Vec<Result<Row, Error>> =
        pool.install(|| cells.par_iter().map(|c| evaluate(c, &cfg.quad, mc, timing)).collect());
    let mut rows = Vec::with_capacity(cells.len());
    let mut failures = Vec::new();
    for (cell, res) in cells.into_iter().zip(results) {
        match res {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((cell, e)),
        }
    }
    Ok(Outcome { rows, failures })
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_rows<W: Write>(rows: &[Row], format: OutputFormat, out: W) -> Result<(), SweepError> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_HEADER.split(','))
                .map_err(|e| SweepError::Io(e.to_string()))?;
            for r in rows {
                let wall = r.wall_ms.map(num).unwrap_or_default();
                w.write_record([
                    num(r.lambda).as_str(),
                    num(r.theta_db).as_str(),
                    r.association,
                    r.engine,
                    num(r.pcov).as_str(),
                    num(r.err).as_str(),
                    r.flag.as_str(),
                    wall.as_str(),
                ])
                .map_err(|e| SweepError::Io(e.to_string()))?;
            }
            w.flush()?;
        }
        OutputFormat::Jsonl => {
            let mut out = out;
            for r in rows {
                serde_json::to_writer(&mut out, r).map_err(|e| SweepError::Io(e.to_string()))?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

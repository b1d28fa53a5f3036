//! Experiment configs, sweeps, figure presets and CSV/JSON output.
//!
//! Config files are line-oriented `key = value` documents with `[section]`
//! headers and `#` comments:
//!
//! ```text
//! [run]
//! quantity = rate            # window | rate | particle-rate | profile
//! method = closed_form       # closed_form | numeric
//! [model]
//! spacetime = 3+1            # 1+1 | 3+1
//! mass = 1
//! trajectory = inertial      # inertial | accelerated
//! [profile]
//! kind = double_gaussian
//! sigma = 1
//! lambda = 5
//! [sweep]
//! axis = delta
//! start = -6
//! stop = 0
//! points = 61
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error as ThisError;

use crate::detector::{
    particle_rate, vacuum_rate, vacuum_rate_numeric, FieldState, GaussianPacket, ModelSpec, NormConvention, RateOptions, Spacetime,
    Trajectory, Wedge, DEFAULT_IR_REGULATOR,
};
use crate::profiles::{hermite_fit_report, FrequencyWindow, SpatialProfile, TransverseProfile, WindowPath};
use crate::Error;

/// Half-width of the band around Δ = 0 dropped from accelerated Δ grids.
pub const IR_BAND: f64 = 1e-3;

/// A config problem, with the offending line when one exists.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, ThisError)]
pub enum IoError {
    #[error("invalid config:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<Diagnostic>),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{0}")]
    File(#[from] std::io::Error),
    #[error("{0}")]
    Serialize(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Delta,
    Tau,
    K,
    X,
}

impl Axis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::Delta => "delta",
            Axis::Tau => "tau",
            Axis::K => "k",
            Axis::X => "x",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// Re f̃ on the k axis.
    Window,
    Rate { numeric: bool },
    ParticleRate,
    /// The spatial profile f(x).
    Profile,
}

impl Quantity {
    fn default_axis(&self) -> Axis {
        match self {
            Quantity::Window => Axis::K,
            Quantity::Rate { .. } => Axis::Delta,
            Quantity::ParticleRate => Axis::Tau,
            Quantity::Profile => Axis::X,
        }
    }

    fn allows(&self, axis: Axis) -> bool {
        match self {
            Quantity::ParticleRate => matches!(axis, Axis::Delta | Axis::Tau),
            _ => axis == self.default_axis(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Window => "window",
            Quantity::Rate { .. } => "rate",
            Quantity::ParticleRate => "particle-rate",
            Quantity::Profile => "profile",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Fixed gap for τ sweeps.
    pub delta: f64,
    /// Fixed time for Δ sweeps of particle rates.
    pub tau: f64,
}

impl Sweep {
    /// Grid with x_{n−1−i} = −x_i exactly whenever start = −stop.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.points;
        let span = self.stop - self.start;
        (0..n)
            .map(|i| {
                if 2 * i < n {
                    self.start + span * i as f64 / (n - 1) as f64
                } else {
                    self.stop - span * (n - 1 - i) as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub quad_tol: f64,
    pub tail_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { quad_tol: 1e-8, tail_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown output format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub format: OutputFormat,
    pub path: Option<PathBuf>,
}

/// One curve of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub model: ModelSpec,
    pub quantity: Quantity,
    /// Multiplies every value and error of the series.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub series: Vec<Series>,
    pub sweep: Sweep,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
    /// Plotting hint for presets.
    pub recipe: Option<String>,
}

impl ExperimentConfig {
    pub fn quantity(&self) -> Quantity {
        self.series[0].quantity
    }

    fn rate_options(&self) -> RateOptions {
        RateOptions { quad_tol: self.tolerances.quad_tol, tail_tol: self.tolerances.tail_tol, ..RateOptions::default() }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["quantity", "method"]),
    ("model", &["spacetime", "mass", "trajectory", "acceleration", "normalisation", "ir_regulator"]),
    ("profile", &["kind", "sigma", "lambda", "norm", "n", "m", "transverse_width"]),
    ("state", &["kind", "center", "width", "wedge"]),
    ("sweep", &["axis", "start", "stop", "points", "delta", "tau"]),
    ("tolerances", &["quad_tol", "tail_tol"]),
    ("output", &["format", "path"]),
];

type Entries = BTreeMap<(String, String), (String, usize)>;

struct Reader {
    entries: Entries,
    diags: Vec<Diagnostic>,
}

impl Reader {
    fn err(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.diags.push(Diagnostic { line, message: message.into() });
    }

    fn raw(&self, section: &str, key: &str) -> Option<(String, usize)> {
        self.entries.get(&(section.to_string(), key.to_string())).cloned()
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.raw(section, key).is_some()
    }

    fn text(&mut self, section: &str, key: &str, default: &str, allowed: &[&str]) -> String {
        match self.raw(section, key) {
            None => default.to_string(),
            Some((v, line)) => {
                if !allowed.contains(&v.as_str()) {
                    self.err(Some(line), format!("{section}.{key} = `{v}` is not one of: {}", allowed.join(", ")));
                    default.to_string()
                } else {
                    v
                }
            }
        }
    }

    fn float(&mut self, section: &str, key: &str) -> Option<f64> {
        let (v, line) = self.raw(section, key)?;
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                self.err(Some(line), format!("{section}.{key} = `{v}` is not a finite number"));
                None
            }
        }
    }

    fn float_or(&mut self, section: &str, key: &str, default: f64) -> f64 {
        self.float(section, key).unwrap_or(default)
    }

    fn require(&mut self, section: &str, key: &str, context: &str) -> f64 {
        match self.float(section, key) {
            Some(x) => x,
            None => {
                if !self.has(section, key) {
                    self.err(None, format!("{section}.{key} is required for {context}"));
                }
                f64::NAN
            }
        }
    }

    fn unsigned(&mut self, section: &str, key: &str, default: usize) -> usize {
        match self.raw(section, key) {
            None => default,
            Some((v, line)) => v.parse::<usize>().unwrap_or_else(|_| {
                self.err(Some(line), format!("{section}.{key} = `{v}` is not a non-negative integer"));
                default
            }),
        }
    }
}

fn tokenize(text: &str) -> (Entries, Vec<Diagnostic>) {
    let mut entries = Entries::new();
    let mut diags = Vec::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                diags.push(Diagnostic { line: Some(line_no), message: format!("malformed section header `{line}`") });
                continue;
            };
            let name = name.trim();
            if SECTIONS.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                diags.push(Diagnostic { line: Some(line_no), message: format!("unknown section [{name}]") });
                section = None;
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            diags.push(Diagnostic { line: Some(line_no), message: format!("expected `key = value`, got `{line}`") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section.clone() else {
            diags.push(Diagnostic { line: Some(line_no), message: format!("key `{key}` outside a known section") });
            continue;
        };
        let known = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, keys)| keys.contains(&key)).unwrap_or(false);
        if !known {
            diags.push(Diagnostic { line: Some(line_no), message: format!("unknown key `{key}` in [{sec}]") });
            continue;
        }
        if value.is_empty() {
            diags.push(Diagnostic { line: Some(line_no), message: format!("empty value for `{key}`") });
            continue;
        }
        if let Some((_, first)) = entries.insert((sec.clone(), key.to_string()), (value.to_string(), line_no)) {
            diags.push(Diagnostic { line: Some(line_no), message: format!("duplicate key `{key}` in [{sec}] (first set on line {first})") });
        }
    }
    (entries, diags)
}

/// Parse and validate a config document, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, IoError> {
    let (entries, diags) = tokenize(text);
    let mut r = Reader { entries, diags };

    let quantity = match r.text("run", "quantity", "rate", &["window", "rate", "particle-rate", "profile"]).as_str() {
        "window" => Quantity::Window,
        "particle-rate" => Quantity::ParticleRate,
        "profile" => Quantity::Profile,
        _ => {
            let numeric = r.text("run", "method", "closed_form", &["closed_form", "numeric"]) == "numeric";
            Quantity::Rate { numeric }
        }
    };
    if quantity.name() != "rate" && r.has("run", "method") {
        let line = r.raw("run", "method").map(|(_, l)| l);
        r.err(line, "run.method applies only to quantity = rate");
    }

    let spacetime = match r.text("model", "spacetime", "3+1", &["1+1", "3+1"]).as_str() {
        "1+1" => {
            if let Some((_, line)) = r.raw("model", "mass") {
                r.err(Some(line), "the 1+1 massless field takes no mass parameter");
            }
            Spacetime::OnePlusOneMassless
        }
        _ => Spacetime::ThreePlusOne { mass: r.float_or("model", "mass", 0.0) },
    };
    let trajectory = match r.text("model", "trajectory", "inertial", &["inertial", "accelerated"]).as_str() {
        "accelerated" => Trajectory::UniformlyAccelerated { accel: r.require("model", "acceleration", "an accelerated trajectory") },
        _ => {
            if let Some((_, line)) = r.raw("model", "acceleration") {
                r.err(Some(line), "model.acceleration given for an inertial trajectory");
            }
            Trajectory::Inertial
        }
    };
    let normalisation = match r.text("model", "normalisation", "standard", &["standard", "unit"]).as_str() {
        "unit" => NormConvention::Unit,
        _ => NormConvention::Standard,
    };
    let ir_regulator = r.float_or("model", "ir_regulator", DEFAULT_IR_REGULATOR);

    let profile = read_profile(&mut r, trajectory);
    let transverse = r.float("profile", "transverse_width").map(TransverseProfile::gaussian);
    let state = read_state(&mut r);

    let axis_default = quantity.default_axis().as_str();
    let axis = match r.text("sweep", "axis", axis_default, &["delta", "tau", "k", "x"]).as_str() {
        "delta" => Axis::Delta,
        "tau" => Axis::Tau,
        "k" => Axis::K,
        _ => Axis::X,
    };
    if !quantity.allows(axis) {
        let line = r.raw("sweep", "axis").map(|(_, l)| l);
        r.err(line, format!("sweep axis `{}` does not apply to quantity `{}`", axis.as_str(), quantity.name()));
    }
    let sweep = Sweep {
        axis,
        start: r.float_or("sweep", "start", -5.0),
        stop: r.float_or("sweep", "stop", 5.0),
        points: r.unsigned("sweep", "points", 101),
        delta: r.float_or("sweep", "delta", 0.0),
        tau: r.float_or("sweep", "tau", 0.0),
    };
    if sweep.points < 2 {
        r.err(r.raw("sweep", "points").map(|(_, l)| l), "sweep.points must be at least 2");
    }
    if !(sweep.start < sweep.stop) {
        r.err(None, format!("sweep.start ({}) must be below sweep.stop ({})", sweep.start, sweep.stop));
    }
    if quantity == Quantity::ParticleRate && axis == Axis::Tau && !r.has("sweep", "delta") {
        r.err(None, "sweep.delta is required for a tau sweep");
    }

    let tolerances = Tolerances {
        quad_tol: r.float_or("tolerances", "quad_tol", Tolerances::default().quad_tol),
        tail_tol: r.float_or("tolerances", "tail_tol", Tolerances::default().tail_tol),
    };
    if !(tolerances.quad_tol > 0.0 && tolerances.tail_tol > 0.0) {
        r.err(None, "tolerances must be positive");
    }
    let format = match r.text("output", "format", "csv", &["csv", "json"]).as_str() {
        "json" => OutputFormat::Json,
        _ => OutputFormat::Csv,
    };
    let path = r.raw("output", "path").map(|(p, _)| PathBuf::from(p));

    let model = build_model(&mut r, spacetime, trajectory, profile, transverse, state, normalisation, ir_regulator);
    if quantity == Quantity::ParticleRate && state == Some(FieldState::Vacuum) {
        r.err(None, "quantity particle-rate needs a particle state in [state]");
    }
    if quantity != Quantity::ParticleRate && state.is_some_and(|s| s != FieldState::Vacuum) {
        r.err(None, format!("quantity `{}` takes the vacuum state", quantity.name()));
    }
    if quantity == Quantity::Profile && matches!(profile, Some(SpatialProfile::PointLike)) {
        r.err(None, "the point-like profile has no pointwise values to sweep");
    }

    if !r.diags.is_empty() {
        return Err(IoError::Config(r.diags));
    }
    let model = model.expect("model built when no diagnostics were raised");
    Ok(ExperimentConfig {
        series: vec![Series { label: String::new(), model, quantity, scale: 1.0 }],
        sweep,
        tolerances,
        output: OutputSpec { format, path },
        recipe: None,
    })
}

fn read_profile(r: &mut Reader, trajectory: Trajectory) -> Option<SpatialProfile> {
    let kind = r.text("profile", "kind", "point_like", &["point_like", "double_gaussian", "hermite", "rindler_double_gaussian"]);
    let res = match kind.as_str() {
        "point_like" => Ok(SpatialProfile::PointLike),
        "hermite" => {
            let n = r.unsigned("profile", "n", 0);
            let m = r.unsigned("profile", "m", 1);
            SpatialProfile::hermite_coupling(n, m)
        }
        gaussian => {
            let sigma = r.require("profile", "sigma", "a Gaussian profile");
            let lambda = r.require("profile", "lambda", "a Gaussian profile");
            let norm = r.float("profile", "norm");
            if sigma.is_nan() || lambda.is_nan() {
                return None;
            }
            if gaussian == "double_gaussian" {
                match norm {
                    Some(n) => SpatialProfile::double_gaussian_with_norm(sigma, lambda, n),
                    None => SpatialProfile::double_gaussian(sigma, lambda),
                }
            } else {
                // The profile's acceleration is the trajectory's.
                let accel = match trajectory {
                    Trajectory::UniformlyAccelerated { accel } => accel,
                    Trajectory::Inertial => {
                        r.err(None, "profile kind rindler_double_gaussian needs trajectory = accelerated");
                        return None;
                    }
                };
                if accel.is_nan() {
                    return None;
                }
                match norm {
                    Some(n) => SpatialProfile::rindler_double_gaussian_with_norm(sigma, lambda, accel, n),
                    None => SpatialProfile::rindler_double_gaussian(sigma, lambda, accel),
                }
            }
        }
    };
    res.map_err(|e| r.err(None, format!("profile: {e}"))).ok()
}

fn read_state(r: &mut Reader) -> Option<FieldState> {
    let kind = r.text("state", "kind", "vacuum", &["vacuum", "minkowski_packet", "unruh_packet"]);
    if kind == "vacuum" {
        for key in ["center", "width", "wedge"] {
            if let Some((_, line)) = r.raw("state", key) {
                r.err(Some(line), format!("state.{key} given for the vacuum"));
            }
        }
        return Some(FieldState::Vacuum);
    }
    let center = r.require("state", "center", "a packet state");
    let width = r.require("state", "width", "a packet state");
    let wedge = if kind == "unruh_packet" {
        Some(if r.text("state", "wedge", "R", &["R", "L"]) == "L" { Wedge::L } else { Wedge::R })
    } else {
        if let Some((_, line)) = r.raw("state", "wedge") {
            r.err(Some(line), "state.wedge applies to unruh_packet only");
        }
        None
    };
    if center.is_nan() || width.is_nan() {
        return None;
    }
    let packet = GaussianPacket::new(center, width).map_err(|e| r.err(None, format!("state: {e}"))).ok()?;
    Some(match wedge {
        Some(wedge) => FieldState::UnruhParticle { packet, wedge },
        None => FieldState::MinkowskiParticle(packet),
    })
}

#[allow(clippy::too_many_arguments)]
fn build_model(
    r: &mut Reader,
    spacetime: Spacetime,
    trajectory: Trajectory,
    profile: Option<SpatialProfile>,
    transverse: Option<crate::Result<TransverseProfile>>,
    state: Option<FieldState>,
    normalisation: NormConvention,
    ir_regulator: f64,
) -> Option<ModelSpec> {
    let profile = profile?;
    let state = state?;
    if let Trajectory::UniformlyAccelerated { accel } = trajectory {
        if accel.is_nan() {
            return None;
        }
    }
    let built = (|| {
        let mut spec = ModelSpec::new(spacetime, trajectory, profile)?;
        if let Some(t) = transverse {
            spec = spec.with_transverse(t?)?;
        }
        spec.with_normalisation(normalisation)?.with_ir_regulator(ir_regulator)?.with_state(state)
    })();
    built.map_err(|e| r.err(None, e.to_string())).ok()
}

/// `[profile]` section text that parses back to `p`.
pub fn render_profile_section(p: &SpatialProfile) -> String {
    match *p {
        SpatialProfile::PointLike => "[profile]\nkind = point_like\n".into(),
        SpatialProfile::DoubleGaussian { sigma, lambda, norm } => {
            format!("[profile]\nkind = double_gaussian\nsigma = {sigma:e}\nlambda = {lambda:e}\nnorm = {norm:e}\n")
        }
        SpatialProfile::HermiteCoupling { n, m } => format!("[profile]\nkind = hermite\nn = {n}\nm = {m}\n"),
        SpatialProfile::RindlerDoubleGaussian { sigma, lambda, norm, .. } => {
            format!("[profile]\nkind = rindler_double_gaussian\nsigma = {sigma:e}\nlambda = {lambda:e}\nnorm = {norm:e}\n")
        }
    }
}

/// One output record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    #[serde(skip_serializing_if = "String::is_empty")]
    pub series: String,
    pub axis: f64,
    pub rate: f64,
    pub est_error: f64,
    pub path: String,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub axis: Axis,
    pub multi_series: bool,
    pub rows: Vec<Row>,
    /// Messages for points that failed outright.
    pub failures: Vec<String>,
}

impl Table {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

struct Point {
    value: f64,
    est_error: f64,
    path: &'static str,
    converged: bool,
}

enum Prepared {
    Window(FrequencyWindow),
    Other,
}

fn prepare(series: &Series, tol: f64) -> crate::Result<Prepared> {
    Ok(match series.quantity {
        Quantity::Window => Prepared::Window(series.model.window(tol)?),
        _ => Prepared::Other,
    })
}

fn evaluate_point(cfg: &ExperimentConfig, series: &Series, prepared: &Prepared, x: f64) -> crate::Result<Point> {
    let opts = cfg.rate_options();
    match (series.quantity, prepared) {
        (Quantity::Window, Prepared::Window(w)) => {
            let v = w.evaluate(x)?;
            let closed = w.path() == WindowPath::ClosedForm;
            Ok(Point {
                value: v.re,
                est_error: if closed { 0.0 } else { opts.quad_tol },
                path: if closed { "closed_form" } else { "quadrature" },
                converged: true,
            })
        }
        (Quantity::Profile, _) => Ok(Point { value: series.model.profile().evaluate(x)?, est_error: 0.0, path: "closed_form", converged: true }),
        (Quantity::Rate { numeric }, _) => {
            let r = if numeric { vacuum_rate_numeric(&series.model, x, &opts)? } else { vacuum_rate(&series.model, x, &opts)? };
            Ok(Point { value: r.rate, est_error: r.est_error, path: r.path.as_str(), converged: r.converged })
        }
        (Quantity::ParticleRate, _) => {
            let (tau, delta) = if cfg.sweep.axis == Axis::Tau { (x, cfg.sweep.delta) } else { (cfg.sweep.tau, x) };
            let r = particle_rate(&series.model, tau, delta, &opts)?;
            Ok(Point { value: r.rate, est_error: r.est_error, path: r.path.as_str(), converged: r.converged })
        }
        (Quantity::Window, Prepared::Other) => unreachable!("window series are prepared with their window"),
    }
}

fn default_path(q: Quantity) -> &'static str {
    match q {
        Quantity::Rate { numeric: true } | Quantity::ParticleRate => "numeric",
        _ => "closed_form",
    }
}

/// Grid for one series, with the IR band removed from accelerated Δ axes.
pub fn series_grid(cfg: &ExperimentConfig, series: &Series) -> Vec<f64> {
    let drop_ir = cfg.sweep.axis == Axis::Delta && series.model.accel().is_some();
    cfg.sweep.grid().into_iter().filter(|x| !(drop_ir && x.abs() < IR_BAND)).collect()
}

/// Evaluate every sweep point on `workers` threads (all cores when `None`).
/// Rows come back in series order, then ascending axis order.
pub fn run_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Table, IoError> {
    use rayon::prelude::*;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| IoError::Serialize(format!("thread pool: {e}")))?;

    let mut tasks = Vec::new();
    for (si, s) in cfg.series.iter().enumerate() {
        let prepared = prepare(s, cfg.tolerances.quad_tol)?;
        tasks.push((si, prepared, series_grid(cfg, s)));
    }
    let jobs: Vec<(usize, usize, f64)> =
        tasks.iter().enumerate().flat_map(|(ti, (si, _, grid))| grid.iter().map(move |&x| (ti, *si, x))).collect();

    let results: Vec<(Row, Option<String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ti, si, x)| {
                let series = &cfg.series[si];
                match evaluate_point(cfg, series, &tasks[ti].1, x) {
                    Ok(p) => (
                        Row {
                            series: series.label.clone(),
                            axis: x,
                            rate: series.scale * p.value,
                            est_error: series.scale.abs() * p.est_error,
                            path: p.path.into(),
                            converged: p.converged,
                        },
                        None,
                    ),
                    Err(e) => (
                        Row {
                            series: series.label.clone(),
                            axis: x,
                            rate: f64::NAN,
                            est_error: f64::NAN,
                            path: default_path(series.quantity).into(),
                            converged: false,
                        },
                        Some(format!("{}={x}: {e}", cfg.sweep.axis.as_str())),
                    ),
                }
            })
            .collect()
    });
    let failures = results.iter().filter_map(|(_, e)| e.clone()).collect();
    Ok(Table { axis: cfg.sweep.axis, multi_series: cfg.series.len() > 1, rows: results.into_iter().map(|(r, _)| r).collect(), failures })
}

/// Shortest round-trip representation.
fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn table_to_csv(table: &Table) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| IoError::Serialize(e.to_string());
    let mut header = vec![table.axis.as_str(), "rate", "est_error", "path", "converged"];
    if table.multi_series {
        header.insert(0, "series");
    }
    w.write_record(&header).map_err(ser)?;
    for r in &table.rows {
        let mut rec = vec![num(r.axis), num(r.rate), num(r.est_error), r.path.clone(), r.converged.to_string()];
        if table.multi_series {
            rec.insert(0, r.series.clone());
        }
        w.write_record(&rec).map_err(ser)?;
    }
    w.into_inner().map_err(|e| IoError::Serialize(e.to_string()))
}

pub fn table_to_json(table: &Table) -> Result<Vec<u8>, IoError> {
    let records: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|r| {
            let mut m = serde_json::Map::new();
            if table.multi_series {
                m.insert("series".into(), r.series.clone().into());
            }
            m.insert(table.axis.as_str().into(), json_num(r.axis));
            m.insert("rate".into(), json_num(r.rate));
            m.insert("est_error".into(), json_num(r.est_error));
            m.insert("path".into(), r.path.clone().into());
            m.insert("converged".into(), r.converged.into());
            serde_json::Value::Object(m)
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&records).map_err(|e| IoError::Serialize(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// NaN and infinities become `null`.
fn json_num(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

/// Parse CSV produced by [`table_to_csv`].
pub fn parse_table_csv(bytes: &[u8]) -> Result<Table, IoError> {
    let bad = |m: String| IoError::Serialize(m);
    let mut rdr = csv::Reader::from_reader(bytes);
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let multi = header.get(0) == Some("series");
    let off = usize::from(multi);
    let axis = match header.get(off) {
        Some("delta") => Axis::Delta,
        Some("tau") => Axis::Tau,
        Some("k") => Axis::K,
        Some("x") => Axis::X,
        other => return Err(bad(format!("unexpected axis column {other:?}"))),
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i + off).ok_or_else(|| bad(format!("short record {rec:?}")));
        let float = |i: usize| -> Result<f64, IoError> { field(i)?.parse::<f64>().map_err(|e| bad(e.to_string())) };
        rows.push(Row {
            series: if multi { rec.get(0).unwrap_or("").to_string() } else { String::new() },
            axis: float(0)?,
            rate: float(1)?,
            est_error: float(2)?,
            path: field(3)?.to_string(),
            converged: field(4)?.parse::<bool>().map_err(|e| bad(e.to_string()))?,
        });
    }
    Ok(Table { axis, multi_series: multi, rows, failures: Vec::new() })
}

pub fn render_table(table: &Table, format: OutputFormat) -> Result<Vec<u8>, IoError> {
    match format {
        OutputFormat::Csv => table_to_csv(table),
        OutputFormat::Json => table_to_json(table),
    }
}

/// Detailed-balance check on the positive Δ points of an accelerated sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KmsRow {
    #[serde(skip_serializing_if = "String::is_empty")]
    pub series: String,
    pub delta: f64,
    pub ratio: f64,
    pub expected: f64,
    pub rel_error: f64,
    pub pass: bool,
}

/// Pair rows at ±Δ and compare their ratio with e^{−2πΔ/a}.
pub fn kms_rows(cfg: &ExperimentConfig, table: &Table, rel_tol: f64) -> Result<Vec<KmsRow>, IoError> {
    let mut out = Vec::new();
    for s in &cfg.series {
        let accel = s.model.accel().ok_or_else(|| {
            IoError::Model(Error::Inconsistent("kms-check needs an accelerated trajectory".into()))
        })?;
        let rows: Vec<&Row> = table.rows.iter().filter(|r| r.series == s.label).collect();
        for r in rows.iter().filter(|r| r.axis > 0.0) {
            let Some(m) = rows.iter().find(|q| q.axis == -r.axis) else { continue };
            let expected = (-2.0 * std::f64::consts::PI * r.axis / accel).exp();
            if expected < 1e-290 {
                continue;
            }
            let ratio = r.rate / m.rate;
            let rel_error = (ratio / expected - 1.0).abs();
            out.push(KmsRow { series: s.label.clone(), delta: r.axis, ratio, expected, rel_error, pass: rel_error <= rel_tol });
        }
    }
    Ok(out)
}

pub fn kms_to_bytes(rows: &[KmsRow], multi: bool, format: OutputFormat) -> Result<Vec<u8>, IoError> {
    match format {
        OutputFormat::Json => {
            let mut v = serde_json::to_vec_pretty(rows).map_err(|e| IoError::Serialize(e.to_string()))?;
            v.push(b'\n');
            Ok(v)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let ser = |e: csv::Error| IoError::Serialize(e.to_string());
            let mut header = vec!["delta", "ratio", "expected", "rel_error", "pass"];
            if multi {
                header.insert(0, "series");
            }
            w.write_record(&header).map_err(ser)?;
            for r in rows {
                let mut rec = vec![num(r.delta), num(r.ratio), num(r.expected), num(r.rel_error), r.pass.to_string()];
                if multi {
                    rec.insert(0, r.series.clone());
                }
                w.write_record(&rec).map_err(ser)?;
            }
            w.into_inner().map_err(|e| IoError::Serialize(e.to_string()))
        }
    }
}

/// Hermite fit summary next to the published parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub amplitude: f64,
    pub residual: f64,
    pub converged: bool,
    pub reference_lambda: f64,
    pub reference_sigma: f64,
    pub reference_residual: f64,
}

/// Published (λ, σ) for the (0,1) and (0,3) couplings.
pub fn reference_fit(n: usize, m: usize) -> Option<(f64, f64)> {
    match (n, m) {
        (0, 1) => Some((1.66, 1.0 / 0.89f64.sqrt())),
        (0, 3) => Some((2.5, 1.0)),
        _ => None,
    }
}

pub fn fit_row(n: usize, m: usize) -> Result<FitRow, IoError> {
    let fit = hermite_fit_report(n, m)?;
    let (rl, rs) = reference_fit(n, m).unwrap_or((f64::NAN, f64::NAN));
    let rr = if rl.is_nan() { f64::NAN } else { crate::profiles::hermite_fit_residual(n, m, rl, rs)?.0 };
    Ok(FitRow {
        n,
        m,
        lambda: fit.lambda,
        sigma: fit.sigma,
        amplitude: fit.amplitude,
        residual: fit.residual,
        converged: fit.converged,
        reference_lambda: rl,
        reference_sigma: rs,
        reference_residual: rr,
    })
}

pub fn fit_to_bytes(row: &FitRow, format: OutputFormat) -> Result<Vec<u8>, IoError> {
    match format {
        OutputFormat::Json => {
            let v = serde_json::json!({
                "n": row.n, "m": row.m,
                "lambda": json_num(row.lambda), "sigma": json_num(row.sigma),
                "amplitude": json_num(row.amplitude), "residual": json_num(row.residual),
                "converged": row.converged,
                "reference_lambda": json_num(row.reference_lambda), "reference_sigma": json_num(row.reference_sigma),
                "reference_residual": json_num(row.reference_residual),
            });
            let mut out = serde_json::to_vec_pretty(&v).map_err(|e| IoError::Serialize(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let ser = |e: csv::Error| IoError::Serialize(e.to_string());
            w.write_record([
                "n", "m", "lambda", "sigma", "amplitude", "residual", "converged", "reference_lambda", "reference_sigma", "reference_residual",
            ])
            .map_err(ser)?;
            w.write_record([
                row.n.to_string(),
                row.m.to_string(),
                num(row.lambda),
                num(row.sigma),
                num(row.amplitude),
                num(row.residual),
                row.converged.to_string(),
                num(row.reference_lambda),
                num(row.reference_sigma),
                num(row.reference_residual),
            ])
            .map_err(ser)?;
            w.into_inner().map_err(|e| IoError::Serialize(e.to_string()))
        }
    }
}

pub const PRESETS: &[&str] = &["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "minkowski-packet", "unruh-packet"];

fn sweep(axis: Axis, start: f64, stop: f64, points: usize) -> Sweep {
    Sweep { axis, start, stop, points, delta: 0.0, tau: 0.0 }
}

fn preset_config(series: Vec<Series>, sweep: Sweep, recipe: String) -> ExperimentConfig {
    ExperimentConfig { series, sweep, tolerances: Tolerances::default(), output: OutputSpec::default(), recipe: Some(recipe) }
}

fn labelled(label: impl Into<String>, model: ModelSpec, quantity: Quantity) -> Series {
    Series { label: label.into(), model, quantity, scale: 1.0 }
}

fn hermite_overlay(n: usize, m: usize) -> Result<Vec<Series>, IoError> {
    let exact = SpatialProfile::hermite_coupling(n, m)?;
    let fit = hermite_fit_report(n, m)?;
    let (rl, rs) = reference_fit(n, m).expect("overlay presets use published couplings");
    let (_, ref_amp) = crate::profiles::hermite_fit_residual(n, m, rl, rs)?;
    let inertial = |p| ModelSpec::new(Spacetime::OnePlusOneMassless, Trajectory::Inertial, p);
    Ok(vec![
        labelled("exact", inertial(exact)?, Quantity::Profile),
        Series { scale: ref_amp, ..labelled("reference", inertial(SpatialProfile::double_gaussian_with_norm(rs, rl, 1.0)?)?, Quantity::Profile) },
        Series { scale: fit.amplitude, ..labelled("fit", inertial(SpatialProfile::double_gaussian_with_norm(fit.sigma, fit.lambda, 1.0)?)?, Quantity::Profile) },
    ])
}

/// Preconfigured experiments for each figure, plus two packet runs.
pub fn figure_preset(id: &str) -> Result<ExperimentConfig, IoError> {
    let dg15 = SpatialProfile::double_gaussian(1.0, 5.0)?;
    let masses = [0.0, 1.0, 1.5];
    let accels = [0.1, 1.0, 1.5];
    let multi_recipe = |x: &str| {
        format!("gnuplot -e \"set datafile separator ','; set key autotitle columnhead; plot for [s in 'SERIES'] 'FILE' using 2:(strcol(1) eq s ? \\$3 : NaN) with lines title s\"  # axis {x}")
    };
    let cfg = match id {
        "fig1" => preset_config(
            vec![labelled("", ModelSpec::new(Spacetime::OnePlusOneMassless, Trajectory::Inertial, dg15)?, Quantity::Window)],
            sweep(Axis::K, -10.0, 10.0, 2001),
            "gnuplot -e \"set datafile separator ','; plot 'FILE' every ::1 using 1:2 with lines\"".into(),
        ),
        "fig2" | "fig3" => {
            let (n, m) = if id == "fig2" { (0, 1) } else { (0, 3) };
            preset_config(hermite_overlay(n, m)?, sweep(Axis::X, -4.0, 4.0, 801), multi_recipe("x").replace("SERIES", "exact reference fit"))
        }
        "fig4" | "fig5" => {
            let profile = if id == "fig4" { SpatialProfile::PointLike } else { dg15 };
            let series = masses
                .iter()
                .map(|&m| Ok(labelled(format!("m={m}"), ModelSpec::new(Spacetime::ThreePlusOne { mass: m }, Trajectory::Inertial, profile)?, Quantity::Rate { numeric: false })))
                .collect::<Result<Vec<_>, Error>>()?;
            let grid = if id == "fig4" { sweep(Axis::Delta, -5.0, 5.0, 401) } else { sweep(Axis::Delta, -12.0, 2.0, 561) };
            preset_config(series, grid, multi_recipe("delta").replace("SERIES", "m=0 m=1 m=1.5"))
        }
        "fig6" | "fig7" => {
            let series = accels
                .iter()
                .map(|&a| {
                    let profile = if id == "fig6" { SpatialProfile::PointLike } else { SpatialProfile::rindler_double_gaussian(1.0, 5.0, a)? };
                    let model = ModelSpec::new(Spacetime::OnePlusOneMassless, Trajectory::UniformlyAccelerated { accel: a }, profile)?;
                    Ok(labelled(format!("a={a}"), model, Quantity::Rate { numeric: false }))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let grid = if id == "fig6" { sweep(Axis::Delta, -3.0, 3.0, 601) } else { sweep(Axis::Delta, -10.0, 10.0, 401) };
            preset_config(series, grid, multi_recipe("delta").replace("SERIES", "a=0.1 a=1 a=1.5"))
        }
        "minkowski-packet" => {
            let model = ModelSpec::new(Spacetime::OnePlusOneMassless, Trajectory::Inertial, dg15)?
                .with_state(FieldState::MinkowskiParticle(GaussianPacket::new(5.0, 0.5)?))?;
            let mut s = sweep(Axis::Tau, -50.0, 50.0, 201);
            s.delta = -5.0;
            preset_config(vec![labelled("", model, Quantity::ParticleRate)], s, "gnuplot -e \"set datafile separator ','; plot 'FILE' every ::1 using 1:2 with lines\"".into())
        }
        "unruh-packet" => {
            let rdg = SpatialProfile::rindler_double_gaussian(1.0, 5.0, 1.0)?;
            let model = ModelSpec::new(Spacetime::OnePlusOneMassless, Trajectory::UniformlyAccelerated { accel: 1.0 }, rdg)?
                .with_state(FieldState::UnruhParticle { packet: GaussianPacket::new(5.0, 0.5)?, wedge: Wedge::R })?;
            let mut s = sweep(Axis::Tau, -50.0, 50.0, 201);
            s.delta = -5.0;
            preset_config(vec![labelled("", model, Quantity::ParticleRate)], s, "gnuplot -e \"set datafile separator ','; plot 'FILE' every ::1 using 1:2 with lines\"".into())
        }
        other => return Err(IoError::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diags(text: &str) -> Vec<Diagnostic> {
        match parse_config(text) {
            Err(IoError::Config(d)) => d,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("[model]\ntrajectory = inertial\n").unwrap();
        assert_eq!(cfg.quantity(), Quantity::Rate { numeric: false });
        assert_eq!(cfg.sweep.axis, Axis::Delta);
        assert_eq!(cfg.sweep.points, 101);
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert!(cfg.series[0].model.profile().is_point_like());
        assert_eq!(cfg.output.format, OutputFormat::Csv);
    }

    #[test]
    fn accelerated_minkowski_profile_rejected() {
        let d = diags("[model]\ntrajectory = accelerated\nacceleration = 1\n[profile]\nkind = double_gaussian\nsigma = 1\nlambda = 5\n");
        assert!(d.iter().any(|d| d.message.contains("inconsistent")), "{d:?}");
    }

    #[test]
    fn mass_in_1p1_rejected() {
        let d = diags("[model]\nspacetime = 1+1\nmass = 1\n");
        assert_eq!(d[0].line, Some(3));
    }

    #[test]
    fn all_errors_reported_with_lines() {
        let text = "[model]\nspactime = 3+1\n[bogus]\n[sweep]\npoints = 1\nstart = x\n";
        let d = diags(text);
        assert!(d.len() >= 4, "{d:?}");
        assert!(d.iter().any(|d| d.line == Some(2) && d.message.contains("unknown key")));
        assert!(d.iter().any(|d| d.line == Some(3) && d.message.contains("unknown section")));
        assert!(d.iter().any(|d| d.line == Some(6)));
    }

    #[test]
    fn profile_section_round_trips() {
        for p in [
            SpatialProfile::PointLike,
            SpatialProfile::double_gaussian(0.7, 3.25).unwrap(),
            SpatialProfile::hermite_coupling(2, 5).unwrap(),
        ] {
            let text = format!("[model]\nspacetime = 1+1\n{}", render_profile_section(&p));
            let cfg = parse_config(&text).unwrap();
            assert_eq!(*cfg.series[0].model.profile(), p);
        }
        let rdg = SpatialProfile::rindler_double_gaussian(1.5, 2.0, 0.3).unwrap();
        let text = format!("[model]\nspacetime = 1+1\ntrajectory = accelerated\nacceleration = 0.3\n{}", render_profile_section(&rdg));
        assert_eq!(*parse_config(&text).unwrap().series[0].model.profile(), rdg);
    }

    #[test]
    fn symmetric_grid_is_exactly_symmetric() {
        let g = sweep(Axis::Delta, -10.0, 10.0, 401).grid();
        for i in 0..g.len() {
            assert_eq!(g[i], -g[g.len() - 1 - i]);
        }
        assert_eq!(g[0], -10.0);
        assert_eq!(*g.last().unwrap(), 10.0);
    }

    #[test]
    fn accelerated_grid_drops_ir_band() {
        let cfg = figure_preset("fig6").unwrap();
        let g = series_grid(&cfg, &cfg.series[0]);
        assert_eq!(g.len(), 600);
        assert!(g.iter().all(|x| x.abs() >= IR_BAND));
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let cfg = parse_config("[model]\nmass = 1\n[profile]\nkind = double_gaussian\nsigma = 1\nlambda = 5\n[sweep]\nstart = -7\nstop = 1\npoints = 33\n").unwrap();
        let t1 = run_sweep(&cfg, Some(3)).unwrap();
        let t2 = run_sweep(&cfg, Some(1)).unwrap();
        let b1 = table_to_csv(&t1).unwrap();
        assert_eq!(b1, table_to_csv(&t2).unwrap());
        let back = parse_table_csv(&b1).unwrap();
        assert_eq!(back.rows, t1.rows);
        assert!(t1.rows.windows(2).all(|w| w[0].axis < w[1].axis));
    }

    #[test]
    fn failed_points_are_recorded_in_row() {
        // Numeric path rejects the point-like profile at every point.
        let cfg = parse_config("[run]\nmethod = numeric\n[model]\nspacetime = 1+1\n[sweep]\nstart = -2\nstop = -1\npoints = 3\n").unwrap();
        let t = run_sweep(&cfg, None).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.iter().all(|r| r.rate.is_nan() && !r.converged));
        assert_eq!(t.failures.len(), 3);
        let json = String::from_utf8(table_to_json(&t).unwrap()).unwrap();
        assert!(json.contains("null"));
    }

    #[test]
    fn kms_rows_pass_on_fig7() {
        let cfg = figure_preset("fig7").unwrap();
        let t = run_sweep(&cfg, None).unwrap();
        let rows = kms_rows(&cfg, &t, 1e-9).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.pass), "{:?}", rows.iter().find(|r| !r.pass));
    }

    #[test]
    fn fig4_is_zero_below_mass() {
        let cfg = figure_preset("fig4").unwrap();
        let t = run_sweep(&cfg, None).unwrap();
        for (s, m) in [("m=0", 0.0), ("m=1", 1.0), ("m=1.5", 1.5)] {
            assert!(t.rows.iter().filter(|r| r.series == s && -r.axis < m).all(|r| r.rate == 0.0));
        }
    }

    #[test]
    fn every_preset_builds() {
        for id in PRESETS {
            let cfg = figure_preset(id).unwrap();
            assert!(cfg.recipe.is_some());
            assert!(cfg.sweep.points >= 2);
        }
        assert!(matches!(figure_preset("fig8"), Err(IoError::UnknownPreset(_))));
    }
}

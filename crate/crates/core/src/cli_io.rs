//! Run configuration (TOML), run reports (JSON), CSV emission and the
//! executor shared by the command-line tool and config-driven runs.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{conservation_residual, ricci_terms, trace_residual, State};
use crate::error::{FlowError, Result};
use crate::flow::{Classification, Reprojection, Sample, Trajectory};
use crate::orbit_data::{params_for, CaseId, CaseParams};
use crate::recovery::{recover, smoothness_check, Gauge, MetricProfile};
use crate::regions::{certify_with, k_max, margin, p_min, CertifySettings, RegionKind, RegionSpec, UParams};
use crate::shooting::{self, interior_grid, s1_bound, ShootConfig};
use crate::special::{integrate_gamma, integrate_xi_family, CurveConfig, XiBranch};
use crate::spectra::{catalog, spectral_data};

pub const CONFIG_VERSION: u32 = 1;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const UNEXPECTED: i32 = 4;
}

pub fn exit_code(err: &FlowError) -> i32 {
    match err {
        FlowError::Domain(_)
        | FlowError::Validation(_)
        | FlowError::Parse(_)
        | FlowError::CaseUnsupported(_)
        | FlowError::ConstraintViolation { .. } => exit::VALIDATION,
        FlowError::Io { .. } => exit::IO,
        FlowError::Invariant(_) => exit::UNEXPECTED,
        FlowError::ProjectionFailed { .. }
        | FlowError::EigenSolver(_)
        | FlowError::Drift { .. }
        | FlowError::Quadrature(_)
        | FlowError::Extrapolation(_) => exit::NUMERICAL,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FlowError + '_ {
    move |source| FlowError::Io { path: path.display().to_string(), source }
}

// ---------------------------------------------------------------- config --

/// Integration knobs shared by the trajectory commands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowKnobs {
    pub step: f64,
    pub tol_converge: f64,
    pub tol_drift: f64,
    pub record_every: usize,
    /// `None` picks the command's default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reprojection: Option<Reprojection>,
}

impl Default for FlowKnobs {
    fn default() -> Self {
        Self { step: 1e-3, tol_converge: 1e-8, tol_drift: 1e-7, record_every: 10, reprojection: None }
    }
}

impl FlowKnobs {
    fn errors(&self, out: &mut Vec<String>) {
        if !(self.step > 0.0 && self.step.is_finite()) {
            out.push(format!("flow.step = {} must be positive", self.step));
        }
        if !(self.tol_converge > 0.0) {
            out.push(format!("flow.tol_converge = {} must be positive", self.tol_converge));
        }
        if !(self.tol_drift > 0.0) {
            out.push(format!("flow.tol_drift = {} must be positive", self.tol_drift));
        }
        if self.record_every == 0 {
            out.push("flow.record_every must be at least 1".into());
        }
    }
}

/// Optional entrance-zone parameters; missing `p` and `k` default to
/// `p_min(delta)` and `0.9 k_max(p)`, a missing `delta` to the case default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZoneKnobs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

impl ZoneKnobs {
    pub fn resolve(&self, c: &CaseParams) -> Result<UParams> {
        let delta = self.delta.unwrap_or_else(|| c.default_delta());
        let upper = c.delta_upper();
        if !(delta > 0.0 && delta < upper) {
            return Err(FlowError::Validation(vec![format!(
                "delta = {delta} violates 0 < delta < 4b/(d-1) = {upper}"
            )]));
        }
        let p = match self.p {
            Some(p) => p,
            None => p_min(c, delta)?,
        };
        let k = self.k.unwrap_or_else(|| 0.9 * k_max(p.max(1)));
        let errors = UParams::violations(c, delta, p, k);
        if !errors.is_empty() {
            return Err(FlowError::Validation(errors));
        }
        UParams::new(c, delta, p, k)
    }

    fn errors(&self, c: &CaseParams, out: &mut Vec<String>) {
        if let Err(FlowError::Validation(v)) = self.resolve(c) {
            out.extend(v);
        } else if let Err(e) = self.resolve(c) {
            out.push(e.to_string());
        }
    }
}

fn one() -> f64 {
    1.0
}
fn launch_offset_default() -> f64 {
    1e-8
}
fn yes() -> bool {
    true
}
fn samples_default() -> usize {
    10_000
}
fn grid_default() -> usize {
    9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalPointsSection {
    pub case: CaseId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    pub case: CaseId,
    pub region: String,
    #[serde(default = "samples_default")]
    pub samples: usize,
    #[serde(default)]
    pub zone: ZoneKnobs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootSection {
    pub case: CaseId,
    #[serde(default = "one")]
    pub s0: f64,
    #[serde(default)]
    pub s1: f64,
    #[serde(default = "launch_offset_default")]
    pub launch_offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_eta: Option<f64>,
    /// Reject `|s1|` at or beyond `sqrt(k (d+1) s0 / (16 d))`.
    #[serde(default = "yes")]
    pub enforce_bound: bool,
    #[serde(default)]
    pub flow: FlowKnobs,
    #[serde(default)]
    pub zone: ZoneKnobs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub case: CaseId,
    #[serde(default = "one")]
    pub s0: f64,
    /// Number of equally spaced interior points of `(-bound, bound)`.
    #[serde(default = "grid_default")]
    pub grid: usize,
    /// Explicit `s1` values; overrides `grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s1: Option<Vec<f64>>,
    #[serde(default = "launch_offset_default")]
    pub launch_offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_eta: Option<f64>,
    #[serde(default)]
    pub flow: FlowKnobs,
    #[serde(default)]
    pub zone: ZoneKnobs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverSection {
    pub case: CaseId,
    pub input: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2Section {
    pub xi: f64,
    /// Branch tag (`II-1`, `II-3`, `III-1`, ...); the first valid one if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
    #[serde(default = "launch_offset_default")]
    pub launch_offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<f64>,
    #[serde(default)]
    pub flow: FlowKnobs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    pub case: CaseId,
    #[serde(default = "launch_offset_default")]
    pub launch_offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<f64>,
    #[serde(default)]
    pub flow: FlowKnobs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitSection {
    pub case: CaseId,
    /// `xi` values of plane curves to add (Case I only).
    #[serde(default)]
    pub xi: Vec<f64>,
    /// `s1` values of family members besides `gamma_0`.
    #[serde(default)]
    pub s1: Vec<f64>,
    #[serde(default = "yes")]
    pub gamma: bool,
    pub out: PathBuf,
}

/// One command with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    CriticalPoints(CriticalPointsSection),
    Certify(CertifySection),
    Shoot(ShootSection),
    Sweep(SweepSection),
    Recover(RecoverSection),
    G2(G2Section),
    Gamma(GammaSection),
    Portrait(PortraitSection),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CriticalPoints(_) => "critical-points",
            Command::Certify(_) => "certify",
            Command::Shoot(_) => "shoot",
            Command::Sweep(_) => "sweep",
            Command::Recover(_) => "recover",
            Command::G2(_) => "g2",
            Command::Gamma(_) => "gamma",
            Command::Portrait(_) => "portrait",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub command: Command,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self { version: CONFIG_VERSION, seed: 0, command }
    }
}

/// On-disk layout: `version`, `seed` and exactly one command table.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    #[serde(default)]
    seed: u64,
    #[serde(default, rename = "critical-points", skip_serializing_if = "Option::is_none")]
    critical_points: Option<CriticalPointsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    certify: Option<CertifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shoot: Option<ShootSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recover: Option<RecoverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g2: Option<G2Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<GammaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    portrait: Option<PortraitSection>,
}

impl From<&RunConfig> for RawConfig {
    fn from(cfg: &RunConfig) -> Self {
        let mut raw = RawConfig { version: cfg.version, seed: cfg.seed, ..RawConfig::default() };
        match cfg.command.clone() {
            Command::CriticalPoints(s) => raw.critical_points = Some(s),
            Command::Certify(s) => raw.certify = Some(s),
            Command::Shoot(s) => raw.shoot = Some(s),
            Command::Sweep(s) => raw.sweep = Some(s),
            Command::Recover(s) => raw.recover = Some(s),
            Command::G2(s) => raw.g2 = Some(s),
            Command::Gamma(s) => raw.gamma = Some(s),
            Command::Portrait(s) => raw.portrait = Some(s),
        }
        raw
    }
}

impl Serialize for RunConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawConfig::from(self).serialize(serializer)
    }
}

/// Parse and validate a TOML run configuration, reporting every problem.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| FlowError::Validation(vec![e.message().to_string()]))?;
    let mut errors = Vec::new();
    if raw.version != CONFIG_VERSION {
        errors.push(format!("version = {} is unsupported (expected {CONFIG_VERSION})", raw.version));
    }
    let mut commands = Vec::new();
    if let Some(s) = raw.critical_points {
        commands.push(Command::CriticalPoints(s));
    }
    if let Some(s) = raw.certify {
        commands.push(Command::Certify(s));
    }
    if let Some(s) = raw.shoot {
        commands.push(Command::Shoot(s));
    }
    if let Some(s) = raw.sweep {
        commands.push(Command::Sweep(s));
    }
    if let Some(s) = raw.recover {
        commands.push(Command::Recover(s));
    }
    if let Some(s) = raw.g2 {
        commands.push(Command::G2(s));
    }
    if let Some(s) = raw.gamma {
        commands.push(Command::Gamma(s));
    }
    if let Some(s) = raw.portrait {
        commands.push(Command::Portrait(s));
    }
    if commands.len() != 1 {
        errors.push(format!("expected exactly one command table, found {}", commands.len()));
    }
    for cmd in &commands {
        validate_command(cmd, &mut errors);
    }
    if !errors.is_empty() {
        return Err(FlowError::Validation(errors));
    }
    Ok(RunConfig { version: raw.version, seed: raw.seed, command: commands.remove(0) })
}

pub fn to_toml(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| FlowError::Parse(e.to_string()))
}

pub fn validate(cfg: &RunConfig) -> Result<()> {
    let mut errors = Vec::new();
    if cfg.version != CONFIG_VERSION {
        errors.push(format!("version = {} is unsupported (expected {CONFIG_VERSION})", cfg.version));
    }
    validate_command(&cfg.command, &mut errors);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(FlowError::Validation(errors))
    }
}

fn positive(name: &str, v: f64, out: &mut Vec<String>) {
    if !(v > 0.0 && v.is_finite()) {
        out.push(format!("{name} = {v} must be positive"));
    }
}

fn offset_ok(v: f64, out: &mut Vec<String>) {
    if !(v > 0.0 && v <= shooting::MAX_LAUNCH_OFFSET) {
        out.push(format!("launch_offset = {v} must lie in (0, {}]", shooting::MAX_LAUNCH_OFFSET));
    }
}

fn validate_command(cmd: &Command, out: &mut Vec<String>) {
    match cmd {
        Command::CriticalPoints(_) => {}
        Command::Certify(s) => {
            let c = params_for(s.case);
            match s.region.parse::<RegionKind>() {
                Ok(kind) => {
                    if kind.needs_params() {
                        s.zone.errors(&c, out);
                    }
                    if kind == RegionKind::Triangle && s.case != CaseId::I {
                        out.push("region Triangle exists only in case I".into());
                    }
                }
                Err(e) => out.push(e.to_string()),
            }
            if s.samples == 0 {
                out.push("samples must be at least 1".into());
            }
        }
        Command::Shoot(s) => {
            let c = params_for(s.case);
            positive("s0", s.s0, out);
            offset_ok(s.launch_offset, out);
            s.flow.errors(out);
            s.zone.errors(&c, out);
            if s.enforce_bound && s.s0 > 0.0 {
                if let Ok(u) = s.zone.resolve(&c) {
                    if let Ok(b) = s1_bound(s.case, s.s0, &u) {
                        if !(s.s1.abs() < b) {
                            out.push(format!(
                                "s1 = {} violates |s1| < sqrt(k(d+1)s0/(16d)) = {b}",
                                s.s1
                            ));
                        }
                    }
                }
            }
        }
        Command::Sweep(s) => {
            let c = params_for(s.case);
            positive("s0", s.s0, out);
            offset_ok(s.launch_offset, out);
            s.flow.errors(out);
            s.zone.errors(&c, out);
            if let (Some(grid), Ok(u)) = (&s.s1, s.zone.resolve(&c)) {
                if let Ok(b) = s1_bound(s.case, s.s0.max(f64::MIN_POSITIVE), &u) {
                    for v in grid.iter().filter(|v| !(v.abs() < b)) {
                        out.push(format!("s1 = {v} violates |s1| < sqrt(k(d+1)s0/(16d)) = {b}"));
                    }
                }
            }
        }
        Command::Recover(_) => {}
        Command::G2(s) => {
            offset_ok(s.launch_offset, out);
            s.flow.errors(out);
            if let Some(tag) = &s.branch {
                match tag.parse::<XiBranch>() {
                    Ok(b) if !XiBranch::valid_for(s.xi).contains(&b) => {
                        out.push(format!("branch {b} does not carry the xi = {} curve", s.xi))
                    }
                    Ok(_) => {}
                    Err(e) => out.push(e.to_string()),
                }
            } else if XiBranch::valid_for(s.xi).is_empty() {
                out.push(format!("no branch carries xi = {}", s.xi));
            }
        }
        Command::Gamma(s) => {
            offset_ok(s.launch_offset, out);
            s.flow.errors(out);
        }
        Command::Portrait(s) => {
            if !s.xi.is_empty() && s.case != CaseId::I {
                out.push("xi curves exist only in case I".into());
            }
        }
    }
}

// ---------------------------------------------------------------- output --

/// Plain `{}` formatting of `f64` is the shortest string that round-trips.
fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> FlowError + '_ {
    move |e| FlowError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

pub const TRAJECTORY_HEADER: [&str; 13] = [
    "eta", "X1", "X2", "X3", "Z1", "Z2", "Z3", "C_residual", "H_residual", "in_S3", "in_S3_hat", "in_S2", "in_S2_hat",
];

/// Trajectory CSV with residuals and region flags (`S2` sets are the mirrors).
pub fn emit_trajectory(traj: &Trajectory, c: &CaseParams, path: &Path) -> Result<()> {
    let outer = RegionSpec::new(RegionKind::S3).faces(c)?;
    let hat = RegionSpec::new(RegionKind::S3Hat).faces(c)?;
    let tau = crate::regions::BOUNDARY_TOL;
    let flag = |s: &State, faces: &[crate::regions::RegionFace]| {
        if margin(s, faces, &[], c) >= -tau {
            "1"
        } else {
            "0"
        }
    };
    let mut w = csv_writer(path)?;
    w.write_record(TRAJECTORY_HEADER).map_err(csv_err(path))?;
    for p in &traj.samples {
        let s = &p.state;
        let m = s.mirror();
        let mut row: Vec<String> = vec![num(p.eta)];
        row.extend(s.to_array().iter().map(|v| num(*v)));
        row.push(num(conservation_residual(s, c)));
        row.push(num(trace_residual(s, c)));
        row.extend([flag(s, &outer), flag(s, &hat), flag(&m, &outer), flag(&m, &hat)].map(String::from));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Read the `eta, X1..Z3` columns of a trajectory CSV.
pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FlowError::Parse(format!("{}: missing column {name}", path.display())))
    };
    let idx = ["eta", "X1", "X2", "X3", "Z1", "Z2", "Z3"].map(col);
    let idx: Vec<usize> = idx.into_iter().collect::<Result<_>>()?;
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let mut v = [0.0; 7];
        for (slot, &i) in v.iter_mut().zip(&idx) {
            *slot = rec
                .get(i)
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| FlowError::Parse(format!("{}: bad number on row {}", path.display(), line + 2)))?;
        }
        samples.push(Sample { eta: v[0], state: State::new([v[1], v[2], v[3]], [v[4], v[5], v[6]]) });
    }
    let step = if samples.len() > 1 { samples[1].eta - samples[0].eta } else { 0.0 };
    Ok(Trajectory {
        step,
        record_every: 1,
        samples,
        events: Vec::new(),
        classification: Classification::HorizonReached,
        max_residuals: Default::default(),
    })
}

pub const METRIC_HEADER: [&str; 11] = ["t", "f1", "f2", "f3", "fdot1", "fdot2", "fdot3", "trL", "R1", "R2", "R3"];

pub fn emit_metric(mp: &MetricProfile, traj: &Trajectory, c: &CaseParams, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(METRIC_HEADER).map_err(csv_err(path))?;
    for (i, p) in traj.samples.iter().enumerate() {
        let r = ricci_terms(p.state.zs(), c);
        let mut row = vec![num(mp.t[i])];
        row.extend(mp.f[i].iter().chain(&mp.fdot[i]).map(|v| num(*v)));
        row.push(num(mp.trl[i]));
        row.extend(r.iter().map(|v| num(*v)));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub const PORTRAIT_HEADER: [&str; 5] = ["curve_id", "eta", "Z1", "Z2", "Z3"];

/// Layered CSV of `Z`-projections, one layer per named curve.
pub fn emit_phase_portrait(curves: &[(String, &Trajectory)], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(PORTRAIT_HEADER).map_err(csv_err(path))?;
    for (id, traj) in curves {
        for p in &traj.samples {
            let z = p.state.zs();
            w.write_record([id.clone(), num(p.eta), num(z[0]), num(z[1]), num(z[2])])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| FlowError::Parse(e.to_string()))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    writeln!(f, "{text}").map_err(io_err(path))
}

// ---------------------------------------------------------------- report --

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything but `wall_time_s` is a function of (config, seed, version).
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub artifact_version: String,
    pub config: RunConfig,
    pub wall_time_s: f64,
    pub checks: Vec<Check>,
    pub outputs: Vec<OutputDigest>,
    pub summary: serde_json::Value,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            exit::SUCCESS
        } else {
            exit::UNEXPECTED
        }
    }

    /// JSON with the wall time zeroed.
    pub fn deterministic_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_time_s = 0.0;
        serde_json::to_string_pretty(&copy).unwrap_or_default()
    }
}

struct Builder {
    checks: Vec<Check>,
    outputs: Vec<OutputDigest>,
}

impl Builder {
    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(OutputDigest { path: path.display().to_string(), sha256: sha256_file(path)? });
        Ok(())
    }
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn shoot_config(s: &ShootSection) -> ShootConfig {
    let mut cfg = ShootConfig::new(s.case, s.s1);
    cfg.s0 = s.s0;
    cfg.launch_offset = s.launch_offset;
    cfg.step = s.flow.step;
    cfg.tol_converge = s.flow.tol_converge;
    cfg.tol_drift = s.flow.tol_drift;
    cfg.record_every = s.flow.record_every;
    cfg.reprojection = s.flow.reprojection.unwrap_or(Reprojection::Constraint);
    if let Some(m) = s.max_eta {
        cfg.max_eta = m;
    }
    cfg
}

fn curve_config(base: CurveConfig, launch_offset: f64, span: Option<f64>, flow: &FlowKnobs) -> CurveConfig {
    CurveConfig {
        launch_offset,
        step: flow.step,
        span: span.unwrap_or(base.span),
        tol_converge: flow.tol_converge,
        tol_drift: flow.tol_drift,
        record_every: flow.record_every,
        reprojection: flow.reprojection.unwrap_or(base.reprojection),
    }
}

/// Validate and run `cfg`, writing any requested files. Numerical aborts and
/// validation failures are errors; failed checks are reported in the report.
pub fn execute(cfg: &RunConfig) -> Result<RunReport> {
    validate(cfg)?;
    let started = Instant::now();
    let mut b = Builder { checks: Vec::new(), outputs: Vec::new() };
    let summary = match &cfg.command {
        Command::CriticalPoints(s) => run_critical_points(s, &mut b)?,
        Command::Certify(s) => run_certify(s, cfg.seed, &mut b)?,
        Command::Shoot(s) => run_shoot(s, &mut b)?,
        Command::Sweep(s) => run_sweep(s, &mut b)?,
        Command::Recover(s) => run_recover(s, &mut b)?,
        Command::G2(s) => run_g2(s, &mut b)?,
        Command::Gamma(s) => run_gamma(s, &mut b)?,
        Command::Portrait(s) => run_portrait(s, &mut b)?,
    };
    Ok(RunReport {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        wall_time_s: started.elapsed().as_secs_f64(),
        checks: b.checks,
        outputs: b.outputs,
        summary,
    })
}

fn run_critical_points(s: &CriticalPointsSection, b: &mut Builder) -> Result<serde_json::Value> {
    let c = params_for(s.case);
    let mut rows = Vec::new();
    for cp in catalog(&c) {
        let (field, conservation, trace) = cp.residuals(&c);
        let spec = spectral_data(&cp, &c)?;
        let label = match (cp.label, cp.kind) {
            (Some(l), _) => l.to_string(),
            (None, crate::spectra::CriticalKind::TypeI { angle }) => format!("TypeI@{angle:.6}"),
            (None, kind) => format!("{kind:?}#{}", rows.len()),
        };
        b.check(
            format!("zero:{label}"),
            field <= 1e-12 && conservation <= 1e-12 && trace <= 1e-12,
            format!("|V| = {field:e}, |C| = {conservation:e}, |H-1| = {trace:e}"),
        );
        rows.push(serde_json::json!({
            "kind": json(&cp.kind),
            "label": cp.label,
            "coords": cp.coords.to_array(),
            "eigenvalues": spec.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "tangent_eigenvalues": spec.tangent_eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "unstable_dimension": spec.unstable_dimension(),
        }));
    }
    Ok(serde_json::json!({ "case": s.case, "points": rows }))
}

fn run_certify(s: &CertifySection, seed: u64, b: &mut Builder) -> Result<serde_json::Value> {
    let c = params_for(s.case);
    let kind: RegionKind = s.region.parse()?;
    let spec = if kind.needs_params() {
        RegionSpec::with_params(kind, s.zone.resolve(&c)?)
    } else {
        RegionSpec::new(kind)
    };
    let report = certify_with(&spec, &c, &CertifySettings::new(s.samples, seed))?;
    for f in &report.faces {
        b.check(
            format!("face:{}", f.face),
            f.status != crate::regions::FaceStatus::Fail,
            format!("{:?}, min flux {:?}, {} samples", f.status, f.min_flux, f.accepted),
        );
    }
    Ok(json(&report))
}

fn run_shoot(s: &ShootSection, b: &mut Builder) -> Result<serde_json::Value> {
    let c = params_for(s.case);
    let cfg = shoot_config(s);
    let traj = shooting::integrate(&cfg)?;
    b.check(
        "converged_to_p1",
        traj.classification == Classification::ConvergedToP1,
        format!("{:?}", traj.classification),
    );
    if let Some(path) = &s.out {
        emit_trajectory(&traj, &c, path)?;
        b.output(path)?;
    }
    Ok(serde_json::json!({
        "launch_eta": cfg.launch_eta(),
        "classification": json(&traj.classification),
        "events": json(&traj.events),
        "max_residuals": json(&traj.max_residuals),
        "final_state": traj.last().state.to_array(),
        "samples": traj.samples.len(),
    }))
}

fn run_sweep(s: &SweepSection, b: &mut Builder) -> Result<serde_json::Value> {
    let c = params_for(s.case);
    let zone = s.zone.resolve(&c)?;
    let bound = s1_bound(s.case, s.s0, &zone)?;
    let grid = s.s1.clone().unwrap_or_else(|| interior_grid(bound, s.grid));
    let section = ShootSection {
        case: s.case,
        s0: s.s0,
        s1: 0.0,
        launch_offset: s.launch_offset,
        max_eta: s.max_eta,
        enforce_bound: true,
        flow: s.flow,
        zone: s.zone,
        out: None,
    };
    let result = shooting::sweep(&shoot_config(&section), &grid, Some(bound))?;
    for row in &result.rows {
        b.check(
            format!("s1={}", row.s1),
            row.converged(),
            row.error.clone().unwrap_or_else(|| format!("{:?}", row.classification)),
        );
    }
    Ok(serde_json::json!({ "s1_bound": bound, "zone": json(&zone), "result": json(&result) }))
}

fn run_recover(s: &RecoverSection, b: &mut Builder) -> Result<serde_json::Value> {
    let c = params_for(s.case);
    let traj = read_trajectory(&s.input)?;
    let mp = recover(&traj, Gauge::UnitH0, &c)?;
    let smooth = smoothness_check(&mp, 1e-4)?;
    b.check("smoothness", smooth.pass, format!("defect {:e}", smooth.defect));
    if let Some(path) = &s.out {
        emit_metric(&mp, &traj, &c, path)?;
        b.output(path)?;
    }
    Ok(serde_json::json!({
        "h0": mp.h0,
        "h1": mp.h1,
        "cone_slope": mp.cone_slope,
        "expected_cone_slope": c.cone_slope(),
        "smoothness": json(&smooth),
    }))
}

fn run_g2(s: &G2Section, b: &mut Builder) -> Result<serde_json::Value> {
    let c = params_for(CaseId::I);
    let branch = match &s.branch {
        Some(tag) => tag.parse()?,
        None => XiBranch::valid_for(s.xi)[0],
    };
    let cfg = curve_config(CurveConfig::xi_default(), s.launch_offset, s.span, &s.flow);
    let curve = integrate_xi_family(s.xi, branch, &cfg, &c)?;
    let plane = curve.max_triangle_defect(&c);
    let locus = curve.max_locus_defect();
    b.check(
        "converged_to_p1",
        curve.trajectory.classification == Classification::ConvergedToP1,
        format!("{:?}", curve.trajectory.classification),
    );
    b.check("plane_defect", plane <= 1e-8, format!("{plane:e}"));
    b.check("locus_defect", locus <= 1e-7, format!("{locus:e}"));
    if let Some(path) = &s.out {
        emit_trajectory(&curve.trajectory, &c, path)?;
        b.output(path)?;
    }
    Ok(serde_json::json!({
        "xi": s.xi,
        "branch": branch.to_string(),
        "start": curve.trajectory.samples[0].state.to_array(),
        "end": curve.trajectory.last().state.to_array(),
        "plane_defect": plane,
        "locus_defect": locus,
    }))
}

fn run_gamma(s: &GammaSection, b: &mut Builder) -> Result<serde_json::Value> {
    let c = params_for(s.case);
    let cfg = curve_config(CurveConfig::gamma_default(s.case), s.launch_offset, s.span, &s.flow);
    let gamma = integrate_gamma(&cfg, &c)?;
    let mp = recover(&gamma.trajectory, Gauge::Reference { eta_ref: 0.0, trl_ref: 1.0 }, &c)?;
    let limits = crate::recovery::extrapolate_limits(&mp)?;
    b.check(
        "converged_to_p1",
        gamma.trajectory.classification == Classification::ConvergedToP1,
        format!("{:?}", gamma.trajectory.classification),
    );
    b.check("stays_in_S3_check", gamma.check_s3, format!("min margin {:e}", gamma.min_margin));
    if let Some(path) = &s.out {
        emit_trajectory(&gamma.trajectory, &c, path)?;
        b.output(path)?;
    }
    Ok(serde_json::json!({
        "start": gamma.trajectory.samples[0].state.to_array(),
        "end": gamma.trajectory.last().state.to_array(),
        "min_margin": gamma.min_margin,
        "symmetry_defect": gamma.symmetry_defect,
        "initial_slopes": [limits.values[3], limits.values[4], limits.values[5]],
        "slope_ratio_3_over_1": limits.values[5] / limits.values[3],
    }))
}

fn run_portrait(s: &PortraitSection, b: &mut Builder) -> Result<serde_json::Value> {
    let c = params_for(s.case);
    let mut owned: Vec<(String, Trajectory)> = Vec::new();
    let mut s1_values = vec![0.0];
    s1_values.extend(s.s1.iter().copied());
    for s1 in s1_values {
        let cfg = ShootConfig::new(s.case, s1).with_reprojection(Reprojection::Constraint);
        let id = if s1 == 0.0 { "gamma_0".to_string() } else { format!("gamma_s1={s1}") };
        owned.push((id, shooting::integrate(&cfg)?));
    }
    if s.gamma {
        let gamma = integrate_gamma(&CurveConfig::gamma_default(s.case), &c)?;
        owned.push(("Gamma".into(), gamma.trajectory));
    }
    for &xi in &s.xi {
        let branch = XiBranch::valid_for(xi)
            .into_iter()
            .next()
            .ok_or_else(|| FlowError::Domain(format!("no branch carries xi = {xi}")))?;
        let curve = integrate_xi_family(xi, branch, &CurveConfig::xi_default(), &c)?;
        owned.push((format!("xi={xi}:{branch}"), curve.trajectory));
    }
    for (id, t) in &owned {
        b.check(
            format!("converged:{id}"),
            t.classification == Classification::ConvergedToP1,
            format!("{:?}", t.classification),
        );
    }
    let refs: Vec<(String, &Trajectory)> = owned.iter().map(|(id, t)| (id.clone(), t)).collect();
    emit_phase_portrait(&refs, &s.out)?;
    b.output(&s.out)?;
    Ok(serde_json::json!({ "curves": owned.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>() }))
}

//! Special solutions: cones over `p1` and `p2`, the Case I plane of `G2`
//! metrics with its `xi`-family, and the curve `Gamma` from `p2` to `p1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::dynamics::{project_to_constraint, recover_original, scalars, State};
use crate::error::{FlowError, Result};
use crate::flow::{integrate_from, project_to_triangle, FlowSettings, Reprojection, Trajectory, Watches};
use crate::orbit_data::{CaseId, CaseParams};
use crate::recovery::MetricProfile;
use crate::regions::{g2_defect, margin, RegionKind, RegionSpec};
use crate::shooting::{launch_state, ShootConfig};
use crate::spectra::{p1, p2, p2_unstable_vector};

/// Membership tolerance for the plane.
pub const TRIANGLE_TOL: f64 = 1e-8;

/// Integration settings shared by the special curves; `span` is measured
/// from the launch eta.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub launch_offset: f64,
    pub step: f64,
    pub span: f64,
    pub tol_converge: f64,
    pub tol_drift: f64,
    pub record_every: usize,
    pub reprojection: Reprojection,
}

impl CurveConfig {
    /// Defaults for the `xi`-family: re-projection onto the plane.
    pub fn xi_default() -> Self {
        Self {
            launch_offset: 1e-8,
            step: 1e-3,
            span: 200.0,
            tol_converge: 1e-8,
            tol_drift: 1e-7,
            record_every: 10,
            reprojection: Reprojection::Triangle,
        }
    }

    /// Defaults for `Gamma`.
    pub fn gamma_default(case: CaseId) -> Self {
        Self {
            span: match case {
                CaseId::I => 300.0,
                CaseId::II => 400.0,
                CaseId::III => 600.0,
            },
            reprojection: Reprojection::Constraint,
            ..Self::xi_default()
        }
    }

    fn settings(&self, eta0: f64) -> FlowSettings {
        FlowSettings {
            step: self.step,
            max_eta: eta0 + self.span,
            tol_converge: self.tol_converge,
            tol_drift: self.tol_drift,
            record_every: self.record_every,
            reprojection: self.reprojection,
            ..FlowSettings::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TriangleDefects {
    pub f: [f64; 3],
    pub z_sum: f64,
}

impl TriangleDefects {
    pub fn max(&self) -> f64 {
        self.f.iter().fold(self.z_sum, |m, v| m.max(*v))
    }
}

/// `(|F1|, |F2|, |F3|, |Z1+Z2+Z3-1|)` and membership of the plane at `tol`.
pub fn triangle_membership(s: &State, c: &CaseParams, tol: f64) -> Result<(bool, TriangleDefects)> {
    if c.case != CaseId::I {
        return Err(FlowError::CaseUnsupported(c.case));
    }
    let f = g2_defect(s).map(f64::abs);
    let z_sum = (s.z(0) + s.z(1) + s.z(2) - 1.0).abs();
    let defects = TriangleDefects { f, z_sum };
    let nonneg = s.zs().iter().all(|z| *z >= -tol);
    Ok((nonneg && defects.max() <= tol, defects))
}

/// `Z3 (Z1 - Z2) - xi Z2 (Z1 - Z3)`.
pub fn xi_quadric(s: &State, xi: f64) -> f64 {
    s.z(2) * (s.z(0) - s.z(1)) - xi * s.z(1) * (s.z(0) - s.z(2))
}

/// Source a `xi`-curve leaves from. Indices are 0-based: `TypeII(j)` is the
/// vertex `Z = e_j` of the plane, `TypeIII(j)` the `p0`-type point with
/// `Z_j = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiBranch {
    TypeII(usize),
    TypeIII(usize),
}

impl XiBranch {
    /// Branches of the locus with `xi` that leave a source into the open plane.
    pub fn valid_for(xi: f64) -> Vec<XiBranch> {
        let mut out = Vec::new();
        if xi > 0.0 {
            out.push(XiBranch::TypeII(0));
        }
        if !(0.0..=1.0).contains(&xi) {
            out.push(XiBranch::TypeII(1));
        }
        if xi < 1.0 {
            out.push(XiBranch::TypeII(2));
        }
        if xi == 1.0 {
            out.push(XiBranch::TypeIII(0));
        }
        if xi == 0.0 {
            out.push(XiBranch::TypeIII(2));
        }
        out
    }

    /// Tangent of the locus at a Type II vertex (in `Z`, summing to zero).
    fn vertex_tangent(vertex: usize, xi: f64) -> [f64; 3] {
        match vertex {
            0 => [-(1.0 + xi), 1.0, xi],
            1 if xi > 1.0 => [xi - 1.0, -(2.0 * xi - 1.0), xi],
            1 => [1.0 - xi, 2.0 * xi - 1.0, -xi],
            _ => [1.0 - xi, 1.0, -(2.0 - xi)],
        }
    }
}

impl fmt::Display for XiBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XiBranch::TypeII(j) => write!(f, "II-{}", j + 1),
            XiBranch::TypeIII(j) => write!(f, "III-{}", j + 1),
        }
    }
}

impl FromStr for XiBranch {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || FlowError::Parse(format!("branch `{s}`: expected II-1, II-2, II-3, III-1 or III-3"));
        let (kind, idx) = s.split_once('-').ok_or_else(bad)?;
        let j: usize = idx.parse().map_err(|_| bad())?;
        if !(1..=3).contains(&j) {
            return Err(bad());
        }
        match kind {
            "II" => Ok(XiBranch::TypeII(j - 1)),
            "III" if j != 2 => Ok(XiBranch::TypeIII(j - 1)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct XiFamilyCurve {
    pub xi: f64,
    pub branch: XiBranch,
    pub trajectory: Trajectory,
}

impl XiFamilyCurve {
    /// Largest plane defect over the samples.
    pub fn max_triangle_defect(&self, c: &CaseParams) -> f64 {
        self.trajectory
            .samples
            .iter()
            .filter_map(|p| triangle_membership(&p.state, c, TRIANGLE_TOL).ok())
            .map(|(_, d)| d.max())
            .fold(0.0, f64::max)
    }

    /// Largest `|Z3 (Z1 - Z2) - xi Z2 (Z1 - Z3)|` over the samples.
    pub fn max_locus_defect(&self) -> f64 {
        self.trajectory
            .samples
            .iter()
            .map(|p| xi_quadric(&p.state, self.xi).abs())
            .fold(0.0, f64::max)
    }
}

/// State of the plane with the given `Z` (`X_j = (Z1+Z2+Z3)/2 - Z_j`).
fn plane_state(z: [f64; 3]) -> State {
    let half = 0.5 * (z[0] + z[1] + z[2]);
    State::new([half - z[0], half - z[1], half - z[2]], z)
}

fn xi_launch(xi: f64, branch: XiBranch, cfg: &CurveConfig) -> Result<(f64, State)> {
    if !XiBranch::valid_for(xi).contains(&branch) {
        return Err(FlowError::Domain(format!("branch {branch} does not carry the xi = {xi} curve")));
    }
    match branch {
        XiBranch::TypeII(vertex) => {
            let tangent = XiBranch::vertex_tangent(vertex, xi);
            let norm = tangent.iter().map(|v| v * v).sum::<f64>().sqrt();
            let tangent = tangent.map(|v| v / norm);
            // In-plane direction orthogonal to the tangent, for the locus solve.
            let normal = {
                let w = [
                    tangent[1] - tangent[2],
                    tangent[2] - tangent[0],
                    tangent[0] - tangent[1],
                ];
                let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                w.map(|v| v / n)
            };
            let mut z = [0.0; 3];
            z[vertex] = 1.0;
            let base: [f64; 3] = std::array::from_fn(|j| z[j] + cfg.launch_offset * tangent[j]);
            let at = |mu: f64| plane_state(std::array::from_fn(|j| base[j] + mu * normal[j]));
            let mut mu = 0.0;
            for _ in 0..50 {
                let q = xi_quadric(&at(mu), xi);
                if q.abs() <= 1e-15 * cfg.launch_offset {
                    break;
                }
                let dh = 1e-3 * cfg.launch_offset;
                let dq = (xi_quadric(&at(mu + dh), xi) - xi_quadric(&at(mu - dh), xi)) / (2.0 * dh);
                if dq == 0.0 {
                    return Err(FlowError::ProjectionFailed { iterations: 0, residual: q.abs() });
                }
                mu -= q / dq;
            }
            let s = project_to_triangle(&at(mu))?;
            let residual = xi_quadric(&s, xi).abs();
            if residual > 1e-12 {
                return Err(FlowError::ProjectionFailed { iterations: 50, residual });
            }
            Ok((0.0, s))
        }
        XiBranch::TypeIII(j) => {
            let mut shoot = ShootConfig::new(CaseId::I, 0.0);
            shoot.launch_offset = cfg.launch_offset;
            let (eta0, s) = launch_state(&shoot)?;
            Ok((eta0, if j == 0 { s } else { s.swap_pairs(0, j) }))
        }
    }
}

/// Integrate the `xi`-family curve of the plane leaving `branch` (Case I).
pub fn integrate_xi_family(xi: f64, branch: XiBranch, cfg: &CurveConfig, c: &CaseParams) -> Result<XiFamilyCurve> {
    if c.case != CaseId::I {
        return Err(FlowError::CaseUnsupported(c.case));
    }
    let (eta0, start) = xi_launch(xi, branch, cfg)?;
    let trajectory = integrate_from(c, eta0, start, &p1(c), &cfg.settings(eta0), &Watches::default())?;
    Ok(XiFamilyCurve { xi, branch, trajectory })
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaCurve {
    pub trajectory: Trajectory,
    /// Every sample stayed in the symmetric trapping set to `-1e-9`.
    pub check_s3: bool,
    /// Smallest defining-function value of that set over the samples.
    pub min_margin: f64,
    /// Largest `max(|X1 - X2|, |Z1 - Z2|)` over the samples.
    pub symmetry_defect: f64,
}

/// Slack allowed when checking that `Gamma` stays in its trapping set.
pub const GAMMA_SLACK: f64 = 1e-9;

/// `Gamma`: launched at `p2 + eps v / |v|` with `v` the unstable eigenvector.
pub fn integrate_gamma(cfg: &CurveConfig, c: &CaseParams) -> Result<GammaCurve> {
    let v: Vector6<f64> = p2_unstable_vector(c);
    let start = p2(c).translated(&v, cfg.launch_offset / v.norm());
    let start = project_to_constraint(&start, c, None)?;
    let trajectory = integrate_from(c, 0.0, start, &p1(c), &cfg.settings(0.0), &Watches::default())?;
    let region = RegionSpec::new(RegionKind::S3Check);
    let faces = region.faces(c)?;
    let equalities = region.equalities();
    let min_margin = trajectory
        .samples
        .iter()
        .map(|p| margin(&p.state, &faces, &equalities, c))
        .fold(f64::INFINITY, f64::min);
    let symmetry_defect = trajectory
        .samples
        .iter()
        .map(|p| (p.state.x(0) - p.state.x(1)).abs().max((p.state.z(0) - p.state.z(1)).abs()))
        .fold(0.0, f64::max);
    Ok(GammaCurve { trajectory, check_s3: min_margin >= -GAMMA_SLACK, min_margin, symmetry_defect })
}

/// Critical points carrying a cone metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConePoint {
    P1,
    P2,
}

impl FromStr for ConePoint {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1" => Ok(ConePoint::P1),
            "p2" => Ok(ConePoint::P2),
            _ => Err(FlowError::Parse(format!("cone point `{s}`: expected p1 or p2"))),
        }
    }
}

/// Cone `f_j = slope_j t` over the critical point on `t = 10^-3 .. 10^3`,
/// with `tr L = 1 / (G t)` and `eta = ln(t) / G`.
pub fn cone_solution(point: ConePoint, c: &CaseParams) -> Result<MetricProfile> {
    let s = match point {
        ConePoint::P1 => p1(c),
        ConePoint::P2 => p2(c),
    };
    let g = scalars(&s, c).shape_sq;
    let (_, slope) = recover_original(&s, 1.0)?;
    let t: Vec<f64> = (0..=60).map(|i| 10f64.powf(-3.0 + 0.1 * i as f64)).collect();
    let trl: Vec<f64> = t.iter().map(|t| 1.0 / (g * t)).collect();
    Ok(MetricProfile {
        eta: t.iter().map(|t| t.ln() / g).collect(),
        f: t.iter().map(|t| slope.map(|m| m * t)).collect(),
        fdot: vec![slope; t.len()],
        trl,
        gauge: (0.0, 1.0 / g),
        cone_slope: slope,
        h0: 0.0,
        h1: 0.5 * (slope[2] - slope[1]),
        t,
    })
}

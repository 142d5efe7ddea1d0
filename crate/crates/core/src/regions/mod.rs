//! Trapping sets of the flow, their defining functions, membership tests and
//! a sampled boundary-flux certifier.
//!
//! Every set is an intersection of closed half-spaces `{phi >= 0}` (plus, for
//! some sets, equalities) inside the constraint manifold `C = 0, H = 1`.

mod certify;
mod params;

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::dynamics::{conservation_residual, cyclic, ricci_terms, trace_residual, vector_field, State};
use crate::error::{FlowError, Result};
use crate::orbit_data::{CaseId, CaseParams};

pub use certify::{boundary_sign_certificate, CertificateReport, FaceReport, FaceStatus, CertifySettings, certify_with};
pub use params::{admissible_params, k_max, omega_star, p_min, UParams};

/// Default boundary tolerance: `|phi| <= BOUNDARY_TOL` counts as active.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// A defining function of a region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Face {
    /// `Z_j`
    Z(usize),
    /// `X_j`
    X(usize),
    /// `Z_i - Z_j`
    ZDiff(usize, usize),
    /// `X_i - X_j + rho (Z_i - Z_j)`
    Tilted { hi: usize, lo: usize, rho: f64 },
    /// `F_i - F_j` with `F_j = X_k + X_l - Z_j`
    FDiff(usize, usize),
    /// `3 F1 + 3 F2 - F3`
    FCombo,
    /// `F_j`
    F(usize),
    /// `Z1 + Z2 - Z3`
    ZExcess,
    /// `Z3 - Z1 - Z2`
    ZDeficit,
    /// `Z1 (X1 - X3) + Z2 (X2 - X3)`
    WeightedX,
    /// `R_i - scale R_j`
    RicciDiff { i: usize, j: usize, scale: f64 },
    /// `k Z1 Z3^(p+1) - Z2^p (Z3 - Z2)^2`
    Bump { p: u32, k: f64 },
    /// `(Z3 - Z2)(X1 - X3) + (p (Z3 - Z2) - 2 Z2)(X3 - X2)`
    Wedge { p: u32 },
    /// `Z2 - omega Z3`
    OmegaFloor { omega: f64 },
    /// `X1 + X2 - 2 X3`
    XBalance,
    /// `(d-1)^2 Z1 Z2 - 4 b^2 Z3^2`
    ZProduct { d: f64, b: f64 },
    /// `X2 + X3`
    XPairSum,
    /// `X3 - (1 + delta) X2`
    XRatio { delta: f64 },
    /// `X_i - X_j` (used as an equality)
    XEq(usize, usize),
    /// `Z_i - Z_j` (used as an equality)
    ZEq(usize, usize),
    /// `Z1 + Z2 + Z3 - 1` (used as an equality)
    ZTotal,
}

fn unit(i: usize) -> Vector6<f64> {
    let mut e = Vector6::zeros();
    e[i] = 1.0;
    e
}

fn f_grad(j: usize) -> Vector6<f64> {
    let (k, l) = cyclic(j);
    unit(k) + unit(l) - unit(3 + j)
}

fn ricci_grad(s: &State, j: usize, c: &CaseParams) -> Vector6<f64> {
    let (k, l) = cyclic(j);
    let (a, b) = (c.a(), c.b());
    let mut g = Vector6::zeros();
    g[3 + j] = 2.0 * b * s.z(j);
    g[3 + k] = a * s.z(l) - 2.0 * b * s.z(k);
    g[3 + l] = a * s.z(k) - 2.0 * b * s.z(l);
    g
}

/// `F_j = X_k + X_l - Z_j`.
pub fn g2_defect(s: &State) -> [f64; 3] {
    std::array::from_fn(|j| {
        let (k, l) = cyclic(j);
        s.x(k) + s.x(l) - s.z(j)
    })
}

impl Face {
    pub fn value(&self, s: &State, c: &CaseParams) -> f64 {
        let x = |i: usize| s.x(i);
        let z = |i: usize| s.z(i);
        match *self {
            Face::Z(j) => z(j),
            Face::X(j) => x(j),
            Face::ZDiff(i, j) | Face::ZEq(i, j) => z(i) - z(j),
            Face::XEq(i, j) => x(i) - x(j),
            Face::Tilted { hi, lo, rho } => x(hi) - x(lo) + rho * (z(hi) - z(lo)),
            Face::FDiff(i, j) => {
                let f = g2_defect(s);
                f[i] - f[j]
            }
            Face::FCombo => {
                let f = g2_defect(s);
                3.0 * f[0] + 3.0 * f[1] - f[2]
            }
            Face::F(j) => g2_defect(s)[j],
            Face::ZExcess => z(0) + z(1) - z(2),
            Face::ZDeficit => z(2) - z(0) - z(1),
            Face::WeightedX => z(0) * (x(0) - x(2)) + z(1) * (x(1) - x(2)),
            Face::RicciDiff { i, j, scale } => {
                let r = ricci_terms(s.zs(), c);
                r[i] - scale * r[j]
            }
            Face::Bump { p, k } => {
                let p = p as i32;
                k * z(0) * z(2).powi(p + 1) - z(1).powi(p) * (z(2) - z(1)).powi(2)
            }
            Face::Wedge { p } => {
                let p = f64::from(p);
                (z(2) - z(1)) * (x(0) - x(2)) + (p * (z(2) - z(1)) - 2.0 * z(1)) * (x(2) - x(1))
            }
            Face::OmegaFloor { omega } => z(1) - omega * z(2),
            Face::XBalance => x(0) + x(1) - 2.0 * x(2),
            Face::ZProduct { d, b } => (d - 1.0).powi(2) * z(0) * z(1) - 4.0 * b * b * z(2) * z(2),
            Face::XPairSum => x(1) + x(2),
            Face::XRatio { delta } => x(2) - (1.0 + delta) * x(1),
            Face::ZTotal => z(0) + z(1) + z(2) - 1.0,
        }
    }

    pub fn gradient(&self, s: &State, c: &CaseParams) -> Vector6<f64> {
        let x = |i: usize| s.x(i);
        let z = |i: usize| s.z(i);
        match *self {
            Face::Z(j) => unit(3 + j),
            Face::X(j) => unit(j),
            Face::ZDiff(i, j) | Face::ZEq(i, j) => unit(3 + i) - unit(3 + j),
            Face::XEq(i, j) => unit(i) - unit(j),
            Face::Tilted { hi, lo, rho } => unit(hi) - unit(lo) + (unit(3 + hi) - unit(3 + lo)) * rho,
            Face::FDiff(i, j) => f_grad(i) - f_grad(j),
            Face::FCombo => f_grad(0) * 3.0 + f_grad(1) * 3.0 - f_grad(2),
            Face::F(j) => f_grad(j),
            Face::ZExcess => unit(3) + unit(4) - unit(5),
            Face::ZDeficit => unit(5) - unit(3) - unit(4),
            Face::WeightedX => {
                let mut g = Vector6::zeros();
                g[0] = z(0);
                g[1] = z(1);
                g[2] = -z(0) - z(1);
                g[3] = x(0) - x(2);
                g[4] = x(1) - x(2);
                g
            }
            Face::RicciDiff { i, j, scale } => ricci_grad(s, i, c) - ricci_grad(s, j, c) * scale,
            Face::Bump { p, k } => {
                let pi = p as i32;
                let pf = f64::from(p);
                let gap = z(2) - z(1);
                let mut g = Vector6::zeros();
                g[3] = k * z(2).powi(pi + 1);
                g[4] = -pf * z(1).powi(pi - 1) * gap * gap + 2.0 * z(1).powi(pi) * gap;
                g[5] = k * (pf + 1.0) * z(0) * z(2).powi(pi) - 2.0 * z(1).powi(pi) * gap;
                g
            }
            Face::Wedge { p } => {
                let p = f64::from(p);
                let gap = z(2) - z(1);
                let lever = p * gap - 2.0 * z(1);
                let mut g = Vector6::zeros();
                g[0] = gap;
                g[1] = -lever;
                g[2] = -gap + lever;
                g[4] = -(x(0) - x(2)) - (p + 2.0) * (x(2) - x(1));
                g[5] = (x(0) - x(2)) + p * (x(2) - x(1));
                g
            }
            Face::OmegaFloor { omega } => unit(4) - unit(5) * omega,
            Face::XBalance => unit(0) + unit(1) - unit(2) * 2.0,
            Face::ZProduct { d, b } => {
                let mut g = Vector6::zeros();
                g[3] = (d - 1.0).powi(2) * z(1);
                g[4] = (d - 1.0).powi(2) * z(0);
                g[5] = -8.0 * b * b * z(2);
                g
            }
            Face::XPairSum => unit(1) + unit(2),
            Face::XRatio { delta } => unit(2) - unit(1) * (1.0 + delta),
            Face::ZTotal => unit(3) + unit(4) + unit(5),
        }
    }

    /// Lie derivative `<grad phi, V>` along the flow.
    pub fn flux(&self, s: &State, c: &CaseParams) -> f64 {
        self.gradient(s, c).dot(&vector_field(s, c))
    }

    pub fn name(&self) -> String {
        let n = |i: usize| i + 1;
        match *self {
            Face::Z(j) => format!("Z{}", n(j)),
            Face::X(j) => format!("X{}", n(j)),
            Face::ZDiff(i, j) => format!("Z{}-Z{}", n(i), n(j)),
            Face::XEq(i, j) => format!("X{}=X{}", n(i), n(j)),
            Face::ZEq(i, j) => format!("Z{}=Z{}", n(i), n(j)),
            Face::Tilted { hi, lo, .. } => {
                format!("X{h}-X{l}+rho(Z{h}-Z{l})", h = n(hi), l = n(lo))
            }
            Face::FDiff(i, j) => format!("F{}-F{}", n(i), n(j)),
            Face::FCombo => "3F1+3F2-F3".into(),
            Face::F(j) => format!("F{}", n(j)),
            Face::ZExcess => "Z1+Z2-Z3".into(),
            Face::ZDeficit => "Z3-Z1-Z2".into(),
            Face::WeightedX => "Z1(X1-X3)+Z2(X2-X3)".into(),
            Face::RicciDiff { i, j, scale } => {
                if scale == 1.0 {
                    format!("R{}-R{}", n(i), n(j))
                } else {
                    format!("R{}-(1+delta)R{}", n(i), n(j))
                }
            }
            Face::Bump { .. } => "kZ1Z3^(p+1)-Z2^p(Z3-Z2)^2".into(),
            Face::Wedge { .. } => "(Z3-Z2)(X1-X3)+(p(Z3-Z2)-2Z2)(X3-X2)".into(),
            Face::OmegaFloor { .. } => "Z2-omega*Z3".into(),
            Face::XBalance => "X1+X2-2X3".into(),
            Face::ZProduct { .. } => "(d-1)^2Z1Z2-4b^2Z3^2".into(),
            Face::XPairSum => "X2+X3".into(),
            Face::XRatio { .. } => "X3-(1+delta)X2".into(),
            Face::ZTotal => "Z1+Z2+Z3=1".into(),
        }
    }
}

/// How a face enters the certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceRole {
    /// The flow must not point outward: flux >= -tau_c.
    Barrier,
    /// Designated exit of an entrance zone; flux is reported, not judged.
    Exit,
    /// Inequality known to hold along the trajectories the region is built
    /// for; imposed when sampling the other faces and certified itself.
    SideCondition,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionFace {
    pub face: Face,
    pub role: FaceRole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    /// Positive octant `Z_j >= 0`.
    P,
    /// Case-dependent compact trapping set with `Z3` largest.
    S3,
    /// `S3 ∩ {Z1+Z2-Z3 >= 0} ∩ {Z1(X1-X3)+Z2(X2-X3) >= 0}`.
    S3Hat,
    /// `S3 ∩ {Z3-Z1-Z2 >= 0, R1-R3 >= 0, R3-R2 >= 0}`.
    U0,
    /// `U0 ∩ {R3-(1+delta)R2 >= 0}`.
    UDelta,
    /// Entrance zone `S3 ∩ {Z3-Z1-Z2 >= 0} ∩ {B >= 0} ∩ {W >= 0}`.
    UDpk,
    /// `UDpk ∩ {Z2 - omega* Z3 >= 0}`.
    UDpkHat,
    /// Symmetric set `S3 ∩ {X1=X2, Z1=Z2} ∩ {X1+X2-2X3 >= 0} ∩ {(d-1)^2Z1Z2-4b^2Z3^2 >= 0}`.
    S3Check,
    /// Case I plane `{sum Z = 1} ∩ P ∩ {F_j = 0}`.
    Triangle,
}

impl RegionKind {
    pub const ALL: [RegionKind; 9] = [
        RegionKind::P,
        RegionKind::S3,
        RegionKind::S3Hat,
        RegionKind::U0,
        RegionKind::UDelta,
        RegionKind::UDpk,
        RegionKind::UDpkHat,
        RegionKind::S3Check,
        RegionKind::Triangle,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            RegionKind::P => "P",
            RegionKind::S3 => "S3",
            RegionKind::S3Hat => "S3_hat",
            RegionKind::U0 => "U0",
            RegionKind::UDelta => "U_delta",
            RegionKind::UDpk => "U_dpk",
            RegionKind::UDpkHat => "U_dpk_hat",
            RegionKind::S3Check => "S3_check",
            RegionKind::Triangle => "Triangle",
        }
    }

    pub fn needs_params(self) -> bool {
        matches!(self, RegionKind::UDelta | RegionKind::UDpk | RegionKind::UDpkHat)
    }
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for RegionKind {
    type Err = FlowError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s, "S3_caseI" | "S3_caseII_III") {
            return Ok(RegionKind::S3);
        }
        RegionKind::ALL
            .into_iter()
            .find(|k| k.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<_> = RegionKind::ALL.iter().map(|k| k.tag()).collect();
                FlowError::Parse(format!("unknown region {s:?}; expected one of {}", known.join(", ")))
            })
    }
}

/// A region together with the entrance-zone parameters it needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub params: Option<UParams>,
}

impl RegionSpec {
    pub fn new(kind: RegionKind) -> Self {
        Self { kind, params: None }
    }

    pub fn with_params(kind: RegionKind, params: UParams) -> Self {
        Self { kind, params: Some(params) }
    }

    /// The region with its default parameters for case `c` where needed.
    pub fn with_defaults(kind: RegionKind, c: &CaseParams) -> Result<Self> {
        let params = if kind.needs_params() { Some(UParams::default_for(c)?) } else { None };
        Ok(Self { kind, params })
    }

    pub fn name(&self, c: &CaseParams) -> String {
        match (self.kind, c.case) {
            (RegionKind::S3, CaseId::I) => "S3_caseI".into(),
            (RegionKind::S3, _) => "S3_caseII_III".into(),
            (k, _) => k.tag().into(),
        }
    }

    fn require_params(&self) -> Result<UParams> {
        self.params.ok_or_else(|| {
            FlowError::Domain(format!("region {} needs (delta, p, k) parameters", self.kind))
        })
    }

    /// Whether membership presupposes `C = 0, H = 1`.
    pub fn on_constraint(&self) -> bool {
        self.kind != RegionKind::P
    }

    /// Defining inequalities `phi >= 0` with their certificate roles.
    pub fn faces(&self, c: &CaseParams) -> Result<Vec<RegionFace>> {
        let barrier = |face| RegionFace { face, role: FaceRole::Barrier };
        let positive: Vec<RegionFace> = (0..3).map(|j| barrier(Face::Z(j))).collect();
        let s3 = || -> Vec<RegionFace> {
            let mut v = positive.clone();
            for j in 0..2 {
                v.push(barrier(Face::ZDiff(2, j)));
            }
            if c.case == CaseId::I {
                for j in 0..2 {
                    v.push(barrier(Face::FDiff(j, 2)));
                }
                v.push(barrier(Face::X(2)));
                v.push(barrier(Face::FCombo));
            } else {
                for j in 0..2 {
                    v.push(barrier(Face::Tilted { hi: 2, lo: j, rho: c.rho }));
                }
                v.push(barrier(Face::X(2)));
            }
            v
        };
        let exit = RegionFace { face: Face::ZDeficit, role: FaceRole::Exit };
        let faces = match self.kind {
            RegionKind::P => positive,
            RegionKind::S3 => s3(),
            RegionKind::S3Hat => {
                let mut v = s3();
                v.push(barrier(Face::ZExcess));
                v.push(barrier(Face::WeightedX));
                v
            }
            RegionKind::U0 | RegionKind::UDelta => {
                let mut v = s3();
                v.push(exit);
                v.push(barrier(Face::RicciDiff { i: 0, j: 2, scale: 1.0 }));
                v.push(barrier(Face::RicciDiff { i: 2, j: 1, scale: 1.0 }));
                if self.kind == RegionKind::UDelta {
                    let u = self.require_params()?;
                    v.push(barrier(Face::RicciDiff { i: 2, j: 1, scale: 1.0 + u.delta }));
                }
                v
            }
            RegionKind::UDpk | RegionKind::UDpkHat => {
                let u = self.require_params()?;
                let mut v = s3();
                v.push(exit);
                v.push(barrier(Face::Bump { p: u.p, k: u.k }));
                v.push(barrier(Face::Wedge { p: u.p }));
                if self.kind == RegionKind::UDpkHat {
                    v.push(barrier(Face::OmegaFloor { omega: u.omega_star }));
                }
                v
            }
            RegionKind::S3Check => {
                let mut v = vec![barrier(Face::Z(0)), barrier(Face::Z(2)), barrier(Face::ZDiff(2, 0))];
                if c.case == CaseId::I {
                    v.push(barrier(Face::FDiff(0, 2)));
                    v.push(barrier(Face::X(2)));
                    v.push(barrier(Face::FCombo));
                } else {
                    v.push(barrier(Face::Tilted { hi: 2, lo: 0, rho: c.rho }));
                    v.push(barrier(Face::X(2)));
                }
                v.push(barrier(Face::XBalance));
                v.push(barrier(Face::ZProduct { d: c.d(), b: c.b() }));
                v
            }
            RegionKind::Triangle => {
                if c.case != CaseId::I {
                    return Err(FlowError::CaseUnsupported(c.case));
                }
                positive
            }
        };
        Ok(faces)
    }

    /// Side conditions imposed only by the certificate (not by membership).
    pub fn side_conditions(&self) -> Vec<RegionFace> {
        match (self.kind, self.params) {
            (RegionKind::UDpkHat, Some(u)) => vec![
                RegionFace { face: Face::XPairSum, role: FaceRole::SideCondition },
                RegionFace { face: Face::XRatio { delta: u.delta }, role: FaceRole::SideCondition },
            ],
            _ => Vec::new(),
        }
    }

    /// Equalities `e = 0` cutting the region out of phase space.
    pub fn equalities(&self) -> Vec<Face> {
        match self.kind {
            RegionKind::S3Check => vec![Face::XEq(0, 1), Face::ZEq(0, 1)],
            RegionKind::Triangle => vec![Face::F(0), Face::F(1), Face::F(2), Face::ZTotal],
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Membership {
    Interior,
    Boundary(Vec<String>),
    Outside,
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        !matches!(self, Membership::Outside)
    }
}

/// Tolerances for [`membership_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MembershipTol {
    /// `|phi| <= boundary` marks a face active.
    pub boundary: f64,
    /// Allowed `|C|` and `|H - 1|` for constrained regions.
    pub constraint: f64,
}

impl Default for MembershipTol {
    fn default() -> Self {
        Self { boundary: BOUNDARY_TOL, constraint: 1e-7 }
    }
}

pub fn membership(s: &State, r: &RegionSpec, c: &CaseParams) -> Result<Membership> {
    membership_with(s, r, c, MembershipTol::default())
}

pub fn membership_with(s: &State, r: &RegionSpec, c: &CaseParams, tol: MembershipTol) -> Result<Membership> {
    if r.on_constraint() {
        let conservation = conservation_residual(s, c).abs();
        let trace = trace_residual(s, c).abs();
        if conservation > tol.constraint || trace > tol.constraint {
            return Err(FlowError::ConstraintViolation { conservation, trace });
        }
    }
    let faces = r.faces(c)?;
    if r.equalities().iter().any(|e| e.value(s, c).abs() > tol.boundary) {
        return Ok(Membership::Outside);
    }
    let mut active = Vec::new();
    for f in &faces {
        let v = f.face.value(s, c);
        if v < -tol.boundary {
            return Ok(Membership::Outside);
        }
        if v <= tol.boundary {
            active.push(f.face.name());
        }
    }
    Ok(if active.is_empty() { Membership::Interior } else { Membership::Boundary(active) })
}

/// Smallest defining-function value (equalities enter as `-|e|`); the state
/// is in the region up to tolerance `tau` iff the margin is `>= -tau`.
pub fn margin(s: &State, faces: &[RegionFace], equalities: &[Face], c: &CaseParams) -> f64 {
    let ineq = faces.iter().map(|f| f.face.value(s, c));
    let eq = equalities.iter().map(|e| -e.value(s, c).abs());
    ineq.chain(eq).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit_data::params_for;
    use crate::spectra::{p0, p1, p2};

    #[test]
    fn p0_on_s3_boundary_case_ii() {
        let c = params_for(CaseId::II);
        let r = RegionSpec::new(RegionKind::S3);
        let m = membership(&p0(&c), &r, &c).unwrap();
        let mut want = vec!["Z1", "Z3-Z2", "X3-X2+rho(Z3-Z2)", "X3"];
        want.sort();
        match m {
            Membership::Boundary(mut active) => {
                active.sort();
                assert_eq!(active, want);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn p1_on_s3hat_boundary() {
        for case in CaseId::ALL {
            let c = params_for(case);
            let m = membership(&p1(&c), &RegionSpec::new(RegionKind::S3Hat), &c).unwrap();
            match m {
                Membership::Boundary(active) => assert!(active.contains(&"Z1(X1-X3)+Z2(X2-X3)".to_string())),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn p2_on_s3check_boundary() {
        for case in CaseId::ALL {
            let c = params_for(case);
            let m = membership(&p2(&c), &RegionSpec::new(RegionKind::S3Check), &c).unwrap();
            let mut want = vec!["X1+X2-2X3", "(d-1)^2Z1Z2-4b^2Z3^2"];
            want.sort();
            match m {
                Membership::Boundary(mut active) => {
                    active.sort();
                    assert_eq!(active, want, "{case}");
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn membership_requires_constraint() {
        let c = params_for(CaseId::I);
        let r = RegionSpec::new(RegionKind::S3);
        assert!(membership(&State::origin(), &r, &c).is_err());
        assert!(membership(&State::origin(), &RegionSpec::new(RegionKind::P), &c).is_ok());
    }

    #[test]
    fn triangle_only_for_case_i() {
        let r = RegionSpec::new(RegionKind::Triangle);
        assert!(r.faces(&params_for(CaseId::II)).is_err());
        let c = params_for(CaseId::I);
        assert!(membership(&p0(&c), &r, &c).unwrap().is_inside());
        assert!(membership(&p1(&c), &r, &c).unwrap().is_inside());
        assert_eq!(membership(&p2(&c), &r, &c).unwrap(), Membership::Outside);
    }

    #[test]
    fn g2_defect_values() {
        let c = params_for(CaseId::I);
        assert!(g2_defect(&p1(&c)).iter().all(|f| f.abs() < 1e-15));
        assert!(g2_defect(&p2(&c)).iter().any(|f| f.abs() > 1e-3));
        assert_eq!(g2_defect(&State::origin()), [0.0; 3]);
    }

    #[test]
    fn region_tags_round_trip() {
        for k in RegionKind::ALL {
            assert_eq!(k.tag().parse::<RegionKind>().unwrap(), k);
        }
        assert_eq!("S3_caseI".parse::<RegionKind>().unwrap(), RegionKind::S3);
    }
}

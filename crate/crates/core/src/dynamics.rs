//! Phase space, the polynomial vector field, its first integrals and its
//! Jacobian.
//!
//! With `G = d sum X_j^2`, `H = d sum X_j` and
//! `R_j = a Z_k Z_l + b (Z_j^2 - Z_k^2 - Z_l^2)` over cyclic `(j, k, l)`:
//!
//! ```text
//! X_j' = X_j (G - 1) + R_j
//! Z_j' = Z_j (G - H/d + 2 X_j)
//! ```

use std::ops::{Add, Index, Mul, Sub};

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::orbit_data::CaseParams;

/// Cyclic companions `(k, l)` of index `j`.
#[inline]
pub(crate) const fn cyclic(j: usize) -> (usize, usize) {
    ((j + 1) % 3, (j + 2) % 3)
}

/// A point `(X1, X2, X3, Z1, Z2, Z3)` of phase space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 6]", into = "[f64; 6]")]
pub struct State(pub Vector6<f64>);

impl State {
    pub fn new(x: [f64; 3], z: [f64; 3]) -> Self {
        State(Vector6::new(x[0], x[1], x[2], z[0], z[1], z[2]))
    }

    pub fn origin() -> Self {
        State(Vector6::zeros())
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.0[j]
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        self.0[3 + j]
    }

    pub fn xs(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn zs(&self) -> [f64; 3] {
        [self.0[3], self.0[4], self.0[5]]
    }

    pub fn to_array(&self) -> [f64; 6] {
        self.0.into()
    }

    pub fn vector(&self) -> &Vector6<f64> {
        &self.0
    }

    /// Exchange the pairs `(X_i, Z_i)` and `(X_j, Z_j)` (0-based).
    pub fn swap_pairs(&self, i: usize, j: usize) -> Self {
        let mut v = self.0;
        v.swap_rows(i, j);
        v.swap_rows(3 + i, 3 + j);
        State(v)
    }

    /// The `(X2, Z2) <-> (X3, Z3)` mirror relating the `s1` and `-s1` families.
    pub fn mirror(&self) -> Self {
        self.swap_pairs(1, 2)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn distance(&self, other: &State) -> f64 {
        (self.0 - other.0).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn translated(&self, dir: &Vector6<f64>, scale: f64) -> Self {
        State(self.0 + dir * scale)
    }
}

impl From<[f64; 6]> for State {
    fn from(v: [f64; 6]) -> Self {
        State(Vector6::from_row_slice(&v))
    }
}

impl From<State> for [f64; 6] {
    fn from(s: State) -> Self {
        s.0.into()
    }
}

impl From<Vector6<f64>> for State {
    fn from(v: Vector6<f64>) -> Self {
        State(v)
    }
}

impl Index<usize> for State {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add<Vector6<f64>> for State {
    type Output = State;
    fn add(self, rhs: Vector6<f64>) -> State {
        State(self.0 + rhs)
    }
}

impl Sub for State {
    type Output = Vector6<f64>;
    fn sub(self, rhs: State) -> Vector6<f64> {
        self.0 - rhs.0
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, rhs: f64) -> State {
        State(self.0 * rhs)
    }
}

/// `G`, `H` and the three Ricci terms at a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scalars {
    /// `G = d sum X_j^2`.
    pub shape_sq: f64,
    /// `H = d sum X_j`.
    pub shape_trace: f64,
    pub ricci: [f64; 3],
}

/// `R_j`, written so that permuting the `Z` pairs permutes the results bitwise.
#[inline]
pub fn ricci_terms(z: [f64; 3], c: &CaseParams) -> [f64; 3] {
    let (a, b) = (c.a(), c.b());
    std::array::from_fn(|j| {
        let (k, l) = cyclic(j);
        a * (z[k] * z[l]) + b * (z[j] * z[j] - (z[k] * z[k] + z[l] * z[l]))
    })
}

pub fn scalars(s: &State, c: &CaseParams) -> Scalars {
    let d = c.d();
    let x = s.xs();
    Scalars {
        shape_sq: d * (x[0] * x[0] + (x[1] * x[1] + x[2] * x[2])),
        shape_trace: d * (x[0] + (x[1] + x[2])),
        ricci: ricci_terms(s.zs(), c),
    }
}

pub fn vector_field(s: &State, c: &CaseParams) -> Vector6<f64> {
    let sc = scalars(s, c);
    let g = sc.shape_sq;
    let z_rate = g - sc.shape_trace / c.d();
    let mut v = Vector6::zeros();
    for j in 0..3 {
        v[j] = s.x(j) * (g - 1.0) + sc.ricci[j];
        v[3 + j] = s.z(j) * (z_rate + 2.0 * s.x(j));
    }
    v
}

/// `G - 1 + d (R1 + R2 + R3)`; vanishes exactly on the constraint variety.
pub fn conservation_residual(s: &State, c: &CaseParams) -> f64 {
    let sc = scalars(s, c);
    sc.shape_sq - 1.0 + c.d() * (sc.ricci[0] + sc.ricci[1] + sc.ricci[2])
}

/// `H - 1`.
pub fn trace_residual(s: &State, c: &CaseParams) -> f64 {
    c.d() * (s.x(0) + (s.x(1) + s.x(2))) - 1.0
}

/// Absolute values of both constraint residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub conservation: f64,
    pub trace: f64,
}

impl Residuals {
    pub fn at(s: &State, c: &CaseParams) -> Self {
        Self {
            conservation: conservation_residual(s, c).abs(),
            trace: trace_residual(s, c).abs(),
        }
    }

    pub fn max(&self) -> f64 {
        self.conservation.max(self.trace)
    }

    pub fn merge(&self, other: &Residuals) -> Residuals {
        Residuals {
            conservation: self.conservation.max(other.conservation),
            trace: self.trace.max(other.trace),
        }
    }
}

/// Jacobian of [`vector_field`].
pub fn linearization(s: &State, c: &CaseParams) -> Matrix6<f64> {
    let (d, a, b) = (c.d(), c.a(), c.b());
    let sc = scalars(s, c);
    let g = sc.shape_sq;
    let z_rate = g - sc.shape_trace / d;
    let mut m = Matrix6::zeros();
    for j in 0..3 {
        let (k, l) = cyclic(j);
        for i in 0..3 {
            m[(j, i)] = 2.0 * d * s.x(j) * s.x(i);
        }
        m[(j, j)] += g - 1.0;
        m[(j, 3 + j)] = 2.0 * b * s.z(j);
        m[(j, 3 + k)] = a * s.z(l) - 2.0 * b * s.z(k);
        m[(j, 3 + l)] = a * s.z(k) - 2.0 * b * s.z(l);

        for i in 0..3 {
            let shift = if i == j { 1.0 } else { -1.0 };
            m[(3 + j, i)] = (2.0 * d * s.x(i) + shift) * s.z(j);
        }
        m[(3 + j, 3 + j)] = z_rate + 2.0 * s.x(j);
    }
    m
}

/// Gradients of `C` and of `H/d`: `(N_C, N_H)` with `N_H = (1,1,1,0,0,0)`.
pub fn constraint_normals(s: &State, c: &CaseParams) -> (Vector6<f64>, Vector6<f64>) {
    let (d, a, b) = (c.d(), c.a(), c.b());
    let mut nc = Vector6::zeros();
    for j in 0..3 {
        let (k, l) = cyclic(j);
        nc[j] = 2.0 * d * s.x(j);
        nc[3 + j] = a * d * (s.z(k) + s.z(l)) - 2.0 * b * d * s.z(j);
    }
    (nc, Vector6::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0))
}

/// Metric data `(f, fdot)` at a state for a given mean curvature `trL`:
/// `f_j = 1/(trL sqrt(Z_k Z_l))`, `fdot_j = X_j / sqrt(Z_k Z_l)`.
pub fn recover_original(s: &State, trl: f64) -> Result<([f64; 3], [f64; 3])> {
    if !(trl > 0.0) {
        return Err(FlowError::Domain(format!("trL must be positive, got {trl}")));
    }
    let mut f = [0.0; 3];
    let mut fdot = [0.0; 3];
    for j in 0..3 {
        let (k, l) = cyclic(j);
        let prod = s.z(k) * s.z(l);
        if !(prod > 0.0) {
            return Err(FlowError::Domain(format!(
                "Z{}Z{} = {prod:e} is not positive",
                k + 1,
                l + 1
            )));
        }
        let root = prod.sqrt();
        f[j] = 1.0 / (trl * root);
        fdot[j] = s.x(j) / root;
    }
    Ok((f, fdot))
}

/// Newton projection onto the zero set of `residual`, taking minimum-norm
/// steps inside the column span of `directions` (the full space if `None`).
///
/// `residual` returns the residual vector and its Jacobian (rows = equations).
pub fn newton_project<F>(
    start: &State,
    directions: Option<&DMatrix<f64>>,
    tol: f64,
    max_iter: usize,
    mut residual: F,
) -> Result<State>
where
    F: FnMut(&State) -> (DVector<f64>, DMatrix<f64>),
{
    let mut s = *start;
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let (r, jac) = residual(&s);
        last = r.amax();
        if !last.is_finite() {
            break;
        }
        if last <= tol {
            return Ok(s);
        }
        let step = match directions {
            Some(basis) => basis * min_norm_solve(&(&jac * basis), &r)?,
            None => min_norm_solve(&jac, &r)?,
        };
        for i in 0..6 {
            s.0[i] -= step[i];
        }
    }
    let (r, _) = residual(&s);
    let res = r.amax();
    if res <= tol {
        return Ok(s);
    }
    Err(FlowError::ProjectionFailed {
        iterations: max_iter,
        residual: res.max(if last.is_finite() { 0.0 } else { last }),
    })
}

/// Minimum-norm solution of `J x = r` for full-row-rank `J`.
fn min_norm_solve(jac: &DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    let gram = jac * jac.transpose();
    let y = gram
        .clone()
        .cholesky()
        .map(|ch| ch.solve(r))
        .or_else(|| gram.lu().solve(r))
        .ok_or_else(|| FlowError::ProjectionFailed {
            iterations: 0,
            residual: r.amax(),
        })?;
    Ok(jac.transpose() * y)
}

/// Residual and Jacobian of `(C, H - 1)`.
pub fn constraint_system(s: &State, c: &CaseParams) -> (DVector<f64>, DMatrix<f64>) {
    let (nc, nh) = constraint_normals(s, c);
    let r = DVector::from_vec(vec![conservation_residual(s, c), trace_residual(s, c)]);
    let mut jac = DMatrix::zeros(2, 6);
    for i in 0..6 {
        jac[(0, i)] = nc[i];
        jac[(1, i)] = c.d() * nh[i];
    }
    (r, jac)
}

/// Project onto `C = 0, H = 1` along `directions` (all of phase space if `None`).
pub fn project_to_constraint(
    s: &State,
    c: &CaseParams,
    directions: Option<&DMatrix<f64>>,
) -> Result<State> {
    newton_project(s, directions, 1e-15, 50, |p| constraint_system(p, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit_data::{params_for, CaseId};

    fn p0(c: &CaseParams) -> State {
        let d = c.d();
        State::new([1.0 / d, 0.0, 0.0], [0.0, 1.0 / d, 1.0 / d])
    }

    #[test]
    fn scalars_at_p0_case_i() {
        let c = params_for(CaseId::I);
        let sc = scalars(&p0(&c), &c);
        assert_eq!(sc.shape_trace, 1.0);
        assert_eq!(sc.shape_sq, 0.5);
        assert_eq!(sc.ricci, [0.25, 0.0, 0.0]);
    }

    #[test]
    fn origin_values() {
        for case in CaseId::ALL {
            let c = params_for(case);
            let o = State::origin();
            let sc = scalars(&o, &c);
            assert_eq!((sc.shape_sq, sc.shape_trace, sc.ricci), (0.0, 0.0, [0.0; 3]));
            assert_eq!(conservation_residual(&o, &c), -1.0);
            assert_eq!(constraint_normals(&o, &c).0, Vector6::zeros());
        }
    }

    #[test]
    fn p0_is_a_zero_on_the_constraint() {
        for case in CaseId::ALL {
            let c = params_for(case);
            let s = p0(&c);
            assert!(vector_field(&s, &c).amax() < 1e-15);
            assert!(conservation_residual(&s, &c).abs() < 1e-15);
            assert!(trace_residual(&s, &c).abs() < 1e-15);
        }
    }

    #[test]
    fn recover_at_p1_gives_cone_slope() {
        for case in CaseId::ALL {
            let c = params_for(case);
            let q = 1.0 / c.n();
            let s = State::new([q; 3], [c.p1_z; 3]);
            let (f, fdot) = recover_original(&s, 3.7).unwrap();
            for j in 0..3 {
                assert!((fdot[j] - c.cone_slope()).abs() < 1e-14);
                assert_eq!(f[j], f[0]);
            }
        }
        let c = params_for(CaseId::I);
        assert!((c.cone_slope() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn recover_rejects_degenerate_z() {
        let c = params_for(CaseId::I);
        assert!(recover_original(&p0(&c), 1.0).is_err());
        let s = State::new([0.1; 3], [0.2; 3]);
        assert!(recover_original(&s, 0.0).is_err());
    }

    #[test]
    fn mirror_is_an_involution() {
        let s = State::from([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.mirror().to_array(), [1.0, 3.0, 2.0, 4.0, 6.0, 5.0]);
        assert_eq!(s.mirror().mirror(), s);
    }

    #[test]
    fn projection_lands_on_constraint() {
        let c = params_for(CaseId::II);
        let s = State::new([0.1, 0.08, 0.09], [0.1, 0.12, 0.11]);
        let p = project_to_constraint(&s, &c, None).unwrap();
        let r = Residuals::at(&p, &c);
        assert!(r.max() < 1e-14, "{r:?}");
    }
}

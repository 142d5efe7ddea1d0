//! Critical points of the flow, their linearizations and eigendata, and the
//! unstable subspaces tangent to the constraint manifold.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, Matrix6, Vector6};
use serde::Serialize;

use crate::dynamics::{constraint_normals, conservation_residual, linearization, trace_residual, vector_field, State};
use crate::error::{FlowError, Result};
use crate::orbit_data::CaseParams;

pub type C64 = Complex<f64>;

/// Eigenvalues closer than this are treated as one repeated eigenvalue.
const CLUSTER_TOL: f64 = 1e-7;
/// Real-part threshold separating unstable from neutral directions.
const UNSTABLE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum CriticalKind {
    /// Point of the circle `Z = 0, G = 1, H = 1` at the given angle.
    TypeI { angle: f64 },
    TypeII,
    TypeIII,
    TypeIV,
    TypeV,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub kind: CriticalKind,
    pub coords: State,
    pub label: Option<&'static str>,
}

impl CriticalPoint {
    /// Residuals `(|V|, |C|, |H - 1|)`.
    pub fn residuals(&self, c: &CaseParams) -> (f64, f64, f64) {
        (
            vector_field(&self.coords, c).amax(),
            conservation_residual(&self.coords, c).abs(),
            trace_residual(&self.coords, c).abs(),
        )
    }

    pub fn verify(&self, c: &CaseParams, tol: f64) -> Result<()> {
        let (v, cr, hr) = self.residuals(c);
        if v <= tol && cr <= tol && hr <= tol {
            Ok(())
        } else {
            Err(FlowError::Invariant(format!(
                "{:?} {:?}: |V| = {v:e}, |C| = {cr:e}, |H-1| = {hr:e}",
                self.kind, self.label
            )))
        }
    }
}

/// The Type I circle `{Z = 0, sum X = 1/d, sum X^2 = 1/d}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeICircle {
    pub center: [f64; 3],
    pub radius: f64,
    basis: [[f64; 3]; 2],
}

impl TypeICircle {
    pub fn new(c: &CaseParams) -> Self {
        let d = c.d();
        let q = 1.0 / (3.0 * d);
        let r2 = 1.0 / 2.0f64.sqrt();
        let r6 = 1.0 / 6.0f64.sqrt();
        Self {
            center: [q; 3],
            radius: ((3.0 * d - 1.0) / (3.0 * d * d)).sqrt(),
            basis: [[r2, -r2, 0.0], [r6, r6, -2.0 * r6]],
        }
    }

    pub fn point(&self, angle: f64) -> State {
        let (s, co) = angle.sin_cos();
        let x = std::array::from_fn(|j| {
            self.center[j] + self.radius * (co * self.basis[0][j] + s * self.basis[1][j])
        });
        State::new(x, [0.0; 3])
    }
}

pub fn p0(c: &CaseParams) -> State {
    let q = 1.0 / c.d();
    State::new([q, 0.0, 0.0], [0.0, q, q])
}

pub fn p1(c: &CaseParams) -> State {
    let q = 1.0 / c.n();
    State::new([q; 3], [c.p1_z; 3])
}

pub fn p2(c: &CaseParams) -> State {
    let q = 1.0 / c.n();
    State::new([q; 3], [c.p2_z, c.p2_z, c.p2_z3()])
}

/// Every critical point with nonnegative `Z`: eight samples of the Type I
/// circle, the Type II sources (case I only), `p0` and its two permutations,
/// `p1`, and `p2` with its two `Z`-permutations.
pub fn catalog(c: &CaseParams) -> Vec<CriticalPoint> {
    let mut out = Vec::new();
    let circle = TypeICircle::new(c);
    for i in 0..8 {
        let angle = 2.0 * PI * f64::from(i) / 8.0;
        out.push(CriticalPoint {
            kind: CriticalKind::TypeI { angle },
            coords: circle.point(angle),
            label: None,
        });
    }
    if c.has_type_ii() {
        let d = c.d();
        let base = State::new(
            [-1.0 / d, 1.0 / d, 1.0 / d],
            [((3.0 - d) / c.b()).sqrt() / d, 0.0, 0.0],
        );
        for j in 0..3 {
            out.push(CriticalPoint {
                kind: CriticalKind::TypeII,
                coords: base.swap_pairs(0, j),
                label: None,
            });
        }
    }
    let labels = ["p0", "p0'", "p0''"];
    for (j, label) in labels.into_iter().enumerate() {
        out.push(CriticalPoint {
            kind: CriticalKind::TypeIII,
            coords: p0(c).swap_pairs(0, j),
            label: Some(label),
        });
    }
    out.push(CriticalPoint {
        kind: CriticalKind::TypeV,
        coords: p1(c),
        label: Some("p1"),
    });
    for j in [2, 0, 1] {
        out.push(CriticalPoint {
            kind: CriticalKind::TypeIV,
            coords: p2(c).swap_pairs(2, j),
            label: (j == 2).then_some("p2"),
        });
    }
    out
}

/// Eigendata of the linearization at a critical point.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: Vec<C64>,
    pub eigenvectors: Vec<Vector6<C64>>,
    /// Eigenvalues of the linearization restricted to the constraint tangent space.
    pub tangent_eigenvalues: Vec<C64>,
    /// Orthonormal real basis of the unstable subspace tangent to `C = 0, H = 1`.
    pub unstable_basis_on_constraint: Vec<Vector6<f64>>,
}

impl SpectralData {
    pub fn unstable_dimension(&self) -> usize {
        self.unstable_basis_on_constraint.len()
    }

    /// Largest `|L v - lambda v| / |v|` over the eigenpairs.
    pub fn max_pair_residual(&self, l: &Matrix6<f64>) -> f64 {
        let lc: Matrix6<C64> = l.map(|v| C64::new(v, 0.0));
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(lam, v)| (lc * v - v * *lam).norm() / v.norm())
            .fold(0.0, f64::max)
    }
}

pub fn spectral_data(cp: &CriticalPoint, c: &CaseParams) -> Result<SpectralData> {
    cp.verify(c, 1e-12)?;
    spectral_data_at(&cp.coords, c)
}

/// Eigendata at an arbitrary state (no critical-point check).
pub fn spectral_data_at(s: &State, c: &CaseParams) -> Result<SpectralData> {
    let l = linearization(s, c);
    let ld = DMatrix::from_fn(6, 6, |i, j| l[(i, j)]);
    let (eigenvalues, vecs) = eigen_pairs(&ld)?;
    let eigenvectors = vecs
        .into_iter()
        .map(|v| Vector6::from_iterator(v.iter().copied()))
        .collect();

    let tangent = tangent_basis(s, c);
    let restricted = tangent.transpose() * &ld * &tangent;
    let (tangent_eigenvalues, tvecs) = eigen_pairs(&restricted)?;
    let mut raw = Vec::new();
    for (lam, w) in tangent_eigenvalues.iter().zip(&tvecs) {
        if lam.re <= UNSTABLE_TOL {
            continue;
        }
        let u = &tangent * w.map(|z| z.re);
        raw.push(u);
        if lam.im.abs() > CLUSTER_TOL {
            raw.push(&tangent * w.map(|z| z.im));
        }
    }
    let unstable_basis_on_constraint = orthonormalize(raw.iter().map(|v| Vector6::from_iterator(v.iter().copied())));
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
        tangent_eigenvalues,
        unstable_basis_on_constraint,
    })
}

/// Orthonormal basis of the tangent space `{N_C . v = 0, N_H . v = 0}` as the
/// columns of a 6x4 matrix.
pub fn tangent_basis(s: &State, c: &CaseParams) -> DMatrix<f64> {
    let (nc, nh) = constraint_normals(s, c);
    let normals = orthonormalize([nc, nh].into_iter());
    let mut cols: Vec<Vector6<f64>> = Vec::new();
    let mut candidates: Vec<Vector6<f64>> = (0..6)
        .map(|i| {
            let mut e = Vector6::zeros();
            e[i] = 1.0;
            e
        })
        .collect();
    while cols.len() < 6 - normals.len() {
        let (best, _) = candidates
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let mut r = *e;
                for q in normals.iter().chain(cols.iter()) {
                    r -= q * q.dot(&r);
                }
                (i, r.norm())
            })
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mut r = candidates.remove(best);
        for _ in 0..2 {
            for q in normals.iter().chain(cols.iter()) {
                r -= q * q.dot(&r);
            }
        }
        cols.push(r.normalize());
    }
    DMatrix::from_fn(6, cols.len(), |i, j| cols[j][i])
}

fn orthonormalize(vs: impl Iterator<Item = Vector6<f64>>) -> Vec<Vector6<f64>> {
    let mut out: Vec<Vector6<f64>> = Vec::new();
    for v in vs {
        let scale = v.norm();
        let mut r = v;
        for _ in 0..2 {
            for q in &out {
                r -= q * q.dot(&r);
            }
        }
        if r.norm() > 1e-10 * scale.max(1e-300) {
            out.push(r.normalize());
        }
    }
    out
}

/// Eigenvalues (sorted by descending real part, then imaginary part) and
/// matching eigenvectors of a real square matrix.
///
/// Eigenvalues come from the real Schur form; eigenvectors span the numerical
/// null space of `A - lambda I`, with one vector per member of a cluster of
/// repeated eigenvalues.
pub fn eigen_pairs(a: &DMatrix<f64>) -> Result<(Vec<C64>, Vec<nalgebra::DVector<C64>>)> {
    let dim = a.nrows();
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| FlowError::EigenSolver("Schur iteration did not converge".into()))?;
    let mut eig: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    if eig.len() != dim || eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(FlowError::EigenSolver("non-finite eigenvalues".into()));
    }
    eig.sort_by(|x, y| {
        y.re.partial_cmp(&x.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal))
    });

    let scale = a.amax().max(1.0);
    let ac: DMatrix<C64> = a.map(|v| C64::new(v, 0.0));
    let mut values = Vec::with_capacity(dim);
    let mut vectors = Vec::with_capacity(dim);
    let mut i = 0;
    while i < dim {
        let mut j = i + 1;
        while j < dim && (eig[j] - eig[i]).norm() <= CLUSTER_TOL * scale {
            j += 1;
        }
        let mult = j - i;
        let lam = eig[i..j].iter().sum::<C64>() / (mult as f64);
        let shifted = &ac - DMatrix::<C64>::identity(dim, dim) * lam;
        let svd = shifted.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| FlowError::EigenSolver("SVD did not return right vectors".into()))?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&p, &q| {
            svd.singular_values[p]
                .partial_cmp(&svd.singular_values[q])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for (m, &row) in order.iter().take(mult).enumerate() {
            let v: nalgebra::DVector<C64> = v_t.row(row).transpose().map(|z| z.conj());
            let v = normalize_phase(v);
            values.push(if mult == 1 { lam } else { eig[i + m] });
            vectors.push(v);
        }
        i = j;
    }
    Ok((values, vectors))
}

/// Scale so that the largest-modulus entry is real and positive.
fn normalize_phase(v: nalgebra::DVector<C64>) -> nalgebra::DVector<C64> {
    let pivot = v
        .iter()
        .copied()
        .fold(C64::new(0.0, 0.0), |acc, z| if z.norm() > acc.norm() { z } else { acc });
    if pivot.norm() == 0.0 {
        return v;
    }
    let unit = pivot / pivot.norm();
    let w = v.map(|z| z / unit);
    let n = w.norm();
    w / C64::new(n, 0.0)
}

/// Closed-form eigenvalues at `p0`: `{1/d, 2/d, 2/d, 1/d - 1, 1/d - 1, -1}`.
pub fn p0_eigenvalues(c: &CaseParams) -> [f64; 6] {
    let d = c.d();
    [1.0 / d, 2.0 / d, 2.0 / d, 1.0 / d - 1.0, 1.0 / d - 1.0, -1.0]
}

/// Closed-form eigenvectors `v1..v6` at `p0`, in the order of [`p0_eigenvalues`].
pub fn p0_eigenvectors(c: &CaseParams) -> [Vector6<f64>; 6] {
    let (d, a, b) = (c.d(), c.a(), c.b());
    let w = a / (d + 1.0);
    [
        Vector6::new(0.0, -1.0, 1.0, 0.0, -2.0, 2.0),
        Vector6::new(2.0, 0.0, 0.0, 0.0, 1.0, 1.0),
        Vector6::new(0.0, w, w, 1.0, 0.0, 0.0),
        Vector6::new(1.0 - d, 0.0, 0.0, 0.0, 1.0, 1.0),
        Vector6::new(0.0, 1.0, 1.0, 0.0, 0.0, 0.0),
        Vector6::new(0.0, 4.0 * b, -4.0 * b, 0.0, -1.0, 1.0),
    ]
}

/// Unstable directions at `p0` tangent to the constraint: `v1` (rate `1/d`)
/// and `(d+1) v3 - a v2` (rate `2/d`).
pub fn unstable_basis_p0(c: &CaseParams) -> (Vector6<f64>, Vector6<f64>) {
    let v = p0_eigenvectors(c);
    (v[0], v[2] * (c.d() + 1.0) - v[1] * c.a())
}

/// Closed-form eigenvalues at `p1`:
/// `{2/n, beta2, beta2, beta1, beta1, 1/n - 1}` with `beta1 < beta2 < 0`.
pub fn p1_eigenvalues(c: &CaseParams) -> [f64; 6] {
    let (n, a, b) = (c.n(), c.a(), c.b());
    let alpha = c.p1_z;
    let disc = ((n - 1.0).powi(2) - 8.0 * n * n * alpha * alpha * (a - 4.0 * b)).sqrt();
    let beta1 = -(n - 1.0 + disc) / (2.0 * n);
    let beta2 = -(n - 1.0 - disc) / (2.0 * n);
    [2.0 / n, beta2, beta2, beta1, beta1, 1.0 / n - 1.0]
}

/// The single constraint-tangent unstable eigenvalue at `p2`.
pub fn p2_unstable_eigenvalue(c: &CaseParams) -> f64 {
    let (n, d, a, b) = (c.n(), c.d(), c.a(), c.b());
    let zs = c.p2_z;
    (((n - 1.0).powi(2) + 96.0 * n * (d - 1.0) * (a - 4.0 * b) * zs * zs).sqrt() - (n - 1.0))
        / (2.0 * n)
}

/// Eigenvector for [`p2_unstable_eigenvalue`]; it points into the symmetric
/// trapping set around `p2`.
pub fn p2_unstable_vector(c: &CaseParams) -> Vector6<f64> {
    let (d, b) = (c.d(), c.b());
    let lam = p2_unstable_eigenvalue(c);
    let zs = c.p2_z;
    Vector6::new(
        b * lam,
        b * lam,
        -2.0 * b * lam,
        2.0 * b * zs,
        2.0 * b * zs,
        -2.0 * (d - 1.0) * zs,
    )
}

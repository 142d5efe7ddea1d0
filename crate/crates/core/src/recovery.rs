//! Metric data `(t, f_j, fdot_j)` recovered from a trajectory, the smoothness
//! test at the singular orbit and curvature signs of the hypersurfaces.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ricci_terms, scalars, State};
use crate::error::{FlowError, Result};
use crate::flow::{Sample, Trajectory};
use crate::orbit_data::CaseParams;

/// Relative tolerance on sample spacing.
const GRID_TOL: f64 = 1e-9;

/// Homothety gauge for the recovered metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// Scale so that `lim_{t->0} f2 = lim_{t->0} f3 = h0 = 1`.
    #[default]
    UnitH0,
    /// `tr L = trl_ref` at the sample nearest `eta_ref`.
    Reference { eta_ref: f64, trl_ref: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricProfile {
    pub eta: Vec<f64>,
    pub t: Vec<f64>,
    pub f: Vec<[f64; 3]>,
    pub fdot: Vec<[f64; 3]>,
    pub trl: Vec<f64>,
    /// `(eta_ref, trl_ref)` actually used.
    pub gauge: (f64, f64),
    /// `fdot_j` at the last sample.
    pub cone_slope: [f64; 3],
    pub h0: f64,
    pub h1: f64,
}

impl MetricProfile {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Largest `|d sum fdot_j / f_j - trL| / trL`.
    pub fn mean_curvature_defect(&self, c: &CaseParams) -> f64 {
        self.f
            .iter()
            .zip(&self.fdot)
            .zip(&self.trl)
            .map(|((f, fd), trl)| {
                let sum: f64 = (0..3).map(|j| fd[j] / f[j]).sum();
                (c.d() * sum - trl).abs() / trl
            })
            .fold(0.0, f64::max)
    }
}

/// Cumulative integral of equally spaced `values` (spacing `h`): composite
/// Simpson at even indices, plus a cubic one-interval rule at odd ones.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 2 {
        return Ok(vec![0.0, 0.5 * h * (values[0] + values[1])]);
    }
    let f = values;
    let mut out = vec![0.0; n];
    for i in 1..n {
        out[i] = if i % 2 == 0 {
            out[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i])
        } else if i >= 3 {
            out[i - 1] + h / 24.0 * (f[i - 3] - 5.0 * f[i - 2] + 19.0 * f[i - 1] + 9.0 * f[i])
        } else if n >= 4 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else {
            h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2])
        };
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(FlowError::Quadrature("non-finite integrand".into()));
    }
    Ok(out)
}

fn uniform_spacing(samples: &[Sample]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(FlowError::Quadrature(format!("need at least 3 samples, got {}", samples.len())));
    }
    let h = samples[1].eta - samples[0].eta;
    for (i, w) in samples.windows(2).enumerate() {
        let gap = w[1].eta - w[0].eta;
        if (gap - h).abs() > GRID_TOL * h.abs().max(1.0) || !(gap > 0.0) {
            return Err(FlowError::Quadrature(format!(
                "sample gap {gap} at index {i} differs from spacing {h}"
            )));
        }
    }
    Ok(h)
}

/// `sqrt(Z_k Z_l)` for each `j`, or a domain error.
fn cross_roots(s: &State) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let (k, l) = crate::dynamics::cyclic(j);
        let prod = s.z(k) * s.z(l);
        if !(prod > 0.0) {
            return Err(FlowError::Domain(format!("Z{}Z{} = {prod} is not positive", k + 1, l + 1)));
        }
        *slot = prod.sqrt();
    }
    Ok(out)
}

/// Recover `t`, `f_j`, `fdot_j` and `tr L` along `traj`.
///
/// `tr L` solves `(tr L)' = -G tr L`; `t` integrates `1 / tr L` and starts
/// from the tail `1 / (G tr L)` of the exponential approach to the launch
/// point. `f_j = 1 / (tr L sqrt(Z_k Z_l))`, `fdot_j = X_j / sqrt(Z_k Z_l)`.
pub fn recover(traj: &Trajectory, gauge: Gauge, c: &CaseParams) -> Result<MetricProfile> {
    let samples = &traj.samples;
    let h = uniform_spacing(samples)?;
    let roots = samples.iter().map(|p| cross_roots(&p.state)).collect::<Result<Vec<_>>>()?;
    let shape: Vec<f64> = samples.iter().map(|p| scalars(&p.state, c).shape_sq).collect();
    let log_decay = cumulative_simpson(&shape, h)?;

    let (ref_index, trl_ref) = match gauge {
        Gauge::UnitH0 => (0, 1.0),
        Gauge::Reference { eta_ref, trl_ref } => {
            if !(trl_ref > 0.0) {
                return Err(FlowError::Domain(format!("trl_ref = {trl_ref} must be positive")));
            }
            let idx = samples
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1.eta - eta_ref).abs().total_cmp(&(b.1.eta - eta_ref).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            (idx, trl_ref)
        }
    };
    let mut profile = assemble(samples, &roots, &shape, &log_decay, h, ref_index, trl_ref)?;

    if gauge == Gauge::UnitH0 {
        let limits = extrapolate_limits(&profile)?;
        let h0 = 0.5 * (limits.values[1] + limits.values[2]);
        if !(h0 > 0.0) {
            return Err(FlowError::Extrapolation(format!("h0 = {h0} is not positive")));
        }
        profile = assemble(samples, &roots, &shape, &log_decay, h, 0, h0)?;
    }
    let limits = extrapolate_limits(&profile)?;
    profile.h0 = 0.5 * (limits.values[1] + limits.values[2]);
    profile.h1 = 0.5 * (limits.values[5] - limits.values[4]);
    Ok(profile)
}

fn assemble(
    samples: &[Sample],
    roots: &[[f64; 3]],
    shape: &[f64],
    log_decay: &[f64],
    h: f64,
    ref_index: usize,
    trl_ref: f64,
) -> Result<MetricProfile> {
    let base = log_decay[ref_index];
    let trl: Vec<f64> = log_decay.iter().map(|v| trl_ref * (base - v).exp()).collect();
    if trl.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(FlowError::Quadrature("tr L left the positive reals".into()));
    }
    let inv: Vec<f64> = trl.iter().map(|v| 1.0 / v).collect();
    let tail = if shape[0] > 0.0 {
        inv[0] / shape[0]
    } else {
        return Err(FlowError::Domain("G vanishes at the first sample".into()));
    };
    let t: Vec<f64> = cumulative_simpson(&inv, h)?.into_iter().map(|v| v + tail).collect();
    let f: Vec<[f64; 3]> = roots
        .iter()
        .zip(&trl)
        .map(|(r, l)| [1.0 / (l * r[0]), 1.0 / (l * r[1]), 1.0 / (l * r[2])])
        .collect();
    let fdot: Vec<[f64; 3]> = samples
        .iter()
        .zip(roots)
        .map(|(p, r)| [p.state.x(0) / r[0], p.state.x(1) / r[1], p.state.x(2) / r[2]])
        .collect();
    let cone_slope = *fdot.last().expect("non-empty");
    Ok(MetricProfile {
        eta: samples.iter().map(|p| p.eta).collect(),
        t,
        f,
        fdot,
        trl,
        gauge: (samples[ref_index].eta, trl_ref),
        cone_slope,
        h0: f64::NAN,
        h1: f64::NAN,
    })
}

/// Extrapolated `t -> 0` limits of `(f1, f2, f3, fdot1, fdot2, fdot3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Limits {
    pub values: [f64; 6],
    /// Difference from the estimate built on the next, coarser node triple.
    pub uncertainty: [f64; 6],
}

/// Quadratic extrapolation in `t` to `t = 0` from samples at `t ~ t0, 2 t0,
/// 4 t0`, compared against the triple `2 t0, 4 t0, 8 t0`.
pub fn extrapolate_limits(mp: &MetricProfile) -> Result<Limits> {
    let t0 = *mp.t.first().ok_or_else(|| FlowError::Extrapolation("empty profile".into()))?;
    let nearest = |target: f64| -> usize {
        let idx = mp.t.partition_point(|&t| t < target);
        if idx == 0 {
            0
        } else if idx >= mp.t.len() {
            mp.t.len() - 1
        } else if (mp.t[idx] - target).abs() < (mp.t[idx - 1] - target).abs() {
            idx
        } else {
            idx - 1
        }
    };
    let nodes: Vec<usize> = [1.0, 2.0, 4.0, 8.0].iter().map(|m| nearest(m * t0)).collect();
    let mut distinct = nodes.clone();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(FlowError::Extrapolation("trajectory too short near t = 0".into()));
    }
    let quantity = |i: usize, q: usize| if q < 3 { mp.f[i][q] } else { mp.fdot[i][q - 3] };
    let mut values = [0.0; 6];
    let mut uncertainty = [0.0; 6];
    for q in 0..6 {
        let fine = lagrange_at_zero(&nodes[0..3].iter().map(|&i| (mp.t[i], quantity(i, q))).collect::<Vec<_>>());
        let coarse = lagrange_at_zero(&nodes[1..4].iter().map(|&i| (mp.t[i], quantity(i, q))).collect::<Vec<_>>());
        values[q] = fine;
        uncertainty[q] = (fine - coarse).abs();
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(FlowError::Extrapolation("non-finite limit".into()));
    }
    Ok(Limits { values, uncertainty })
}

fn lagrange_at_zero(points: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .enumerate()
        .map(|(i, &(ti, yi))| {
            let w: f64 = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &(tj, _))| tj / (tj - ti))
                .product();
            w * yi
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub limits: Limits,
    pub h0: f64,
    pub h1: f64,
    /// `lim fdot2/f2 + fdot3/f3`.
    pub mean_curvature: f64,
    /// Largest deviation from `(0, h0, h0, 1, -h1, h1)`.
    pub defect: f64,
    /// Extrapolation uncertainty exceeded the tolerance.
    pub unstable: bool,
    pub pass: bool,
}

/// Do the `t -> 0` limits fit `(0, h0, h0, 1, -h1, h1)` within `tol`?
pub fn smoothness_check(mp: &MetricProfile, tol: f64) -> Result<SmoothnessReport> {
    let limits = extrapolate_limits(mp)?;
    let v = limits.values;
    let h0 = 0.5 * (v[1] + v[2]);
    let h1 = 0.5 * (v[5] - v[4]);
    let defect = [v[0].abs(), (v[1] - v[2]).abs(), (v[3] - 1.0).abs(), (v[4] + v[5]).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    let mean_curvature = if h0 != 0.0 { (v[4] + v[5]) / h0 } else { f64::NAN };
    let unstable = limits.uncertainty.iter().any(|u| *u > tol);
    Ok(SmoothnessReport {
        limits,
        h0,
        h1,
        mean_curvature,
        defect,
        unstable,
        pass: defect <= tol && h0 > 0.0 && !unstable,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub eta: f64,
    pub ricci: [f64; 3],
    /// `d sum R_j`, equal to `1 - G` on the constraint.
    pub scalar: f64,
}

impl CurvatureSample {
    pub fn ricci_nonnegative(&self) -> bool {
        self.ricci.iter().all(|r| *r >= 0.0)
    }
}

pub fn curvature_signs(traj: &Trajectory, c: &CaseParams) -> Vec<CurvatureSample> {
    traj.samples
        .iter()
        .map(|p| {
            let ricci = ricci_terms(p.state.zs(), c);
            CurvatureSample { eta: p.eta, ricci, scalar: c.d() * ricci.iter().sum::<f64>() }
        })
        .collect()
}

//! The one-parameter family of trajectories leaving `p0` along its unstable
//! manifold, event detection and `s1` sweeps.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{constraint_system, newton_project, Residuals, State};
use crate::error::{FlowError, Result};
use crate::flow::{integrate_from, Classification, FlowSettings, Reprojection, Trajectory, Watch, Watches};
use crate::orbit_data::{params_for, CaseId, CaseParams};
use crate::regions::{margin, RegionKind, RegionSpec, UParams};
use crate::spectra::{p0, p0_eigenvectors, p1, unstable_basis_p0};

/// Largest admissible launch offset.
pub const MAX_LAUNCH_OFFSET: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    pub case: CaseId,
    pub s0: f64,
    pub s1: f64,
    /// `s0 exp(2 eta0 / d)` at launch.
    pub launch_offset: f64,
    pub step: f64,
    /// Final eta (absolute; launch happens at a negative eta).
    pub max_eta: f64,
    pub tol_converge: f64,
    pub tol_drift: f64,
    pub record_every: usize,
    pub reprojection: Reprojection,
}

impl ShootConfig {
    pub fn new(case: CaseId, s1: f64) -> Self {
        Self {
            case,
            s0: 1.0,
            s1,
            launch_offset: 1e-8,
            step: 1e-3,
            max_eta: default_horizon(case),
            tol_converge: 1e-8,
            tol_drift: 1e-7,
            record_every: 10,
            reprojection: Reprojection::Off,
        }
    }

    pub fn with_reprojection(mut self, reprojection: Reprojection) -> Self {
        self.reprojection = reprojection;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            errors.push(format!("s0 = {} must be positive", self.s0));
        }
        if !self.s1.is_finite() {
            errors.push(format!("s1 = {} must be finite", self.s1));
        }
        if !(self.launch_offset > 0.0 && self.launch_offset <= MAX_LAUNCH_OFFSET) {
            errors.push(format!("launch offset {} must lie in (0, {MAX_LAUNCH_OFFSET}]", self.launch_offset));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            errors.push(format!("step {} must be positive", self.step));
        }
        if !(self.tol_converge > 0.0) || !(self.tol_drift > 0.0) {
            errors.push("tolerances must be positive".into());
        }
        if self.record_every == 0 {
            errors.push("record_every must be at least 1".into());
        }
        if !self.max_eta.is_finite() {
            errors.push(format!("max_eta = {} must be finite", self.max_eta));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(FlowError::Validation(errors))
        }
    }

    pub fn flow_settings(&self) -> FlowSettings {
        FlowSettings {
            step: self.step,
            max_eta: self.max_eta,
            tol_converge: self.tol_converge,
            tol_drift: self.tol_drift,
            record_every: self.record_every,
            reprojection: self.reprojection,
            ..FlowSettings::default()
        }
    }

    /// Launch time: `s0 exp(2 eta0 / d) = launch_offset`.
    pub fn launch_eta(&self) -> f64 {
        let d = params_for(self.case).d();
        0.5 * d * (self.launch_offset / self.s0).ln()
    }
}

/// Final eta long enough for every case to reach `p1` from the default launch.
pub fn default_horizon(case: CaseId) -> f64 {
    match case {
        CaseId::I => 200.0,
        CaseId::II => 300.0,
        CaseId::III => 500.0,
    }
}

/// `p0 + s0 e^{2 eta0/d} u2 + s1 e^{eta0/d} v1`, projected onto `C = 0, H = 1`
/// along the stable and neutral directions of `p0` so the two unstable
/// coordinates are kept.
pub fn launch_state(cfg: &ShootConfig) -> Result<(f64, State)> {
    cfg.validate()?;
    let c = params_for(cfg.case);
    let eta0 = cfg.launch_eta();
    let (v1, u2) = unstable_basis_p0(&c);
    let raw = State(p0(&c).0 + u2 * cfg.launch_offset + v1 * (cfg.s1 * (eta0 / c.d()).exp()));
    let v = p0_eigenvectors(&c);
    let kept = [v[1], v[3], v[4], v[5]];
    let dirs = DMatrix::from_fn(6, 4, |i, j| kept[j][i]);
    let s = newton_project(&raw, Some(&dirs), 1e-15, 50, |s| constraint_system(s, &c))?;
    Ok((eta0, s))
}

/// Integrate `gamma_{s1}` until convergence to `p1`, escape from `S3`, blow-up
/// or the horizon. For `s1 < 0` the watched sets are the mirrored ones.
pub fn integrate(cfg: &ShootConfig) -> Result<Trajectory> {
    let c = params_for(cfg.case);
    let (eta0, start) = launch_state(cfg)?;
    let watches = family_watches(&c, cfg.s1 < 0.0)?;
    integrate_from(&c, eta0, start, &p1(&c), &cfg.flow_settings(), &watches)
}

/// Entry into `S3_hat` and escape from `S3`, mirrored under
/// `(X2, Z2) <-> (X3, Z3)` when `mirrored`.
pub fn family_watches(c: &CaseParams, mirrored: bool) -> Result<Watches<'static>> {
    let hat = RegionSpec::new(RegionKind::S3Hat);
    let outer = RegionSpec::new(RegionKind::S3);
    let (hat_faces, outer_faces) = (hat.faces(c)?, outer.faces(c)?);
    let (hat_name, outer_name) = if mirrored {
        ("S2_hat".to_string(), "S2".to_string())
    } else {
        (hat.name(c), outer.name(c))
    };
    let (c1, c2) = (*c, *c);
    let orient = move |s: &State| if mirrored { s.mirror() } else { *s };
    Ok(Watches {
        entry: Some(Watch {
            name: hat_name,
            margin: Box::new(move |s| margin(&orient(s), &hat_faces, &[], &c1)),
        }),
        escape: Some(Watch {
            name: outer_name,
            margin: Box::new(move |s| margin(&orient(s), &outer_faces, &[], &c2)),
        }),
    })
}

/// `sqrt(k (d+1) s0 / (16 d))`.
pub fn s1_bound(case: CaseId, s0: f64, params: &UParams) -> Result<f64> {
    let c = params_for(case);
    if !(s0 > 0.0) {
        return Err(FlowError::Domain(format!("s0 = {s0} must be positive")));
    }
    let errors = UParams::violations(&c, params.delta, params.p, params.k);
    if !errors.is_empty() {
        return Err(FlowError::Domain(errors.join("; ")));
    }
    Ok((params.k * (c.d() + 1.0) * s0 / (16.0 * c.d())).sqrt())
}

/// `h1 = s1 sqrt(d / ((d+1) s0))`.
pub fn h1_of_s1(s0: f64, s1: f64, c: &CaseParams) -> f64 {
    s1 * (c.d() / ((c.d() + 1.0) * s0)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s1: f64,
    pub classification: Option<Classification>,
    pub eta_enter: Option<f64>,
    pub eta_converge: Option<f64>,
    pub final_distance: Option<f64>,
    pub max_residuals: Option<Residuals>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn converged(&self) -> bool {
        self.classification == Some(Classification::ConvergedToP1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(SweepRow::converged)
    }
}

/// `n` equally spaced points strictly inside `(-bound, bound)`.
pub fn interior_grid(bound: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| bound * (2.0 * i as f64 / (n + 1) as f64 - 1.0)).collect()
}

/// Integrate every `s1` in `grid` with `base` (its `s1` ignored); results are
/// sorted by `s1`. When `bound` is given the grid must lie strictly inside it.
pub fn sweep_trajectories(
    base: &ShootConfig,
    grid: &[f64],
    bound: Option<f64>,
) -> Result<Vec<(f64, Result<Trajectory>)>> {
    if let Some(b) = bound {
        if let Some(bad) = grid.iter().find(|s| !(s.abs() < b)) {
            return Err(FlowError::Domain(format!("s1 = {bad} outside (-{b}, {b})")));
        }
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted
        .into_par_iter()
        .map(|s1| (s1, integrate(&ShootConfig { s1, ..*base })))
        .collect())
}

pub fn sweep(base: &ShootConfig, grid: &[f64], bound: Option<f64>) -> Result<SweepResult> {
    let c = params_for(base.case);
    let target = p1(&c);
    let rows = sweep_trajectories(base, grid, bound)?
        .into_iter()
        .map(|(s1, run)| match run {
            Ok(t) => SweepRow {
                s1,
                classification: Some(t.classification.clone()),
                eta_enter: t.entry_eta(),
                eta_converge: t.converge_eta(),
                final_distance: Some(t.last().state.distance(&target)),
                max_residuals: Some(t.max_residuals),
                error: None,
            },
            Err(e) => SweepRow {
                s1,
                classification: None,
                eta_enter: None,
                eta_converge: None,
                final_distance: None,
                max_residuals: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(SweepResult { rows })
}

/// Per-trajectory checks of the qualitative behaviour along `gamma_{s1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FamilyDiagnostics {
    /// Largest `X3 - 1/n` (mirrored: `X2 - 1/n`) over all samples.
    pub x3_excess: f64,
    /// Largest relative decrease of `Z1 Z2 Z3` between consecutive samples.
    pub z_product_drop: f64,
    /// Smallest `omega1 + omega2 - 1` after entry.
    pub omega_sum_after_entry: Option<f64>,
}

pub fn diagnostics(t: &Trajectory, c: &CaseParams, mirrored: bool) -> FamilyDiagnostics {
    let orient = |s: &State| if mirrored { s.mirror() } else { *s };
    let inv_n = 1.0 / c.n();
    let x3_excess = t
        .samples
        .iter()
        .map(|p| orient(&p.state).x(2) - inv_n)
        .fold(f64::NEG_INFINITY, f64::max);
    let product = |s: &State| s.z(0) * s.z(1) * s.z(2);
    let z_product_drop = t
        .samples
        .windows(2)
        .map(|w| {
            let (before, after) = (product(&w[0].state), product(&w[1].state));
            if before > 0.0 {
                (before - after) / before
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let omega_sum_after_entry = t.entry_eta().map(|entry| {
        t.samples
            .iter()
            .filter(|p| p.eta > entry)
            .map(|p| {
                let s = orient(&p.state);
                (s.z(0) + s.z(1)) / s.z(2) - 1.0
            })
            .fold(f64::INFINITY, f64::min)
    });
    FamilyDiagnostics { x3_excess, z_product_drop, omega_sum_after_entry }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{conservation_residual, trace_residual};

    #[test]
    fn symmetric_launch() {
        for case in CaseId::ALL {
            let (_, s) = launch_state(&ShootConfig::new(case, 0.0)).unwrap();
            assert_eq!(s.x(1), s.x(2));
            assert_eq!(s.z(1), s.z(2));
        }
    }

    #[test]
    fn launch_on_constraint_and_trapped() {
        for case in CaseId::ALL {
            let c = params_for(case);
            let u = UParams::default_for(&c).unwrap();
            let bound = s1_bound(case, 1.0, &u).unwrap();
            let (_, s) = launch_state(&ShootConfig::new(case, 0.5 * bound)).unwrap();
            assert!(conservation_residual(&s, &c).abs() <= 1e-12);
            assert!(trace_residual(&s, &c).abs() <= 1e-12);
            assert!(s.z(0) + s.z(1) - s.z(2) < 0.0);
        }
    }

    #[test]
    fn bound_and_h1_formulas() {
        let c = params_for(CaseId::I);
        let k = (12.0f64 / 13.0).powi(12) / 14.0;
        let u = UParams::new(&c, 0.7, 12, k).unwrap();
        let b = s1_bound(CaseId::I, 1.0, &u).unwrap();
        assert!((b - (3.0 * k / 32.0).sqrt()).abs() < 1e-15);
        let b4 = s1_bound(CaseId::I, 4.0, &u).unwrap();
        assert!((b4 - 2.0 * b).abs() < 1e-15);
        assert_eq!(h1_of_s1(1.0, 0.0, &c), 0.0);
        assert!((h1_of_s1(1.0, 0.3, &c) - 0.3 * (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((h1_of_s1(2.0, 0.3, &c) * 2f64.sqrt() - h1_of_s1(1.0, 0.3, &c)).abs() < 1e-15);
    }

    #[test]
    fn config_validation_collects_errors() {
        let mut cfg = ShootConfig::new(CaseId::I, 0.0);
        cfg.s0 = -1.0;
        cfg.launch_offset = 1e-3;
        match cfg.validate() {
            Err(FlowError::Validation(v)) => assert_eq!(v.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_sweep() {
        let base = ShootConfig::new(CaseId::I, 0.0);
        assert!(sweep(&base, &[], None).unwrap().rows.is_empty());
        assert!(sweep(&base, &[0.2], Some(0.1)).is_err());
    }

    #[test]
    fn grid_is_interior_and_symmetric() {
        let g = interior_grid(0.05, 9);
        assert_eq!(g.len(), 9);
        assert!(g.iter().all(|s| s.abs() < 0.05));
        assert_eq!(g[4], 0.0);
        assert!((g[0] + g[8]).abs() < 1e-18);
    }
}

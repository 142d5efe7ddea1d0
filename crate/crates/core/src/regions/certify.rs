//! Sampled certificate that the flow never points out of a region.
//!
//! For each face `phi = 0` we draw random states on `C = 0, H = 1`, Newton
//! project them onto the face (and the region's equalities), keep those where
//! every other defining inequality holds strictly, and record the minimum of
//! `<grad phi, V>`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Face, FaceRole, RegionFace, RegionKind, RegionSpec};
use crate::dynamics::{constraint_normals, conservation_residual, newton_project, ricci_terms, trace_residual, State};
use crate::error::Result;
use crate::orbit_data::CaseParams;
use crate::spectra::{p0, p1, p2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertifySettings {
    pub n_samples: usize,
    pub seed: u64,
    /// Pass threshold: min flux must be `>= -flux_tol`.
    pub flux_tol: f64,
    /// Other inequalities must exceed this to count as strict.
    pub strict_tol: f64,
    /// Proposals per sample slot before the slot is abandoned.
    pub attempts_per_slot: usize,
    /// Slots tried before a face with no accepted sample is declared starved.
    pub probe_slots: usize,
}

impl CertifySettings {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            flux_tol: 1e-9,
            strict_tol: 1e-10,
            attempts_per_slot: 128,
            probe_slots: 256,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceStatus {
    Pass,
    Fail,
    /// No boundary point with the other inequalities strict was found.
    Starved,
    /// Exit face: flux reported, not judged.
    Reported,
}

#[derive(Clone, Debug, Serialize)]
pub struct FaceReport {
    pub face: String,
    pub role: FaceRole,
    pub requested: usize,
    pub accepted: usize,
    pub attempts: usize,
    pub min_flux: Option<f64>,
    pub argmin: Option<State>,
    pub status: FaceStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub region: String,
    pub case: String,
    pub params: Option<super::UParams>,
    pub seed: u64,
    pub flux_tol: f64,
    pub faces: Vec<FaceReport>,
}

impl CertificateReport {
    /// No barrier or side-condition face failed.
    pub fn passed(&self) -> bool {
        self.faces.iter().all(|f| f.status != FaceStatus::Fail)
    }

    pub fn starved(&self) -> Vec<&str> {
        self.faces
            .iter()
            .filter(|f| f.status == FaceStatus::Starved)
            .map(|f| f.face.as_str())
            .collect()
    }

    pub fn face(&self, name: &str) -> Option<&FaceReport> {
        self.faces.iter().find(|f| f.face == name)
    }
}

pub fn boundary_sign_certificate(
    r: &RegionSpec,
    c: &CaseParams,
    n_samples: usize,
    seed: u64,
) -> Result<CertificateReport> {
    certify_with(r, c, &CertifySettings::new(n_samples, seed))
}

pub fn certify_with(r: &RegionSpec, c: &CaseParams, settings: &CertifySettings) -> Result<CertificateReport> {
    let mut all = r.faces(c)?;
    all.extend(r.side_conditions());
    let equalities = r.equalities();
    let faces = all
        .iter()
        .enumerate()
        .map(|(idx, rf)| certify_face(r, c, &all, &equalities, idx, *rf, settings))
        .collect();
    Ok(CertificateReport {
        region: r.name(c),
        case: c.case.to_string(),
        params: r.params,
        seed: settings.seed,
        flux_tol: settings.flux_tol,
        faces,
    })
}

struct SlotOutcome {
    attempts: usize,
    hit: Option<(f64, State)>,
}

fn certify_face(
    r: &RegionSpec,
    c: &CaseParams,
    all: &[RegionFace],
    equalities: &[Face],
    idx: usize,
    target: RegionFace,
    settings: &CertifySettings,
) -> FaceReport {
    let run_slots = |range: std::ops::Range<usize>| -> Vec<SlotOutcome> {
        range
            .into_par_iter()
            .map(|slot| {
                let mut rng = ChaCha8Rng::seed_from_u64(slot_seed(settings.seed, idx as u64, slot as u64));
                let mut attempts = 0;
                while attempts < settings.attempts_per_slot {
                    attempts += 1;
                    if let Some(hit) = try_sample(r, c, all, equalities, idx, &mut rng, settings) {
                        return SlotOutcome { attempts, hit: Some(hit) };
                    }
                }
                SlotOutcome { attempts, hit: None }
            })
            .collect()
    };

    let mut hits: Vec<(f64, State)> = Vec::new();
    let mut attempts = 0;
    let mut next = 0usize;
    let cap = 4 * settings.n_samples.max(settings.probe_slots);
    while hits.len() < settings.n_samples && next < cap {
        let chunk = if next == 0 {
            settings.probe_slots.min(cap)
        } else {
            (settings.n_samples - hits.len()).max(256).min(cap - next)
        };
        for out in run_slots(next..next + chunk) {
            attempts += out.attempts;
            if let Some(hit) = out.hit {
                if hits.len() < settings.n_samples {
                    hits.push(hit);
                }
            }
        }
        next += chunk;
        if hits.is_empty() {
            break;
        }
    }

    let best = hits
        .iter()
        .copied()
        .fold(None, |acc: Option<(f64, State)>, h| match acc {
            Some(a) if a.0 <= h.0 => Some(a),
            _ => Some(h),
        });
    let status = match (best, target.role) {
        (None, _) => FaceStatus::Starved,
        (Some(_), FaceRole::Exit) => FaceStatus::Reported,
        (Some((m, _)), _) if m >= -settings.flux_tol => FaceStatus::Pass,
        _ => FaceStatus::Fail,
    };
    FaceReport {
        face: target.face.name(),
        role: target.role,
        requested: settings.n_samples,
        accepted: hits.len(),
        attempts,
        min_flux: best.map(|b| b.0),
        argmin: best.map(|b| b.1),
        status,
    }
}

fn slot_seed(seed: u64, face: u64, slot: u64) -> u64 {
    let mut z = seed
        ^ face.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ slot.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn try_sample(
    r: &RegionSpec,
    c: &CaseParams,
    all: &[RegionFace],
    equalities: &[Face],
    idx: usize,
    rng: &mut ChaCha8Rng,
    settings: &CertifySettings,
) -> Option<(f64, State)> {
    let start = propose(r, c, rng)?;
    let face = all[idx].face;
    let projected = newton_project(&start, None, 1e-14, 40, |s| face_system(s, c, face, equalities)).ok()?;
    if conservation_residual(&projected, c).abs() > 1e-12 || trace_residual(&projected, c).abs() > 1e-12 {
        return None;
    }
    if scaled_value(face, &projected, c).abs() > 1e-12
        || equalities.iter().any(|e| scaled_value(*e, &projected, c).abs() > 1e-12)
    {
        return None;
    }
    let strict = all
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .all(|(_, other)| scaled_value(other.face, &projected, c) > settings.strict_tol);
    if !strict {
        return None;
    }
    Some((face.flux(&projected, c), projected))
}

/// `phi / |grad phi|`: first-order distance to the face. Faces such as the
/// bump function have values of order `Z^(p+2)`, so raw values are useless
/// as strictness or convergence measures.
fn scaled_value(face: Face, s: &State, c: &CaseParams) -> f64 {
    let norm = face.gradient(s, c).norm();
    if norm > 0.0 {
        face.value(s, c) / norm
    } else {
        face.value(s, c)
    }
}

fn face_system(s: &State, c: &CaseParams, face: Face, equalities: &[Face]) -> (DVector<f64>, DMatrix<f64>) {
    let rows = 3 + equalities.len();
    let mut r = DVector::zeros(rows);
    let mut jac = DMatrix::zeros(rows, 6);
    let (nc, nh) = constraint_normals(s, c);
    r[0] = conservation_residual(s, c);
    r[1] = trace_residual(s, c);
    for i in 0..6 {
        jac[(0, i)] = nc[i];
        jac[(1, i)] = c.d() * nh[i];
    }
    for (row, f) in std::iter::once(face).chain(equalities.iter().copied()).enumerate() {
        let g = f.gradient(s, c);
        let norm = g.norm();
        let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        r[2 + row] = f.value(s, c) * scale;
        for i in 0..6 {
            jac[(2 + row, i)] = g[i] * scale;
        }
    }
    (r, jac)
}

/// Random state on `C = 0, H = 1` roughly inside the region: `Z` ratios
/// `(omega1, omega2, 1)` drawn from the region's projection, `X` from
/// [`propose_x`], then `Z` scaled to solve `C = 0` exactly.
fn propose(r: &RegionSpec, c: &CaseParams, rng: &mut ChaCha8Rng) -> Option<State> {
    let d = c.d();
    let (w1, w2) = match r.kind {
        RegionKind::S3Hat => {
            let w2: f64 = rng.gen();
            (rng.gen_range((1.0 - w2)..=1.0), w2)
        }
        RegionKind::U0 | RegionKind::UDelta | RegionKind::UDpk => {
            let w2: f64 = rng.gen();
            (rng.gen_range(0.0..=(1.0 - w2)), w2)
        }
        RegionKind::UDpkHat => {
            let u = r.params?;
            let w2 = rng.gen_range(u.omega_star..=1.0);
            let floor = w2.powi(u.p as i32) * (1.0 - w2).powi(2) / u.k;
            if floor > 1.0 - w2 {
                return None;
            }
            (rng.gen_range(floor..=(1.0 - w2)), w2)
        }
        RegionKind::S3Check => {
            let w = rng.gen_range((2.0 * c.b() / (d - 1.0))..=1.0);
            (w, w)
        }
        RegionKind::Triangle => {
            let (u, v): (f64, f64) = (rng.gen(), rng.gen());
            (u, v)
        }
        RegionKind::P | RegionKind::S3 => (rng.gen(), rng.gen()),
    };
    let x = propose_x(r, c, rng);
    let g = d * x.iter().map(|v| v * v).sum::<f64>();
    let dir = [w1, w2, 1.0];
    let q: f64 = ricci_terms(dir, c).iter().sum();
    if g >= 1.0 || q <= 0.0 {
        return None;
    }
    let scale = ((1.0 - g) / (d * q)).sqrt();
    Some(State::new(x, [w1 * scale, w2 * scale, scale]))
}

/// `X` on the plane `H = 1`: uniform on a box half the time, otherwise a
/// log-uniform scale perturbation of a critical point the region touches.
fn propose_x(r: &RegionSpec, c: &CaseParams, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let d = c.d();
    let radius = 1.0 / d.sqrt();
    let symmetric = r.kind == RegionKind::S3Check;
    if let (RegionKind::UDpkHat, Some(u)) = (r.kind, r.params) {
        // Near p0 with both side conditions built in.
        let sigma = radius * 10f64.powf(-5.0 * rng.gen::<f64>());
        let x2 = sigma * rng.gen_range(-1.0..1.0);
        let x3 = ((1.0 + u.delta) * x2).max(-x2) + sigma * rng.gen::<f64>();
        return [1.0 / d - x2 - x3, x2, x3];
    }
    if rng.gen_bool(0.5) {
        let x1 = rng.gen_range(-radius..radius);
        let x2 = if symmetric { x1 } else { rng.gen_range(-radius..radius) };
        return [x1, x2, 1.0 / d - x1 - x2];
    }
    let centers: &[State] = &match r.kind {
        RegionKind::UDpk | RegionKind::UDpkHat => vec![p0(c)],
        RegionKind::S3Hat => vec![p1(c)],
        RegionKind::S3Check => vec![p1(c), p2(c)],
        _ => vec![p0(c), p1(c), p2(c)],
    };
    let centre = centers[rng.gen_range(0..centers.len())].xs();
    let sigma = radius * 10f64.powf(-5.0 * rng.gen::<f64>());
    let u1 = sigma * rng.gen_range(-1.0..1.0);
    let u2 = if symmetric { u1 } else { sigma * rng.gen_range(-1.0..1.0) };
    [centre[0] + u1, centre[1] + u2, centre[2] - u1 - u2]
}

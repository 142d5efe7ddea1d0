//! Parameters `(delta, p, k)` of the entrance zone and the derived `omega*`.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::orbit_data::CaseParams;

/// Bisection stops once the bracket is shorter than this.
const BISECTION_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UParams {
    pub delta: f64,
    pub p: u32,
    pub k: f64,
    pub omega_star: f64,
}

impl UParams {
    /// Validate `(delta, p, k)` for case `c` and compute `omega*`.
    pub fn new(c: &CaseParams, delta: f64, p: u32, k: f64) -> Result<Self> {
        let errors = Self::violations(c, delta, p, k);
        if !errors.is_empty() {
            return Err(FlowError::Domain(errors.join("; ")));
        }
        Ok(Self { delta, p, k, omega_star: omega_star(p, k)? })
    }

    /// Default delta for the case, `p = p_min` and `k = 0.9 k_max(p)`.
    pub fn default_for(c: &CaseParams) -> Result<Self> {
        let delta = c.default_delta();
        let p = p_min(c, delta)?;
        Self::new(c, delta, p, 0.9 * k_max(p))
    }

    /// Every violated admissibility inequality, named.
    pub fn violations(c: &CaseParams, delta: f64, p: u32, k: f64) -> Vec<String> {
        let mut out = Vec::new();
        let upper = c.delta_upper();
        if !(delta > 0.0 && delta < upper) {
            out.push(format!("delta = {delta} violates 0 < delta < 4b/(d-1) = {upper}"));
            return out;
        }
        if p < 2 {
            out.push(format!("p = {p} violates p >= 2"));
        }
        for (name, ok) in p_conditions(c, delta, p) {
            if !ok {
                out.push(format!("p = {p} violates {name}"));
            }
        }
        let km = k_max(p.max(1));
        if !(k > 0.0 && k < km) {
            out.push(format!("k = {k} violates 0 < k < (p/(p+1))^p/(p+1) = {km}"));
        }
        out
    }
}

fn p_conditions(c: &CaseParams, delta: f64, p: u32) -> [(&'static str, bool); 3] {
    let d = c.d();
    let pf = f64::from(p);
    let ratio = delta / (2.0 + delta);
    [
        (
            "((p-1/2)(p+3/2)+1/(2(d-1)))*delta/(2+delta) >= 3p+3/2",
            ((pf - 0.5) * (pf + 1.5) + 1.0 / (2.0 * (d - 1.0))) * ratio >= 3.0 * pf + 1.5,
        ),
        (
            "(2p+1)/d*delta/(2+delta) >= (3d-1)/(d(d-1))",
            (2.0 * pf + 1.0) / d * ratio >= (3.0 * d - 1.0) / (d * (d - 1.0)),
        ),
        (
            "p/(p+1) >= (d-1)(1+delta)/(a+2b)",
            pf / (pf + 1.0) >= (d - 1.0) * (1.0 + delta) / (c.a() + 2.0 * c.b()),
        ),
    ]
}

/// Smallest integer `p >= 2` satisfying the three lower bounds.
pub fn p_min(c: &CaseParams, delta: f64) -> Result<u32> {
    let upper = c.delta_upper();
    if !(delta > 0.0 && delta < upper) {
        return Err(FlowError::Domain(format!(
            "delta = {delta} violates 0 < delta < 4b/(d-1) = {upper}"
        )));
    }
    (2..=1_000_000u32)
        .find(|&p| p_conditions(c, delta, p).iter().all(|(_, ok)| *ok))
        .ok_or_else(|| FlowError::Domain(format!("no admissible p below 10^6 for delta = {delta}")))
}

/// Strict upper bound `(p/(p+1))^p / (p+1)` for `k`.
pub fn k_max(p: u32) -> f64 {
    let pf = f64::from(p);
    (pf / (pf + 1.0)).powi(p as i32) / (pf + 1.0)
}

/// `(p_min, k_max(p_min))` for a given delta.
pub fn admissible_params(c: &CaseParams, delta: f64) -> Result<(u32, f64)> {
    let p = p_min(c, delta)?;
    Ok((p, k_max(p)))
}

/// Root of `k - w^p (1 - w)` in `(p/(p+1), 1)`.
pub fn omega_star(p: u32, k: f64) -> Result<f64> {
    if p < 2 {
        return Err(FlowError::Domain(format!("p = {p} violates p >= 2")));
    }
    let km = k_max(p);
    if !(k > 0.0 && k < km) {
        return Err(FlowError::Domain(format!(
            "k = {k} violates 0 < k < (p/(p+1))^p/(p+1) = {km}"
        )));
    }
    let pf = f64::from(p);
    let g = |w: f64| k - w.powi(p as i32) * (1.0 - w);
    let (mut lo, mut hi) = (pf / (pf + 1.0), 1.0);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

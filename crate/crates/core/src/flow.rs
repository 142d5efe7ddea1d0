//! Fixed-step classical Runge-Kutta integration with constraint-drift
//! monitoring and event detection.

use nalgebra::{DMatrix, DVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::{project_to_constraint, newton_project, vector_field, Residuals, State};
use crate::error::{FlowError, Result};
use crate::orbit_data::CaseParams;

/// Norm beyond which a trajectory is declared to blow up.
pub const BLOW_UP_NORM: f64 = 1e6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reprojection {
    /// Plain RK4.
    #[default]
    Off,
    /// Newton re-projection onto `C = 0, H = 1` after every step.
    Constraint,
    /// Orthogonal re-projection onto the plane `F_j = 0, Z1 + Z2 + Z3 = 1`.
    Triangle,
}

impl std::str::FromStr for Reprojection {
    type Err = FlowError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "off" => Ok(Reprojection::Off),
            "constraint" => Ok(Reprojection::Constraint),
            "triangle" => Ok(Reprojection::Triangle),
            other => Err(FlowError::Parse(format!("unknown reprojection {other:?}; expected off, constraint or triangle"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSettings {
    pub step: f64,
    /// Final value of eta (absolute, not a span).
    pub max_eta: f64,
    pub tol_converge: f64,
    pub tol_drift: f64,
    /// Keep every `record_every`-th step as a sample.
    pub record_every: usize,
    /// Boundary tolerance for region events.
    pub boundary_tol: f64,
    pub reprojection: Reprojection,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self {
            step: 1e-3,
            max_eta: 200.0,
            tol_converge: 1e-8,
            tol_drift: 1e-7,
            record_every: 10,
            boundary_tol: 1e-10,
            reprojection: Reprojection::Off,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub eta: f64,
    pub state: State,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// First entry into the watched target region.
    Entered(String),
    Converged,
    Escaped(String),
    BlowUp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub eta: f64,
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ConvergedToP1,
    EscapedRegion(String),
    BlowUp,
    HorizonReached,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub step: f64,
    pub record_every: usize,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub classification: Classification,
    pub max_residuals: Residuals,
}

impl Trajectory {
    /// Spacing in eta between consecutive recorded samples.
    pub fn sample_spacing(&self) -> f64 {
        self.step * self.record_every as f64
    }

    pub fn first_event(&self, pred: impl Fn(&EventKind) -> bool) -> Option<f64> {
        self.events.iter().find(|e| pred(&e.kind)).map(|e| e.eta)
    }

    pub fn entry_eta(&self) -> Option<f64> {
        self.first_event(|k| matches!(k, EventKind::Entered(_)))
    }

    pub fn converge_eta(&self) -> Option<f64> {
        self.first_event(|k| matches!(k, EventKind::Converged))
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least the launch sample")
    }
}

/// A named signed margin: nonnegative (up to the boundary tolerance) inside.
pub struct Watch<'a> {
    pub name: String,
    pub margin: Box<dyn Fn(&State) -> f64 + Send + Sync + 'a>,
}

/// Region watches evaluated after every step.
#[derive(Default)]
pub struct Watches<'a> {
    /// Records the first entry (margin crossing up to `-boundary_tol`).
    pub entry: Option<Watch<'a>>,
    /// Terminates the run when the margin drops below `-boundary_tol`.
    pub escape: Option<Watch<'a>>,
}

pub fn rk4_step(s: &State, h: f64, c: &CaseParams) -> State {
    let y = s.0;
    let k1 = vector_field(s, c);
    let k2 = vector_field(&State(y + k1 * (h / 2.0)), c);
    let k3 = vector_field(&State(y + k2 * (h / 2.0)), c);
    let k4 = vector_field(&State(y + k3 * h), c);
    State(y + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0))
}

/// Orthogonal projection onto `{F1 = F2 = F3 = 0, Z1 + Z2 + Z3 = 1}`.
pub fn project_to_triangle(s: &State) -> Result<State> {
    newton_project(s, None, 1e-15, 5, triangle_system)
}

fn triangle_system(s: &State) -> (DVector<f64>, DMatrix<f64>) {
    let mut r = DVector::zeros(4);
    let mut jac = DMatrix::zeros(4, 6);
    for j in 0..3 {
        let (k, l) = crate::dynamics::cyclic(j);
        r[j] = s.x(k) + s.x(l) - s.z(j);
        jac[(j, k)] = 1.0;
        jac[(j, l)] = 1.0;
        jac[(j, 3 + j)] = -1.0;
    }
    r[3] = s.z(0) + s.z(1) + s.z(2) - 1.0;
    for j in 0..3 {
        jac[(3, 3 + j)] = 1.0;
    }
    (r, jac)
}

/// Integrate from `(eta0, start)` until convergence to `target`, escape,
/// blow-up or the horizon.
pub fn integrate_from(
    c: &CaseParams,
    eta0: f64,
    start: State,
    target: &State,
    settings: &FlowSettings,
    watches: &Watches<'_>,
) -> Result<Trajectory> {
    let h = settings.step;
    if !(h > 0.0) || settings.record_every == 0 {
        return Err(FlowError::Domain("step and record stride must be positive".into()));
    }
    let n_steps = ((settings.max_eta - eta0) / h).ceil().max(0.0) as usize;
    let tau = settings.boundary_tol;

    let mut s = start;
    let mut max_res = Residuals::at(&s, c);
    let mut samples = vec![Sample { eta: eta0, state: s }];
    let mut events = Vec::new();
    let mut classification = Classification::HorizonReached;

    let entry_margin = |st: &State| watches.entry.as_ref().map(|w| (w.margin)(st));
    let mut prev_entry = entry_margin(&s);
    let mut entered = prev_entry.is_some_and(|m| m >= -tau);
    if entered {
        let name = watches.entry.as_ref().map(|w| w.name.clone()).unwrap_or_default();
        events.push(Event { eta: eta0, kind: EventKind::Entered(name) });
    }
    let mut converged = s.distance(target) < settings.tol_converge;
    if converged {
        events.push(Event { eta: eta0, kind: EventKind::Converged });
    }

    for i in 1..=n_steps {
        if converged && (i - 1) % settings.record_every == 0 {
            classification = Classification::ConvergedToP1;
            break;
        }
        let eta = eta0 + i as f64 * h;
        s = rk4_step(&s, h, c);
        s = match settings.reprojection {
            Reprojection::Off => s,
            Reprojection::Constraint => project_to_constraint(&s, c, None)?,
            Reprojection::Triangle => project_to_triangle(&s)?,
        };

        if !s.is_finite() || s.norm() > BLOW_UP_NORM {
            events.push(Event { eta, kind: EventKind::BlowUp });
            samples.push(Sample { eta, state: s });
            classification = Classification::BlowUp;
            break;
        }

        let res = Residuals::at(&s, c);
        max_res = max_res.merge(&res);
        if res.max() > settings.tol_drift {
            return Err(FlowError::Drift {
                eta,
                conservation: res.conservation,
                trace: res.trace,
                limit: settings.tol_drift,
            });
        }

        if let (Some(w), Some(prev)) = (watches.entry.as_ref(), prev_entry) {
            let now = (w.margin)(&s);
            if !entered && now >= -tau {
                let frac = if now != prev { (-tau - prev) / (now - prev) } else { 1.0 };
                let at = eta - h + h * frac.clamp(0.0, 1.0);
                events.push(Event { eta: at, kind: EventKind::Entered(w.name.clone()) });
                entered = true;
            }
            prev_entry = Some(now);
        }

        if let Some(w) = watches.escape.as_ref() {
            if (w.margin)(&s) < -tau {
                events.push(Event { eta, kind: EventKind::Escaped(w.name.clone()) });
                samples.push(Sample { eta, state: s });
                classification = Classification::EscapedRegion(w.name.clone());
                break;
            }
        }

        if !converged && s.distance(target) < settings.tol_converge {
            converged = true;
            events.push(Event { eta, kind: EventKind::Converged });
        }

        if i % settings.record_every == 0 {
            samples.push(Sample { eta, state: s });
        }
        if i == n_steps && converged {
            classification = Classification::ConvergedToP1;
        }
    }

    Ok(Trajectory {
        step: h,
        record_every: settings.record_every,
        samples,
        events,
        classification,
        max_residuals: max_res,
    })
}

/// Displacement `p + scale * dir` as a state.
pub fn offset(p: &State, dir: &Vector6<f64>, scale: f64) -> State {
    p.translated(dir, scale)
}

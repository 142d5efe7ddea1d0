//! Per-case constants of the three Wallach spaces and the scalars derived
//! from them.
//!
//! | case | principal orbit                | d | n  | a   | b   |
//! |------|--------------------------------|---|----|-----|-----|
//! | I    | SU(3)/T^2                      | 2 | 6  | 3/2 | 1/4 |
//! | II   | Sp(3)/Sp(1)^3                  | 4 | 12 | 4   | 1/2 |
//! | III  | F4/Spin(8)                     | 8 | 24 | 9   | 1   |

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::FlowError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    I,
    II,
    III,
}

impl CaseId {
    pub const ALL: [CaseId; 3] = [CaseId::I, CaseId::II, CaseId::III];

    pub fn params(self) -> CaseParams {
        CaseParams::new(self)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            CaseId::I => "I",
            CaseId::II => "II",
            CaseId::III => "III",
        };
        f.write_str(tag)
    }
}

impl FromStr for CaseId {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "I" | "1" => Ok(CaseId::I),
            "II" | "2" => Ok(CaseId::II),
            "III" | "3" => Ok(CaseId::III),
            other => Err(FlowError::Parse(format!(
                "unknown case {other:?}; expected I, II or III"
            ))),
        }
    }
}

/// Immutable constants for one case.
///
/// `fiber_dim` is the dimension `d` of each isotropy summand (the sphere fiber
/// of the singular orbit), `orbit_dim = 3d` the principal-orbit dimension.
/// `a_exact`/`b_exact` are the Ricci coefficients in `R_j = a Z_k Z_l + b (Z_j^2 - Z_k^2 - Z_l^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaseParams {
    pub case: CaseId,
    pub fiber_dim: u32,
    pub orbit_dim: u32,
    pub a_exact: Rational64,
    pub b_exact: Rational64,
    a: f64,
    b: f64,
    /// `sqrt((a + 2b)/2)`, slope of the tilted faces of the case II/III trapping set.
    pub rho: f64,
    /// Common `Z` coordinate of the normal Einstein point `p1`.
    pub p1_z: f64,
    /// Equal `Z1 = Z2` coordinate of the alternative Einstein point `p2`.
    pub p2_z: f64,
}

impl CaseParams {
    pub fn new(case: CaseId) -> Self {
        let (d, a, b) = match case {
            CaseId::I => (2u32, Rational64::new(3, 2), Rational64::new(1, 4)),
            CaseId::II => (4, Rational64::new(4, 1), Rational64::new(1, 2)),
            CaseId::III => (8, Rational64::new(9, 1), Rational64::new(1, 1)),
        };
        let n = 3 * d;
        let af = a.to_f64().expect("finite rational");
        let bf = b.to_f64().expect("finite rational");
        let (df, nf) = (f64::from(d), f64::from(n));
        let rho = ((af + 2.0 * bf) / 2.0).sqrt();
        let p1_z = ((nf - 1.0) / (af - bf)).sqrt() / nf;
        let p2_z = 2.0 / nf * ((nf - 1.0) * bf / ((df - 1.0) * (af + 2.0 * bf))).sqrt();
        Self {
            case,
            fiber_dim: d,
            orbit_dim: n,
            a_exact: a,
            b_exact: b,
            a: af,
            b: bf,
            rho,
            p1_z,
            p2_z,
        }
    }

    #[inline]
    pub fn d(&self) -> f64 {
        f64::from(self.fiber_dim)
    }

    #[inline]
    pub fn n(&self) -> f64 {
        f64::from(self.orbit_dim)
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    /// `Z3` coordinate of `p2`, equal to `(d-1) Z*/(2b)`.
    pub fn p2_z3(&self) -> f64 {
        (self.d() - 1.0) * self.p2_z / (2.0 * self.b)
    }

    /// Limit slope `sqrt((a-b)/(n-1))` of every `f_j` along the cone over the
    /// normal Einstein metric.
    pub fn cone_slope(&self) -> f64 {
        ((self.a - self.b) / (self.n() - 1.0)).sqrt()
    }

    /// Upper end of the admissible interval for the entrance-zone parameter delta.
    pub fn delta_upper(&self) -> f64 {
        4.0 * self.b / (self.d() - 1.0)
    }

    /// Default delta: 70% of the admissible upper end (0.7 for case I).
    pub fn default_delta(&self) -> f64 {
        0.7 * self.delta_upper()
    }

    /// Whether the Type II sources exist (requires `a - 6b = 0`).
    pub fn has_type_ii(&self) -> bool {
        self.a_exact == Rational64::from_integer(6) * self.b_exact
    }
}

/// Parse a case tag and return its constants.
pub fn params_for(case: CaseId) -> CaseParams {
    CaseParams::new(case)
}

/// Upper bound `2 sqrt((n-1)/(n^2 (a-b)))` on `Z1 + Z2` inside the compact trapping set.
pub fn sharp_bound(case: CaseId) -> f64 {
    let c = CaseParams::new(case);
    2.0 * ((c.n() - 1.0) / (c.n() * c.n() * (c.a() - c.b()))).sqrt()
}

//! Exact-rational reference evaluation of the polynomial system, with an
//! exact Jacobian from forward-mode dual numbers.

#![allow(dead_code)]

use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use wallach_flow::CaseId;

pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

/// Exact value of an `f64`.
pub fn exact(v: f64) -> Q {
    Q::from_float(v).expect("finite")
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().expect("representable")
}

/// `(d, a, b)` per case, typed in independently of the library tables.
pub fn constants(case: CaseId) -> (Q, Q, Q) {
    match case {
        CaseId::I => (q(2, 1), q(3, 2), q(1, 4)),
        CaseId::II => (q(4, 1), q(4, 1), q(1, 2)),
        CaseId::III => (q(8, 1), q(9, 1), q(1, 1)),
    }
}

pub trait Ring: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn constant(v: &Q) -> Self;
}

impl Ring for Q {
    fn constant(v: &Q) -> Self {
        v.clone()
    }
}

/// Value plus exact partial derivatives in six variables.
#[derive(Clone, Debug)]
pub struct Dual {
    pub v: Q,
    pub t: [Q; 6],
}

impl Dual {
    pub fn variable(v: Q, i: usize) -> Self {
        let mut t: [Q; 6] = std::array::from_fn(|_| Q::zero());
        t[i] = Q::one();
        Dual { v, t }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, t: std::array::from_fn(|i| &self.t[i] + &o.t[i]) }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, t: std::array::from_fn(|i| &self.t[i] - &o.t[i]) }
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, o: Dual) -> Dual {
        Dual {
            t: std::array::from_fn(|i| &self.t[i] * &o.v + &self.v * &o.t[i]),
            v: self.v * o.v,
        }
    }
}

impl Ring for Dual {
    fn constant(v: &Q) -> Self {
        Dual { v: v.clone(), t: std::array::from_fn(|_| Q::zero()) }
    }
}

/// `(G, H, [R1, R2, R3])`.
pub fn scalars<T: Ring>(s: &[T; 6], case: CaseId) -> (T, T, [T; 3]) {
    let (d, a, b) = constants(case);
    let (d, a, b) = (T::constant(&d), T::constant(&a), T::constant(&b));
    let x = &s[..3];
    let z = &s[3..];
    let g = d.clone() * (x[0].clone() * x[0].clone() + x[1].clone() * x[1].clone() + x[2].clone() * x[2].clone());
    let h = d * (x[0].clone() + x[1].clone() + x[2].clone());
    let r = [(0, 1, 2), (1, 2, 0), (2, 0, 1)].map(|(j, k, l)| {
        a.clone() * z[k].clone() * z[l].clone()
            + b.clone()
                * (z[j].clone() * z[j].clone() - z[k].clone() * z[k].clone() - z[l].clone() * z[l].clone())
    });
    (g, h, r)
}

/// `X_j' = X_j (G - 1) + R_j`, `Z_j' = Z_j (G - H/d + 2 X_j)`.
pub fn field<T: Ring>(s: &[T; 6], case: CaseId) -> [T; 6] {
    let (d, _, _) = constants(case);
    let (g, h, r) = scalars(s, case);
    let one = T::constant(&Q::one());
    let two = T::constant(&q(2, 1));
    let inv_d = T::constant(&(Q::one() / d));
    let rate = g.clone() - h * inv_d;
    std::array::from_fn(|i| {
        if i < 3 {
            s[i].clone() * (g.clone() - one.clone()) + r[i].clone()
        } else {
            s[i].clone() * (rate.clone() + two.clone() * s[i - 3].clone())
        }
    })
}

pub fn conservation<T: Ring>(s: &[T; 6], case: CaseId) -> T {
    let (d, _, _) = constants(case);
    let (g, _, r) = scalars(s, case);
    let [r1, r2, r3] = r;
    g - T::constant(&Q::one()) + T::constant(&d) * (r1 + r2 + r3)
}

/// Exact Jacobian, row `i` = gradient of component `i`.
pub fn jacobian(s: &[Q; 6], case: CaseId) -> [[Q; 6]; 6] {
    let duals: [Dual; 6] = std::array::from_fn(|i| Dual::variable(s[i].clone(), i));
    field(&duals, case).map(|row| row.t)
}

/// Tolerance check `|approx - exact| <= tol * max(1, |exact|)`.
pub fn close(approx: f64, exact_value: &Q, tol: f64) -> bool {
    let e = to_f64(exact_value);
    (approx - e).abs() <= tol * e.abs().max(1.0)
}

mod common;

use common::{close, exact, jacobian, Q};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wallach_flow::dynamics::{conservation_residual, linearization, scalars, vector_field};
use wallach_flow::{CaseId, CaseParams, State};

/// States whose coordinates are `k / 512`, `|k| <= 512`: every product in the
/// system fits in a mantissa, so floating evaluation must be exact.
fn dyadic_states(rng: &mut ChaCha8Rng, count: usize) -> Vec<[f64; 6]> {
    (0..count)
        .map(|_| std::array::from_fn(|_| f64::from(rng.gen_range(-512i32..=512)) / 512.0))
        .collect()
}

/// Rounded `p / q` with `q` up to 1000.
fn rational_states(rng: &mut ChaCha8Rng, count: usize) -> Vec<[f64; 6]> {
    (0..count)
        .map(|_| {
            std::array::from_fn(|_| {
                let den = rng.gen_range(1i64..=1000);
                let num = rng.gen_range(-den..=den);
                num as f64 / den as f64
            })
        })
        .collect()
}

fn exact_state(s: &[f64; 6]) -> [Q; 6] {
    s.map(exact)
}

fn state(s: &[f64; 6]) -> State {
    State::new([s[0], s[1], s[2]], [s[3], s[4], s[5]])
}

/// Returns the first mismatch, if any.
fn compare(s: &[f64; 6], case: CaseId, tol: Option<f64>) -> Option<String> {
    let c = CaseParams::new(case);
    let st = state(s);
    let xs = exact_state(s);
    let agree = |approx: f64, reference: &Q| match tol {
        None => exact(approx) == *reference,
        Some(t) => close(approx, reference, t),
    };

    let v = vector_field(&st, &c);
    let v_ref = common::field(&xs, case);
    for i in 0..6 {
        if !agree(v[i], &v_ref[i]) {
            return Some(format!("V[{i}] at {s:?}: {} vs {}", v[i], common::to_f64(&v_ref[i])));
        }
    }

    let sc = scalars(&st, &c);
    let (g, h, r) = common::scalars(&xs, case);
    let pairs = [(sc.shape_sq, g), (sc.shape_trace, h)];
    for (approx, reference) in pairs.iter().chain(sc.ricci.iter().copied().zip(r).collect::<Vec<_>>().iter()) {
        if !agree(*approx, reference) {
            return Some(format!("scalar at {s:?}: {approx} vs {}", common::to_f64(reference)));
        }
    }

    let cons = conservation_residual(&st, &c);
    if !agree(cons, &common::conservation(&xs, case)) {
        return Some(format!("C at {s:?}"));
    }

    let l = linearization(&st, &c);
    let j_ref = jacobian(&xs, case);
    for i in 0..6 {
        for k in 0..6 {
            if !agree(l[(i, k)], &j_ref[i][k]) {
                return Some(format!("L[{i},{k}] at {s:?}: {} vs {}", l[(i, k)], common::to_f64(&j_ref[i][k])));
            }
        }
    }
    None
}

#[test]
fn exact_on_dyadic_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in CaseId::ALL {
        for s in dyadic_states(&mut rng, 100) {
            if let Some(msg) = compare(&s, case, None) {
                panic!("case {case:?}: {msg}");
            }
        }
    }
}

#[test]
fn rounded_rational_states_within_1e12() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in CaseId::ALL {
        for s in rational_states(&mut rng, 100) {
            if let Some(msg) = compare(&s, case, Some(1e-12)) {
                panic!("case {case:?}: {msg}");
            }
        }
    }
}

#[test]
fn dual_jacobian_matches_hand_derivative_of_conservation() {
    // N_C = (2 d X_j, d (a (Z_k + Z_l) - 2 b Z_j)) written out by hand.
    let case = CaseId::II;
    let (d, a, b) = common::constants(case);
    let s = [common::q(1, 3), common::q(-2, 7), common::q(5, 11), common::q(1, 2), common::q(3, 5), common::q(2, 9)];
    let duals: [common::Dual; 6] = std::array::from_fn(|i| common::Dual::variable(s[i].clone(), i));
    let grad = common::conservation(&duals, case).t;
    for j in 0..3 {
        let (k, l) = ((j + 1) % 3, (j + 2) % 3);
        let two = common::q(2, 1);
        assert_eq!(grad[j], &two * &d * &s[j]);
        assert_eq!(grad[3 + j], &d * (&a * (&s[3 + k] + &s[3 + l]) - &two * &b * &s[3 + j]));
    }
}

use wallach_flow::flow::Classification;
use wallach_flow::recovery::{extrapolate_limits, recover, Gauge};
use wallach_flow::special::{integrate_gamma, CurveConfig, GAMMA_SLACK};
use wallach_flow::spectra::p2;
use wallach_flow::{CaseId, CaseParams};

/// At `p2`, `X_j = 1/n`, so `lim f'_j = (1/n) / sqrt(Z_k Z_l)` along `Gamma`.
#[test]
fn initial_slopes_are_the_cone_over_p2() {
    for case in CaseId::ALL {
        let c = CaseParams::new(case);
        let g = integrate_gamma(&CurveConfig::gamma_default(case), &c).unwrap();
        assert_eq!(g.trajectory.classification, Classification::ConvergedToP1);
        assert!(g.min_margin >= -GAMMA_SLACK);
        assert!(g.symmetry_defect <= 1e-12);

        let mp = recover(&g.trajectory, Gauge::Reference { eta_ref: 0.0, trl_ref: 1.0 }, &c).unwrap();
        let slopes = &extrapolate_limits(&mp).unwrap().values[3..];
        let z = p2(&c).zs();
        let inv_n = 1.0 / c.n();
        let expected = [inv_n / (z[1] * z[2]).sqrt(), inv_n / (z[0] * z[2]).sqrt(), inv_n / (z[0] * z[1]).sqrt()];
        for j in 0..3 {
            assert!((slopes[j] - expected[j]).abs() < 1e-3, "{case:?} f'{}: {} vs {}", j + 1, slopes[j], expected[j]);
        }
        let ratio = slopes[2] / slopes[0];
        let closed = ((c.d() - 1.0) / (2.0 * c.b())).sqrt();
        assert!((ratio - closed).abs() < 1e-3, "{case:?}: {ratio} vs {closed}");
    }
}

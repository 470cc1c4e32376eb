use flea_lab::potential::{FleaSpec, PotentialSpec};
use flea_lab::special::{ln_gamma, phi_tilde};
use flea_lab::spectral::{self, Grid, DEFAULT_POINTS};
use flea_lab::wkb::*;
use flea_lab::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_4, PI};

fn standard() -> PotentialSpec {
    PotentialSpec::standard()
}

#[test]
fn turning_points_of_the_quartic() {
    // (x^2 - 1)^2 / 4 = E gives x^2 = 1 -+ 2 sqrt(E).
    for e in [1e-4, 0.05, 0.1, 0.2] {
        let tp = turning_points(&standard(), None, e).unwrap();
        let inner = (1.0 - 2.0 * e.sqrt()).sqrt();
        let outer = (1.0 + 2.0 * e.sqrt()).sqrt();
        let expect = [-outer, -inner, inner, outer];
        for (x, y) in tp.x.iter().zip(expect) {
            assert!((x - y).abs() < 1e-11, "E={e}: {x} vs {y}");
        }
    }
    for e in [0.25, 0.3, 2.0] {
        assert!(matches!(turning_points(&standard(), None, e), Err(Error::WrongTopology { .. })));
    }
}

#[test]
fn wells_pinch_off_at_the_bottom() {
    let tp = turning_points(&standard(), None, 1e-10).unwrap();
    assert!((tp.x[0] + 1.0).abs() < 1e-4 && (tp.x[1] + 1.0).abs() < 1e-4);
    assert!((tp.x[2] - 1.0).abs() < 1e-4 && (tp.x[3] - 1.0).abs() < 1e-4);
}

#[test]
fn actions_of_the_symmetric_well() {
    let hbar = 0.1;
    for e in [0.01, 0.1, 0.2] {
        let a = actions(&standard(), None, e, hbar).unwrap();
        assert!((a.theta1 - a.theta2).abs() < 1e-9 * a.theta1);
        assert!(a.theta1 > 0.0 && a.k > 0.0);
    }
    // Near the bottom the well is harmonic, V ~ (x - 1)^2, so the half action is pi E / 2.
    let e = 1e-4;
    let a = actions(&standard(), None, e, hbar).unwrap();
    assert!((a.theta1 * hbar / (PI * e / 2.0) - 1.0).abs() < 1e-2);
    // The barrier action tends to the Agmon distance 2/3.
    assert!((a.k * hbar / (2.0 / 3.0) - 1.0).abs() < 0.02, "{}", a.k * hbar);
}

#[test]
fn barrier_phase_decays() {
    // Zero at K = 0, a single hump near K = 1/2, then monotone decay.
    assert_eq!(phi_tilde(0.0), 0.0);
    assert!(phi_tilde(0.1) > 0.0 && phi_tilde(0.1) < phi_tilde(0.5));
    let tail: Vec<f64> = [0.7, 1.0, 1.5, 2.0, 5.0, 20.0, 60.0].into_iter().map(phi_tilde).collect();
    assert!(tail.windows(2).all(|w| w[1] < w[0]), "{tail:?}");
    assert!(phi_tilde(0.5) > tail[0]);
    // Stirling: phi ~ pi / (24 K).
    let k = 60.0;
    assert!((phi_tilde(k) * 24.0 * k / PI - 1.0).abs() < 1e-3);
    // |Gamma(1/2 + iy)|^2 = pi / cosh(pi y).
    for y in [0.0, 0.3, 1.0, 4.0] {
        let g = ln_gamma(Complex64::new(0.5, y));
        assert!((g.re - 0.5 * (PI / (PI * y).cosh()).ln()).abs() < 1e-12);
    }
    // Gamma(1/2) = sqrt(pi), Gamma(5) = 24.
    assert!((ln_gamma(Complex64::new(0.5, 0.0)).re - 0.5 * PI.ln()).abs() < 1e-13);
    assert!((ln_gamma(Complex64::new(5.0, 0.0)).re - 24f64.ln()).abs() < 1e-13);
}

#[test]
fn residual_cases() {
    let k = 10.0f64;
    let theta = 0.5 * PI + 0.5 * (-k).exp();
    let a = WkbActions::from_phases(theta, theta, k);
    // Vanishes up to the barrier phase, which is O(1/K).
    assert!(quantization_residual(&a).unwrap().abs() < 1e-3);
    let far = WkbActions::from_phases(1.0, 2.5, 3.0);
    assert!(quantization_residual(&far).unwrap().abs() > 0.1);
    let mut pole = WkbActions::from_phases(1.0, 1.0, 3.0);
    pole.phi_tilde = PI + 0.5 * PI - 2.0;
    assert!(matches!(quantization_residual(&pole), Err(Error::PoleProximity { .. })));
}

#[test]
fn solved_levels_satisfy_the_condition() {
    let flea = FleaSpec::new(1.25, 0.2, 0.02).unwrap();
    let lv = solve_levels(&standard(), Some(&flea), 0.1, 0).unwrap();
    for a in [lv.actions_minus.unwrap(), lv.actions_plus.unwrap()] {
        if let Ok(r) = quantization_residual(&a) {
            assert!(r.abs() < 1e-8, "{r}");
        }
    }
    assert!(lv.e_minus < lv.e_plus);
}

#[test]
fn splitting_matches_the_spectrum() {
    let hbar = 0.2;
    let lv = solve_levels(&standard(), None, hbar, 0).unwrap();
    let g = Grid::for_potential(&standard(), None, DEFAULT_POINTS).unwrap();
    let s = spectral::solve(&standard(), None, hbar, &g, 2).unwrap();
    let (w, d) = (lv.e_plus - lv.e_minus, s.splitting().unwrap());
    assert!((w / d - 1.0).abs() < 0.15, "{w} vs {d}");
}

#[test]
fn levels_sharpen_as_hbar_shrinks() {
    let g = Grid::for_potential(&standard(), None, DEFAULT_POINTS).unwrap();
    let mut last = f64::INFINITY;
    for hbar in [0.2, 0.15, 0.1] {
        let lv = solve_levels(&standard(), None, hbar, 0).unwrap();
        let s = spectral::solve(&standard(), None, hbar, &g, 2).unwrap();
        let rel = ((lv.e_minus - s.eigenvalues[0]) / s.eigenvalues[0]).abs().max(((lv.e_plus - s.eigenvalues[1]) / s.eigenvalues[1]).abs());
        assert!(rel < last, "hbar={hbar}: {rel}");
        last = rel;
    }
    assert!(matches!(solve_levels(&standard(), None, 0.3, 0), Err(Error::LevelAboveBarrier { .. })));
}

#[test]
fn right_flea_raises_the_right_level() {
    let hbar = 0.1;
    let mut last = f64::NEG_INFINITY;
    let mut last_theta2 = f64::INFINITY;
    for d in [0.005, 0.01, 0.02, 0.04] {
        let flea = FleaSpec::new(1.25, 0.2, d).unwrap();
        let lv = solve_levels(&standard(), Some(&flea), hbar, 0).unwrap();
        assert!(lv.e_plus > last);
        last = lv.e_plus;
        let a = actions(&standard(), Some(&flea), 0.05, hbar).unwrap();
        assert!(a.theta2 < last_theta2 && a.theta1 > a.theta2);
        last_theta2 = a.theta2;
    }
    // The lower level sits on the left, the upper one on the right.
    let flea = FleaSpec::new(1.25, 0.2, 0.04).unwrap();
    let lv = solve_levels(&standard(), Some(&flea), 0.05, 0).unwrap();
    assert!(lv.delta > 0.0 && lv.delta < PI);
    assert!(lv.d1_over_c4_minus.abs() > 1e2 && lv.d1_over_c4_plus.abs() < 1e-2, "{lv:?}");
}

#[test]
fn branch_gap_tends_to_delta() {
    let delta = 0.7;
    let mut last = f64::INFINITY;
    for k in [1.0, 3.0, 10.0, 30.0] {
        let (lo, hi) = solution_theta(0, k, delta);
        let err = (hi - lo - delta).abs();
        assert!(err < last);
        last = err;
    }
    assert!(last < 1e-12);
    let (lo, _) = solution_theta(2, 40.0, delta);
    // theta_- sits at (n + 1/2) pi, shifted by half the small barrier phase.
    assert!((lo - (2.5 * PI - 0.5 * phi_tilde(40.0))).abs() < 1e-12);
}

#[test]
fn ratio_values_at_reference_phases() {
    for k in [0.5, 3.0, 12.0] {
        let even = WkbActions::from_phases(1.0, 1.0, k);
        assert!((localization_ratio_wkb(&even, Branch::Minus) - 1.0).abs() < 1e-15);
        assert!((localization_ratio_wkb(&even, Branch::Plus) + 1.0).abs() < 1e-15);
        let odd = WkbActions::from_phases(1.0 + PI, 1.0, k);
        assert!((localization_ratio_wkb(&odd, Branch::Minus) + 1.0).abs() < 1e-9);
        assert!((localization_ratio_wkb(&odd, Branch::Plus) - 1.0).abs() < 1e-9);
    }
    let big = WkbActions::from_phases(1.5, 1.0, 20.0);
    assert!(localization_ratio_wkb(&big, Branch::Minus) > 1e8);
}

#[test]
fn connection_entries() {
    let m = connection_matrices();
    let p = Complex64::from_polar(1.0, FRAC_PI_4);
    let i = Complex64::new(0.0, 1.0);
    let close = |a: Complex64, b: Complex64| (a - b).norm() < 1e-15;
    assert!(close(m.left_cd_to_ab[0][0], 0.5 * p) && close(m.left_cd_to_ab[0][1], -i * p));
    assert!(close(m.left_cd_to_ab[1][0], -0.5 * i * p) && close(m.left_cd_to_ab[1][1], p));
    assert!(close(m.right_ab_to_cd[0][0], 0.5 * p.conj()) && close(m.right_ab_to_cd[1][0], i * p.conj()));
    for prod in [mat_mul(&m.right_ab_to_cd, &m.right_cd_to_ab), mat_mul(&m.left_ab_to_cd, &m.left_cd_to_ab)] {
        assert!(close(prod[0][0], 1.0.into()) && close(prod[1][1], 1.0.into()));
        assert!(close(prod[0][1], 0.0.into()) && close(prod[1][0], 0.0.into()));
    }
}

#[test]
fn chain_reproduces_the_closed_form() {
    let k = 3.0;
    for (n, delta) in [(0, 0.0), (1, 0.0), (0, 0.4)] {
        let (lo, hi) = solution_theta(n, k, delta);
        for (theta, branch) in [(lo, Branch::Minus), (hi, Branch::Plus)] {
            let a = WkbActions::from_phases(theta, theta - delta, k);
            let (r1, r2) = chain_ratio(&a);
            let closed = localization_ratio_wkb(&a, branch);
            let scale = closed.abs().max(1.0);
            assert!((r1 - closed).norm() < 1e-10 * scale && (r2 - closed).norm() < 1e-10 * scale, "{r1} {r2} {closed}");
        }
    }
}

proptest! {
    #[test]
    fn barrier_determinant_is_one(k in 0.0f64..12.0, phi in -3.2f64..3.2) {
        let d = determinant(&barrier_matrix(k, phi));
        prop_assert!((d - 1.0).norm() < 1e-14 * (2.0 * k).exp().max(1.0));
    }

    #[test]
    fn branch_values_multiply_to_minus_one(t1 in -10.0f64..10.0, t2 in -10.0f64..10.0, k in 0.0f64..15.0) {
        let a = WkbActions::from_phases(t1, t2, k);
        let p = localization_ratio_wkb(&a, Branch::Minus) * localization_ratio_wkb(&a, Branch::Plus);
        prop_assert!((p + 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_turning_points(e in 1e-6f64..0.249) {
        let tp = turning_points(&standard(), None, e).unwrap();
        prop_assert!((tp.x[0] + tp.x[3]).abs() < 1e-11 && (tp.x[1] + tp.x[2]).abs() < 1e-11);
        prop_assert!(tp.x.windows(2).all(|w| w[0] < w[1]));
    }
}

use flea_lab::potential::*;
use flea_lab::Error;
use proptest::prelude::*;

fn standard() -> PotentialSpec {
    PotentialSpec::standard()
}

#[test]
fn quartic_reference_values() {
    let s = standard();
    assert_eq!(s.value(1.0), 0.0);
    assert_eq!(s.value(0.0), 0.25);
    assert_eq!(s.barrier_height(), 0.25);
}

#[test]
fn flea_peak_after_ramp() {
    let s = PotentialSpec::double_well(1.0, 1.0).unwrap();
    let f = FleaSpec::new(7.5, 0.5, 0.3).unwrap();
    let r = RampSpec::new(800.0).unwrap();
    for t in [800.0, 1000.0] {
        let v = eval_potential(&s, Some(&f), Some(&r), 7.5, t);
        assert!((v - (s.value(7.5) + 0.3)).abs() < 1e-12);
    }
    assert_eq!(eval_potential(&s, Some(&f), Some(&r), 7.5, 0.0), s.value(7.5));
}

#[test]
fn agmon_closed_form() {
    let s = standard();
    assert_eq!(agmon_distance(&s, 0.0, 0.0).unwrap(), 0.0);
    // On [-1, 1] the integrand is (1 - x^2)/2, whose antiderivative gives 2/3.
    let d = agmon_distance(&s, -1.0, 1.0).unwrap();
    assert!((d - 2.0 / 3.0).abs() < 1e-10);
    assert_eq!(d, agmon_distance(&s, 1.0, -1.0).unwrap());
    // Partial interval: (z - z^3/3)/2 - (y - y^3/3)/2.
    let anti = |x: f64| 0.5 * (x - x * x * x / 3.0);
    let d = agmon_distance(&s, -0.3, 0.8).unwrap();
    assert!((d - (anti(0.8) - anti(-0.3))).abs() < 1e-10);
}

#[test]
fn agmon_scaled_well() {
    // With x = a u the integral is 2 sqrt(lambda) a^3 / 3 = 2 omega^3 / (3 lambda).
    let s = PotentialSpec::double_well(0.06, 1.0 / 8100.0).unwrap();
    let a = s.minimum();
    let d = agmon_distance(&s, -a, a).unwrap();
    let expect = 2.0 * s.omega.powi(3) / (3.0 * s.lambda);
    assert!((d / expect - 1.0).abs() < 1e-9, "{d} vs {expect}");
}

#[test]
fn negative_harmonic_region_is_impossible() {
    let s = PotentialSpec::new(PotentialKind::Harmonic, 1.0, 0.0).unwrap();
    assert!(agmon_distance(&s, -2.0, 3.0).unwrap() > 0.0);
    assert!(PotentialSpec::new(PotentialKind::DoubleWell, 1.0, 0.0).is_err());
    assert!(PotentialSpec::new(PotentialKind::Harmonic, -1.0, 0.0).is_err());
}

#[test]
fn classification_cases() {
    let s = standard();
    let mid = classify_flea(&s, &FleaSpec::new(0.0, 0.2, 0.1).unwrap()).unwrap();
    // A centered flea is equidistant from both minima, so the case cannot be a strict bump.
    assert!((mid.d_v_prime - mid.d_v_doubleprime).abs() < 1e-12);
    assert_eq!(mid.case, FleaCase::Invalid);

    let off = classify_flea(&s, &FleaSpec::new(0.05, 0.2, 0.1).unwrap()).unwrap();
    assert_eq!(off.case, FleaCase::Bump);
    assert!(off.d_v_prime < off.d_v_doubleprime && off.d_v_doubleprime < off.d_v);

    let far = classify_flea(&s, &FleaSpec::new(1.6, 0.3, 0.1).unwrap()).unwrap();
    // Independent evaluation of the three distances.
    let dp = 2.0 * agmon_distance(&s, 1.0, 1.3).unwrap();
    let dpp = 2.0 * agmon_distance(&s, -1.0, 1.3).unwrap();
    assert!((far.d_v_prime - dp).abs() < 1e-12 && (far.d_v_doubleprime - dpp).abs() < 1e-12);
    let expect = if dp < 2.0 / 3.0 && 2.0 / 3.0 < dpp { FleaCase::Edge } else { FleaCase::Bump };
    assert_eq!(far.case, expect);
}

#[test]
fn flea_covering_minimum_is_rejected() {
    let s = standard();
    let e = classify_flea(&s, &FleaSpec::new(1.1, 0.2, 0.1).unwrap()).unwrap_err();
    assert!(matches!(e, Error::FleaCoversMinimum { minimum, .. } if minimum == 1.0));
}

#[test]
fn size_condition() {
    let s = standard();
    let r = flea_size_check(&s, &FleaSpec::new(0.4, 0.45, 0.3).unwrap(), 0.01, DEFAULT_RATIO_THRESHOLD).unwrap();
    assert!(r.satisfied);
    assert!((r.log_ratio - (0.3f64.ln() + 200.0 / 3.0)).abs() < 1e-8);

    let r = flea_size_check(&s, &FleaSpec::new(0.4, 0.45, 0.0).unwrap(), 0.5, DEFAULT_RATIO_THRESHOLD).unwrap();
    assert!(!r.satisfied);

    let h: f64 = 0.25;
    let tiny = (-(2.0 / 3.0) / h).exp();
    let r = flea_size_check(&s, &FleaSpec::new(0.4, 0.45, tiny).unwrap(), h, DEFAULT_RATIO_THRESHOLD).unwrap();
    assert!(!r.satisfied && (r.ratio - 1.0).abs() < 1e-6);
}

#[test]
fn ramp_shape() {
    let r = RampSpec::new(10.0).unwrap();
    assert_eq!(r.weight(-1.0), 0.0);
    assert_eq!(r.weight(10.0), 1.0);
    assert!((r.weight(5.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    assert!(RampSpec::new(0.0).is_err());
}

#[test]
fn bump_edges_are_flat() {
    let f = FleaSpec::new(0.0, 1.0, 1.0).unwrap();
    // Every derivative vanishes at the edge; the bump is below 1e-40 within 0.01 of it.
    assert!(f.value(0.99) < 1e-20);
    assert_eq!(f.value(1.0), 0.0);
    assert_eq!(f.derivative(1.0), 0.0);
}

#[test]
fn bump_derivatives_match_finite_differences() {
    let f = FleaSpec::new(0.2, 0.5, -0.7).unwrap();
    let h = 1e-5;
    for x in [-0.1, 0.05, 0.2, 0.4, 0.6] {
        let d1 = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
        let d2 = (f.value(x + h) - 2.0 * f.value(x) + f.value(x - h)) / (h * h);
        assert!((d1 - f.derivative(x)).abs() < 1e-6 * (1.0 + d1.abs()));
        assert!((d2 - f.second_derivative(x)).abs() < 1e-3 * (1.0 + d2.abs()));
    }
}

/// Fourth-order central difference of the bump.
fn fourth_difference(f: &FleaSpec, x: f64, h: f64) -> f64 {
    (f.value(x - 2.0 * h) - 4.0 * f.value(x - h) + 6.0 * f.value(x) - 4.0 * f.value(x + h) + f.value(x + 2.0 * h))
        / h.powi(4)
}

#[test]
fn bump_is_smooth_across_the_edge() {
    let f = FleaSpec::new(0.0, 0.5, 1.0).unwrap();
    let max_over = |h: f64| (0..=200).map(|i| fourth_difference(&f, 0.4 + 0.2 * i as f64 / 200.0, h).abs()).fold(0.0, f64::max);
    let coarse = max_over(4e-3);
    let fine = max_over(2e-3);
    assert!(coarse.is_finite() && fine.is_finite());
    // Near the edge the fourth derivative is bounded, so refining must not blow it up.
    assert!(fine < 1.5 * coarse + 1e-6, "{fine} vs {coarse}");
}

proptest! {
    #[test]
    fn reflection_symmetry(x in -20.0f64..20.0, omega in 0.05f64..3.0, lambda in 0.01f64..3.0) {
        let s = PotentialSpec::double_well(omega, lambda).unwrap();
        prop_assert_eq!(s.value(x), s.value(-x));
    }

    #[test]
    fn agmon_is_additive(a in -1.5f64..1.5, b in -1.5f64..1.5, c in -1.5f64..1.5) {
        let s = standard();
        let mut p = [a, b, c];
        p.sort_by(f64::total_cmp);
        let (y, z, w) = (p[0], p[1], p[2]);
        let lhs = agmon_distance(&s, y, z).unwrap() + agmon_distance(&s, z, w).unwrap();
        let rhs = agmon_distance(&s, y, w).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
        // Out of order the triangle inequality is strict or an equality.
        prop_assert!(agmon_distance(&s, y, w).unwrap() + agmon_distance(&s, w, z).unwrap() >= agmon_distance(&s, y, z).unwrap() - 1e-9);
    }

    #[test]
    fn ramp_is_continuous_at_the_end(t_end in 1.0f64..1000.0, x in -3.0f64..3.0) {
        let s = standard();
        let f = FleaSpec::new(0.5, 0.4, 0.2).unwrap();
        let r = RampSpec::new(t_end).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let e = t_end * 10f64.powi(-k);
            let jump = (eval_potential(&s, Some(&f), Some(&r), x, t_end - e) - eval_potential(&s, Some(&f), Some(&r), x, t_end + e)).abs();
            prop_assert!(jump <= prev + 1e-18);
            prev = jump;
        }
        prop_assert!(prev < 1e-10);
    }

    #[test]
    fn flea_sign_and_support(b in -5.0f64..5.0, c in 0.01f64..2.0, d in -1.0f64..1.0, x in -8.0f64..8.0) {
        let f = FleaSpec::new(b, c, d).unwrap();
        let v = f.value(x);
        if (x - b).abs() >= c {
            prop_assert_eq!(v, 0.0);
        } else {
            prop_assert!(v * d >= 0.0 && v.abs() <= d.abs());
        }
        prop_assert_eq!(f.mirrored().value(-x), v);
        prop_assert_eq!(f.negated().value(x), -v);
    }
}

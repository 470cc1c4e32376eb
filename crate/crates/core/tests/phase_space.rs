use flea_lab::phase_space::*;
use flea_lab::potential::{FleaSpec, PotentialSpec};
use flea_lab::spectral::{self, localized_combinations, Grid, WaveFunction};
use flea_lab::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn box_grid() -> Grid {
    Grid::new(-4.0, 4.0, 1600).unwrap()
}

fn standard_state(hbar: f64, flea: Option<&FleaSpec>, k: usize) -> spectral::Spectrum {
    let spec = PotentialSpec::standard();
    let g = Grid::for_potential(&spec, flea, 2000).unwrap();
    spectral::solve(&spec, flea, hbar, &g, k).unwrap()
}

#[test]
fn coherent_state_moments() {
    let g = box_grid();
    for (p, q) in [(0.0, 0.0), (0.5, -1.0), (-1.2, 1.7)] {
        let c = coherent_state(0.05, p, q, &g).unwrap();
        assert!((c.norm_sq() - 1.0).abs() < 1e-12);
        let h = g.spacing();
        let mean_x: f64 = (0..g.n).map(|i| g.point(i) * c.amplitudes[i].norm_sqr()).sum::<f64>() * h;
        assert!((mean_x - q).abs() < 1e-8);
    }
    let c = coherent_state(0.05, 0.0, 0.0, &g).unwrap();
    assert!(c.amplitudes.iter().all(|z| z.im == 0.0 && z.re > 0.0));
    assert!(coherent_state(0.05, 0.0, 9.0, &g).is_err());
}

#[test]
fn self_overlap_peaks_at_the_center() {
    let g = box_grid();
    let c = coherent_state(0.1, 0.6, -0.8, &g).unwrap();
    let ph = PhaseGrid::new(-2.0, 2.0, 81, -3.0, 3.0, 121).unwrap();
    let f = husimi(&c, &ph).unwrap();
    let (k, &m) = f.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert!((ph.p(k / ph.n_q) - 0.6).abs() < 1e-9 && (ph.q(k % ph.n_q) + 0.8).abs() < 1e-9);
    assert!((m - 1.0).abs() < 1e-8);
}

#[test]
fn windowed_path_matches_direct_quadrature() {
    let s = standard_state(0.2, Some(&FleaSpec::new(0.4, 0.45, 0.1).unwrap()), 2);
    let psi = &s.eigenfunctions[1];
    let ph = PhaseGrid::new(-1.5, 1.5, 31, -2.5, 2.5, 41).unwrap();
    let fast = husimi(psi, &ph).unwrap();
    let slow = husimi_direct(psi, &ph).unwrap();
    let worst = fast.values.iter().zip(&slow.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn ground_state_lobes() {
    let a = 1.0;
    let r = default_radius(a);
    let mut last_remainder = f64::INFINITY;
    for hbar in [0.2, 0.05, 0.01] {
        let s = standard_state(hbar, None, 1);
        let f = husimi(s.ground(), &PhaseGrid::new(-2.0, 2.0, 201, -2.0, 2.0, 201).unwrap()).unwrap();
        let m = classical_limit_summary(&f, a, r).unwrap();
        assert!((m.plus - m.minus).abs() < 1e-9);
        assert!(m.remainder < last_remainder);
        last_remainder = m.remainder;
        if hbar == 0.01 {
            assert!((m.plus - 0.5).abs() < 1e-3 && m.remainder < 2e-3, "{m:?}");
        }
    }
}

#[test]
fn broad_lobes_at_half() {
    let s = standard_state(0.5, None, 1);
    let ph = PhaseGrid::default_for(1.0);
    let f = husimi(s.ground(), &ph).unwrap();
    // Reflection symmetric in q and in p.
    for i in 0..ph.n_p {
        for j in 0..ph.n_q {
            let mirror = f.at(ph.n_p - 1 - i, ph.n_q - 1 - j);
            assert!((f.at(i, j) - mirror).abs() < 1e-10);
        }
    }
    // The state leaks past the default window at this hbar; a wider one recovers the mass
    // up to the box-normalized coherent states near the walls.
    let wide = PhaseGrid::new(-3.0, 3.0, 241, -2.5, 2.5, 241).unwrap();
    let m = husimi(s.ground(), &wide).unwrap().total_mass();
    assert!(f.total_mass() < m && (m - 1.0).abs() < 2e-3, "{m}");
}

#[test]
fn berezin_witnesses() {
    let ph = PhaseGrid::new(-2.0, 2.0, 201, -3.0, 3.0, 241).unwrap();
    let sign = |_: f64, q: f64| if q == 0.0 { 0.0 } else { q.signum() };
    let s = standard_state(0.1, None, 1);
    assert!((berezin_expectation(s.ground(), &ph, |_, _| 1.0).unwrap() - 1.0).abs() < 1e-6);
    assert!(berezin_expectation(s.ground(), &ph, sign).unwrap().abs() < 1e-12);

    let flea = FleaSpec::new(0.4, 0.45, 0.3).unwrap();
    let s = standard_state(0.01, Some(&flea), 1);
    let v = berezin_expectation(s.ground(), &ph, sign).unwrap();
    assert!((v + 1.0).abs() < 1e-3, "{v}");
}

#[test]
fn localized_state_limits() {
    let s = standard_state(0.01, None, 2);
    let (plus, _) = localized_combinations(&s).unwrap();
    let f = husimi(&plus, &PhaseGrid::default_for(1.0)).unwrap();
    let m = classical_limit_summary(&f, 1.0, 0.5).unwrap();
    assert!(m.plus > 0.997 && m.minus < 1e-6, "{m:?}");

    let g = Grid::new(-5.0, 5.0, 2000).unwrap();
    let far = coherent_state(0.05, 0.0, 3.0, &g).unwrap();
    let ph = PhaseGrid::new(-2.0, 2.0, 101, -4.0, 4.0, 201).unwrap();
    let m = classical_limit_summary(&husimi(&far, &ph).unwrap(), 1.0, 0.5).unwrap();
    assert!(m.plus < 1e-10 && m.minus < 1e-10);

    assert!(matches!(classical_limit_summary(&husimi(&far, &ph).unwrap(), 1.0, 1.2), Err(Error::OverlappingDisks { .. })));
}

#[test]
fn mass_grows_with_the_window() {
    let s = standard_state(0.1, None, 1);
    let mut last = 0.0;
    for w in [0.5f64, 1.0, 1.5, 2.0, 3.0] {
        // Nested node sets: the spacing is held fixed at 0.025 in both directions.
        let n = (2.0 * w / 0.025).round() as usize + 1;
        let ph = PhaseGrid::new(-w, w, n, -w, w, n).unwrap();
        let m = husimi(s.ground(), &ph).unwrap().total_mass();
        assert!(m >= last && m <= 1.0 + 1e-6, "{m} after {last}");
        last = m;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn husimi_is_nonnegative(re in proptest::collection::vec(-1.0f64..1.0, 12), im in proptest::collection::vec(-1.0f64..1.0, 12)) {
        // Walls far from every phase node, so no coherent state is clipped by the box.
        let g = Grid::new(-5.0, 5.0, 1000).unwrap();
        // A random smooth state: sum of coherent states with random weights.
        let mut amps = vec![Complex64::new(0.0, 0.0); g.n];
        for k in 0..12 {
            let c = coherent_state(0.1, re[k], 2.0 * im[k], &g).unwrap();
            let w = Complex64::new(re[k], im[k]);
            amps.iter_mut().zip(&c.amplitudes).for_each(|(a, b)| *a += w * b);
        }
        prop_assume!(amps.iter().any(|z| z.norm() > 1e-6));
        let psi = WaveFunction::new(g, 0.1, amps).unwrap();
        let f = husimi(&psi, &PhaseGrid::new(-2.0, 2.0, 41, -3.0, 3.0, 41).unwrap()).unwrap();
        prop_assert!(f.min_value() >= 0.0);
        prop_assert!(f.total_mass() <= 1.0 + 1e-6);
    }

    #[test]
    fn global_phase_is_invisible(theta in -3.2f64..3.2) {
        let s = standard_state(0.2, Some(&FleaSpec::new(0.4, 0.45, 0.1).unwrap()), 2);
        let psi = &s.eigenfunctions[1];
        let rot = WaveFunction::new(psi.grid, psi.hbar, psi.amplitudes.iter().map(|a| a * Complex64::from_polar(1.0, theta)).collect()).unwrap();
        let ph = PhaseGrid::new(-1.0, 1.0, 21, -2.0, 2.0, 21).unwrap();
        let a = husimi(psi, &ph).unwrap();
        let b = husimi(&rot, &ph).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_husimi_is_translated(p0 in -0.8f64..0.8, q0 in -1.0f64..1.0) {
        let g = Grid::new(-5.0, 5.0, 2000).unwrap();
        let hbar = 0.1;
        let origin = husimi(&coherent_state(hbar, 0.0, 0.0, &g).unwrap(), &PhaseGrid::new(-1.0, 1.0, 11, -1.0, 1.0, 11).unwrap()).unwrap();
        let shifted_grid = PhaseGrid::new(p0 - 1.0, p0 + 1.0, 11, q0 - 1.0, q0 + 1.0, 11).unwrap();
        let moved = husimi(&coherent_state(hbar, p0, q0, &g).unwrap(), &shifted_grid).unwrap();
        for (x, y) in origin.values.iter().zip(&moved.values) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }
}

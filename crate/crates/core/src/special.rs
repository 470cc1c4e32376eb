//! Complex log-Gamma and the barrier phase built from it.

use num_complex::Complex64;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `B_{2k} / (2k (2k-1))` for k = 1..=8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// `ln Gamma(z)` for `Re z > 0`, continuous in `z` (the log-Gamma branch, not `ln` of `Gamma`).
///
/// The argument is shifted until `|z| >= 15` and the Stirling series is summed there.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    assert!(z.re > 0.0, "ln_gamma needs Re z > 0, got {z}");
    let mut shift = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.norm() < 15.0 {
        shift += w.ln();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv;
    for c in STIRLING {
        series += pow * c;
        pow *= inv2;
    }
    (w - 0.5) * w.ln() - w + LN_SQRT_2PI + series - shift
}

/// `phi(K) = arg Gamma(1/2 + iK/pi) + (K/pi)(1 - ln(K/pi))`, continuous with `phi(0) = 0`.
///
/// Odd in `K`; decays like `pi/(24 K)` for large `K`.
pub fn phi_tilde(k: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    if k < 0.0 {
        return -phi_tilde(-k);
    }
    let y = k / std::f64::consts::PI;
    ln_gamma(Complex64::new(0.5, y)).im + y - y * y.ln()
}

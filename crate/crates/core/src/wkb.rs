//! Semiclassical levels of the (possibly asymmetric) double well.
//!
//! Turning points `x1 < x2 < x3 < x4` bound the left well, the barrier and the right well.
//! The two wells carry the phases `theta1`, `theta2`; the barrier carries the action `K`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::potential::{eval_potential, FleaSpec, PotentialSpec};
use crate::quadrature::{adaptive_simpson, brent, SIMPSON_MAX_INTERVALS, SIMPSON_TOL};
use crate::special::phi_tilde;

const SCAN_POINTS: usize = 20_000;
const ROOT_TOL: f64 = 1e-12;
const POLE_TOL: f64 = 1e-8;
const LEVEL_SCAN: usize = 160;

pub type Matrix2 = [[Complex64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurningPoints {
    pub energy: f64,
    pub x: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WkbActions {
    pub energy: f64,
    pub hbar: f64,
    pub turning_points: TurningPoints,
    pub theta1: f64,
    pub theta2: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub phi_tilde: f64,
}

impl WkbActions {
    /// Built directly from phases, for evaluating the closed forms.
    pub fn from_phases(theta1: f64, theta2: f64, k: f64) -> Self {
        Self {
            energy: f64::NAN,
            hbar: f64::NAN,
            turning_points: TurningPoints { energy: f64::NAN, x: [f64::NAN; 4] },
            theta1,
            theta2,
            k,
            phi_tilde: phi_tilde(k),
        }
    }

    pub fn delta(&self) -> f64 {
        self.theta1 - self.theta2
    }

    fn total_phase(&self) -> f64 {
        self.theta1 + self.theta2 - PI + self.phi_tilde
    }

    fn arccos_term(&self) -> f64 {
        let c = self.delta().cos() / (1.0 + (-2.0 * self.k).exp()).sqrt();
        c.clamp(-1.0, 1.0).acos()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Lower member of the pair.
    Minus,
    /// Upper member of the pair.
    Plus,
}

impl Branch {
    fn name(self) -> &'static str {
        match self {
            Branch::Minus => "minus",
            Branch::Plus => "plus",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WkbLevels {
    pub n: usize,
    #[serde(rename = "E_minus")]
    pub e_minus: f64,
    #[serde(rename = "E_plus")]
    pub e_plus: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub phi_tilde: f64,
    pub delta: f64,
    pub d1_over_c4_minus: f64,
    pub d1_over_c4_plus: f64,
    #[serde(skip)]
    pub actions_minus: Option<WkbActions>,
    #[serde(skip)]
    pub actions_plus: Option<WkbActions>,
}

fn total_potential(spec: &PotentialSpec, flea: Option<&FleaSpec>) -> impl Fn(f64) -> f64 {
    let spec = *spec;
    let flea = flea.copied();
    move |x| eval_potential(&spec, flea.as_ref(), None, x, 0.0)
}

/// Half-width of an interval outside of which `V > e`.
fn outer_extent(spec: &PotentialSpec, flea: Option<&FleaSpec>, e: f64) -> f64 {
    let w = total_potential(spec, flea);
    let mut x = 2.0 * spec.length_scale();
    if let Some(f) = flea {
        x = x.max(f.b.abs() + f.c + 1.0);
    }
    for _ in 0..60 {
        if w(x) > e && w(-x) > e {
            break;
        }
        x *= 2.0;
    }
    x
}

/// Roots of `V + dV - E`, located by a sign scan and polished by Brent's method.
pub fn turning_points(spec: &PotentialSpec, flea: Option<&FleaSpec>, e: f64) -> Result<TurningPoints> {
    ensure(e.is_finite(), || format!("energy must be finite, got {e}"))?;
    let w = total_potential(spec, flea);
    let f = |x: f64| w(x) - e;
    let lim = outer_extent(spec, flea, e);
    let step = 2.0 * lim / SCAN_POINTS as f64;
    let mut roots = Vec::with_capacity(4);
    let mut x0 = -lim;
    let mut f0 = f(x0);
    for i in 1..=SCAN_POINTS {
        let x1 = -lim + i as f64 * step;
        let f1 = f(x1);
        if (f0 > 0.0) != (f1 > 0.0) {
            roots.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    if roots.len() != 4 {
        return Err(Error::WrongTopology { energy: e, sign_changes: roots.len() });
    }
    let mut x = [0.0; 4];
    for (slot, &(a, b)) in x.iter_mut().zip(&roots) {
        *slot = brent(f, a, b, ROOT_TOL)?;
    }
    Ok(TurningPoints { energy: e, x })
}

/// `integral_a^b sqrt|E - V|` with `x = a + s^2` and `x = b - s^2` removing the endpoint roots.
fn root_integral(g: &impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    let h = (m - a).sqrt();
    let left = adaptive_simpson(|s| 2.0 * s * g(a + s * s).abs().sqrt(), 0.0, h, SIMPSON_TOL, SIMPSON_MAX_INTERVALS)?;
    let right = adaptive_simpson(|s| 2.0 * s * g(b - s * s).abs().sqrt(), 0.0, h, SIMPSON_TOL, SIMPSON_MAX_INTERVALS)?;
    Ok(left + right)
}

pub fn actions(spec: &PotentialSpec, flea: Option<&FleaSpec>, e: f64, hbar: f64) -> Result<WkbActions> {
    ensure(hbar > 0.0 && hbar.is_finite(), || format!("hbar must be positive, got {hbar}"))?;
    let tp = turning_points(spec, flea, e)?;
    let w = total_potential(spec, flea);
    let g = |x: f64| e - w(x);
    let [x1, x2, x3, x4] = tp.x;
    let theta1 = root_integral(&g, x1, x2)? / hbar;
    let k = root_integral(&g, x2, x3)? / hbar;
    let theta2 = root_integral(&g, x3, x4)? / hbar;
    Ok(WkbActions { energy: e, hbar, turning_points: tp, theta1, theta2, k, phi_tilde: phi_tilde(k) })
}

/// `sqrt(1 + e^{-2K}) - cos(theta1 - theta2) / cos(theta1 + theta2 - pi + phi)`.
pub fn quantization_residual(a: &WkbActions) -> Result<f64> {
    let c = a.total_phase().cos();
    if c.abs() < POLE_TOL {
        return Err(Error::PoleProximity { cosine: c.abs() });
    }
    Ok((1.0 + (-2.0 * a.k).exp()).sqrt() - a.delta().cos() / c)
}

/// Branch form of the quantization condition, increasing in `E`; zero at a level.
pub fn branch_function(a: &WkbActions, n: usize, branch: Branch) -> f64 {
    let base = a.total_phase() - 2.0 * PI * n as f64;
    match branch {
        Branch::Minus => base + a.arccos_term(),
        Branch::Plus => base - a.arccos_term(),
    }
}

/// `theta1` solving the condition when `theta2 = theta1 - delta` and `K` are held fixed.
pub fn solution_theta(n: usize, k: f64, delta: f64) -> (f64, f64) {
    let a = WkbActions::from_phases(delta, 0.0, k);
    let acos = a.arccos_term();
    let base = delta + PI - a.phi_tilde + 2.0 * PI * n as f64;
    (0.5 * (base - acos), 0.5 * (base + acos))
}

/// Lowest well minimum that both wells exceed, and the barrier top between them.
fn energy_window(spec: &PotentialSpec, flea: Option<&FleaSpec>) -> (f64, f64) {
    let w = total_potential(spec, flea);
    let lim = outer_extent(spec, flea, spec.barrier_height().max(0.0) + 1.0);
    let n = 4 * SCAN_POINTS;
    let xs: Vec<f64> = (0..=n).map(|i| -lim + 2.0 * lim * i as f64 / n as f64).collect();
    let arg_min = |lo: usize, hi: usize| (lo..hi).min_by(|&i, &j| w(xs[i]).total_cmp(&w(xs[j]))).unwrap();
    let mid = n / 2;
    let l = arg_min(0, mid);
    let r = arg_min(mid, n + 1);
    let top = (l..=r).map(|i| w(xs[i])).fold(f64::NEG_INFINITY, f64::max);
    (w(xs[l]).max(w(xs[r])), top)
}

fn solve_branch(
    spec: &PotentialSpec,
    flea: Option<&FleaSpec>,
    hbar: f64,
    n: usize,
    branch: Branch,
    window: (f64, f64),
) -> Result<WkbActions> {
    let (lo, hi) = window;
    let energy = |u: f64| lo + u * (hi - lo);
    let g = |e: f64| actions(spec, flea, e, hbar).map(|a| branch_function(&a, n, branch));
    // Log-spaced in the distance to the bottom, then in the distance to the top.
    let geom = |from: f64, to: f64, i: usize, n: usize| from * (to / from).powf(i as f64 / (n - 1) as f64);
    let upper = LEVEL_SCAN / 4;
    let us: Vec<f64> = (0..LEVEL_SCAN)
        .map(|i| geom(1e-6, 0.5, i, LEVEL_SCAN))
        .chain((1..upper).map(|i| 1.0 - geom(0.5, 1e-9, i, upper)))
        .collect();
    let mut prev: Option<(f64, f64)> = None;
    let mut last_value = None;
    for &u in &us {
        let e = energy(u);
        let val = match g(e) {
            Ok(v) => v,
            Err(Error::WrongTopology { .. }) => {
                prev = None;
                continue;
            }
            Err(err) => return Err(err),
        };
        if let Some((pe, pv)) = prev {
            if pv < 0.0 && val >= 0.0 {
                let root = brent(|e| g(e).unwrap_or(f64::NAN), pe, e, 1e-13 * (1.0 + e.abs()))?;
                return actions(spec, flea, root, hbar);
            }
        }
        prev = Some((e, val));
        last_value = Some(val);
    }
    match last_value {
        Some(v) if v < 0.0 => Err(Error::LevelAboveBarrier { n }),
        _ => Err(Error::NoBracket { n, branch: branch.name() }),
    }
}

/// The pair of levels with index `n` and their localization ratios.
pub fn solve_levels(spec: &PotentialSpec, flea: Option<&FleaSpec>, hbar: f64, n: usize) -> Result<WkbLevels> {
    ensure(hbar > 0.0 && hbar.is_finite(), || format!("hbar must be positive, got {hbar}"))?;
    let window = energy_window(spec, flea);
    ensure(window.0 < window.1, || "potential has no barrier between two wells".into())?;
    let (minus, plus) = rayon::join(
        || solve_branch(spec, flea, hbar, n, Branch::Minus, window),
        || solve_branch(spec, flea, hbar, n, Branch::Plus, window),
    );
    let (minus, plus) = (minus?, plus?);
    Ok(WkbLevels {
        n,
        e_minus: minus.energy,
        e_plus: plus.energy,
        theta_minus: minus.theta1,
        theta_plus: plus.theta1,
        k: minus.k,
        phi_tilde: minus.phi_tilde,
        delta: minus.delta(),
        d1_over_c4_minus: localization_ratio_wkb(&minus, Branch::Minus),
        d1_over_c4_plus: localization_ratio_wkb(&plus, Branch::Plus),
        actions_minus: Some(minus),
        actions_plus: Some(plus),
    })
}

/// Levels `0..count` solved in parallel.
pub fn solve_many(spec: &PotentialSpec, flea: Option<&FleaSpec>, hbar: f64, count: usize) -> Vec<Result<WkbLevels>> {
    (0..count).into_par_iter().map(|n| solve_levels(spec, flea, hbar, n)).collect()
}

/// `D1/C4 = sin(delta) e^K +- sqrt(sin^2(delta) e^{2K} + 1)`, `+` on the lower branch,
/// negated when `delta` lies in an odd interval `[(2m-1) pi, (2m+1) pi]`.
pub fn localization_ratio_wkb(a: &WkbActions, branch: Branch) -> f64 {
    let delta = a.delta();
    let x = delta.sin() * a.k.exp();
    let root = x.hypot(1.0);
    // Pick the cancelling form that avoids subtracting nearly equal numbers.
    let value = match branch {
        Branch::Minus => {
            if x >= 0.0 {
                x + root
            } else {
                -1.0 / (x - root)
            }
        }
        Branch::Plus => {
            if x <= 0.0 {
                x - root
            } else {
                -1.0 / (x + root)
            }
        }
    };
    let m = (delta / (2.0 * PI)).round() as i64;
    if m % 2 == 0 {
        value
    } else {
        -value
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn scale(m: Matrix2, s: Complex64) -> Matrix2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

pub fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionMatrices {
    pub left_cd_to_ab: Matrix2,
    pub left_ab_to_cd: Matrix2,
    pub right_cd_to_ab: Matrix2,
    pub right_ab_to_cd: Matrix2,
}

/// Connection formulas at a left-hand and a right-hand turning point.
pub fn connection_matrices() -> ConnectionMatrices {
    let p = Complex64::from_polar(1.0, FRAC_PI_4);
    let m = p.conj();
    ConnectionMatrices {
        left_cd_to_ab: scale([[c(0.5, 0.0), c(0.0, -1.0)], [c(0.0, -0.5), c(1.0, 0.0)]], p),
        left_ab_to_cd: scale([[c(1.0, 0.0), c(0.0, 1.0)], [c(0.0, 0.5), c(0.5, 0.0)]], m),
        right_cd_to_ab: scale([[c(1.0, 0.0), c(0.0, -0.5)], [c(0.0, -1.0), c(0.5, 0.0)]], p),
        right_ab_to_cd: scale([[c(0.5, 0.0), c(0.0, 0.5)], [c(0.0, 1.0), c(1.0, 0.0)]], m),
    }
}

/// Transfer across the barrier; unit determinant for every `(K, phi)`.
pub fn barrier_matrix(k: f64, phi: f64) -> Matrix2 {
    let s = (1.0 + (2.0 * k).exp()).sqrt();
    let e = k.exp();
    [[Complex64::from_polar(s, -phi), c(0.0, e)], [c(0.0, -e), Complex64::from_polar(s, phi)]]
}

pub fn determinant(m: &Matrix2) -> Complex64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// `D1/C4` obtained by carrying the outer amplitudes through both wells and the barrier.
///
/// Returns the values implied by the two rows of the barrier relation; they coincide
/// exactly when the quantization condition holds.
pub fn chain_ratio(a: &WkbActions) -> (Complex64, Complex64) {
    let p = Complex64::from_polar(1.0, FRAC_PI_4);
    let i = c(0.0, 1.0);
    let u = [p * (-i) * Complex64::from_polar(1.0, a.theta1), p * Complex64::from_polar(1.0, -a.theta1)];
    let v = [p * Complex64::from_polar(1.0, -a.theta2), p * (-i) * Complex64::from_polar(1.0, a.theta2)];
    let m = barrier_matrix(a.k, a.phi_tilde);
    let mv = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
    (mv[0] / u[0], mv[1] / u[1])
}

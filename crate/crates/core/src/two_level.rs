//! Two-state truncation: closed-form spectra, quenches and stochastic Schrödinger paths.
//!
//! States are written in the localized basis `(c_minus, c_plus)`, with `Phi0_minus = (1, 0)`
//! living in the left well and `Phi0_plus = (0, 1)` in the right well.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Largest per-step norm correction accepted by the Brownian integrator.
pub const MAX_NORM_CORRECTION: f64 = 1e-3;
/// An Euler step changes the norm by about `kappa^2 dt (xi^2 - 1) / 2`; at this budget a
/// draw needs `|xi| > 6` to exceed [`MAX_NORM_CORRECTION`].
pub const MAX_KAPPA2_DT: f64 = 5e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FleaSide {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelModel {
    /// Tunnel splitting `Delta > 0`.
    #[serde(rename = "Delta")]
    pub splitting: f64,
    /// Flea strength on the chosen diagonal entry.
    pub delta: f64,
    pub side: FleaSide,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelState {
    pub c_minus: Complex64,
    pub c_plus: Complex64,
}

impl TwoLevelState {
    pub fn new(c_minus: Complex64, c_plus: Complex64) -> Result<Self> {
        let mut s = Self { c_minus, c_plus };
        let n = s.norm();
        ensure(n.is_finite() && n > 0.0, || "two-level state must be nonzero".into())?;
        s.scale(1.0 / n);
        Ok(s)
    }

    pub fn from_real(v: [f64; 2]) -> Result<Self> {
        Self::new(Complex64::new(v[0], 0.0), Complex64::new(v[1], 0.0))
    }

    /// Left-localized `Phi0_minus`.
    pub fn left() -> Self {
        Self { c_minus: Complex64::new(1.0, 0.0), c_plus: Complex64::new(0.0, 0.0) }
    }

    /// Right-localized `Phi0_plus`.
    pub fn right() -> Self {
        Self { c_minus: Complex64::new(0.0, 0.0), c_plus: Complex64::new(1.0, 0.0) }
    }

    /// The unperturbed ground state `(1, 1)/sqrt 2`.
    pub fn symmetric() -> Self {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { c_minus: s, c_plus: s }
    }

    pub fn norm(&self) -> f64 {
        (self.c_minus.norm_sqr() + self.c_plus.norm_sqr()).sqrt()
    }

    pub fn p_left(&self) -> f64 {
        self.c_minus.norm_sqr()
    }

    pub fn p_right(&self) -> f64 {
        self.c_plus.norm_sqr()
    }

    fn scale(&mut self, f: f64) {
        self.c_minus *= f;
        self.c_plus *= f;
    }

    /// `sigma_z` acting on the state.
    pub fn jump(&self) -> Self {
        Self { c_minus: self.c_minus, c_plus: -self.c_plus }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigensystem {
    pub e_minus: f64,
    pub e_plus: f64,
    pub ground: [f64; 2],
    pub excited: [f64; 2],
}

impl TwoLevelModel {
    pub fn new(splitting: f64, delta: f64, side: FleaSide) -> Result<Self> {
        ensure(splitting.is_finite() && splitting > 0.0, || format!("Delta must be positive, got {splitting}"))?;
        ensure(delta.is_finite(), || format!("delta must be finite, got {delta}"))?;
        Ok(Self { splitting, delta, side })
    }

    /// `-Delta/2 sigma_x` plus `delta` on the flea's diagonal entry.
    pub fn hamiltonian(&self) -> [[f64; 2]; 2] {
        let o = -0.5 * self.splitting;
        match self.side {
            FleaSide::Left => [[self.delta, o], [o, 0.0]],
            FleaSide::Right => [[0.0, o], [o, self.delta]],
        }
    }

    pub fn gap(&self) -> f64 {
        self.delta.hypot(self.splitting)
    }

    pub fn eigensystem(&self) -> Eigensystem {
        let (d, dd) = (self.delta, self.splitting);
        let r = self.gap();
        // delta + R, computed without cancellation for delta < 0.
        let up = if d >= 0.0 { d + r } else { dd * dd / (r - d) };
        let down = if d <= 0.0 { d - r } else { -dd * dd / (r + d) };
        let g = normalized([dd, up]);
        let x = normalized([dd, down]);
        let (ground, excited) = match self.side {
            FleaSide::Left => (g, x),
            FleaSide::Right => ([g[1], g[0]], [x[1], x[0]]),
        };
        Eigensystem { e_minus: 0.5 * (d - r), e_plus: 0.5 * (d + r), ground, excited }
    }

    fn generator(&self, hbar: f64) -> impl Fn(&TwoLevelState) -> TwoLevelState {
        let h = self.hamiltonian();
        let f = Complex64::new(0.0, -1.0 / hbar);
        move |s| TwoLevelState {
            c_minus: f * (s.c_minus * h[0][0] + s.c_plus * h[0][1]),
            c_plus: f * (s.c_minus * h[1][0] + s.c_plus * h[1][1]),
        }
    }

    /// Exact `exp(-i H t / hbar)` applied to `s`.
    pub fn evolve(&self, s: &TwoLevelState, t: f64, hbar: f64) -> TwoLevelState {
        let h = self.hamiltonian();
        let e0 = 0.5 * (h[0][0] + h[1][1]);
        let hz = 0.5 * (h[0][0] - h[1][1]);
        let hx = h[0][1];
        let r = hz.hypot(hx);
        let phase = Complex64::from_polar(1.0, -e0 * t / hbar);
        let (sn, cs) = (r * t / hbar).sin_cos();
        let k = if r > 0.0 { sn / r } else { t / hbar };
        let i = Complex64::new(0.0, 1.0);
        let cm = cs * s.c_minus - i * k * (hz * s.c_minus + hx * s.c_plus);
        let cp = cs * s.c_plus - i * k * (hx * s.c_minus - hz * s.c_plus);
        TwoLevelState { c_minus: phase * cm, c_plus: phase * cp }
    }
}

fn normalized(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchResult {
    pub state: TwoLevelState,
    pub p_left: f64,
}

/// Evolves `psi0` under the flea-perturbed Hamiltonian for time `t`.
pub fn quench_evolution(model: &TwoLevelModel, psi0: &TwoLevelState, t: f64, hbar: f64) -> Result<QuenchResult> {
    ensure(t >= 0.0, || format!("t must be nonnegative, got {t}"))?;
    ensure(hbar > 0.0, || format!("hbar must be positive, got {hbar}"))?;
    let state = model.evolve(psi0, t, hbar);
    Ok(QuenchResult { state, p_left: state.p_left() })
}

/// `P_L(t)` after a quench from the unperturbed ground state `(1, 1)/sqrt 2`.
pub fn quench_p_left(model: &TwoLevelModel, t: f64, hbar: f64) -> f64 {
    let r2 = model.delta * model.delta + model.splitting * model.splitting;
    let swing = 0.5 * model.delta * model.splitting / r2 * ((r2.sqrt() * t / hbar).cos() - 1.0);
    match model.side {
        FleaSide::Left => 0.5 + swing,
        FleaSide::Right => 0.5 - swing,
    }
}

/// Peak-to-peak half amplitude `delta Delta / (delta^2 + Delta^2)` of the quench oscillation.
pub fn freezing_amplitude(delta: f64, splitting: f64) -> f64 {
    (delta * splitting / (delta * delta + splitting * splitting)).abs()
}

/// Sampled state history.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelPath {
    pub times: Vec<f64>,
    pub states: Vec<TwoLevelState>,
}

impl TwoLevelPath {
    fn push(&mut self, t: f64, s: TwoLevelState) {
        self.times.push(t);
        self.states.push(s);
    }

    pub fn p_left(&self) -> Vec<f64> {
        self.states.iter().map(TwoLevelState::p_left).collect()
    }

    /// Time average of `P_L` over the recorded samples.
    pub fn mean_p_left(&self) -> f64 {
        self.p_left().iter().sum::<f64>() / self.states.len() as f64
    }
}

fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    ensure(dt.is_finite() && dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    ensure(t_end.is_finite() && t_end >= 0.0, || format!("t_end must be nonnegative, got {t_end}"))?;
    Ok((t_end / dt).round() as usize)
}

/// Classical fourth-order Runge-Kutta for `i hbar dPhi/dt = H Phi`, renormalized at the end.
pub fn integrate_rk4(model: &TwoLevelModel, psi0: &TwoLevelState, hbar: f64, dt: f64, t_end: f64) -> Result<TwoLevelPath> {
    let n = step_count(dt, t_end)?;
    let f = model.generator(hbar);
    let axpy = |s: &TwoLevelState, k: &TwoLevelState, a: f64| TwoLevelState {
        c_minus: s.c_minus + k.c_minus * a,
        c_plus: s.c_plus + k.c_plus * a,
    };
    let mut path = TwoLevelPath::default();
    let mut s = *psi0;
    path.push(0.0, s);
    for k in 1..=n {
        let k1 = f(&s);
        let k2 = f(&axpy(&s, &k1, 0.5 * dt));
        let k3 = f(&axpy(&s, &k2, 0.5 * dt));
        let k4 = f(&axpy(&s, &k3, dt));
        s.c_minus += (k1.c_minus + 2.0 * k2.c_minus + 2.0 * k3.c_minus + k4.c_minus) * (dt / 6.0);
        s.c_plus += (k1.c_plus + 2.0 * k2.c_plus + 2.0 * k3.c_plus + k4.c_plus) * (dt / 6.0);
        path.push(k as f64 * dt, s);
    }
    for st in &mut path.states {
        let n = st.norm();
        st.scale(1.0 / n);
    }
    Ok(path)
}

/// Per-path generator: `seed` picks the family, `stream` the member.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[allow(clippy::too_many_arguments)]
fn brownian_walk(
    model: &TwoLevelModel,
    psi0: &TwoLevelState,
    hbar: f64,
    dt: f64,
    n: usize,
    kappa: f64,
    rng: &mut ChaCha8Rng,
    mut visit: impl FnMut(usize, &TwoLevelState),
) -> Result<()> {
    let f = model.generator(hbar);
    let sq = dt.sqrt();
    let mut s = *psi0;
    visit(0, &s);
    for k in 1..=n {
        let db: f64 = StandardNormal.sample(rng);
        let db = db * sq;
        let drift = f(&s);
        let noise = Complex64::new(0.0, -kappa * db);
        let damp = -0.5 * kappa * kappa * dt;
        let next = TwoLevelState {
            c_minus: s.c_minus + drift.c_minus * dt + noise * s.c_minus + s.c_minus * damp,
            c_plus: s.c_plus + drift.c_plus * dt - noise * s.c_plus + s.c_plus * damp,
        };
        let nrm = next.norm();
        let correction = (nrm - 1.0).abs();
        if !(correction <= MAX_NORM_CORRECTION) {
            return Err(Error::NormBlowup { step: k, correction });
        }
        s = next;
        s.scale(1.0 / nrm);
        visit(k, &s);
    }
    Ok(())
}

/// Euler-Maruyama path of `dPhi = -(i/hbar) H Phi dt - i kappa sigma_z Phi dB - kappa^2/2 Phi dt`.
///
/// Itô form with renormalization after every step.
pub fn sde_brownian(
    model: &TwoLevelModel,
    psi0: &TwoLevelState,
    hbar: f64,
    dt: f64,
    t_end: f64,
    kappa: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TwoLevelPath> {
    let n = step_count(dt, t_end)?;
    let mut path = TwoLevelPath::default();
    brownian_walk(model, psi0, hbar, dt, n, kappa, rng, |k, s| path.push(k as f64 * dt, *s))?;
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMean {
    pub times: Vec<f64>,
    pub mean_p_left: Vec<f64>,
    pub std_error: Vec<f64>,
    pub paths: usize,
}

/// Mean and standard error of `P_L` over `paths` Brownian paths (streams `0..paths`).
#[allow(clippy::too_many_arguments)]
pub fn brownian_ensemble(
    model: &TwoLevelModel,
    psi0: &TwoLevelState,
    hbar: f64,
    dt: f64,
    t_end: f64,
    kappa: f64,
    seed: u64,
    paths: usize,
) -> Result<EnsembleMean> {
    ensure(paths >= 2, || "an ensemble needs at least two paths".into())?;
    let n = step_count(dt, t_end)?;
    let zero = || (vec![0.0; n + 1], vec![0.0; n + 1]);
    let (s1, s2) = (0..paths as u64)
        .into_par_iter()
        .try_fold(zero, |(mut s1, mut s2), p| -> Result<_> {
            let mut rng = path_rng(seed, p);
            brownian_walk(model, psi0, hbar, dt, n, kappa, &mut rng, |k, s| {
                let v = s.p_left();
                s1[k] += v;
                s2[k] += v * v;
            })?;
            Ok((s1, s2))
        })
        .try_reduce(zero, |(mut a1, mut a2), (b1, b2)| {
            a1.iter_mut().zip(&b1).for_each(|(a, b)| *a += b);
            a2.iter_mut().zip(&b2).for_each(|(a, b)| *a += b);
            Ok((a1, a2))
        })?;
    let m = paths as f64;
    let mean: Vec<f64> = s1.iter().map(|s| s / m).collect();
    let std_error = s2
        .iter()
        .zip(&mean)
        .map(|(s, mu)| ((s / m - mu * mu).max(0.0) * m / (m - 1.0) / m).sqrt())
        .collect();
    Ok(EnsembleMean { times: (0..=n).map(|k| k as f64 * dt).collect(), mean_p_left: mean, std_error, paths })
}

/// Exact evolution between Poisson events of the given `rate`; each event applies `sigma_z`.
/// The state is sampled on the `dt` grid.
pub fn sde_poisson(
    model: &TwoLevelModel,
    psi0: &TwoLevelState,
    hbar: f64,
    dt: f64,
    t_end: f64,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TwoLevelPath> {
    ensure(rate.is_finite() && rate >= 0.0, || format!("jump rate must be nonnegative, got {rate}"))?;
    let n = step_count(dt, t_end)?;
    let waits = (rate > 0.0).then(|| Exp::new(rate).expect("positive rate"));
    let next_event = |rng: &mut ChaCha8Rng, from: f64| match &waits {
        Some(w) => from + w.sample(rng),
        None => f64::INFINITY,
    };
    let mut path = TwoLevelPath::default();
    let mut s = *psi0;
    let mut t = 0.0;
    let mut event = next_event(rng, 0.0);
    path.push(0.0, s);
    for k in 1..=n {
        let target = k as f64 * dt;
        while event <= target {
            s = model.evolve(&s, event - t, hbar).jump();
            t = event;
            event = next_event(rng, t);
        }
        s = model.evolve(&s, target - t, hbar);
        t = target;
        let nrm = s.norm();
        s.scale(1.0 / nrm);
        path.push(t, s);
    }
    Ok(path)
}

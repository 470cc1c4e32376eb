//! Classical counterparts: Hamiltonian flow, overdamped Langevin paths, Eyring-Kramers times.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::potential::{FleaSpec, PotentialKind, PotentialSpec};
use crate::two_level::path_rng;

/// Arrival is declared once `q > a - ARRIVAL_MARGIN`.
pub const ARRIVAL_MARGIN: f64 = 0.1;
/// Fewest transitions needed for a mean first-passage estimate.
pub const MIN_TRANSITIONS: usize = 10;
/// Paths still in the left well at `t_max` may keep running up to this multiple of it.
pub const HORIZON_CAP: f64 = 16.0;

/// A phase-space point; `H = p^2 + V(q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub q: f64,
    pub p: f64,
}

impl ClassicalState {
    pub fn new(q: f64, p: f64) -> Result<Self> {
        ensure(q.is_finite() && p.is_finite(), || "classical state must be finite".into())?;
        Ok(Self { q, p })
    }

    pub fn energy(&self, spec: &PotentialSpec) -> f64 {
        self.p * self.p + spec.value(self.q)
    }
}

fn leapfrog(s: &mut ClassicalState, spec: &PotentialSpec, dt: f64) {
    s.p -= 0.5 * dt * spec.derivative(s.q);
    s.q += 2.0 * dt * s.p;
    s.p -= 0.5 * dt * spec.derivative(s.q);
}

fn flow_steps(t: f64, dt: f64) -> Result<(usize, f64)> {
    ensure(dt.is_finite() && dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    ensure(t.is_finite() && t >= 0.0, || format!("t must be nonnegative, got {t}"))?;
    let n = (t / dt).ceil() as usize;
    Ok((n, if n == 0 { 0.0 } else { t / n as f64 }))
}

/// Velocity-Verlet integration of `q' = 2p`, `p' = -V'(q)` up to time `t`.
pub fn hamiltonian_flow(state0: ClassicalState, spec: &PotentialSpec, t: f64, dt: f64) -> Result<ClassicalState> {
    let (n, h) = flow_steps(t, dt)?;
    let mut s = state0;
    for _ in 0..n {
        leapfrog(&mut s, spec, h);
    }
    Ok(s)
}

/// The flow sampled every `every` steps, starting with `(0, state0)`.
pub fn flow_trajectory(
    state0: ClassicalState,
    spec: &PotentialSpec,
    t: f64,
    dt: f64,
    every: usize,
) -> Result<Vec<(f64, ClassicalState)>> {
    let (n, h) = flow_steps(t, dt)?;
    let every = every.max(1);
    let mut s = state0;
    let mut out = vec![(0.0, s)];
    for k in 1..=n {
        leapfrog(&mut s, spec, h);
        if k % every == 0 || k == n {
            out.push((k as f64 * h, s));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangevinConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
}

impl LangevinConfig {
    pub fn new(epsilon: f64, dt: f64, t_max: f64, seed: u64) -> Result<Self> {
        ensure(epsilon.is_finite() && epsilon > 0.0, || format!("epsilon must be positive, got {epsilon}"))?;
        ensure(dt.is_finite() && dt > 0.0, || format!("dt must be positive, got {dt}"))?;
        ensure(t_max.is_finite() && t_max > 0.0, || format!("t_max must be positive, got {t_max}"))?;
        Ok(Self { epsilon, dt, t_max, seed })
    }
}

/// Inputs of the Eyring-Kramers formula read off the (possibly perturbed) potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KramersInputs {
    pub barrier: f64,
    pub curvature_barrier: f64,
    pub curvature_minimum: f64,
}

pub fn kramers_inputs(spec: &PotentialSpec, flea: Option<&FleaSpec>) -> KramersInputs {
    let a = spec.minimum();
    let v = |x: f64| spec.value(x) + flea.map_or(0.0, |f| f.value(x));
    let v2 = |x: f64| spec.second_derivative(x) + flea.map_or(0.0, |f| f.second_derivative(x));
    KramersInputs { barrier: v(0.0) - v(-a), curvature_barrier: v2(0.0), curvature_minimum: v2(a) }
}

/// `2 pi / sqrt(V''(a) |V''(0)|) exp(V(0) / eps)`.
pub fn eyring_kramers(inputs: &KramersInputs, epsilon: f64) -> f64 {
    2.0 * std::f64::consts::PI / (inputs.curvature_minimum * inputs.curvature_barrier.abs()).sqrt()
        * (inputs.barrier / epsilon).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionStats {
    pub epsilon: f64,
    pub mean: f64,
    pub stderr: f64,
    pub ek_prediction: f64,
    pub ratio: f64,
    pub paths: usize,
    pub transitioned: usize,
    /// First-passage time of each path; `None` if it never arrived.
    pub times: Vec<Option<f64>>,
}

fn first_passage(
    spec: &PotentialSpec,
    flea: Option<&FleaSpec>,
    cfg: &LangevinConfig,
    target: f64,
    horizon: f64,
    rng: &mut ChaCha8Rng,
) -> Option<f64> {
    let a = spec.minimum();
    let kick = (2.0 * cfg.epsilon * cfg.dt).sqrt();
    let max_steps = (horizon / cfg.dt).ceil() as u64;
    let mut x = -a;
    for k in 1..=max_steps {
        let force = spec.derivative(x) + flea.map_or(0.0, |f| f.derivative(x));
        let z: f64 = StandardNormal.sample(rng);
        x += -force * cfg.dt + kick * z;
        if x > target {
            return Some(k as f64 * cfg.dt);
        }
    }
    None
}

/// Mean time for `dx = -V'(x) dt + sqrt(2 eps) dW` started at `-a` to reach `a - 0.1`.
///
/// Path `i` draws from stream `i` of the configured seed, so runs with and without a flea
/// share their noise.
pub fn langevin_transition_time(
    spec: &PotentialSpec,
    config: &LangevinConfig,
    flea: Option<&FleaSpec>,
    n_paths: usize,
) -> Result<TransitionStats> {
    ensure(spec.kind == PotentialKind::DoubleWell, || "transition times need a double well".into())?;
    ensure(n_paths >= 2, || "need at least two paths".into())?;
    let target = spec.minimum() - ARRIVAL_MARGIN;
    let horizon = config.t_max * HORIZON_CAP;
    let times: Vec<Option<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| first_passage(spec, flea, config, target, horizon, &mut path_rng(config.seed, i)))
        .collect();
    let done: Vec<f64> = times.iter().flatten().copied().collect();
    if done.len() < MIN_TRANSITIONS {
        return Err(Error::NoTransitions { observed: done.len(), required: MIN_TRANSITIONS });
    }
    let m = done.len() as f64;
    let mean = done.iter().sum::<f64>() / m;
    let var = done.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let ek_prediction = eyring_kramers(&kramers_inputs(spec, flea), config.epsilon);
    Ok(TransitionStats {
        epsilon: config.epsilon,
        mean,
        stderr: (var / m).sqrt(),
        ek_prediction,
        ratio: mean / ek_prediction,
        paths: n_paths,
        transitioned: done.len(),
        times,
    })
}

//! Crank-Nicolson propagation under the ramped flea and the Born-rule ensemble.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::potential::{FleaSpec, PotentialSpec, RampSpec};
use crate::spectral::{self, Grid, WaveFunction};

/// Largest norm change tolerated in a single step.
pub const MAX_STEP_DRIFT: f64 = 1e-6;
/// Mass on one side needed to call an outcome.
pub const COLLAPSE_THRESHOLD: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CrankNicolson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshots: Vec<f64>,
    pub scheme: Scheme,
    /// Record observables every this many steps; 0 picks about a thousand rows.
    pub series_every: usize,
}

impl PropagationConfig {
    pub fn new(dt: f64, t_end: f64, mut snapshots: Vec<f64>) -> Result<Self> {
        ensure(dt.is_finite() && dt > 0.0, || format!("dt must be positive, got {dt}"))?;
        ensure(t_end.is_finite() && t_end > 0.0, || format!("t_end must be positive, got {t_end}"))?;
        ensure(snapshots.iter().all(|&t| (0.0..=t_end).contains(&t)), || {
            format!("snapshot times must lie in [0, {t_end}]")
        })?;
        snapshots.sort_by(f64::total_cmp);
        Ok(Self { dt, t_end, snapshots, scheme: Scheme::CrankNicolson, series_every: 0 })
    }

    /// `min(0.01, T / 2000)`.
    pub fn default_dt(ramp: &RampSpec) -> f64 {
        (ramp.duration / 2000.0).min(0.01)
    }

    fn steps(&self) -> (usize, f64) {
        let n = ((self.t_end / self.dt).round() as usize).max(1);
        (n, self.t_end / n as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub t: f64,
    pub p_left: f64,
    pub p_right: f64,
    pub norm: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub observables: Observables,
    pub psi: WaveFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub series: Vec<Observables>,
    pub final_state: WaveFunction,
    /// Largest single-step norm change.
    pub max_step_drift: f64,
    /// `| ||psi(t_end)||^2 - ||psi(0)||^2 |`.
    pub norm_drift: f64,
    pub steps: usize,
}

/// One Crank-Nicolson step `(1 + i dt H / 2 hbar) psi' = (1 - i dt H / 2 hbar) psi`.
pub struct CrankNicolson {
    grid: Grid,
    hbar: f64,
    dt: f64,
    c: Complex64,
    kin: f64,
    rhs: Vec<Complex64>,
    cp: Vec<Complex64>,
}

impl CrankNicolson {
    /// A negative `dt` runs the scheme backwards in time.
    pub fn new(grid: Grid, hbar: f64, dt: f64) -> Self {
        let h = grid.spacing();
        Self {
            grid,
            hbar,
            dt,
            c: Complex64::new(0.0, dt / (2.0 * hbar)),
            kin: hbar * hbar / (h * h),
            rhs: vec![Complex64::new(0.0, 0.0); grid.n],
            cp: vec![Complex64::new(0.0, 0.0); grid.n],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn step(&mut self, psi: &mut [Complex64], potential: &[f64]) {
        let n = self.grid.n;
        let c = self.c;
        let e = -self.kin;
        let off = c * e;
        for i in 0..n {
            let d = 2.0 * self.kin + potential[i];
            let mut r = (Complex64::new(1.0, 0.0) - c * d) * psi[i];
            if i > 0 {
                r -= off * psi[i - 1];
            }
            if i + 1 < n {
                r -= off * psi[i + 1];
            }
            self.rhs[i] = r;
        }
        // Thomas sweep; the matrix is strictly diagonally dominant for V >= 0.
        let mut prev_cp = Complex64::new(0.0, 0.0);
        let mut prev_d = Complex64::new(0.0, 0.0);
        for (i, &v) in potential.iter().enumerate().take(n) {
            let b = Complex64::new(1.0, 0.0) + c * (2.0 * self.kin + v);
            let m = if i == 0 { b } else { b - off * prev_cp };
            let inv = m.inv();
            prev_cp = off * inv;
            self.cp[i] = prev_cp;
            prev_d = if i == 0 { self.rhs[i] * inv } else { (self.rhs[i] - off * prev_d) * inv };
            self.rhs[i] = prev_d;
        }
        psi[n - 1] = self.rhs[n - 1];
        for i in (0..n - 1).rev() {
            psi[i] = self.rhs[i] - self.cp[i] * psi[i + 1];
        }
    }
}

fn norm_sq(grid: &Grid, psi: &[Complex64]) -> f64 {
    grid.spacing() * psi.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// `<psi, H psi> / <psi, psi>` for the potential sampled on the grid.
pub fn energy(grid: &Grid, hbar: f64, psi: &[Complex64], potential: &[f64]) -> f64 {
    let h = grid.spacing();
    let kin = hbar * hbar / (h * h);
    let n = grid.n;
    let mut s = 0.0;
    for i in 0..n {
        let mut hp = psi[i] * (2.0 * kin + potential[i]);
        if i > 0 {
            hp -= psi[i - 1] * kin;
        }
        if i + 1 < n {
            hp -= psi[i + 1] * kin;
        }
        s += (psi[i].conj() * hp).re;
    }
    s * h / norm_sq(grid, psi)
}

fn observe(psi_amps: &[Complex64], grid: &Grid, hbar: f64, t: f64, potential: &[f64]) -> Observables {
    let h = grid.spacing();
    let (mut l, mut r) = (0.0, 0.0);
    for (i, z) in psi_amps.iter().enumerate() {
        let x = grid.point(i);
        let p = z.norm_sqr();
        if x < 0.0 {
            l += p;
        } else if x > 0.0 {
            r += p;
        } else {
            l += 0.5 * p;
            r += 0.5 * p;
        }
    }
    Observables { t, p_left: h * l, p_right: h * r, norm: h * (l + r), energy: energy(grid, hbar, psi_amps, potential) }
}

/// Evolves `psi0` from `t = 0` to `config.t_end` under `V + w(t) dV`.
pub fn propagate(
    psi0: &WaveFunction,
    spec: &PotentialSpec,
    flea: Option<&FleaSpec>,
    ramp: Option<&RampSpec>,
    config: &PropagationConfig,
) -> Result<Trajectory> {
    let grid = psi0.grid;
    let hbar = psi0.hbar;
    let (n_steps, dt) = config.steps();
    if let Some(r) = ramp {
        ensure(dt <= r.duration / 1000.0, || format!("dt = {dt} does not resolve the ramp (need dt <= T/1000)"))?;
    }
    let xs = grid.points();
    let base: Vec<f64> = xs.iter().map(|&x| spec.value(x)).collect();
    let bump: Vec<f64> = match flea {
        Some(f) => xs.iter().map(|&x| f.value(x)).collect(),
        None => vec![0.0; grid.n],
    };
    let weight = |t: f64| match (flea, ramp) {
        (None, _) => 0.0,
        (Some(_), None) => 1.0,
        (Some(_), Some(r)) => r.weight(t),
    };
    let fill = |w: f64, out: &mut Vec<f64>| {
        out.iter_mut().zip(base.iter().zip(&bump)).for_each(|(o, (v, b))| *o = if w == 0.0 { *v } else { v + w * b });
    };

    let snap_steps: Vec<usize> =
        config.snapshots.iter().map(|&t| ((t / dt).round() as usize).min(n_steps)).collect();
    let every = if config.series_every > 0 { config.series_every } else { (n_steps / 1000).max(1) };

    let mut psi = psi0.amplitudes.clone();
    let mut pot = vec![0.0; grid.n];
    let mut stepper = CrankNicolson::new(grid, hbar, dt);
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut series = Vec::new();
    let norm0 = norm_sq(&grid, &psi);
    let mut last_norm = norm0;
    let mut max_step_drift = 0.0f64;
    let mut current_w = f64::NAN;

    let record = |k: usize, psi: &[Complex64], series: &mut Vec<Observables>, snaps: &mut Vec<Snapshot>| {
        let t = k as f64 * dt;
        let mut p = vec![0.0; grid.n];
        fill(weight(t), &mut p);
        let obs = observe(psi, &grid, hbar, t, &p);
        if k % every == 0 || k == n_steps {
            series.push(obs);
        }
        for _ in snap_steps.iter().filter(|&&s| s == k) {
            snaps.push(Snapshot { observables: obs, psi: WaveFunction { grid, hbar, amplitudes: psi.to_vec() } });
        }
    };

    record(0, &psi, &mut series, &mut snapshots);
    for k in 1..=n_steps {
        let w = weight((k as f64 - 0.5) * dt);
        if w != current_w {
            fill(w, &mut pot);
            current_w = w;
        }
        stepper.step(&mut psi, &pot);
        let nrm = norm_sq(&grid, &psi);
        let drift = (nrm - last_norm).abs();
        if !(drift <= MAX_STEP_DRIFT) {
            return Err(Error::StepRejected { step: k, drift });
        }
        max_step_drift = max_step_drift.max(drift);
        last_norm = nrm;
        if k % every == 0 || k == n_steps || snap_steps.contains(&k) {
            record(k, &psi, &mut series, &mut snapshots);
        }
    }
    Ok(Trajectory {
        snapshots,
        series,
        final_state: WaveFunction { grid, hbar, amplitudes: psi },
        max_step_drift,
        norm_drift: (last_norm - norm0).abs(),
        steps: n_steps,
    })
}

/// `|<target, psi(t_end)>|^2` with both states normalized.
pub fn adiabatic_fidelity(trajectory: &Trajectory, target: &WaveFunction) -> Result<f64> {
    let psi = &trajectory.final_state;
    let ov = target.inner(psi)?;
    Ok(ov.norm_sqr() / (target.norm_sq() * psi.norm_sq()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Unclassified,
}

pub fn classify_outcome(p_left: f64, p_right: f64) -> Side {
    if p_left >= COLLAPSE_THRESHOLD {
        Side::Left
    } else if p_right >= COLLAPSE_THRESHOLD {
        Side::Right
    } else {
        Side::Unclassified
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberOutcome {
    pub flea: FleaSpec,
    pub p_left: f64,
    pub p_right: f64,
    pub fidelity: f64,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BornTally {
    pub left: usize,
    pub right: usize,
    pub unclassified: usize,
    pub members: Vec<MemberOutcome>,
}

impl BornTally {
    /// Fails with `UnclassifiedOutcome` when no member crossed the threshold.
    pub fn require_classified(&self) -> Result<()> {
        if self.left + self.right == 0 {
            Err(Error::UnclassifiedOutcome)
        } else {
            Ok(())
        }
    }
}

/// `(b,c,d), (-b,c,d), (b,c,-d), (-b,c,-d)`.
pub fn symmetric_family(flea: &FleaSpec) -> Vec<FleaSpec> {
    vec![*flea, flea.mirrored(), flea.negated(), flea.mirrored().negated()]
}

/// Runs every member from the unperturbed ground state and tallies the sides.
pub fn born_ensemble(
    spec: &PotentialSpec,
    family: &[FleaSpec],
    ramp: &RampSpec,
    config: &PropagationConfig,
    hbar: f64,
    grid: &Grid,
) -> Result<BornTally> {
    let ground = spectral::solve(spec, None, hbar, grid, 1)?;
    let psi0 = ground.ground().clone();
    let members: Vec<MemberOutcome> = family
        .par_iter()
        .map(|flea| -> Result<MemberOutcome> {
            let traj = propagate(&psi0, spec, Some(flea), Some(ramp), config)?;
            let target = spectral::solve(spec, Some(flea), hbar, grid, 1)?;
            let fidelity = adiabatic_fidelity(&traj, target.ground())?;
            let (p_left, p_right) = traj.final_state.mass_split();
            Ok(MemberOutcome { flea: *flea, p_left, p_right, fidelity, side: classify_outcome(p_left, p_right) })
        })
        .collect::<Result<_>>()?;
    let count = |s: Side| members.iter().filter(|m| m.side == s).count();
    Ok(BornTally { left: count(Side::Left), right: count(Side::Right), unclassified: count(Side::Unclassified), members })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_ground_state() {
        let spec = PotentialSpec::standard();
        let g = Grid::for_potential(&spec, None, 600).unwrap();
        let s = spectral::solve(&spec, None, 0.3, &g, 1).unwrap();
        let cfg = PropagationConfig::new(0.01, 5.0, vec![0.0, 2.5, 5.0]).unwrap();
        let traj = propagate(s.ground(), &spec, None, None, &cfg).unwrap();
        for snap in &traj.snapshots {
            assert!((snap.observables.p_left - 0.5).abs() < 1e-6);
            assert!((snap.observables.p_left + snap.observables.p_right - 1.0).abs() < 1e-9);
        }
        assert!(traj.norm_drift < 1e-10);
        let fid = adiabatic_fidelity(&traj, s.ground()).unwrap();
        assert!((fid - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coarse_ramp_is_refused() {
        let spec = PotentialSpec::standard();
        let g = Grid::for_potential(&spec, None, 100).unwrap();
        let psi = spectral::solve(&spec, None, 0.3, &g, 1).unwrap().ground().clone();
        let cfg = PropagationConfig::new(1.0, 10.0, vec![]).unwrap();
        let r = RampSpec::new(10.0).unwrap();
        let f = FleaSpec::new(0.5, 0.2, 0.1).unwrap();
        assert!(propagate(&psi, &spec, Some(&f), Some(&r), &cfg).is_err());
    }

    #[test]
    fn family_shape() {
        let f = FleaSpec::new(7.5, 0.5, 0.3).unwrap();
        let fam = symmetric_family(&f);
        assert_eq!(fam[1].b, -7.5);
        assert_eq!(fam[2].d, -0.3);
        assert_eq!((fam[3].b, fam[3].d), (-7.5, -0.3));
    }

    #[test]
    fn outcome_threshold() {
        assert_eq!(classify_outcome(0.85, 0.15), Side::Left);
        assert_eq!(classify_outcome(0.15, 0.85), Side::Right);
        assert_eq!(classify_outcome(0.5, 0.5), Side::Unclassified);
    }
}

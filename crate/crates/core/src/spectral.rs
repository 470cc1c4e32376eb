//! Finite-difference Hamiltonian on a Dirichlet box and its low-lying states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::potential::{eval_potential, FleaSpec, PotentialSpec};
use crate::tridiag::SymTridiagonal;

/// Default number of interior grid points.
pub const DEFAULT_POINTS: usize = 4000;

/// Uniform grid of `n` interior points; the walls `x_min`, `x_max` carry `psi = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        ensure(n >= 3, || format!("grid needs at least 3 interior points, got {n}"))?;
        ensure(x_min.is_finite() && x_max.is_finite() && x_min < x_max, || {
            format!("grid endpoints must satisfy x_min < x_max, got [{x_min}, {x_max}]")
        })?;
        Ok(Self { x_min, x_max, n })
    }

    /// Symmetric box `[-L, L]` with `L = max(3a, |b| + c + 2)`.
    pub fn for_potential(spec: &PotentialSpec, flea: Option<&FleaSpec>, n: usize) -> Result<Self> {
        let mut l = 3.0 * spec.length_scale();
        if let Some(f) = flea {
            l = l.max(f.b.abs() + f.c + 2.0);
        }
        Self::new(-l, l, n)
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n as f64 + 1.0)
    }

    /// Interior point `i` (zero based). Symmetric boxes give exactly mirrored points.
    pub fn point(&self, i: usize) -> f64 {
        let center = 0.5 * (self.x_min + self.x_max);
        let half = 0.5 * (self.x_max - self.x_min);
        let m = 2 * (i as i64 + 1) - (self.n as i64 + 1);
        center + half * (m as f64) / (self.n as f64 + 1.0)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n, ..*self }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.x_min && x < self.x_max
    }
}

/// Complex amplitudes on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    pub grid: Grid,
    pub hbar: f64,
    pub amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    /// Builds and normalizes.
    pub fn new(grid: Grid, hbar: f64, amplitudes: Vec<Complex64>) -> Result<Self> {
        ensure(amplitudes.len() == grid.n, || {
            format!("{} amplitudes for a grid of {} points", amplitudes.len(), grid.n)
        })?;
        ensure(hbar > 0.0 && hbar.is_finite(), || format!("hbar must be positive, got {hbar}"))?;
        let mut psi = Self { grid, hbar, amplitudes };
        psi.normalize()?;
        Ok(psi)
    }

    pub fn from_real(grid: Grid, hbar: f64, values: &[f64]) -> Result<Self> {
        Self::new(grid, hbar, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Trapezoidal `||psi||^2`; the wall values are zero.
    pub fn norm_sq(&self) -> f64 {
        self.grid.spacing() * self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sq().sqrt();
        ensure(n.is_finite() && n > 0.0, || "cannot normalize a zero or non-finite state".into())?;
        self.amplitudes.iter_mut().for_each(|z| *z /= n);
        Ok(())
    }

    /// `<self, other>`, antilinear in `self`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        ensure(self.grid == other.grid, || "states live on different grids".into())?;
        let s: Complex64 = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.spacing())
    }

    /// `(mass on x < 0, mass on x > 0)`; a node exactly at 0 is shared equally.
    pub fn mass_split(&self) -> (f64, f64) {
        let h = self.grid.spacing();
        let (mut l, mut r) = (0.0, 0.0);
        for (i, z) in self.amplitudes.iter().enumerate() {
            let x = self.grid.point(i);
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
        (h * l, h * r)
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.re).collect()
    }

    /// Linear interpolation of the amplitude at `x`, with zero at the walls.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        let h = self.grid.spacing();
        let s = (x - self.grid.x_min) / h;
        if !(s > 0.0 && s < self.grid.n as f64 + 1.0) {
            return Complex64::new(0.0, 0.0);
        }
        let k = s.floor() as usize;
        let t = s - k as f64;
        let at = |j: usize| if j == 0 || j > self.grid.n { Complex64::new(0.0, 0.0) } else { self.amplitudes[j - 1] };
        at(k) * (1.0 - t) + at(k + 1) * t
    }

    /// Number of sign changes of the real part, skipping exact zeros.
    pub fn sign_changes(&self) -> usize {
        let scale = self.amplitudes.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let mut last = 0.0f64;
        let mut changes = 0;
        for z in &self.amplitudes {
            if z.re.abs() <= 1e-12 * scale {
                continue;
            }
            if last != 0.0 && z.re.signum() != last.signum() {
                changes += 1;
            }
            last = z.re;
        }
        changes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// `integral over x > 0 of psi >= 0`, ties broken by the integral over `x < 0`.
    PositiveRightIntegral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub hbar: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<WaveFunction>,
    pub sign_convention: SignConvention,
}

impl Spectrum {
    pub fn ground(&self) -> &WaveFunction {
        &self.eigenfunctions[0]
    }

    pub fn splitting(&self) -> Option<f64> {
        (self.eigenvalues.len() >= 2).then(|| self.eigenvalues[1] - self.eigenvalues[0])
    }
}

/// `-hbar^2 d^2/dx^2 + V` with the three-point stencil and Dirichlet walls.
pub fn assemble_hamiltonian(grid: &Grid, hbar: f64, potential: &[f64]) -> Result<SymTridiagonal> {
    ensure(potential.len() == grid.n, || format!("{} potential values for {} points", potential.len(), grid.n))?;
    let h = grid.spacing();
    let k = hbar * hbar / (h * h);
    SymTridiagonal::new(potential.iter().map(|v| 2.0 * k + v).collect(), vec![-k; grid.n - 1])
}

/// Potential sampled on the grid, flea at full strength.
pub fn sample_potential(spec: &PotentialSpec, flea: Option<&FleaSpec>, grid: &Grid) -> Vec<f64> {
    (0..grid.n).map(|i| eval_potential(spec, flea, None, grid.point(i), 0.0)).collect()
}

fn sign_normalize(grid: &Grid, v: &mut [f64]) {
    let (mut right, mut left, mut total) = (0.0, 0.0, 0.0);
    for (i, &x) in v.iter().enumerate() {
        let p = grid.point(i);
        if p > 0.0 {
            right += x;
        } else if p < 0.0 {
            left += x;
        }
        total += x.abs();
    }
    let key = if right.abs() > 1e-12 * total { right } else { left };
    if key < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The `k` lowest eigenpairs of `h`, sign-normalized and grid-normalized.
pub fn lowest_eigenpairs(h: &SymTridiagonal, k: usize, grid: &Grid, hbar: f64) -> Result<Spectrum> {
    ensure(h.len() == grid.n, || "matrix and grid sizes differ".into())?;
    let pairs = h.lowest_eigenpairs(k)?;
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenfunctions = Vec::with_capacity(k);
    for mut p in pairs {
        sign_normalize(grid, &mut p.vector);
        eigenvalues.push(p.value);
        eigenfunctions.push(WaveFunction::from_real(*grid, hbar, &p.vector)?);
    }
    Ok(Spectrum { hbar, eigenvalues, eigenfunctions, sign_convention: SignConvention::PositiveRightIntegral })
}

/// Assemble and solve in one go.
pub fn solve(spec: &PotentialSpec, flea: Option<&FleaSpec>, hbar: f64, grid: &Grid, k: usize) -> Result<Spectrum> {
    ensure(hbar > 0.0 && hbar.is_finite(), || format!("hbar must be positive, got {hbar}"))?;
    let v = sample_potential(spec, flea, grid);
    let h = assemble_hamiltonian(grid, hbar, &v)?;
    lowest_eigenpairs(&h, k, grid, hbar)
}

const MAX_REFINEMENTS: usize = 4;

/// `E_1 - E_0`, doubling the grid until it changes by less than 1%.
pub fn splitting(spec: &PotentialSpec, hbar: f64, grid: &Grid) -> Result<f64> {
    let eigen = |g: &Grid| -> Result<f64> {
        let v = sample_potential(spec, None, g);
        let h = assemble_hamiltonian(g, hbar, &v)?;
        let e = h.lowest_eigenvalues(2);
        Ok(e[1] - e[0])
    };
    let mut g = *grid;
    let mut delta = eigen(&g)?;
    let mut change = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        let finer = g.refined();
        let next = eigen(&finer)?;
        change = ((next - delta) / next).abs();
        g = finer;
        delta = next;
        if change < 0.01 {
            return Ok(delta);
        }
    }
    Err(Error::RefinementFailure { n: g.n, change })
}

/// `(psi_plus, psi_minus) = (psi_0 +- psi_1) / sqrt 2`, renormalized.
pub fn localized_combinations(spectrum: &Spectrum) -> Result<(WaveFunction, WaveFunction)> {
    ensure(spectrum.eigenfunctions.len() >= 2, || "need at least two states".into())?;
    let p0 = &spectrum.eigenfunctions[0];
    let p1 = &spectrum.eigenfunctions[1];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = p0.amplitudes.iter().zip(&p1.amplitudes).map(|(a, b)| (a + b) * s).collect();
    let minus = p0.amplitudes.iter().zip(&p1.amplitudes).map(|(a, b)| (a - b) * s).collect();
    Ok((WaveFunction::new(p0.grid, p0.hbar, plus)?, WaveFunction::new(p0.grid, p0.hbar, minus)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    /// `Re psi(a) / Re psi(-a)`; signed for real states.
    pub ratio: f64,
    pub mass_left: f64,
    pub mass_right: f64,
}

pub fn localization_ratio(psi: &WaveFunction, spec: &PotentialSpec) -> Result<Localization> {
    let a = spec.minimum();
    ensure(psi.grid.contains(a) && psi.grid.contains(-a), || format!("+-{a} lies outside the grid"))?;
    let right = psi.interpolate(a).re;
    let left = psi.interpolate(-a).re;
    let (mass_left, mass_right) = psi.mass_split();
    Ok(Localization { ratio: right / left, mass_left, mass_right })
}

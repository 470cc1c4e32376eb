//! Potentials, the flea bump, the adiabatic ramp and Agmon distances.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::quadrature::{adaptive_simpson, SIMPSON_MAX_INTERVALS, SIMPSON_TOL};

/// Default for `|d| >= threshold * exp(-d_V / hbar)`.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 100.0;

/// Values of `V` below `-NEGATIVE_TOL` count as a genuinely negative potential.
const NEGATIVE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// `V = omega^2 x^2 / 2`
    Harmonic,
    /// `V = omega^2 x^2 / 2 + lambda x^4 / 4`
    Anharmonic,
    /// `V = lambda (x^2 - a^2)^2 / 4` with `a = omega / sqrt(lambda)`
    DoubleWell,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub omega: f64,
    pub lambda: f64,
    pub kind: PotentialKind,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, omega: f64, lambda: f64) -> Result<Self> {
        ensure(omega.is_finite() && omega > 0.0, || format!("omega must be positive, got {omega}"))?;
        match kind {
            PotentialKind::Harmonic => {
                ensure(lambda.is_finite() && lambda >= 0.0, || format!("lambda must be non-negative, got {lambda}"))?
            }
            _ => ensure(lambda.is_finite() && lambda > 0.0, || format!("lambda must be positive, got {lambda}"))?,
        }
        Ok(Self { omega, lambda, kind })
    }

    pub fn double_well(omega: f64, lambda: f64) -> Result<Self> {
        Self::new(PotentialKind::DoubleWell, omega, lambda)
    }

    /// The double well with `omega = lambda = 1`, so `a = 1`, `V(0) = 1/4`, `d_V = 2/3`.
    pub fn standard() -> Self {
        Self { omega: 1.0, lambda: 1.0, kind: PotentialKind::DoubleWell }
    }

    /// Location `a` of the right minimum; zero for single wells.
    pub fn minimum(&self) -> f64 {
        match self.kind {
            PotentialKind::DoubleWell => self.omega / self.lambda.sqrt(),
            _ => 0.0,
        }
    }

    /// Length that sets the size of the computational box.
    pub fn length_scale(&self) -> f64 {
        match self.kind {
            PotentialKind::DoubleWell => self.minimum(),
            _ => 2.0 / self.omega.sqrt(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let x2 = x * x;
        match self.kind {
            PotentialKind::Harmonic => 0.5 * self.omega * self.omega * x2,
            PotentialKind::Anharmonic => 0.5 * self.omega * self.omega * x2 + 0.25 * self.lambda * x2 * x2,
            PotentialKind::DoubleWell => {
                let a = self.minimum();
                let s = x2 - a * a;
                0.25 * self.lambda * s * s
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            PotentialKind::Harmonic => self.omega * self.omega * x,
            PotentialKind::Anharmonic => self.omega * self.omega * x + self.lambda * x * x * x,
            PotentialKind::DoubleWell => {
                let a = self.minimum();
                self.lambda * x * (x * x - a * a)
            }
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self.kind {
            PotentialKind::Harmonic => self.omega * self.omega,
            PotentialKind::Anharmonic => self.omega * self.omega + 3.0 * self.lambda * x * x,
            PotentialKind::DoubleWell => {
                let a = self.minimum();
                self.lambda * (3.0 * x * x - a * a)
            }
        }
    }

    /// `V(0)`, the barrier height of the double well.
    pub fn barrier_height(&self) -> f64 {
        self.value(0.0)
    }
}

/// The bump `d exp(1/c^2 - 1/(c^2 - (x-b)^2))` on `(b - c, b + c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleaSpec {
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl FleaSpec {
    pub fn new(b: f64, c: f64, d: f64) -> Result<Self> {
        ensure(b.is_finite() && d.is_finite(), || "flea center and height must be finite".into())?;
        ensure(c.is_finite() && c > 0.0, || format!("flea half-width must be positive, got {c}"))?;
        Ok(Self { b, c, d })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.b - self.c, self.b + self.c)
    }

    pub fn mirrored(&self) -> Self {
        Self { b: -self.b, ..*self }
    }

    pub fn negated(&self) -> Self {
        Self { d: -self.d, ..*self }
    }

    fn exponent(&self, x: f64) -> Option<(f64, f64, f64)> {
        let u = x - self.b;
        let w = self.c * self.c - u * u;
        if u.abs() >= self.c || w <= 0.0 {
            return None;
        }
        Some((u, w, 1.0 / (self.c * self.c) - 1.0 / w))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.exponent(x) {
            Some((_, _, g)) => self.d * g.exp(),
            None => 0.0,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.exponent(x) {
            Some((u, w, g)) => self.d * g.exp() * (-2.0 * u / (w * w)),
            None => 0.0,
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self.exponent(x) {
            Some((u, w, g)) => {
                let g1 = -2.0 * u / (w * w);
                let g2 = -2.0 / (w * w) - 8.0 * u * u / (w * w * w);
                self.d * g.exp() * (g1 * g1 + g2)
            }
            None => 0.0,
        }
    }
}

/// Half-sine switch-on of the flea over `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    #[serde(rename = "T")]
    pub duration: f64,
}

impl RampSpec {
    pub fn new(duration: f64) -> Result<Self> {
        ensure(duration.is_finite() && duration > 0.0, || format!("ramp duration must be positive, got {duration}"))?;
        Ok(Self { duration })
    }

    /// Weight of the flea at time `t`: 0 before the ramp, 1 after it.
    pub fn weight(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= self.duration {
            1.0
        } else {
            (std::f64::consts::FRAC_PI_2 * t / self.duration).sin()
        }
    }
}

/// `V(x) + w(t) dV(x)`. Without a ramp the flea acts at full strength.
pub fn eval_potential(
    spec: &PotentialSpec,
    flea: Option<&FleaSpec>,
    ramp: Option<&RampSpec>,
    x: f64,
    t: f64,
) -> f64 {
    let v = spec.value(x);
    match flea {
        None => v,
        Some(f) => {
            let w = ramp.map_or(1.0, |r| r.weight(t));
            if w == 0.0 {
                v
            } else {
                v + w * f.value(x)
            }
        }
    }
}

/// `|integral of sqrt(V) from y to z|`.
pub fn agmon_distance(spec: &PotentialSpec, y: f64, z: f64) -> Result<f64> {
    if y == z {
        return Ok(0.0);
    }
    let (lo, hi) = if y < z { (y, z) } else { (z, y) };
    let worst = std::cell::Cell::new((f64::INFINITY, 0.0));
    let integral = adaptive_simpson(
        |x| {
            let v = spec.value(x);
            if v < worst.get().0 {
                worst.set((v, x));
            }
            v.max(0.0).sqrt()
        },
        lo,
        hi,
        SIMPSON_TOL,
        SIMPSON_MAX_INTERVALS,
    )?;
    let (v, x) = worst.get();
    if v < -NEGATIVE_TOL {
        return Err(Error::NegativePotentialRegion { x, value: v });
    }
    Ok(integral.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FleaCase {
    /// `d_V' < d_V < d_V''`
    Edge,
    /// `d_V' < d_V'' < d_V`
    Bump,
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleaClassification {
    pub d_v: f64,
    pub d_v_prime: f64,
    pub d_v_doubleprime: f64,
    pub case: FleaCase,
}

fn distance_to_interval(spec: &PotentialSpec, y: f64, lo: f64, hi: f64) -> Result<f64> {
    if y >= lo && y <= hi {
        Ok(0.0)
    } else if y < lo {
        agmon_distance(spec, y, lo)
    } else {
        agmon_distance(spec, hi, y)
    }
}

pub fn classify_flea(spec: &PotentialSpec, flea: &FleaSpec) -> Result<FleaClassification> {
    ensure(spec.kind == PotentialKind::DoubleWell, || "flea classification needs a double well".into())?;
    let a = spec.minimum();
    let (lo, hi) = flea.support();
    for m in [-a, a] {
        if m > lo && m < hi {
            return Err(Error::FleaCoversMinimum { minimum: m, lo, hi });
        }
    }
    let d_v = agmon_distance(spec, -a, a)?;
    let left = distance_to_interval(spec, -a, lo, hi)?;
    let right = distance_to_interval(spec, a, lo, hi)?;
    let d_v_prime = 2.0 * left.min(right);
    let d_v_doubleprime = 2.0 * left.max(right);
    // Mirror-placed fleas give equal distances up to quadrature rounding.
    let tied = d_v_doubleprime - d_v_prime <= SIMPSON_TOL * (1.0 + d_v);
    let case = if tied {
        FleaCase::Invalid
    } else if d_v_prime < d_v && d_v < d_v_doubleprime {
        FleaCase::Edge
    } else if d_v_prime < d_v_doubleprime && d_v_doubleprime < d_v {
        FleaCase::Bump
    } else {
        FleaCase::Invalid
    };
    Ok(FleaClassification { d_v, d_v_prime, d_v_doubleprime, case })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleaSizeReport {
    pub satisfied: bool,
    /// `|d| / exp(-d_V/hbar)`; may be `inf` for tiny hbar.
    pub ratio: f64,
    /// Natural log of `ratio`, always finite for `d != 0`.
    pub log_ratio: f64,
    pub threshold: f64,
}

pub fn flea_size_check(
    spec: &PotentialSpec,
    flea: &FleaSpec,
    hbar: f64,
    ratio_threshold: f64,
) -> Result<FleaSizeReport> {
    ensure(hbar > 0.0, || format!("hbar must be positive, got {hbar}"))?;
    let a = spec.minimum();
    let d_v = agmon_distance(spec, -a, a)?;
    let log_ratio = flea.d.abs().ln() + d_v / hbar;
    let ratio = log_ratio.exp();
    let satisfied = flea.d != 0.0 && log_ratio >= ratio_threshold.ln();
    Ok(FleaSizeReport { satisfied, ratio, log_ratio, threshold: ratio_threshold })
}

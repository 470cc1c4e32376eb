use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("potential is negative ({value:e}) at x = {x}")]
    NegativePotentialRegion { x: f64, value: f64 },

    #[error("flea support ({lo}, {hi}) contains the minimum at x = {minimum}")]
    FleaCoversMinimum { minimum: f64, lo: f64, hi: f64 },

    #[error("adaptive quadrature exceeded {intervals} subintervals")]
    QuadratureFailure { intervals: usize },

    #[error("eigenpair {index} did not converge")]
    ConvergenceFailure { index: usize },

    #[error("splitting still changed by {change:.3e} (relative) at n = {n}")]
    RefinementFailure { n: usize, change: f64 },

    #[error("crank-nicolson step {step} changed the norm by {drift:e}")]
    StepRejected { step: usize, drift: f64 },

    #[error("no ensemble member crossed the classification threshold")]
    UnclassifiedOutcome,

    #[error("phase-space disks of radius {radius} around +-{a} overlap")]
    OverlappingDisks { radius: f64, a: f64 },

    #[error("renormalization at step {step} corrected the norm by {correction:e}")]
    NormBlowup { step: usize, correction: f64 },

    #[error("energy {energy} gives {sign_changes} turning points, expected 4")]
    WrongTopology { energy: f64, sign_changes: usize },

    #[error("quantization residual has a pole near the current energy (|cos| = {cosine:e})")]
    PoleProximity { cosine: f64 },

    #[error("level {n} lies above the barrier top")]
    LevelAboveBarrier { n: usize },

    #[error("could not bracket level {n} on the {branch} branch")]
    NoBracket { n: usize, branch: &'static str },

    #[error("only {observed} of the paths transitioned, at least {required} needed")]
    NoTransitions { observed: usize, required: usize },
}

impl Error {
    /// True for failures of the numerics, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidInput(_) | Error::FleaCoversMinimum { .. } | Error::OverlappingDisks { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg()))
    }
}

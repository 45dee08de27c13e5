use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How the constraint set `C` bounding `||XA||_{2,inf}` and `||YB||_{2,inf}`
/// takes part in the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    /// Project every iterate onto `C`.
    Enforce,
    /// Record whether the iterate left `C`, but never move it.
    #[default]
    Monitor,
    /// Skip all bookkeeping about `C`.
    Off,
}

impl FromStr for ProjectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enforce" => Ok(Self::Enforce),
            "monitor" => Ok(Self::Monitor),
            "off" => Ok(Self::Off),
            other => Err(Error::invalid(format!(
                "unknown projection mode `{other}` (expected enforce, monitor or off)"
            ))),
        }
    }
}

impl fmt::Display for ProjectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Enforce => "enforce",
            Self::Monitor => "monitor",
            Self::Off => "off",
        })
    }
}

/// Step-size selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `eta = scale / sigma_1(Z0)`; the interpolation solver further divides
    /// by `1 + 2 lambda` to absorb the penalty's curvature.
    Spectral { scale: f64 },
    /// A fixed `eta`.
    Fixed(f64),
    /// The conservative convergence-guarantee step
    /// `1 / (480000 (n / n_min)^2 mu0^2 r^2 kappa sigma_max)`.
    Conservative,
}

impl Default for StepRule {
    fn default() -> Self {
        Self::Spectral { scale: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    pub step: StepRule,
    pub max_iters: usize,
    /// Stop once `|f_{t-1} - f_t| / f_{t-1} < rel_tol`.
    pub rel_tol: f64,
    /// Stop once the loss drops below this multiple of the loss at the zero
    /// factors, `||P_Omega(M)||_F^2 / 2p`.
    pub loss_floor: f64,
    pub projection: ProjectionMode,
    /// Incoherence used in the projection radius; falls back to the
    /// ground truth's `mu0` when one is supplied, and to `n_min / r` otherwise.
    pub mu0_hint: Option<f64>,
    pub seed: u64,
    /// Record `||L_t - L*||_F / ||L*||_F` at every iteration when a ground
    /// truth is supplied.
    pub track_error: bool,
    /// Halve the step (for the rest of the run) whenever a step would raise
    /// the loss, instead of accepting it.
    pub backtrack: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rank: 1,
            step: StepRule::default(),
            max_iters: 2000,
            rel_tol: 1e-12,
            loss_floor: 1e-24,
            projection: ProjectionMode::Monitor,
            mu0_hint: None,
            seed: 0,
            track_error: false,
            backtrack: true,
        }
    }
}

impl SolverConfig {
    pub fn with_rank(rank: usize) -> Self {
        Self {
            rank,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::invalid(format!("rel_tol must be >= 0, got {}", self.rel_tol)));
        }
        if !(self.loss_floor >= 0.0) {
            return Err(Error::invalid(format!(
                "loss_floor must be >= 0, got {}",
                self.loss_floor
            )));
        }
        match self.step {
            StepRule::Spectral { scale } if !(scale > 0.0 && scale.is_finite()) => {
                return Err(Error::invalid(format!("step scale must be > 0, got {scale}")))
            }
            StepRule::Fixed(eta) if !(eta > 0.0 && eta.is_finite()) => {
                return Err(Error::invalid(format!("step size must be > 0, got {eta}")))
            }
            _ => {}
        }
        if let Some(mu) = self.mu0_hint {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::invalid(format!("mu0 hint must be > 0, got {mu}")));
            }
        }
        Ok(())
    }
}

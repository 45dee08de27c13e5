//! The three estimators: side-information gradient descent, the ambient
//! baseline and the penalized interpolation between them.

mod config;
mod driver;
mod imc;
mod interp;
mod mc;
mod trace;

pub use config::{ProjectionMode, SolverConfig, StepRule};
pub use driver::DIVERGENCE_FACTOR;
pub use imc::{
    conservative_step, imc_gradient, imc_loss, project_c, projection_radius, solve_imc,
    spectral_init_imc, SpectralInit,
};
pub use interp::{interp_gradient, interp_loss, side_penalty, solve_interp};
pub use mc::{mc_gradient, mc_loss, solve_mc, spectral_init_mc};
pub use trace::{IterRecord, SolverTrace, StopReason, TRACE_HEADER};

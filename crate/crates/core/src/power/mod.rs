//! Power allocation for a fixed assignment and activation by successive
//! convex approximation. Each rate is split into a difference of concave
//! functions; the subtracted term is replaced by its tangent, and the
//! resulting concave subproblem is solved with a log-barrier method.

mod dc;
mod ipm;
mod sca;

pub use dc::{build_dc_model, DcModel};
pub use sca::{
    kkt_residual, linearize, phase_one, run_sca, solve_subproblem, Multipliers, ScaIterate,
    ScaOptions, ScaRun, ScaStep, ScaTrace, Surrogate,
};

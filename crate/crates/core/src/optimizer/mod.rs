//! Optimal social states under the error constraint.
//!
//! Two solvers share one objective and one tie-break: [`solve_bruteforce`]
//! walks the whole participation box and serves as the oracle, while
//! [`solve_structured`] only scores the all-or-none corners plus the interior
//! candidates that can be optimal when some types lie above the
//! heterogeneity point.

mod alignment;
mod lagrangian;
mod solve;

pub use alignment::{check_alignment, AlignmentReport, AlignmentWitness};
pub use lagrangian::{lagrangian, theta, LagrangianContext};
pub use solve::{
    eps_min, find_lambda, solve_bruteforce, solve_fl_optimum, solve_structured, SolveResult,
};

pub(crate) use solve::min_error_state;

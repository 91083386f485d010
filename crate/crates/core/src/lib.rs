//! Analytic model of federated-learning network effects, application-aware
//! social-welfare optimization and the SWAN pricing/reward mechanism.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`] holds the problem instance ([`Scenario`]) and the closed-form
//!   generalization error together with the network-effect analytics.
//! * [`economy`] evaluates utilities, client payoffs, welfare and platform cost.
//! * [`optimizer`] finds optimal social states, the Lagrange multiplier and the
//!   multilinear interpolation of the Lagrangian.
//! * [`mechanism`] turns an optimum into state-dependent prices and rewards.
//! * [`game`] runs best-response dynamics under any mechanism and verifies
//!   Nash equilibria.

pub mod economy;
pub mod enumerate;
mod error;
pub mod game;
pub mod mechanism;
pub mod model;
pub mod optimizer;

pub use economy::{
    payoff, platform_cost, utility, welfare_fl, welfare_mots, Strategy, StrategyProfile,
    UtilityFunction, WelfareReport,
};
pub use error::{Error, Result};
pub use game::{
    best_response_dynamics, verify_nash, Deviation, DynamicsConfig, EquilibriumResult, NashCheck,
    TraceRow,
};
pub use mechanism::{
    modified_fl_quote, swan_quote, swan_quote_with_floor, Branch, Mechanism, ModifiedFlQuote,
    QuoteDump, SwanQuote, ZeroMechanism,
};
pub use model::{
    classify_region, coalition_merge_beneficial, error_partial, eta_threshold, example1_threshold,
    generalization_error, network_effect, ClientType, GenError, HeterogeneityParams, Region,
    RegionReport, Scenario, SocialState,
};
pub use optimizer::{
    check_alignment, eps_min, find_lambda, lagrangian, solve_bruteforce, solve_fl_optimum,
    solve_structured, theta, AlignmentReport, AlignmentWitness, LagrangianContext, SolveResult,
};

/// Absolute tolerance for comparisons against analytic thresholds.
pub const THRESHOLD_TOL: f64 = 1e-12;

/// Absolute tolerance for payoff comparisons between strategies.
pub const PAYOFF_TOL: f64 = 1e-9;

/// Largest state space the exhaustive routines will walk.
pub const ENUMERATION_GUARD: u128 = 10_000_000;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid social state: {0}")]
    InvalidState(String),

    #[error("invalid strategy profile: {0}")]
    InvalidProfile(String),

    #[error("{0} requires at least one participant")]
    EmptyCoalition(&'static str),

    #[error("type {0} has no client left to join")]
    NoCapacity(usize),

    #[error("type index {index} out of range for {types} types")]
    TypeIndex { index: usize, types: usize },

    #[error("utility is undefined at non-positive error {0}")]
    NonPositiveError(f64),

    #[error("error requirement {eps_req} is below the minimum achievable error {eps_min}")]
    Infeasible { eps_req: f64, eps_min: f64 },

    #[error("Lagrangian penalty is singular at state {0:?}: error equals client variance")]
    Singular(Vec<u32>),

    #[error("state space of {size} points exceeds the enumeration guard of {limit}")]
    TooLarge { size: u128, limit: u128 },

    #[error(
        "incentive ratio undefined: optimal Lagrangian equals its floor while welfare is positive"
    )]
    DegeneratePotential,
}

//! Pricing and reward rules.
//!
//! A [`Mechanism`] quotes a model price and per-type rewards as functions of
//! the realized state; the game only ever talks to this trait.

use serde::{Deserialize, Serialize};

use crate::economy::utility_at;
use crate::model::{Scenario, SocialState};
use crate::optimizer::{lagrangian, theta, LagrangianContext, SolveResult};
use crate::{Error, Result, THRESHOLD_TOL};

/// Incentive ratio used when the optimal welfare is not positive.
pub const TAU_FLOOR: f64 = 1e-9;

pub trait Mechanism: Send + Sync {
    fn name(&self) -> &str;

    /// Price `p` charged to each buyer.
    fn price(&self, state: &SocialState) -> Result<f64>;

    /// Reward `rᵢ` paid to each type-`i` participant (may be negative).
    fn reward(&self, state: &SocialState, i: usize) -> Result<f64>;

    /// Exact potential of the induced game, if the mechanism has one.
    fn potential(&self, _state: &SocialState) -> Option<f64> {
        None
    }
}

/// No price, no reward: the raw game.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ZeroMechanism;

impl Mechanism for ZeroMechanism {
    fn name(&self) -> &str {
        "zero"
    }

    fn price(&self, _state: &SocialState) -> Result<f64> {
        Ok(0.0)
    }

    fn reward(&self, _state: &SocialState, _i: usize) -> Result<f64> {
        Ok(0.0)
    }
}

/// Price equal to the model utility and a flat participation payment.
///
/// The payment is quoted net of the model's value, so a participant ends up
/// with `fixed_reward − Cᵢ` whatever the network effect.
#[derive(Debug, Clone)]
pub struct ModifiedFlQuote {
    scenario: Scenario,
    pub fixed_reward: f64,
}

pub fn modified_fl_quote(scenario: &Scenario, fixed_reward: f64) -> ModifiedFlQuote {
    ModifiedFlQuote {
        scenario: scenario.clone(),
        fixed_reward,
    }
}

impl Mechanism for ModifiedFlQuote {
    fn name(&self) -> &str {
        "modified_fl"
    }

    fn price(&self, state: &SocialState) -> Result<f64> {
        Ok(utility_at(&self.scenario, &state.participants))
    }

    fn reward(&self, state: &SocialState, _i: usize) -> Result<f64> {
        Ok(self.fixed_reward - utility_at(&self.scenario, &state.participants))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `σ² ≤ dγ²/D_I`: the potential is the multilinear interpolation `θ`.
    Low,
    /// Some type is above the heterogeneity point: the potential is `L` itself.
    High,
}

/// The SWAN quote: `p = U − τ(Θ − L₀)` and `rᵢ = Cᵢ − U + τ(Θ − L₀)`.
#[derive(Debug, Clone)]
pub struct SwanQuote {
    scenario: Scenario,
    ctx: LagrangianContext,
    pub branch: Branch,
    pub tau: f64,
    pub solve: SolveResult,
}

/// Builds the SWAN quote from an optimum and its Lagrangian context.
pub fn swan_quote(
    scenario: &Scenario,
    solve: &SolveResult,
    ctx: &LagrangianContext,
) -> Result<SwanQuote> {
    swan_quote_with_floor(scenario, solve, ctx, TAU_FLOOR)
}

/// As [`swan_quote`] with an explicit incentive ratio for `W* ≤ 0`.
pub fn swan_quote_with_floor(
    scenario: &Scenario,
    solve: &SolveResult,
    ctx: &LagrangianContext,
    tau_floor: f64,
) -> Result<SwanQuote> {
    if !(tau_floor.is_finite() && tau_floor > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "tau floor must be positive, got {tau_floor}"
        )));
    }
    let branch = if scenario.high_heterogeneity() {
        Branch::High
    } else {
        Branch::Low
    };
    let tau = if solve.w_star > 0.0 {
        let at_opt = lagrangian(&SocialState::training(solve.k_star.clone()), ctx, scenario)?;
        let gap = at_opt - ctx.l_floor;
        if gap <= THRESHOLD_TOL * at_opt.abs().max(1.0) {
            return Err(Error::DegeneratePotential);
        }
        solve.w_star / f64::from(scenario.total_population()) / gap
    } else {
        tau_floor
    };
    Ok(SwanQuote {
        scenario: scenario.clone(),
        ctx: ctx.clone(),
        branch,
        tau,
        solve: solve.clone(),
    })
}

impl SwanQuote {
    pub fn l_floor(&self) -> f64 {
        self.ctx.l_floor
    }

    pub fn context(&self) -> &LagrangianContext {
        &self.ctx
    }

    /// `Θ(K)`: `θ` in the low branch, `L` in the high one.
    pub fn big_theta(&self, state: &SocialState) -> Result<f64> {
        match self.branch {
            Branch::Low => theta(state, &self.ctx, &self.scenario),
            Branch::High => lagrangian(state, &self.ctx, &self.scenario),
        }
    }

    fn incentive(&self, state: &SocialState) -> Result<f64> {
        Ok(self.tau * (self.big_theta(state)? - self.ctx.l_floor))
    }

    /// Quote evaluated at the optimum `(K*, B*)`.
    pub fn dump(&self) -> Result<QuoteDump> {
        let state = SocialState::new(self.solve.k_star.clone(), self.solve.b_star.clone());
        Ok(QuoteDump {
            branch: self.branch,
            tau: self.tau,
            l_floor: self.ctx.l_floor,
            lambda: self.ctx.lambda,
            price_at_kstar: self.price(&state)?,
            rewards_at_kstar: (0..self.scenario.num_types())
                .map(|i| self.reward(&state, i))
                .collect::<Result<_>>()?,
        })
    }
}

impl Mechanism for SwanQuote {
    fn name(&self) -> &str {
        "swan"
    }

    fn price(&self, state: &SocialState) -> Result<f64> {
        Ok(utility_at(&self.scenario, &state.participants) - self.incentive(state)?)
    }

    fn reward(&self, state: &SocialState, i: usize) -> Result<f64> {
        let cost = self
            .scenario
            .types()
            .get(i)
            .ok_or(Error::TypeIndex {
                index: i,
                types: self.scenario.num_types(),
            })?
            .cost;
        Ok(cost - utility_at(&self.scenario, &state.participants) + self.incentive(state)?)
    }

    fn potential(&self, state: &SocialState) -> Option<f64> {
        self.incentive(state).ok()
    }
}

/// Serializable summary of a SWAN quote at the optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteDump {
    pub branch: Branch,
    pub tau: f64,
    #[serde(rename = "L_floor")]
    pub l_floor: f64,
    pub lambda: f64,
    pub price_at_kstar: f64,
    pub rewards_at_kstar: Vec<f64>,
}

//! Utilities, client payoffs, welfare of both frameworks and platform cost.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mechanism::Mechanism;
use crate::model::{GenError, Scenario, SocialState};
use crate::{Error, Result};

/// Client utility of a model as a function of its generalization error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UtilityFunction {
    /// `U(ε) = scale · ε^(−exponent)`.
    Power { scale: f64, exponent: f64 },
    /// Piecewise-linear interpolation of `(ε, U)` points sorted by `ε`,
    /// constant beyond either end.
    CustomTable { points: Vec<[f64; 2]> },
}

impl UtilityFunction {
    pub fn power(scale: f64, exponent: f64) -> Self {
        UtilityFunction::Power { scale, exponent }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UtilityFunction::Power { scale, exponent } => {
                if !(scale.is_finite() && *scale > 0.0 && exponent.is_finite() && *exponent > 0.0) {
                    return Err(Error::InvalidScenario(format!(
                        "power utility needs positive finite scale and exponent, got {scale} and {exponent}"
                    )));
                }
            }
            UtilityFunction::CustomTable { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidScenario("utility table is empty".into()));
                }
                if points
                    .iter()
                    .any(|[e, u]| !(e.is_finite() && *e > 0.0 && u.is_finite() && *u >= 0.0))
                {
                    return Err(Error::InvalidScenario(
                        "utility table needs positive errors and non-negative utilities".into(),
                    ));
                }
                for w in points.windows(2) {
                    if w[1][0] <= w[0][0] {
                        return Err(Error::InvalidScenario(
                            "utility table errors must be strictly increasing".into(),
                        ));
                    }
                    if w[1][1] > w[0][1] {
                        return Err(Error::InvalidScenario(
                            "utility table must be non-increasing in the error".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `U(ε)` for a positive finite error. The power law is evaluated in the
    /// log domain.
    pub fn value(&self, eps: f64) -> Result<f64> {
        if eps.is_nan() || eps <= 0.0 {
            return Err(Error::NonPositiveError(eps));
        }
        if eps == f64::INFINITY {
            return Ok(0.0);
        }
        Ok(match self {
            UtilityFunction::Power { scale, exponent } => (scale.ln() - exponent * eps.ln()).exp(),
            UtilityFunction::CustomTable { points } => {
                let (i, t) = segment(points, eps);
                match i {
                    None => points[t][1],
                    Some(i) => {
                        let [e0, u0] = points[i];
                        let [e1, u1] = points[i + 1];
                        u0 + (u1 - u0) * (eps - e0) / (e1 - e0)
                    }
                }
            }
        })
    }

    /// `U′(ε)`; for tables the slope of the segment containing `ε`.
    pub fn derivative(&self, eps: f64) -> f64 {
        match self {
            UtilityFunction::Power { exponent, .. } => {
                -exponent * self.value(eps).unwrap_or(0.0) / eps
            }
            UtilityFunction::CustomTable { points } => match segment(points, eps).0 {
                None => 0.0,
                Some(i) => {
                    let [e0, u0] = points[i];
                    let [e1, u1] = points[i + 1];
                    (u1 - u0) / (e1 - e0)
                }
            },
        }
    }

    /// `U″(ε)`; zero for tables away from the kinks.
    pub fn second_derivative(&self, eps: f64) -> f64 {
        match self {
            UtilityFunction::Power { exponent, .. } => {
                exponent * (exponent + 1.0) * self.value(eps).unwrap_or(0.0) / (eps * eps)
            }
            UtilityFunction::CustomTable { .. } => 0.0,
        }
    }
}

/// Segment index `i` with `points[i].ε ≤ eps < points[i+1].ε`, or `None` and
/// the clamped endpoint index when `eps` is outside the table.
fn segment(points: &[[f64; 2]], eps: f64) -> (Option<usize>, usize) {
    let last = points.len() - 1;
    if eps <= points[0][0] {
        return (None, 0);
    }
    if eps >= points[last][0] {
        return (None, last);
    }
    let i = points.partition_point(|p| p[0] <= eps) - 1;
    (Some(i), i)
}

/// `U(ε)`, zero without a model.
pub fn utility(eps: GenError, u: &UtilityFunction) -> Result<f64> {
    match eps {
        GenError::NoModel => Ok(0.0),
        GenError::Model(e) => u.value(e),
    }
}

/// The error of any non-empty coalition is positive, so this cannot fail.
pub(crate) fn utility_at(scenario: &Scenario, participants: &[u32]) -> f64 {
    utility(scenario.error_of(participants), scenario.utility()).expect("positive error")
}

/// Abstain, join training, or buy the trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "A")]
    Abstain,
    #[serde(rename = "J")]
    Join,
    #[serde(rename = "B")]
    Buy,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Join, Strategy::Buy, Strategy::Abstain];

    pub fn symbol(self) -> char {
        match self {
            Strategy::Abstain => 'A',
            Strategy::Join => 'J',
            Strategy::Buy => 'B',
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// One strategy per client; clients are numbered type by type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyProfile {
    type_of: Vec<usize>,
    strategies: Vec<Strategy>,
}

impl StrategyProfile {
    /// Every client plays `s`.
    pub fn uniform(scenario: &Scenario, s: Strategy) -> Self {
        let type_of: Vec<usize> = scenario
            .types()
            .iter()
            .enumerate()
            .flat_map(|(i, t)| std::iter::repeat(i).take(t.population as usize))
            .collect();
        let strategies = vec![s; type_of.len()];
        Self {
            type_of,
            strategies,
        }
    }

    /// Within each type the first `Kᵢ` clients join, the next `Bᵢ` buy.
    pub fn from_state(scenario: &Scenario, state: &SocialState) -> Result<Self> {
        state.validate(scenario)?;
        let mut profile = Self::uniform(scenario, Strategy::Abstain);
        let mut n = 0;
        for (i, t) in scenario.types().iter().enumerate() {
            for m in 0..t.population {
                profile.strategies[n] = if m < state.participants[i] {
                    Strategy::Join
                } else if m < state.participants[i] + state.buyers[i] {
                    Strategy::Buy
                } else {
                    Strategy::Abstain
                };
                n += 1;
            }
        }
        Ok(profile)
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn strategy(&self, n: usize) -> Strategy {
        self.strategies[n]
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn client_type(&self, n: usize) -> usize {
        self.type_of[n]
    }

    pub fn set(&mut self, n: usize, s: Strategy) {
        self.strategies[n] = s;
    }

    /// Induced counts `(K, B)`.
    pub fn state(&self, num_types: usize) -> SocialState {
        let mut k = vec![0; num_types];
        let mut b = vec![0; num_types];
        for (&i, &s) in self.type_of.iter().zip(&self.strategies) {
            match s {
                Strategy::Join => k[i] += 1,
                Strategy::Buy => b[i] += 1,
                Strategy::Abstain => {}
            }
        }
        SocialState::new(k, b)
    }

    /// Checks client counts per type and that nobody buys a model nobody trains.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let mut counts = vec![0u32; scenario.num_types()];
        for &i in &self.type_of {
            if i >= counts.len() {
                return Err(Error::InvalidProfile(format!("client of unknown type {i}")));
            }
            counts[i] += 1;
        }
        if counts != scenario.populations() {
            return Err(Error::InvalidProfile(
                "client counts do not match the type populations".into(),
            ));
        }
        self.state(scenario.num_types())
            .validate(scenario)
            .map_err(|e| Error::InvalidProfile(e.to_string()))
    }

    /// Buyers revert to abstaining when nobody trains.
    pub fn normalize(&mut self) {
        if !self.strategies.contains(&Strategy::Join) {
            for s in &mut self.strategies {
                if *s == Strategy::Buy {
                    *s = Strategy::Abstain;
                }
            }
        }
    }
}

/// Payoff of a type-`i` client playing `s` when the realized state is `state`
/// (which already counts this client's own choice).
pub fn strategy_payoff(
    state: &SocialState,
    i: usize,
    s: Strategy,
    mechanism: &dyn Mechanism,
    scenario: &Scenario,
) -> Result<f64> {
    match s {
        Strategy::Abstain => Ok(0.0),
        Strategy::Join => {
            let u = utility_at(scenario, &state.participants);
            Ok(u - scenario.types()[i].cost + mechanism.reward(state, i)?)
        }
        Strategy::Buy => {
            if state.total_participants() == 0 {
                return Err(Error::InvalidProfile(
                    "client buys while nobody trains the model".into(),
                ));
            }
            let u = utility_at(scenario, &state.participants);
            Ok(u - mechanism.price(state)?)
        }
    }
}

/// Payoff of client `n`: `0`, `U(ε) − Cᵢ + rᵢ` or `U(ε) − p` for A, J, B.
pub fn payoff(
    n: usize,
    profile: &StrategyProfile,
    mechanism: &dyn Mechanism,
    scenario: &Scenario,
) -> Result<f64> {
    profile.validate(scenario)?;
    let state = profile.state(scenario.num_types());
    strategy_payoff(
        &state,
        profile.client_type(n),
        profile.strategy(n),
        mechanism,
        scenario,
    )
}

/// `W_MoTS = Σᵢ [Kᵢ(U(ε) − Cᵢ) + Bᵢ·U(ε)]`.
pub fn welfare_mots(state: &SocialState, scenario: &Scenario) -> f64 {
    let u = utility_at(scenario, &state.participants);
    state
        .participants
        .iter()
        .zip(&state.buyers)
        .zip(scenario.types())
        .map(|((&k, &b), t)| f64::from(k) * (u - t.cost) + f64::from(b) * u)
        .sum()
}

/// `W_FL = Σᵢ Kᵢ(U(ε) − Cᵢ)`; only participants obtain the model.
pub fn welfare_fl(state: &SocialState, scenario: &Scenario) -> f64 {
    let u = utility_at(scenario, &state.participants);
    state
        .participants
        .iter()
        .zip(scenario.types())
        .map(|(&k, t)| f64::from(k) * (u - t.cost))
        .sum()
}

/// `[Σᵢ Kᵢrᵢ − Σᵢ Bᵢp]⁺` with the mechanism evaluated at `state`.
pub fn platform_cost(state: &SocialState, mechanism: &dyn Mechanism) -> Result<f64> {
    let mut rewards = 0.0;
    for (i, &k) in state.participants.iter().enumerate() {
        if k > 0 {
            rewards += f64::from(k) * mechanism.reward(state, i)?;
        }
    }
    let buyers = state.total_buyers();
    let payments = if buyers > 0 {
        f64::from(buyers) * mechanism.price(state)?
    } else {
        0.0
    };
    Ok((rewards - payments).max(0.0))
}

/// Welfare, platform cost and per-type payoff totals of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub w_mots: f64,
    pub w_fl: f64,
    pub platform_cost: f64,
    pub client_payoffs: Vec<f64>,
}

impl WelfareReport {
    pub fn evaluate(
        profile: &StrategyProfile,
        mechanism: &dyn Mechanism,
        scenario: &Scenario,
    ) -> Result<Self> {
        profile.validate(scenario)?;
        let state = profile.state(scenario.num_types());
        let mut client_payoffs = vec![0.0; scenario.num_types()];
        for n in 0..profile.len() {
            let i = profile.client_type(n);
            client_payoffs[i] +=
                strategy_payoff(&state, i, profile.strategy(n), mechanism, scenario)?;
        }
        Ok(Self {
            w_mots: welfare_mots(&state, scenario),
            w_fl: welfare_fl(&state, scenario),
            platform_cost: platform_cost(&state, mechanism)?,
            client_payoffs,
        })
    }
}

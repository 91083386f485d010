//! Best-response dynamics and Nash verification.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::economy::{strategy_payoff, Strategy, StrategyProfile, WelfareReport};
use crate::mechanism::Mechanism;
use crate::model::{Scenario, SocialState};
use crate::{Result, PAYOFF_TOL};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub max_rounds: u32,
    pub seed: u64,
    /// Record every strategy switch.
    pub trace: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            max_rounds: 1000,
            seed: 0,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: u32,
    pub client_id: usize,
    /// 1-based type index.
    #[serde(rename = "type")]
    pub type_index: usize,
    pub old: Strategy,
    pub new: Strategy,
    /// Mechanism potential after the switch, when it has one.
    pub potential: Option<f64>,
}

/// A profitable unilateral deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub client_id: usize,
    pub from: Strategy,
    pub to: Strategy,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCheck {
    pub holds: bool,
    pub witness: Option<Deviation>,
    pub deviations_checked: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub final_profile: StrategyProfile,
    pub converged: bool,
    /// Full passes over the clients, including the final quiet one.
    pub rounds: u32,
    pub nash_verified: bool,
    pub witness: Option<Deviation>,
    pub state: SocialState,
    pub welfare: WelfareReport,
    pub deviations_checked: u64,
    pub trace: Vec<TraceRow>,
}

/// Payoffs of `J`, `B`, `A` for client `n` against the others' choices.
/// `B` is unavailable (`None`) when nobody else trains.
fn options(
    scenario: &Scenario,
    mechanism: &dyn Mechanism,
    others: &SocialState,
    i: usize,
) -> Result<[Option<f64>; 3]> {
    let mut out = [None, None, Some(0.0)];
    let mut joined = others.clone();
    joined.participants[i] += 1;
    out[0] = Some(strategy_payoff(
        &joined,
        i,
        Strategy::Join,
        mechanism,
        scenario,
    )?);
    if others.total_participants() > 0 {
        let mut bought = others.clone();
        bought.buyers[i] += 1;
        out[1] = Some(strategy_payoff(
            &bought,
            i,
            Strategy::Buy,
            mechanism,
            scenario,
        )?);
    }
    Ok(out)
}

fn slot(s: Strategy) -> usize {
    match s {
        Strategy::Join => 0,
        Strategy::Buy => 1,
        Strategy::Abstain => 2,
    }
}

fn remove(state: &mut SocialState, i: usize, s: Strategy) {
    match s {
        Strategy::Join => state.participants[i] -= 1,
        Strategy::Buy => state.buyers[i] -= 1,
        Strategy::Abstain => {}
    }
}

fn add(state: &mut SocialState, i: usize, s: Strategy) {
    match s {
        Strategy::Join => state.participants[i] += 1,
        Strategy::Buy => state.buyers[i] += 1,
        Strategy::Abstain => {}
    }
}

/// Runs seeded best-response dynamics and verifies the end profile.
///
/// In each round every client, in a freshly shuffled order, moves to its best
/// response if that beats its current payoff by more than `1e-9`; among
/// near-best responses `J` is preferred to `B` to `A`. A sole participant who
/// leaves strands the buyers, who are reset to `A`.
pub fn best_response_dynamics(
    scenario: &Scenario,
    mechanism: &dyn Mechanism,
    initial: &StrategyProfile,
    config: &DynamicsConfig,
) -> Result<EquilibriumResult> {
    let mut profile = initial.clone();
    profile.normalize();
    profile.validate(scenario)?;
    let types = scenario.num_types();
    let mut state = profile.state(types);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..profile.len()).collect();
    let mut trace = Vec::new();
    let mut rounds = 0;
    let mut converged = false;

    while rounds < config.max_rounds {
        rounds += 1;
        order.shuffle(&mut rng);
        let mut changed = false;
        for &n in &order {
            let i = profile.client_type(n);
            let current = profile.strategy(n);
            let mut others = state.clone();
            remove(&mut others, i, current);
            let payoffs = options(scenario, mechanism, &others, i)?;
            let best = payoffs
                .iter()
                .flatten()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let choice = Strategy::ALL
                .into_iter()
                .find(|&s| payoffs[slot(s)].is_some_and(|v| v >= best - PAYOFF_TOL))
                .expect("abstaining is always available");
            let now = payoffs[slot(current)].unwrap_or(f64::NEG_INFINITY);
            if choice == current || payoffs[slot(choice)].unwrap() <= now + PAYOFF_TOL {
                continue;
            }
            changed = true;
            profile.set(n, choice);
            state = others;
            add(&mut state, i, choice);
            let mut switched = vec![(n, current, choice)];
            if state.total_participants() == 0 && state.total_buyers() > 0 {
                for m in 0..profile.len() {
                    if profile.strategy(m) == Strategy::Buy {
                        switched.push((m, Strategy::Buy, Strategy::Abstain));
                    }
                }
                profile.normalize();
                state = profile.state(types);
            }
            if config.trace {
                let potential = mechanism.potential(&state);
                trace.extend(switched.into_iter().map(|(m, old, new)| TraceRow {
                    round: rounds,
                    client_id: m,
                    type_index: profile.client_type(m) + 1,
                    old,
                    new,
                    potential,
                }));
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "best-response dynamics did not settle within {} rounds",
            config.max_rounds
        );
    }

    let check = verify_nash(scenario, mechanism, &profile)?;
    Ok(EquilibriumResult {
        welfare: WelfareReport::evaluate(&profile, mechanism, scenario)?,
        state,
        final_profile: profile,
        converged,
        rounds,
        nash_verified: check.holds,
        witness: check.witness,
        deviations_checked: check.deviations_checked,
        trace,
    })
}

/// Checks every client against both alternative strategies.
///
/// Buying is not a deviation open to a client when nobody else trains.
pub fn verify_nash(
    scenario: &Scenario,
    mechanism: &dyn Mechanism,
    profile: &StrategyProfile,
) -> Result<NashCheck> {
    profile.validate(scenario)?;
    let state = profile.state(scenario.num_types());
    let mut checked = 0;
    for n in 0..profile.len() {
        let i = profile.client_type(n);
        let current = profile.strategy(n);
        let mut others = state.clone();
        remove(&mut others, i, current);
        let payoffs = options(scenario, mechanism, &others, i)?;
        let now =
            payoffs[slot(current)].expect("validated profiles have a trainer for every buyer");
        for s in Strategy::ALL {
            if s == current {
                continue;
            }
            let Some(v) = payoffs[slot(s)] else { continue };
            checked += 1;
            if v > now + PAYOFF_TOL {
                return Ok(NashCheck {
                    holds: false,
                    witness: Some(Deviation {
                        client_id: n,
                        from: current,
                        to: s,
                        gain: v - now,
                    }),
                    deviations_checked: checked,
                });
            }
        }
    }
    Ok(NashCheck {
        holds: true,
        witness: None,
        deviations_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{modified_fl_quote, swan_quote, ZeroMechanism};
    use crate::model::fixtures::{power, scenario, scenario_with};
    use crate::optimizer::{find_lambda, solve_structured};

    fn swan_setup() -> (Scenario, crate::mechanism::SwanQuote) {
        let sc = scenario_with(
            &[(50, 50.0, 4), (120, 120.0, 3), (300, 300.0, 2)],
            10,
            1.0,
            0.0,
            power(1.0, 2.0),
        );
        let ctx = find_lambda(&sc).unwrap();
        let solve = solve_structured(&sc, ctx.lambda).unwrap();
        let q = swan_quote(&sc, &solve, &ctx).unwrap();
        (sc, q)
    }

    #[test]
    fn prohibitive_costs_leave_everyone_out() {
        let sc = scenario(&[(50, 1e9, 3), (300, 1e9, 2)], 10, 1.0, 0.0);
        let init = StrategyProfile::uniform(&sc, Strategy::Join);
        let r =
            best_response_dynamics(&sc, &ZeroMechanism, &init, &DynamicsConfig::default()).unwrap();
        assert!(r.converged && r.nash_verified);
        assert!(r
            .final_profile
            .strategies()
            .iter()
            .all(|&s| s == Strategy::Abstain));
        let all_a = StrategyProfile::uniform(&sc, Strategy::Abstain);
        assert!(verify_nash(&sc, &ZeroMechanism, &all_a).unwrap().holds);
    }

    #[test]
    fn swan_reaches_the_optimum_from_nothing() {
        let (sc, q) = swan_setup();
        let init = StrategyProfile::uniform(&sc, Strategy::Abstain);
        let cfg = DynamicsConfig {
            trace: true,
            ..DynamicsConfig::default()
        };
        let r = best_response_dynamics(&sc, &q, &init, &cfg).unwrap();
        assert!(r.converged && r.nash_verified);
        assert_eq!(r.state.participants, q.solve.k_star);
        assert_eq!(r.state.buyers, q.solve.b_star);
        let pots: Vec<f64> = r.trace.iter().map(|t| t.potential.unwrap()).collect();
        assert!(pots.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn perturbed_equilibrium_yields_witness() {
        let (sc, q) = swan_setup();
        let state = SocialState::new(q.solve.k_star.clone(), q.solve.b_star.clone());
        let mut profile = StrategyProfile::from_state(&sc, &state).unwrap();
        assert!(verify_nash(&sc, &q, &profile).unwrap().holds);
        let n = (0..profile.len())
            .find(|&n| profile.strategy(n) == Strategy::Buy)
            .unwrap();
        profile.set(n, Strategy::Abstain);
        let check = verify_nash(&sc, &q, &profile).unwrap();
        assert!(!check.holds);
        let w = check.witness.unwrap();
        assert_eq!(w.client_id, n);
        assert_eq!(w.from, Strategy::Abstain);
    }

    #[test]
    fn same_seed_same_path() {
        let (sc, q) = swan_setup();
        let init = StrategyProfile::uniform(&sc, Strategy::Buy);
        let cfg = DynamicsConfig {
            seed: 42,
            trace: true,
            ..DynamicsConfig::default()
        };
        let a = best_response_dynamics(&sc, &q, &init, &cfg).unwrap();
        let b = best_response_dynamics(&sc, &q, &init, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn low_fixed_reward_keeps_clients_from_training() {
        let sc = scenario_with(
            &[(50, 50.0, 3), (300, 300.0, 2)],
            10,
            1.0,
            0.0,
            power(1.0, 2.0),
        );
        let q = modified_fl_quote(&sc, 10.0);
        let init = StrategyProfile::uniform(&sc, Strategy::Join);
        let r = best_response_dynamics(&sc, &q, &init, &DynamicsConfig::default()).unwrap();
        assert!(r.converged && r.nash_verified);
        assert_eq!(r.state.total_participants(), 0);
    }
}

//! Command drivers. Each returns a JSON document; `main` decides where it goes.

use std::path::Path;

use serde_json::{json, Value};
use swanmech_core::enumerate::{self, BoxIter};
use swanmech_core::{
    best_response_dynamics, check_alignment, classify_region, find_lambda, modified_fl_quote,
    network_effect, solve_bruteforce, solve_structured, swan_quote, DynamicsConfig,
    EquilibriumResult, Error, LagrangianContext, Mechanism, ModifiedFlQuote, Scenario, SocialState,
    SolveResult, Strategy, StrategyProfile, SwanQuote, ZeroMechanism,
};

use crate::config::{MechanismKind, ScenarioConfig};
use crate::output::{fmt_num, num, nums, write_atomic};
use crate::CliError;

/// Boxes up to this size are cross-checked against the exhaustive solver.
const CROSS_CHECK_LIMIT: u128 = 1_000_000;

pub struct Solved {
    pub ctx: LagrangianContext,
    pub solve: SolveResult,
}

pub fn solve_scenario(scenario: &Scenario) -> Result<Solved, Error> {
    let ctx = find_lambda(scenario)?;
    let solve = solve_structured(scenario, ctx.lambda)?;
    Ok(Solved { ctx, solve })
}

pub enum Quote {
    Swan(Box<SwanQuote>),
    ModifiedFl(ModifiedFlQuote),
    Zero(ZeroMechanism),
}

impl Quote {
    pub fn build(
        kind: MechanismKind,
        scenario: &Scenario,
        solved: &Solved,
        fl_reward: f64,
    ) -> Result<Self, Error> {
        Ok(match kind {
            MechanismKind::Swan => {
                Quote::Swan(Box::new(swan_quote(scenario, &solved.solve, &solved.ctx)?))
            }
            MechanismKind::ModifiedFl => Quote::ModifiedFl(modified_fl_quote(scenario, fl_reward)),
            MechanismKind::Zero => Quote::Zero(ZeroMechanism),
        })
    }

    pub fn mechanism(&self) -> &dyn Mechanism {
        match self {
            Quote::Swan(q) => q.as_ref(),
            Quote::ModifiedFl(q) => q,
            Quote::Zero(q) => q,
        }
    }
}

fn solve_json(r: &SolveResult) -> Value {
    json!({
        "k_star": r.k_star,
        "b_star": r.b_star,
        "w_star": num(r.w_star),
        "eps_star": num(r.eps_star),
        "binding": r.binding,
        "lambda_star": num(r.lambda_star),
    })
}

pub fn cmd_solve(cfg: &ScenarioConfig) -> Result<Value, CliError> {
    let scenario = cfg.scenario()?;
    let solved = solve_scenario(&scenario)?;
    let cross_check = if enumerate::box_size(&scenario.populations()) <= CROSS_CHECK_LIMIT {
        let oracle = solve_bruteforce(&scenario, solved.ctx.lambda)?;
        if oracle.k_star != solved.solve.k_star {
            log::warn!(
                "structured optimum {:?} differs from exhaustive optimum {:?}",
                solved.solve.k_star,
                oracle.k_star
            );
        }
        json!(oracle.k_star == solved.solve.k_star)
    } else {
        Value::Null
    };
    let alignment = check_alignment(&scenario)?;
    Ok(json!({
        "solve": solve_json(&solved.solve),
        "eps_min": num(scenario.eps_min()),
        "eps_req": num(scenario.eps_req()),
        "L_floor": num(solved.ctx.l_floor),
        "high_heterogeneity": scenario.high_heterogeneity(),
        "bruteforce_agrees": cross_check,
        "alignment_holds": alignment.holds,
        "diagnostics": scenario.diagnostics(),
    }))
}

/// Equilibrium from the all-abstain start.
pub fn run_equilibrium(
    scenario: &Scenario,
    quote: &Quote,
    seed: u64,
    max_rounds: u32,
    trace: bool,
) -> Result<EquilibriumResult, Error> {
    let start = StrategyProfile::uniform(scenario, Strategy::Abstain);
    let config = DynamicsConfig {
        max_rounds,
        seed,
        trace,
    };
    best_response_dynamics(scenario, quote.mechanism(), &start, &config)
}

pub fn trace_csv(result: &EquilibriumResult) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "round",
        "client_id",
        "type",
        "old_strategy",
        "new_strategy",
        "potential_value",
    ])?;
    for row in &result.trace {
        w.write_record([
            row.round.to_string(),
            row.client_id.to_string(),
            row.type_index.to_string(),
            row.old.to_string(),
            row.new.to_string(),
            row.potential.map(fmt_num).unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

/// Returns the report and whether the dynamics settled.
pub fn cmd_equilibrium(
    cfg: &ScenarioConfig,
    kind: MechanismKind,
    seed: u64,
    trace: Option<&Path>,
) -> Result<(Value, bool), CliError> {
    let scenario = cfg.scenario()?;
    let solved = solve_scenario(&scenario)?;
    let quote = Quote::build(kind, &scenario, &solved, cfg.modified_fl_reward())?;
    let result = run_equilibrium(&scenario, &quote, seed, cfg.max_rounds, trace.is_some())?;
    if let Some(path) = trace {
        write_atomic(path, &trace_csv(&result)?)?;
    }
    let quote_dump = match &quote {
        Quote::Swan(q) => {
            let d = q.dump()?;
            json!({
                "branch": d.branch,
                "tau": num(d.tau),
                "L_floor": num(d.l_floor),
                "lambda": num(d.lambda),
                "price_at_kstar": num(d.price_at_kstar),
                "rewards_at_kstar": nums(&d.rewards_at_kstar),
            })
        }
        Quote::ModifiedFl(q) => json!({ "fixed_reward": num(q.fixed_reward) }),
        Quote::Zero(_) => json!({}),
    };
    let strategies: String = result
        .final_profile
        .strategies()
        .iter()
        .map(|s| s.symbol())
        .collect();
    let report = json!({
        "mechanism": kind.to_string(),
        "seed": seed,
        "converged": result.converged,
        "rounds": result.rounds,
        "nash_verified": result.nash_verified,
        "deviations_checked": result.deviations_checked,
        "witness": result.witness.as_ref().map(|w| json!({
            "client_id": w.client_id,
            "from": w.from.to_string(),
            "to": w.to.to_string(),
            "gain": num(w.gain),
        })),
        "state": { "participants": result.state.participants, "buyers": result.state.buyers },
        "strategies": strategies,
        "welfare": {
            "w_mots": num(result.welfare.w_mots),
            "w_fl": num(result.welfare.w_fl),
            "platform_cost": num(result.welfare.platform_cost),
            "client_payoffs": nums(&result.welfare.client_payoffs),
        },
        "reached_k_star": result.state.participants == solved.solve.k_star,
        "optimum": solve_json(&solved.solve),
        "quote": quote_dump,
    });
    Ok((report, result.converged))
}

/// Region report at `state` (default `K*`), with an optional error scan per type.
pub fn cmd_regions(
    cfg: &ScenarioConfig,
    state: Option<Vec<u32>>,
    scan: bool,
) -> Result<Value, CliError> {
    let scenario = cfg.scenario()?;
    let participants = match state {
        Some(k) => {
            if k.len() != scenario.num_types() {
                return Err(CliError::Config(format!(
                    "state has {} entries for {} types",
                    k.len(),
                    scenario.num_types()
                )));
            }
            k
        }
        None => solve_scenario(&scenario)?.solve.k_star,
    };
    let participants = if participants.iter().all(|&k| k == 0) {
        log::warn!("empty coalition; reporting regions for one participant of the largest type");
        let mut k = vec![0; scenario.num_types()];
        *k.last_mut().expect("at least one type") = 1;
        k
    } else {
        participants
    };
    let state = SocialState::training(participants.clone());
    state.validate(&scenario)?;

    let mut types = Vec::new();
    for j in 0..scenario.num_types() {
        let r = classify_region(&state, &scenario, j)?;
        let mut entry = json!({
            "type": j + 1,
            "region": format!("{:?}", r.region),
            "eta": num(r.eta),
            "inv_d": num(r.inv_d),
            "hetero_point": num(r.hetero_point),
        });
        if scan {
            let n = scenario.types()[j].population;
            let rows: Vec<Value> = (0..=n)
                .map(|x| {
                    let mut k = participants.clone();
                    k[j] = x;
                    let st = SocialState::training(k.clone());
                    let effect = if x < n {
                        network_effect(&st, &scenario, j).ok().map(num)
                    } else {
                        None
                    };
                    json!({ "k": x, "eps": num(scenario.error_of(&k).value()), "network_effect": effect })
                })
                .collect();
            entry["scan"] = Value::Array(rows);
        }
        types.push(entry);
    }
    Ok(json!({ "state": participants, "types": types }))
}

/// Every state of the box with its error, welfare and feasibility, as CSV.
pub fn cmd_oracle(cfg: &ScenarioConfig) -> Result<Vec<u8>, CliError> {
    let scenario = cfg.scenario()?;
    let bounds = scenario.populations();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=bounds.len()).map(|i| format!("k_{i}")).collect();
    header.extend(["eps", "welfare_mots", "feasible"].map(String::from));
    w.write_record(&header)?;
    for k in BoxIter::guarded(&bounds)? {
        let state = SocialState::full_dissemination(&k, &scenario);
        let eps = scenario.error_of(&k).value();
        let feasible = scenario.eps_req() == f64::INFINITY
            || eps <= scenario.eps_req() + swanmech_core::THRESHOLD_TOL;
        let mut rec: Vec<String> = k.iter().map(u32::to_string).collect();
        rec.push(fmt_num(eps));
        rec.push(fmt_num(swanmech_core::welfare_mots(&state, &scenario)));
        rec.push(feasible.to_string());
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

//! Grid sweeps over unit cost or error requirement.

use rayon::prelude::*;
use swanmech_core::{solve_fl_optimum, Error, Scenario};

use crate::commands::{run_equilibrium, solve_scenario, Quote};
use crate::config::{MechanismKind, ScenarioConfig, SweepSpec, SweepVariable};
use crate::output::fmt_num;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub mechanism: MechanismKind,
    pub seed: u64,
    /// `ok`, `not_converged`, `infeasible` or `error: …`.
    pub status: String,
    /// Welfare at the equilibrium reached from the all-abstain start.
    pub welfare_mots: Option<f64>,
    pub welfare_fl_optimum: Option<f64>,
    pub platform_cost: Option<f64>,
    pub eps_star: Option<f64>,
    pub k_star: Vec<u32>,
    pub nash_verified: Option<bool>,
    /// The equilibrium training vector equals `K*`.
    pub reached_optimum: Option<bool>,
}

impl SweepRow {
    fn failed(
        variable: SweepVariable,
        value: f64,
        mechanism: MechanismKind,
        seed: u64,
        status: String,
    ) -> Self {
        Self {
            variable,
            value,
            mechanism,
            seed,
            status,
            welfare_mots: None,
            welfare_fl_optimum: None,
            platform_cost: None,
            eps_star: None,
            k_star: Vec::new(),
            nash_verified: None,
            reached_optimum: None,
        }
    }
}

fn variant(base: &Scenario, variable: SweepVariable, value: f64) -> Result<Scenario, Error> {
    match variable {
        SweepVariable::UnitCost => base.with_unit_cost(value),
        SweepVariable::EpsReq => base.with_eps_req(value),
    }
}

fn evaluate(
    cfg: &ScenarioConfig,
    base: &Scenario,
    spec: &SweepSpec,
    value: f64,
    mechanism: MechanismKind,
    seed: u64,
) -> SweepRow {
    let fail = |status: String| SweepRow::failed(spec.variable, value, mechanism, seed, status);
    let status_of = |e: &Error| match e {
        Error::Infeasible { .. } => "infeasible".to_string(),
        e => format!("error: {e}"),
    };
    let scenario = match variant(base, spec.variable, value) {
        Ok(s) => s,
        Err(e) => return fail(status_of(&e)),
    };
    let run = || -> Result<SweepRow, Error> {
        let solved = solve_scenario(&scenario)?;
        let fl = solve_fl_optimum(&scenario)?;
        let reward = match spec.variable {
            // The flat payment tracks the swept costs.
            SweepVariable::UnitCost if cfg.benchmark.is_none() => {
                scenario.types().iter().map(|t| t.cost).fold(0.0, f64::max)
            }
            _ => cfg.modified_fl_reward(),
        };
        let quote = Quote::build(mechanism, &scenario, &solved, reward)?;
        let eq = run_equilibrium(&scenario, &quote, seed, cfg.max_rounds, false)?;
        Ok(SweepRow {
            variable: spec.variable,
            value,
            mechanism,
            seed,
            status: if eq.converged { "ok" } else { "not_converged" }.to_string(),
            welfare_mots: Some(eq.welfare.w_mots),
            welfare_fl_optimum: Some(fl.w_star),
            platform_cost: Some(eq.welfare.platform_cost),
            eps_star: Some(solved.solve.eps_star),
            reached_optimum: Some(eq.state.participants == solved.solve.k_star),
            k_star: solved.solve.k_star,
            nash_verified: Some(eq.nash_verified),
        })
    };
    run().unwrap_or_else(|e| fail(status_of(&e)))
}

/// Evaluates every grid point × mechanism × seed in parallel; rows come back
/// sorted by value, mechanism and seed.
pub fn run_sweep(cfg: &ScenarioConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>, CliError> {
    let base = cfg.scenario()?;
    let jobs: Vec<(f64, MechanismKind, u64)> = spec
        .grid
        .iter()
        .flat_map(|&v| {
            spec.mechanisms
                .iter()
                .flat_map(move |&m| spec.seeds.iter().map(move |&s| (v, m, s)))
        })
        .collect();
    let mut rows: Vec<SweepRow> = jobs
        .into_par_iter()
        .map(|(v, m, s)| evaluate(cfg, &base, spec, v, m, s))
        .collect();
    rows.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.mechanism.cmp(&b.mechanism))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

pub fn rows_to_csv(rows: &[SweepRow], num_types: usize) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "variable",
        "value",
        "mechanism",
        "seed",
        "status",
        "welfare_mots",
        "welfare_fl_optimum",
        "platform_cost",
        "eps_star",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=num_types).map(|i| format!("k_star_{i}")));
    header.extend(["nash_verified", "reached_optimum"].map(String::from));
    w.write_record(&header)?;

    let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
    let flag = |x: Option<bool>| x.map(|b| b.to_string()).unwrap_or_default();
    for r in rows {
        let mut rec = vec![
            r.variable.to_string(),
            fmt_num(r.value),
            r.mechanism.to_string(),
            r.seed.to_string(),
            r.status.clone(),
            opt(r.welfare_mots),
            opt(r.welfare_fl_optimum),
            opt(r.platform_cost),
            opt(r.eps_star),
        ];
        rec.extend((0..num_types).map(|i| r.k_star.get(i).map(u32::to_string).unwrap_or_default()));
        rec.push(flag(r.nash_verified));
        rec.push(flag(r.reached_optimum));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lagrangian::{lagrangian_value, LagrangianContext};
use crate::economy::welfare_fl;
use crate::enumerate::{self, corners};
use crate::model::{error_from_sums, ClientType, HeterogeneityParams, Scenario, SocialState};
use crate::{Error, Result, ENUMERATION_GUARD, THRESHOLD_TOL};

/// Doublings allowed while bracketing the multiplier.
const MAX_DOUBLINGS: u32 = 200;
const BISECTION_STEPS: u32 = 60;
const CHUNK: u128 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub k_star: Vec<u32>,
    /// `Nᵢ − Kᵢ*`, or all zeros for the empty market.
    pub b_star: Vec<u32>,
    pub w_star: f64,
    /// `+∞` for the empty market.
    pub eps_star: f64,
    /// The unconstrained welfare maximizer violates the error requirement.
    pub binding: bool,
    pub lambda_star: f64,
}

/// A scored state. `Ord` puts the preferred state first: higher objective,
/// then smaller error, then lexicographically smaller `K`.
#[derive(Debug, Clone)]
struct Scored {
    value: f64,
    eps: f64,
    k: Vec<u32>,
}

impl Scored {
    fn cmp_pref(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then(self.eps.total_cmp(&other.eps))
            .then_with(|| self.k.cmp(&other.k))
    }
}

fn pick(a: Option<Scored>, b: Option<Scored>) -> Option<Scored> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.cmp_pref(&a) == Ordering::Less {
            b
        } else {
            a
        }),
        (a, None) => a,
        (None, b) => b,
    }
}

fn offer(slot: &mut Option<Scored>, cand: &Scored) {
    if slot
        .as_ref()
        .map_or(true, |s| cand.cmp_pref(s) == Ordering::Less)
    {
        *slot = Some(cand.clone());
    }
}

pub(crate) fn feasible(scenario: &Scenario, eps: f64) -> bool {
    let req = scenario.eps_req();
    req == f64::INFINITY || eps <= req + THRESHOLD_TOL
}

fn welfare_scored(scenario: &Scenario, k: &[u32]) -> Scored {
    Scored {
        value: lagrangian_value(k, 0.0, scenario).expect("welfare has no penalty"),
        eps: scenario.error_of(k).value(),
        k: k.to_vec(),
    }
}

/// Best feasible and best unconstrained state among `candidates`.
#[derive(Default)]
struct Best {
    feasible: Option<Scored>,
    any: Option<Scored>,
}

impl Best {
    fn offer(&mut self, scenario: &Scenario, cand: Scored) {
        if feasible(scenario, cand.eps) {
            offer(&mut self.feasible, &cand);
        }
        offer(&mut self.any, &cand);
    }

    fn merge(self, other: Self) -> Self {
        Self {
            feasible: pick(self.feasible, other.feasible),
            any: pick(self.any, other.any),
        }
    }

    fn into_result(self, scenario: &Scenario, lambda: f64) -> Result<SolveResult> {
        let best = self.feasible.ok_or(Error::Infeasible {
            eps_req: scenario.eps_req(),
            eps_min: scenario.eps_min(),
        })?;
        let binding = self.any.is_some_and(|a| a.k != best.k);
        let b_star = if best.k.iter().all(|&k| k == 0) {
            vec![0; best.k.len()]
        } else {
            best.k
                .iter()
                .zip(scenario.types())
                .map(|(&k, t)| t.population - k)
                .collect()
        };
        Ok(SolveResult {
            b_star,
            w_star: best.value,
            eps_star: best.eps,
            binding,
            lambda_star: lambda,
            k_star: best.k,
        })
    }
}

/// Exhaustive welfare maximization over `∏{0..Nᵢ}` under the error requirement.
///
/// `lambda` is only carried into the result; the enumeration itself is
/// λ-free and therefore serves as the oracle for [`find_lambda`].
pub fn solve_bruteforce(scenario: &Scenario, lambda: f64) -> Result<SolveResult> {
    let bounds = scenario.populations();
    let size = enumerate::guard(&bounds, ENUMERATION_GUARD)?;
    let best = (0..size.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut k = vec![0; bounds.len()];
            let mut best = Best::default();
            for idx in c * CHUNK..((c + 1) * CHUNK).min(size) {
                enumerate::decode(&bounds, idx, &mut k);
                best.offer(scenario, welfare_scored(scenario, &k));
            }
            best
        })
        .reduce(Best::default, Best::merge);
    best.into_result(scenario, lambda)
}

/// Constrained maximum of `W_FL = Σᵢ Kᵢ(U(ε) − Cᵢ)`, where only participants
/// get the model. Enumerates the whole box; `b_star` is all zeros.
pub fn solve_fl_optimum(scenario: &Scenario) -> Result<SolveResult> {
    let bounds = scenario.populations();
    let size = enumerate::guard(&bounds, ENUMERATION_GUARD)?;
    let best = (0..size.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut k = vec![0; bounds.len()];
            let mut best = Best::default();
            for idx in c * CHUNK..((c + 1) * CHUNK).min(size) {
                enumerate::decode(&bounds, idx, &mut k);
                let state = SocialState::training(k.clone());
                best.offer(
                    scenario,
                    Scored {
                        value: welfare_fl(&state, scenario),
                        eps: scenario.error_of(&k).value(),
                        k: k.clone(),
                    },
                );
            }
            best
        })
        .reduce(Best::default, Best::merge);
    let mut result = best.into_result(scenario, 0.0)?;
    result.b_star = vec![0; bounds.len()];
    Ok(result)
}

/// Welfare maximization over the structured candidates: the all-or-none
/// corners when every type is below the heterogeneity point, interior
/// stationary points for the types above it (for every type when the utility
/// curvature condition fails), and the feasibility frontier when the error
/// requirement is finite.
///
/// The all-or-none structure describes maximizers of the Lagrangian. Once the
/// requirement binds, the discrete optimum may sit anywhere on the feasibility
/// frontier, so boxes within the enumeration guard are then searched
/// exhaustively; larger ones keep the candidate answer with a warning.
pub fn solve_structured(scenario: &Scenario, lambda: f64) -> Result<SolveResult> {
    let mut best = Best::default();
    for k in structured_candidates(scenario, lambda) {
        best.offer(scenario, welfare_scored(scenario, &k));
    }
    let binding = match (&best.any, &best.feasible) {
        (Some(a), Some(f)) => a.k != f.k,
        (Some(_), None) => true,
        _ => false,
    };
    if binding {
        if enumerate::box_size(&scenario.populations()) <= ENUMERATION_GUARD {
            return solve_bruteforce(scenario, lambda);
        }
        log::warn!("error requirement binds on a box too large to search exhaustively; optimum is best-effort");
    }
    best.into_result(scenario, lambda)
}

/// Candidate states for both solvers' structured search.
///
/// Unconstrained with `I_H = ∅` and the curvature condition in force, these
/// are the `2^I` corners. Otherwise a set of values is kept per coordinate,
/// starting from `{0, Nⱼ}`: `I_H` coordinates (every coordinate when the
/// curvature condition fails) also take the points where `ΔL` changes sign
/// from non-negative to non-positive, and under a finite requirement every
/// coordinate takes the points where feasibility flips along its line. The
/// sets are grown jointly until no new point appears.
pub(crate) fn structured_candidates(scenario: &Scenario, lambda: f64) -> Vec<Vec<u32>> {
    let bounds = scenario.populations();
    let high = scenario.high_types();
    let regular = scenario.curvature_holds();
    if high.is_empty() && regular && !scenario.is_constrained() {
        return corners(&bounds).map(|(_, k)| k).collect();
    }

    let mut sets: Vec<BTreeSet<u32>> = bounds.iter().map(|&n| BTreeSet::from([0, n])).collect();
    let lambdas: Vec<f64> = if lambda > 0.0 {
        vec![0.0, lambda]
    } else {
        vec![0.0]
    };
    loop {
        let mut grown = false;
        for j in 0..bounds.len() {
            let others: Vec<Vec<u32>> = sets
                .iter()
                .enumerate()
                .map(|(p, s)| {
                    if p == j {
                        vec![0]
                    } else {
                        s.iter().copied().collect()
                    }
                })
                .collect();
            let stationary: &[f64] = if high.contains(&j) || !regular {
                &lambdas
            } else {
                &[]
            };
            let mut found = BTreeSet::new();
            for base in product(&others) {
                line_candidates(scenario, &base, j, stationary, &mut found);
            }
            for x in found {
                grown |= sets[j].insert(x);
            }
        }
        let size: u128 = sets.iter().map(|s| s.len() as u128).product();
        if !grown || size > ENUMERATION_GUARD {
            break;
        }
    }

    let axes: Vec<Vec<u32>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
    product(&axes)
}

/// Interior candidates along coordinate `j` with every other coordinate fixed:
/// feasibility flips, and local maxima of `L_λ` for each entry of `lambdas`.
fn line_candidates(
    scenario: &Scenario,
    base: &[u32],
    j: usize,
    lambdas: &[f64],
    found: &mut BTreeSet<u32>,
) {
    let n = scenario.types()[j].population;
    let mut k = base.to_vec();
    let mut eps = Vec::with_capacity(n as usize + 1);
    for x in 0..=n {
        k[j] = x;
        eps.push(scenario.error_of(&k).value());
    }
    for x in 0..n as usize {
        let (here, next) = (feasible(scenario, eps[x]), feasible(scenario, eps[x + 1]));
        if here != next {
            found.insert(if here { x as u32 } else { x as u32 + 1 });
        }
    }
    for &lambda in lambdas {
        let values: Vec<Option<f64>> = (0..=n)
            .map(|x| {
                k[j] = x;
                lagrangian_value(&k, lambda, scenario).ok()
            })
            .collect();
        let delta = |x: u32| -> Option<f64> { Some(values[x as usize + 1]? - values[x as usize]?) };
        for x in 1..n {
            if let (Some(up), Some(down)) = (delta(x - 1), delta(x)) {
                if down <= 0.0 && up >= 0.0 {
                    found.insert(x);
                }
            }
        }
    }
}

fn product(axes: &[Vec<u32>]) -> Vec<Vec<u32>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// Maximizer of `L_λ` over the structured candidates, skipping singular states.
fn lagrangian_maximizer(scenario: &Scenario, lambda: f64) -> Option<Scored> {
    let mut best = None;
    for k in structured_candidates(scenario, lambda) {
        if let Ok(value) = lagrangian_value(&k, lambda, scenario) {
            let cand = Scored {
                value,
                eps: scenario.error_of(&k).value(),
                k,
            };
            offer(&mut best, &cand);
        }
    }
    best
}

/// Chooses the multiplier by bracketing and bisection.
///
/// `λ = 0` when the unconstrained maximizer of the Lagrangian already meets
/// the requirement. Otherwise the upper end is doubled from 1 until the
/// induced maximizer is feasible and the bracket is bisected 60 times; the
/// feasible end is returned.
pub fn find_lambda(scenario: &Scenario) -> Result<LagrangianContext> {
    if !scenario.is_constrained() {
        return LagrangianContext::new(scenario, 0.0);
    }
    if scenario.eps_req() < scenario.eps_min() - THRESHOLD_TOL {
        return Err(Error::Infeasible {
            eps_req: scenario.eps_req(),
            eps_min: scenario.eps_min(),
        });
    }
    let meets = |lambda: f64| {
        lagrangian_maximizer(scenario, lambda)
            .is_some_and(|s| feasible(scenario, s.eps) && s.k.iter().any(|&k| k > 0))
    };
    if meets(0.0) {
        return LagrangianContext::new(scenario, 0.0);
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while !meets(hi) {
        if doublings == MAX_DOUBLINGS {
            log::warn!("multiplier search stopped at lambda = {hi:e} without a feasible Lagrangian maximizer");
            return LagrangianContext::new(scenario, hi);
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    LagrangianContext::new(scenario, hi)
}

/// Minimum achievable error over non-empty coalitions.
pub fn eps_min(scenario: &Scenario) -> f64 {
    scenario.eps_min()
}

/// `min_{K≠0} ε(K)` and the lexicographically smallest minimizer.
///
/// Small boxes are enumerated. Larger ones are solved on the corners, which is
/// exact when `σ²Dᵢ ≤ dγ²` for every type: along any coordinate the error is a
/// quadratic in `1/(m+Kⱼ)` that is either monotone or concave there.
pub(crate) fn min_error_state(
    types: &[ClientType],
    params: &HeterogeneityParams,
) -> Result<(f64, Vec<u32>)> {
    let bounds: Vec<u32> = types.iter().map(|t| t.population).collect();
    let eval = |k: &[u32]| {
        let (n, s) = k.iter().zip(types).fold((0u64, 0.0), |(n, s), (&ki, t)| {
            (n + u64::from(ki), s + f64::from(ki) * t.inv_size())
        });
        error_from_sums(n, s, params).value()
    };
    let keep = |a: (f64, Vec<u32>), b: (f64, Vec<u32>)| match b
        .0
        .total_cmp(&a.0)
        .then_with(|| b.1.cmp(&a.1))
    {
        Ordering::Less => b,
        _ => a,
    };
    let none = || (f64::INFINITY, Vec::new());

    let best = match enumerate::guard(&bounds, ENUMERATION_GUARD) {
        Ok(size) => (0..size.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut k = vec![0; bounds.len()];
                let mut best = none();
                for idx in (c * CHUNK).max(1)..((c + 1) * CHUNK).min(size) {
                    enumerate::decode(&bounds, idx, &mut k);
                    best = keep(best, (eval(&k), k.clone()));
                }
                best
            })
            .reduce(none, keep),
        Err(err) => {
            let d_max = types.iter().map(|t| t.data_size).max().unwrap_or(0);
            if params.client_variance * f64::from(d_max) > params.d_gamma2() {
                return Err(err);
            }
            corners(&bounds)
                .skip(1)
                .map(|(_, k)| (eval(&k), k))
                .fold(none(), keep)
        }
    };
    if best.1.is_empty() {
        return Err(Error::InvalidScenario(
            "no non-empty coalition exists".into(),
        ));
    }
    Ok(best)
}

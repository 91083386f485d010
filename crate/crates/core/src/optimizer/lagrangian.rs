use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::economy::utility_at;
use crate::enumerate::{self, corner};
use crate::model::{Scenario, SocialState};
use crate::{Error, Result, ENUMERATION_GUARD, THRESHOLD_TOL};

/// Inverse-gap penalty `(x − σ²)⁻¹`, zero at `x = +∞`.
fn inverse_gap(x: f64, sigma2: f64, k: &[u32]) -> Result<f64> {
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    let gap = x - sigma2;
    if gap.abs() < THRESHOLD_TOL {
        return Err(Error::Singular(k.to_vec()));
    }
    Ok(1.0 / gap)
}

/// `L(K) = Σᵢ[Nᵢ·U(ε) − KᵢCᵢ] + λ[(ε−σ²)⁻¹ − (ε_req−σ²)⁻¹]` for a raw
/// participation vector. The penalty vanishes identically when `λ = 0`.
pub(crate) fn lagrangian_value(
    participants: &[u32],
    lambda: f64,
    scenario: &Scenario,
) -> Result<f64> {
    let u = utility_at(scenario, participants);
    let welfare: f64 = participants
        .iter()
        .zip(scenario.types())
        .map(|(&k, t)| f64::from(t.population) * u - f64::from(k) * t.cost)
        .sum();
    if lambda == 0.0 {
        return Ok(welfare);
    }
    let s2 = scenario.params().client_variance;
    let eps = scenario.error_of(participants).value();
    let penalty =
        inverse_gap(eps, s2, participants)? - inverse_gap(scenario.eps_req(), s2, participants)?;
    Ok(welfare + lambda * penalty)
}

/// Multiplier, Lagrangian floor `L₀` and the corner values used by the
/// multilinear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianContext {
    pub lambda: f64,
    pub eps_req: f64,
    /// `L₀ = min L(K)` over every `K ∈ ∏{0..Nᵢ}` where `L` is defined.
    pub l_floor: f64,
    /// `L(x)` for `x ∈ ∏{0, Nᵢ}`; bit `i` of the index selects `Nᵢ`.
    pub corner_values: Vec<f64>,
    /// Whether the multiplier had to be raised above zero.
    pub binding: bool,
    /// States excluded from `L₀` because `|ε − σ²| < 1e-12`.
    pub singular_states: Vec<Vec<u32>>,
    /// Number of states with `ε < σ²`, where the penalty changes sign.
    pub below_variance_states: u64,
}

impl LagrangianContext {
    /// Evaluates all corners and the floor by exhaustive enumeration.
    pub fn new(scenario: &Scenario, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "Lagrange multiplier must be finite and non-negative, got {lambda}"
            )));
        }
        let bounds = scenario.populations();
        let size = enumerate::guard(&bounds, ENUMERATION_GUARD)?;
        let corner_values = enumerate::corners(&bounds)
            .map(|(_, x)| lagrangian_value(&x, lambda, scenario))
            .collect::<Result<Vec<_>>>()?;

        let s2 = scenario.params().client_variance;
        let chunk = 4096u128;
        let chunks = size.div_ceil(chunk);
        let (l_floor, singular, below) = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut k = vec![0; bounds.len()];
                let mut floor = f64::INFINITY;
                let mut singular = Vec::new();
                let mut below = 0u64;
                for idx in c * chunk..((c + 1) * chunk).min(size) {
                    enumerate::decode(&bounds, idx, &mut k);
                    let eps = scenario.error_of(&k).value();
                    if eps < s2 {
                        below += 1;
                    }
                    match lagrangian_value(&k, lambda, scenario) {
                        Ok(v) => floor = floor.min(v),
                        Err(Error::Singular(at)) => singular.push(at),
                        Err(e) => return Err(e),
                    }
                }
                Ok((floor, singular, below))
            })
            .try_reduce(
                || (f64::INFINITY, Vec::new(), 0),
                |mut a, b| {
                    a.0 = a.0.min(b.0);
                    a.1.extend(b.1);
                    a.2 += b.2;
                    Ok(a)
                },
            )?;
        let mut singular_states = singular;
        singular_states.sort();
        if lambda > 0.0 && below > 0 {
            log::warn!(
                "{below} states have error below the client variance; their Lagrangian penalty keeps its raw sign"
            );
        }
        if !singular_states.is_empty() {
            log::warn!(
                "{} states excluded from the Lagrangian domain: error equals client variance",
                singular_states.len()
            );
        }
        Ok(Self {
            lambda,
            eps_req: scenario.eps_req(),
            l_floor,
            corner_values,
            binding: lambda > 0.0,
            singular_states,
            below_variance_states: below,
        })
    }
}

fn check_box(state: &SocialState, scenario: &Scenario) -> Result<()> {
    if state.participants.len() != scenario.num_types() {
        return Err(Error::InvalidState(format!(
            "expected {} types, got {}",
            scenario.num_types(),
            state.participants.len()
        )));
    }
    for (&k, t) in state.participants.iter().zip(scenario.types()) {
        if k > t.population {
            return Err(Error::InvalidState(format!(
                "K = {k} exceeds population {}",
                t.population
            )));
        }
    }
    Ok(())
}

/// The Lagrangian of the welfare problem at full dissemination.
pub fn lagrangian(
    state: &SocialState,
    ctx: &LagrangianContext,
    scenario: &Scenario,
) -> Result<f64> {
    check_box(state, scenario)?;
    lagrangian_value(&state.participants, ctx.lambda, scenario)
}

/// Multilinear interpolation of the corner values:
/// `θ(K) = Σₓ L(x) · Πᵢ [(2Kᵢ − Nᵢ)xᵢ + (Nᵢ − Kᵢ)Nᵢ] / Nᵢ²`.
pub fn theta(state: &SocialState, ctx: &LagrangianContext, scenario: &Scenario) -> Result<f64> {
    check_box(state, scenario)?;
    let bounds = scenario.populations();
    let mut total = 0.0;
    for (mask, &value) in ctx.corner_values.iter().enumerate() {
        let x = corner(&bounds, mask);
        let mut weight = 1.0;
        for ((&k, &xi), &n) in state.participants.iter().zip(&x).zip(&bounds) {
            let (k, xi, n) = (f64::from(k), f64::from(xi), f64::from(n));
            weight *= ((2.0 * k - n) * xi + (n - k) * n) / (n * n);
            if weight == 0.0 {
                break;
            }
        }
        if weight != 0.0 {
            total += value * weight;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::scenario;

    #[test]
    fn zero_multiplier_is_pure_welfare() {
        let sc = scenario(&[(50, 0.1, 3), (300, 0.6, 2)], 10, 1.0, 0.0);
        let ctx = LagrangianContext::new(&sc, 0.0).unwrap();
        let st = SocialState::training(vec![2, 1]);
        let u = utility_at(&sc, &[2, 1]);
        let expected = 5.0 * u - 2.0 * 0.1 - 0.6;
        assert!((lagrangian(&st, &ctx, &sc).unwrap() - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn unconstrained_requirement_contributes_no_constant() {
        let sc = scenario(&[(50, 0.1, 3)], 10, 1.0, 0.01);
        let st = SocialState::training(vec![2]);
        let with = lagrangian_value(&[2], 2.0, &sc).unwrap();
        let without = lagrangian_value(&[2], 0.0, &sc).unwrap();
        let eps = sc.error_of(&st.participants).value();
        assert!((with - without - 2.0 / (eps - 0.01)).abs() < 1e-9);
    }

    #[test]
    fn corners_pin_theta() {
        let sc = scenario(&[(50, 0.1, 3), (120, 0.2, 4), (300, 0.6, 2)], 10, 1.0, 0.0);
        let ctx = LagrangianContext::new(&sc, 0.5).unwrap();
        for (mask, x) in enumerate::corners(&sc.populations()) {
            let st = SocialState::training(x);
            let th = theta(&st, &ctx, &sc).unwrap();
            assert_eq!(th, ctx.corner_values[mask]);
            assert_eq!(lagrangian(&st, &ctx, &sc).unwrap(), ctx.corner_values[mask]);
        }
    }

    #[test]
    fn single_type_midpoint() {
        let sc = scenario(&[(50, 0.1, 4)], 10, 1.0, 0.0);
        let ctx = LagrangianContext::new(&sc, 0.0).unwrap();
        let mid = theta(&SocialState::training(vec![2]), &ctx, &sc).unwrap();
        let expected = (ctx.corner_values[0] + ctx.corner_values[1]) / 2.0;
        assert!((mid - expected).abs() < 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn floor_bounds_every_state() {
        let sc = scenario(&[(50, 0.1, 3), (300, 0.6, 2)], 10, 1.0, 0.0);
        let ctx = LagrangianContext::new(&sc, 0.3).unwrap();
        for k in enumerate::BoxIter::new(&[3, 2]) {
            let st = SocialState::training(k);
            assert!(lagrangian(&st, &ctx, &sc).unwrap() >= ctx.l_floor);
            assert!(theta(&st, &ctx, &sc).unwrap() >= ctx.l_floor - 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_box_states_and_bad_multipliers() {
        let sc = scenario(&[(50, 0.1, 3)], 10, 1.0, 0.0);
        let ctx = LagrangianContext::new(&sc, 0.0).unwrap();
        assert!(theta(&SocialState::training(vec![4]), &ctx, &sc).is_err());
        assert!(LagrangianContext::new(&sc, -1.0).is_err());
        assert!(LagrangianContext::new(&sc, f64::NAN).is_err());
    }

    #[test]
    fn singular_penalty_is_reported() {
        // One participant with D = 10, d = 1, γ² = 1: ε = 0.1 = σ².
        let sc = scenario(&[(10, 0.0, 1), (1000, 0.0, 1)], 1, 1.0, 0.1);
        assert!(matches!(
            lagrangian_value(&[1, 0], 1.0, &sc),
            Err(Error::Singular(_))
        ));
        assert!(lagrangian_value(&[1, 0], 0.0, &sc).is_ok());
        assert!(matches!(
            LagrangianContext::new(&sc, 1.0),
            Err(Error::Singular(_))
        ));
    }
}

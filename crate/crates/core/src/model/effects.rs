//! Network-effect analytics: marginal error changes, the joining threshold
//! `η`, the four-region classification and coalition merging.

use serde::{Deserialize, Serialize};

use super::{generalization_error, Scenario, SocialState};
use crate::{Error, Result, THRESHOLD_TOL};

fn check_type(scenario: &Scenario, i: usize) -> Result<()> {
    if i >= scenario.num_types() {
        return Err(Error::TypeIndex {
            index: i,
            types: scenario.num_types(),
        });
    }
    Ok(())
}

/// `(K, S)` with `S = Σ Kᵢ/Dᵢ`.
fn sums(participants: &[u32], scenario: &Scenario) -> (f64, f64) {
    participants
        .iter()
        .zip(scenario.types())
        .fold((0.0, 0.0), |(k, s), (&ki, t)| {
            (k + f64::from(ki), s + f64::from(ki) * t.inv_size())
        })
}

/// `∂ε/∂Kᵢ` on the continuous relaxation: `dγ²(K/Dᵢ − 2S)/K³ + σ²/K²`.
pub fn error_partial(state: &SocialState, scenario: &Scenario, i: usize) -> Result<f64> {
    check_type(scenario, i)?;
    let (k, s) = sums(&state.participants, scenario);
    if k == 0.0 {
        return Err(Error::EmptyCoalition("error_partial"));
    }
    let p = scenario.params();
    let inv_d = scenario.types()[i].inv_size();
    Ok(p.d_gamma2() * (k * inv_d - 2.0 * s) / (k * k * k) + p.client_variance / (k * k))
}

/// Joining threshold `η = (2K+1)S/K² − (K+1)σ²/(dγ²K)`.
///
/// A newcomer with data size `D` does not increase the error iff `1/D ≤ η`.
pub fn eta_threshold(state: &SocialState, scenario: &Scenario) -> Result<f64> {
    let (k, s) = sums(&state.participants, scenario);
    if k == 0.0 {
        return Err(Error::EmptyCoalition("eta_threshold"));
    }
    Ok((2.0 * k + 1.0) * s / (k * k) - (k + 1.0) * scenario.params().hetero_point() / k)
}

/// `ε_K − ε_{K∪{n}}` for one more type-`i` participant; positive is beneficial.
pub fn network_effect(
    state: &SocialState,
    scenario: &Scenario,
    newcomer_type: usize,
) -> Result<f64> {
    check_type(scenario, newcomer_type)?;
    if state.total_participants() == 0 {
        return Err(Error::EmptyCoalition("network_effect"));
    }
    let t = &scenario.types()[newcomer_type];
    let used =
        state.participants[newcomer_type] + state.buyers.get(newcomer_type).copied().unwrap_or(0);
    if used >= t.population {
        return Err(Error::NoCapacity(newcomer_type));
    }
    let before = generalization_error(state, scenario).value();
    let mut grown = state.participants.clone();
    grown[newcomer_type] += 1;
    let after = scenario.error_of(&grown).value();
    Ok(before - after)
}

/// The four network-effect regions of a client type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Non-negative at first, eventually negative.
    I,
    /// Always non-negative.
    II,
    /// Always negative.
    III,
    /// Negative at first, eventually non-negative.
    IV,
}

impl Region {
    /// Whether the next type-`j` participant is predicted not to hurt.
    pub fn initially_non_negative(self) -> bool {
        matches!(self, Region::I | Region::II)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// 0-based type index.
    pub type_index: usize,
    pub region: Region,
    pub eta: f64,
    pub inv_d: f64,
    pub hetero_point: f64,
}

/// Assigns type `j` to one region of the `(σ²/(dγ²), 1/Dⱼ)` plane.
///
/// Ties resolve toward the non-negative side: `1/Dⱼ = η` counts as
/// non-negative, and `1/Dⱼ = σ²/(dγ²)` counts as region II (or III when
/// `1/Dⱼ > η`).
pub fn classify_region(state: &SocialState, scenario: &Scenario, j: usize) -> Result<RegionReport> {
    check_type(scenario, j)?;
    let eta = eta_threshold(state, scenario)?;
    let inv_d = scenario.types()[j].inv_size();
    let hetero_point = scenario.params().hetero_point();
    let region = if inv_d <= eta + THRESHOLD_TOL {
        if inv_d >= hetero_point - THRESHOLD_TOL {
            Region::II
        } else {
            Region::I
        }
    } else if inv_d <= hetero_point + THRESHOLD_TOL {
        Region::III
    } else {
        Region::IV
    };
    Ok(RegionReport {
        type_index: j,
        region,
        eta,
        inv_d,
        hetero_point,
    })
}

/// Whether merging two disjoint coalitions lowers the error below the worse
/// of the two, decided by the harmonic-mean test
/// `σ²/γ² < [H_b·K_b + K_a(2H_b − H_a)] / [H_a·H_b·(K_a+K_b)/d]` with
/// `H_a ≤ H_b`.
pub fn coalition_merge_beneficial(
    a: &SocialState,
    b: &SocialState,
    scenario: &Scenario,
) -> Result<bool> {
    let (ka, sa) = sums(&a.participants, scenario);
    let (kb, sb) = sums(&b.participants, scenario);
    if ka == 0.0 || kb == 0.0 {
        return Err(Error::EmptyCoalition("coalition_merge_beneficial"));
    }
    for (i, t) in scenario.types().iter().enumerate() {
        if a.participants[i] + b.participants[i] > t.population {
            return Err(Error::InvalidState(format!(
                "merged coalition exceeds the population of type {}",
                i + 1
            )));
        }
    }
    let (mut ha, mut hb) = (ka / sa, kb / sb);
    let (mut ka, mut kb) = (ka, kb);
    if ha > hb {
        std::mem::swap(&mut ha, &mut hb);
        std::mem::swap(&mut ka, &mut kb);
    }
    let p = scenario.params();
    let ratio = p.client_variance / p.data_variance;
    let bound = (hb * kb + ka * (2.0 * hb - ha)) / (ha * hb * (ka + kb) / f64::from(p.feature_dim));
    Ok(ratio < bound)
}

/// Smallest `K₁` from which the error strictly decreases in `K₁` for two
/// i.i.d. types (`σ² = 0`, `D₁ ≤ D₂`, `K₂` type-2 participants):
/// `⌈(−2K₂D₁ − D₂ + √(4K₂²(D₂−D₁)² + D₂²)) / (2D₂)⌉`, clamped at zero.
///
/// Values within `1e-12` of an integer are snapped before rounding up.
pub fn example1_threshold(d1: u32, d2: u32, k2: u32) -> u32 {
    let (d1, d2, k2) = (f64::from(d1), f64::from(d2), f64::from(k2));
    let disc = 4.0 * k2 * k2 * (d2 - d1).powi(2) + d2 * d2;
    let root = (-2.0 * k2 * d1 - d2 + disc.sqrt()) / (2.0 * d2);
    let snapped = if (root - root.round()).abs() <= THRESHOLD_TOL * root.abs().max(1.0) {
        root.round()
    } else {
        root
    };
    snapped.ceil().max(0.0) as u32
}

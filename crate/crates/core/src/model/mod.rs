//! Problem instance types and the closed-form generalization-error model.

mod effects;

pub use effects::{
    classify_region, coalition_merge_beneficial, error_partial, eta_threshold, example1_threshold,
    network_effect, Region, RegionReport,
};

use serde::{Deserialize, Serialize};

use crate::economy::UtilityFunction;
use crate::{optimizer, Error, Result, THRESHOLD_TOL};

/// One heterogeneity class of clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientType {
    /// 1-based ordinal of the type after sorting by data size.
    #[serde(default)]
    pub index: usize,
    /// Training samples held by every client of this type.
    pub data_size: u32,
    /// Participation cost in utility units.
    pub cost: f64,
    /// Number of clients of this type.
    pub population: u32,
}

impl ClientType {
    pub fn new(data_size: u32, cost: f64, population: u32) -> Self {
        Self {
            index: 0,
            data_size,
            cost,
            population,
        }
    }

    pub(crate) fn inv_size(&self) -> f64 {
        1.0 / f64::from(self.data_size)
    }
}

/// Feature dimension `d`, target-noise variance `γ²` and client divergence `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityParams {
    pub feature_dim: u32,
    pub data_variance: f64,
    pub client_variance: f64,
}

impl HeterogeneityParams {
    pub fn new(feature_dim: u32, data_variance: f64, client_variance: f64) -> Result<Self> {
        let params = Self {
            feature_dim,
            data_variance,
            client_variance,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::InvalidScenario(
                "feature_dim must be at least 1".into(),
            ));
        }
        if !(self.data_variance.is_finite() && self.data_variance > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "data_variance must be positive and finite, got {}",
                self.data_variance
            )));
        }
        if !(self.client_variance.is_finite() && self.client_variance >= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "client_variance must be non-negative and finite, got {}",
                self.client_variance
            )));
        }
        Ok(())
    }

    /// `d·γ²`, the scale of the data-variance error term.
    pub fn d_gamma2(&self) -> f64 {
        f64::from(self.feature_dim) * self.data_variance
    }

    /// `σ²/(d·γ²)`, the heterogeneity point on the `1/D` axis.
    pub fn hetero_point(&self) -> f64 {
        self.client_variance / self.d_gamma2()
    }
}

/// Generalization error of the trained model; `NoModel` when nobody trained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GenError {
    Model(f64),
    NoModel,
}

impl GenError {
    /// Numeric value, `+∞` for `NoModel`.
    pub fn value(self) -> f64 {
        match self {
            GenError::Model(e) => e,
            GenError::NoModel => f64::INFINITY,
        }
    }

    pub fn is_model(self) -> bool {
        matches!(self, GenError::Model(_))
    }
}

/// Participation counts `K` and buyer counts `B` per type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SocialState {
    pub participants: Vec<u32>,
    pub buyers: Vec<u32>,
}

impl SocialState {
    pub fn new(participants: Vec<u32>, buyers: Vec<u32>) -> Self {
        Self {
            participants,
            buyers,
        }
    }

    /// Participants only, no buyers.
    pub fn training(participants: Vec<u32>) -> Self {
        let buyers = vec![0; participants.len()];
        Self::new(participants, buyers)
    }

    /// Every non-participant buys (`Bᵢ = Nᵢ − Kᵢ`), unless nobody trains.
    pub fn full_dissemination(participants: &[u32], scenario: &Scenario) -> Self {
        let nobody = participants.iter().all(|&k| k == 0);
        let buyers = participants
            .iter()
            .zip(scenario.types())
            .map(|(&k, t)| if nobody { 0 } else { t.population - k })
            .collect();
        Self::new(participants.to_vec(), buyers)
    }

    pub fn total_participants(&self) -> u32 {
        self.participants.iter().sum()
    }

    pub fn total_buyers(&self) -> u32 {
        self.buyers.iter().sum()
    }

    /// Checks the per-type capacity bounds and the no-model-no-buyers rule.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let types = scenario.types();
        if self.participants.len() != types.len() || self.buyers.len() != types.len() {
            return Err(Error::InvalidState(format!(
                "expected {} types, got K of length {} and B of length {}",
                types.len(),
                self.participants.len(),
                self.buyers.len()
            )));
        }
        for (i, t) in types.iter().enumerate() {
            let used = u64::from(self.participants[i]) + u64::from(self.buyers[i]);
            if used > u64::from(t.population) {
                return Err(Error::InvalidState(format!(
                    "type {} has K+B = {used} above population {}",
                    i + 1,
                    t.population
                )));
            }
        }
        if self.total_participants() == 0 && self.total_buyers() > 0 {
            return Err(Error::InvalidState(
                "buyers present while nobody trains the model".into(),
            ));
        }
        Ok(())
    }
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    types: Vec<ClientType>,
    params: HeterogeneityParams,
    utility: UtilityFunction,
    eps_req: f64,
    eps_min: f64,
    diagnostics: Vec<String>,
    curvature_holds: bool,
}

impl Scenario {
    /// Validates and builds a scenario.
    ///
    /// Types are stably re-sorted by `(data_size, cost)`; a reorder, a cost
    /// ordering that disagrees with data sizes, and a violated utility
    /// curvature condition are recorded in [`Scenario::diagnostics`] rather
    /// than rejected. An `eps_req` below the minimum achievable error is
    /// rejected with [`Error::Infeasible`].
    pub fn new(
        mut types: Vec<ClientType>,
        params: HeterogeneityParams,
        utility: UtilityFunction,
        eps_req: f64,
    ) -> Result<Self> {
        params.validate()?;
        utility.validate()?;
        if types.is_empty() {
            return Err(Error::InvalidScenario(
                "at least one client type is required".into(),
            ));
        }
        for t in &types {
            if t.data_size == 0 {
                return Err(Error::InvalidScenario(
                    "data_size must be at least 1".into(),
                ));
            }
            if t.population == 0 {
                return Err(Error::InvalidScenario(
                    "population must be at least 1".into(),
                ));
            }
            if !(t.cost.is_finite() && t.cost >= 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "cost must be non-negative and finite, got {}",
                    t.cost
                )));
            }
        }
        if eps_req.is_nan() || eps_req <= 0.0 {
            return Err(Error::InvalidScenario(format!(
                "eps_req must be positive or +inf, got {eps_req}"
            )));
        }

        let mut diagnostics = Vec::new();
        let sorted = types
            .windows(2)
            .all(|w| (w[0].data_size, w[0].cost) <= (w[1].data_size, w[1].cost));
        if !sorted {
            types.sort_by(|a, b| {
                a.data_size
                    .cmp(&b.data_size)
                    .then(a.cost.total_cmp(&b.cost))
            });
            diagnostics.push("client types re-sorted by data size".to_string());
        }
        if types.windows(2).any(|w| w[0].cost > w[1].cost) {
            diagnostics.push("participation costs are not non-decreasing in data size".to_string());
        }
        for (i, t) in types.iter_mut().enumerate() {
            t.index = i + 1;
        }

        let (eps_min, _) = optimizer::min_error_state(&types, &params)?;
        if eps_req < eps_min - THRESHOLD_TOL {
            return Err(Error::Infeasible { eps_req, eps_min });
        }

        let mut scenario = Self {
            types,
            params,
            utility,
            eps_req,
            eps_min,
            diagnostics,
            curvature_holds: true,
        };
        if let Some(msg) = scenario.curvature_violation() {
            log::warn!("{msg}");
            scenario.diagnostics.push(msg);
            scenario.curvature_holds = false;
        }
        Ok(scenario)
    }

    pub fn types(&self) -> &[ClientType] {
        &self.types
    }

    pub fn params(&self) -> &HeterogeneityParams {
        &self.params
    }

    pub fn utility(&self) -> &UtilityFunction {
        &self.utility
    }

    /// Error requirement, `+∞` when unconstrained.
    pub fn eps_req(&self) -> f64 {
        self.eps_req
    }

    /// Minimum achievable error over all non-empty participation states.
    pub fn eps_min(&self) -> f64 {
        self.eps_min
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// `(ε−σ²)U″ + 2U′ ≥ 0` on the reachable error range.
    pub fn curvature_holds(&self) -> bool {
        self.curvature_holds
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn populations(&self) -> Vec<u32> {
        self.types.iter().map(|t| t.population).collect()
    }

    pub fn total_population(&self) -> u32 {
        self.types.iter().map(|t| t.population).sum()
    }

    pub fn is_constrained(&self) -> bool {
        self.eps_req.is_finite()
    }

    /// True when some type has `Dᵢ > dγ²/σ²`, i.e. `σ² > dγ²/D_I`.
    pub fn high_heterogeneity(&self) -> bool {
        let largest = self.types.last().expect("non-empty").data_size;
        self.params.client_variance * f64::from(largest) > self.params.d_gamma2()
    }

    /// Types with `Dᵢ > dγ²/σ²` (0-based indices).
    pub fn high_types(&self) -> Vec<usize> {
        let dg = self.params.d_gamma2();
        let s2 = self.params.client_variance;
        (0..self.types.len())
            .filter(|&i| s2 * f64::from(self.types[i].data_size) > dg)
            .collect()
    }

    /// Copy with a different error requirement, re-validated.
    pub fn with_eps_req(&self, eps_req: f64) -> Result<Self> {
        Self::new(
            self.types.clone(),
            self.params,
            self.utility.clone(),
            eps_req,
        )
    }

    /// Copy with costs `Cᵢ = unit_cost · Dᵢ`.
    pub fn with_unit_cost(&self, unit_cost: f64) -> Result<Self> {
        let types = self
            .types
            .iter()
            .map(|t| {
                ClientType::new(
                    t.data_size,
                    unit_cost * f64::from(t.data_size),
                    t.population,
                )
            })
            .collect();
        Self::new(types, self.params, self.utility.clone(), self.eps_req)
    }

    /// Generalization error for a participation vector.
    pub fn error_of(&self, participants: &[u32]) -> GenError {
        let mut k = 0u64;
        let mut s = 0.0;
        for (&ki, t) in participants.iter().zip(&self.types) {
            k += u64::from(ki);
            s += f64::from(ki) * t.inv_size();
        }
        error_from_sums(k, s, &self.params)
    }

    /// Checks `(ε−σ²)U″(ε) + 2U′(ε) ≥ 0` on a 1,000-point grid spanning
    /// `[ε_min, dγ²/D₁]`.
    fn curvature_violation(&self) -> Option<String> {
        let s2 = self.params.client_variance;
        let lo = self.eps_min;
        let hi = self.params.d_gamma2() * self.types[0].inv_size();
        let hi = hi.max(lo);
        const POINTS: usize = 1000;
        let mut worst: Option<(f64, f64)> = None;
        for n in 0..POINTS {
            let eps = lo + (hi - lo) * n as f64 / (POINTS - 1) as f64;
            if (eps - s2).abs() < THRESHOLD_TOL || eps <= 0.0 {
                continue;
            }
            let u = &self.utility;
            let c = (eps - s2) * u.second_derivative(eps) + 2.0 * u.derivative(eps);
            let scale = u.derivative(eps).abs().max(f64::MIN_POSITIVE);
            if c < -1e-9 * scale && worst.map_or(true, |(_, w)| c < w) {
                worst = Some((eps, c));
            }
        }
        worst.map(|(eps, c)| {
            format!(
                "utility curvature condition (eps - sigma2) U'' + 2 U' >= 0 fails at eps = {eps:.6} (value {c:.3e})"
            )
        })
    }
}

pub(crate) fn error_from_sums(k: u64, inv_sum: f64, params: &HeterogeneityParams) -> GenError {
    if k == 0 {
        return GenError::NoModel;
    }
    let kf = k as f64;
    GenError::Model(
        params.d_gamma2() * inv_sum / (kf * kf) + (kf - 1.0) / kf * params.client_variance,
    )
}

/// `ε = dγ²/K²·Σᵢ Kᵢ/Dᵢ + (K−1)/K·σ²`, or `NoModel` when `K = 0`.
pub fn generalization_error(state: &SocialState, scenario: &Scenario) -> GenError {
    scenario.error_of(&state.participants)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn power(scale: f64, exponent: f64) -> UtilityFunction {
        UtilityFunction::Power { scale, exponent }
    }

    pub fn scenario(types: &[(u32, f64, u32)], d: u32, g2: f64, s2: f64) -> Scenario {
        scenario_with(types, d, g2, s2, power(1.0, 2.0))
    }

    pub fn scenario_with(
        types: &[(u32, f64, u32)],
        d: u32,
        g2: f64,
        s2: f64,
        u: UtilityFunction,
    ) -> Scenario {
        let types = types
            .iter()
            .map(|&(ds, c, n)| ClientType::new(ds, c, n))
            .collect();
        Scenario::new(
            types,
            HeterogeneityParams::new(d, g2, s2).unwrap(),
            u,
            f64::INFINITY,
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::scenario;
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn single_participant_has_no_variance_term() {
        let sc = scenario(&[(100, 0.0, 3)], 10, 1.0, 0.5);
        let eps = generalization_error(&SocialState::training(vec![1]), &sc).value();
        assert!(close(eps, 0.1));
    }

    #[test]
    fn empty_coalition_has_no_model() {
        let sc = scenario(&[(100, 0.0, 3)], 10, 1.0, 0.5);
        assert_eq!(
            generalization_error(&SocialState::training(vec![0]), &sc),
            GenError::NoModel
        );
        assert_eq!(GenError::NoModel.value(), f64::INFINITY);
    }

    #[test]
    fn two_identical_participants() {
        let sc = scenario(&[(100, 0.0, 3)], 10, 1.0, 0.5);
        let eps = generalization_error(&SocialState::training(vec![2]), &sc).value();
        assert!(close(eps, 0.30), "{eps}");
    }

    #[test]
    fn types_are_resorted_and_indexed() {
        let sc = scenario(&[(300, 3.0, 1), (50, 0.5, 2)], 1, 1.0, 0.0);
        assert_eq!(sc.types()[0].data_size, 50);
        assert_eq!(sc.types()[0].index, 1);
        assert_eq!(sc.types()[1].index, 2);
        assert!(sc.diagnostics().iter().any(|d| d.contains("re-sorted")));
    }

    #[test]
    fn rejects_invalid_inputs() {
        let p = HeterogeneityParams::new(1, 1.0, 0.0).unwrap();
        let u = fixtures::power(1.0, 2.0);
        assert!(Scenario::new(vec![], p, u.clone(), f64::INFINITY).is_err());
        assert!(Scenario::new(
            vec![ClientType::new(0, 0.0, 1)],
            p,
            u.clone(),
            f64::INFINITY
        )
        .is_err());
        assert!(Scenario::new(
            vec![ClientType::new(1, -1.0, 1)],
            p,
            u.clone(),
            f64::INFINITY
        )
        .is_err());
        assert!(Scenario::new(
            vec![ClientType::new(1, 0.0, 0)],
            p,
            u.clone(),
            f64::INFINITY
        )
        .is_err());
        assert!(Scenario::new(vec![ClientType::new(1, 0.0, 1)], p, u, f64::NAN).is_err());
        assert!(HeterogeneityParams::new(0, 1.0, 0.0).is_err());
        assert!(HeterogeneityParams::new(1, 0.0, 0.0).is_err());
        assert!(HeterogeneityParams::new(1, 1.0, -0.1).is_err());
    }

    #[test]
    fn infeasible_requirement_is_a_load_error() {
        let sc = scenario(&[(100, 0.0, 2)], 10, 1.0, 0.0);
        // ε_min = dγ²/(N·D) = 10/200
        assert!(close(sc.eps_min(), 0.05));
        assert!(matches!(
            sc.with_eps_req(0.049),
            Err(Error::Infeasible { .. })
        ));
        assert!(sc.with_eps_req(0.05).is_ok());
    }

    #[test]
    fn state_validation() {
        let sc = scenario(&[(100, 0.0, 2), (200, 0.0, 1)], 10, 1.0, 0.0);
        assert!(SocialState::new(vec![1, 0], vec![1, 1])
            .validate(&sc)
            .is_ok());
        assert!(SocialState::new(vec![2, 0], vec![1, 0])
            .validate(&sc)
            .is_err());
        assert!(SocialState::new(vec![0, 0], vec![1, 0])
            .validate(&sc)
            .is_err());
        assert!(SocialState::new(vec![0], vec![0]).validate(&sc).is_err());
        let full = SocialState::full_dissemination(&[1, 0], &sc);
        assert_eq!(full.buyers, vec![1, 1]);
        let none = SocialState::full_dissemination(&[0, 0], &sc);
        assert_eq!(none.buyers, vec![0, 0]);
    }

    #[test]
    fn error_scales_with_d_gamma2_without_client_variance() {
        let a = scenario(&[(50, 0.0, 4), (300, 0.0, 3)], 10, 1.0, 0.0);
        let b = scenario(&[(50, 0.0, 4), (300, 0.0, 3)], 10, 2.5, 0.0);
        for k in crate::enumerate::BoxIter::new(&[4, 3]).skip(1) {
            let ea = a.error_of(&k).value();
            let eb = b.error_of(&k).value();
            assert!(close(eb, 2.5 * ea));
        }
    }

    #[test]
    fn heterogeneity_partition() {
        // dγ²/σ² = 10/0.05 = 200
        let sc = scenario(
            &[(100, 0.0, 1), (200, 0.0, 1), (300, 0.0, 1)],
            10,
            1.0,
            0.05,
        );
        assert!(sc.high_heterogeneity());
        assert_eq!(sc.high_types(), vec![2]);
        let low = scenario(&[(100, 0.0, 1), (200, 0.0, 1)], 10, 1.0, 0.05);
        assert!(!low.high_heterogeneity());
        assert!(low.high_types().is_empty());
    }
}

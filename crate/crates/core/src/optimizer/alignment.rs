use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::enumerate::{self, corner, BoxIter};
use crate::model::{error_partial, Scenario, SocialState};
use crate::{Result, THRESHOLD_TOL};

/// Coalition boxes above this size are sampled instead of enumerated.
const COALITION_GUARD: u128 = 1_000_000;
const SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentWitness {
    /// Participation vector of the coalition (`J` or `K`) being tested.
    pub coalition: Vec<u32>,
    /// 0-based type index.
    pub type_index: usize,
    /// Left-hand side of the condition; `+∞` when joining does not raise utility.
    pub lhs: f64,
    /// `Ψᵢ` for the tested addition. Negative values come from the gain check,
    /// whose bound is `-Ψᵢ`.
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub holds: bool,
    /// Per type, `Ψᵢ` at the tightest check (`None` if never checked).
    pub psi: Vec<Option<f64>>,
    pub failing_witnesses: Vec<AlignmentWitness>,
    /// Coalitions were sampled rather than enumerated.
    pub partial: bool,
    pub checks: u64,
}

struct Tally {
    psi: Vec<Option<f64>>,
    slack: Vec<f64>,
    failing: Vec<AlignmentWitness>,
    checks: u64,
}

impl Tally {
    fn new(types: usize) -> Self {
        Self {
            psi: vec![None; types],
            slack: vec![f64::INFINITY; types],
            failing: Vec::new(),
            checks: 0,
        }
    }

    /// Records `num / slope ≤ psi`. A zero numerator always passes; a positive
    /// cost against a utility slope that is not positive never does.
    fn check(&mut self, coalition: &[u32], i: usize, num: f64, slope: f64, psi: f64) {
        self.checks += 1;
        let lhs = if num == 0.0 {
            0.0
        } else if slope <= 0.0 {
            f64::INFINITY
        } else {
            num / slope
        };
        self.record(coalition, i, lhs, psi, psi);
    }

    /// Records `num / marginal ≤ -psi` for an addition that lowers the error:
    /// the utility gained on the tangent of `U` must cover the cost.
    fn check_gain(&mut self, coalition: &[u32], i: usize, num: f64, marginal: f64, psi: f64) {
        self.checks += 1;
        let lhs = if num == 0.0 {
            0.0
        } else if marginal <= 0.0 {
            f64::INFINITY
        } else {
            num / marginal
        };
        self.record(coalition, i, lhs, -psi, psi);
    }

    fn record(&mut self, coalition: &[u32], i: usize, lhs: f64, bound: f64, psi: f64) {
        let slack = bound - lhs;
        if slack < self.slack[i] {
            self.slack[i] = slack;
            self.psi[i] = Some(psi);
        }
        if lhs > bound + THRESHOLD_TOL * bound.abs().max(1.0) {
            self.failing.push(AlignmentWitness {
                coalition: coalition.to_vec(),
                type_index: i,
                lhs,
                psi,
            });
        }
    }
}

/// `-U′(ε)` at the coalition.
fn marginal_utility(scenario: &Scenario, k: &[u32]) -> f64 {
    -scenario.utility().derivative(scenario.error_of(k).value())
}

/// `(K+n)²·(ε_after − ε_before)` when `n` clients of type `i` join `k`.
fn exact_psi(scenario: &Scenario, k: &[u32], i: usize, n: u32) -> f64 {
    let mut after = k.to_vec();
    after[i] += n;
    let total = f64::from(after.iter().sum::<u32>());
    total * total * (scenario.error_of(&after).value() - scenario.error_of(k).value())
}

/// `∂U(ε)/∂Kᵢ = U′(ε)·∂ε/∂Kᵢ` at the coalition.
fn utility_slope(scenario: &Scenario, k: &[u32], i: usize) -> Result<f64> {
    let eps = scenario.error_of(k).value();
    let de = error_partial(&SocialState::training(k.to_vec()), scenario, i)?;
    Ok(scenario.utility().derivative(eps) * de)
}

/// Sufficient conditions under which constrained welfare maximization and
/// error minimization pick the same state.
///
/// Below the heterogeneity point every non-empty proper subset of types is
/// tested against each type outside it; above it every non-empty coalition
/// (sampled past one million states) is tested against every type.
///
/// Additions with `Ψᵢ ≥ 0` raise the error and are held to the inequality
/// as stated. Additions that lower the error get the mirror check: the
/// utility gained along the tangent of `U` at the coalition must cover the
/// joiners' cost, with `-Ψᵢ` taken from the exact error change. Without it a
/// costly error-reducing type passes unexamined and the welfare optimum can
/// stop short of the error minimizer.
pub fn check_alignment(scenario: &Scenario) -> Result<AlignmentReport> {
    let types = scenario.types();
    let p = scenario.params();
    let dg2 = p.d_gamma2();
    let s2 = p.client_variance;
    let n_total = f64::from(scenario.total_population());
    let bounds = scenario.populations();
    let mut tally = Tally::new(types.len());
    let mut partial = false;

    if !scenario.high_heterogeneity() {
        let full = (1usize << types.len()) - 1;
        for mask in 1..full {
            let j = corner(&bounds, mask);
            let k = f64::from(j.iter().sum::<u32>());
            let eps = scenario.error_of(&j).value();
            for (i, t) in types.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    continue;
                }
                let ni = f64::from(t.population);
                let psi = dg2 * ni * t.inv_size() + ni * (ni + 2.0 * k - 1.0) * s2
                    - (2.0 * k * ni + 1.0) * eps;
                let num = (k + ni).powi(2) * ni * t.cost / n_total;
                if psi >= 0.0 {
                    tally.check(&j, i, num, utility_slope(scenario, &j, i)?, psi);
                }
                let exact = exact_psi(scenario, &j, i, t.population);
                if exact < 0.0 {
                    tally.check_gain(&j, i, num, marginal_utility(scenario, &j), exact);
                }
            }
        }
    } else {
        let mut visit = |k_vec: &[u32]| -> Result<()> {
            let k = f64::from(k_vec.iter().sum::<u32>());
            let eps = scenario.error_of(k_vec).value();
            for (i, t) in types.iter().enumerate() {
                let psi = dg2 * t.inv_size() + 2.0 * k * s2 - (2.0 * k + 1.0) * eps;
                let num = (k + 1.0).powi(2) * t.cost / n_total;
                if psi >= 0.0 {
                    tally.check(k_vec, i, num, utility_slope(scenario, k_vec, i)?, psi);
                }
                if k_vec[i] < t.population && psi < 0.0 {
                    tally.check_gain(k_vec, i, num, marginal_utility(scenario, k_vec), psi);
                }
            }
            Ok(())
        };
        if enumerate::box_size(&bounds) <= COALITION_GUARD {
            for k in BoxIter::new(&bounds).skip(1) {
                visit(&k)?;
            }
        } else {
            partial = true;
            log::warn!(
                "coalition space too large; alignment checked on {SAMPLES} sampled coalitions"
            );
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut drawn = 0;
            while drawn < SAMPLES {
                let k: Vec<u32> = bounds.iter().map(|&b| rng.gen_range(0..=b)).collect();
                if k.iter().any(|&x| x > 0) {
                    visit(&k)?;
                    drawn += 1;
                }
            }
        }
    }

    Ok(AlignmentReport {
        holds: tally.failing.is_empty(),
        psi: tally.psi,
        failing_witnesses: tally.failing,
        partial,
        checks: tally.checks,
    })
}

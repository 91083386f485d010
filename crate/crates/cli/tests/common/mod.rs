//! Seeded random scenarios shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use swanmech_core::enumerate::{box_size, BoxIter};
use swanmech_core::{ClientType, HeterogeneityParams, Scenario, UtilityFunction};

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_types: usize,
    pub min_types: usize,
    pub max_pop: u32,
    pub box_limit: u128,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            max_types: 4,
            min_types: 1,
            max_pop: 8,
            box_limit: 10_000,
        }
    }
}

fn populations(rng: &mut ChaCha8Rng, shape: Shape) -> Vec<u32> {
    let types = rng.gen_range(shape.min_types..=shape.max_types);
    let mut n: Vec<u32> = (0..types)
        .map(|_| rng.gen_range(1..=shape.max_pop))
        .collect();
    while box_size(&n) > shape.box_limit {
        let i = (0..n.len()).max_by_key(|&i| n[i]).unwrap();
        n[i] -= 1;
    }
    n
}

/// Draws scenarios until one is valid; low-heterogeneity draws must also
/// satisfy the utility curvature condition.
pub fn random_scenario(rng: &mut ChaCha8Rng, shape: Shape, constrain: bool) -> Scenario {
    loop {
        let n = populations(rng, shape);
        let mut d: Vec<u32> = (0..n.len()).map(|_| rng.gen_range(10..=500)).collect();
        d.sort_unstable();
        let dim = rng.gen_range(1..=50u32);
        let g2 = rng.gen_range(0.1..5.0);
        let dg2 = f64::from(dim) * g2;
        let d_max = f64::from(*d.last().unwrap());
        let d_min = f64::from(d[0]);
        let s2 = match rng.gen_range(0..10) {
            0..=3 => 0.0,
            4..=6 => rng.gen_range(0.0..1.0) * dg2 / d_max,
            _ => rng.gen_range(dg2 / d_max..2.0 * dg2 / d_min),
        };
        let Ok(params) = HeterogeneityParams::new(dim, g2, s2) else {
            continue;
        };

        // Costs scale with data size around the utility of the full coalition.
        let k: f64 = n.iter().map(|&x| f64::from(x)).sum();
        let s: f64 = n
            .iter()
            .zip(&d)
            .map(|(&x, &di)| f64::from(x) / f64::from(di))
            .sum();
        let eps_all = dg2 * s / (k * k) + (k - 1.0) / k * s2;
        // Scale so that the full coalition's utility is O(1).
        let u_ref = rng.gen_range(0.5..5.0);
        let exponent = rng.gen_range(1.0..3.0);
        let utility = UtilityFunction::power(u_ref * eps_all.powf(exponent), exponent);
        let level = 10f64.powf(rng.gen_range(-2.0..1.3)) * u_ref;
        let mut costs: Vec<f64> = d
            .iter()
            .map(|&di| level * f64::from(di) / d_max * rng.gen_range(0.9..1.1))
            .collect();
        costs.sort_by(f64::total_cmp);
        let types: Vec<ClientType> = d
            .iter()
            .zip(&costs)
            .zip(&n)
            .map(|((&di, &c), &ni)| ClientType::new(di, c, ni))
            .collect();
        let Ok(sc) = Scenario::new(types, params, utility, f64::INFINITY) else {
            continue;
        };
        if !sc.high_heterogeneity() && sc.diagnostics().iter().any(|m| m.contains("curvature")) {
            continue;
        }
        if !constrain || rng.gen_bool(0.5) {
            return sc;
        }
        let eps_req = random_state_error(rng, &sc).max(sc.eps_min());
        if let Ok(c) = sc.with_eps_req(eps_req) {
            return c;
        }
    }
}

/// Error of a uniformly drawn non-empty participation vector.
pub fn random_state_error(rng: &mut ChaCha8Rng, sc: &Scenario) -> f64 {
    loop {
        let k: Vec<u32> = sc
            .populations()
            .iter()
            .map(|&b| rng.gen_range(0..=b))
            .collect();
        if k.iter().any(|&x| x > 0) {
            return sc.error_of(&k).value();
        }
    }
}

/// Largest error over non-empty participation vectors.
pub fn max_error(sc: &Scenario) -> f64 {
    BoxIter::new(&sc.populations())
        .skip(1)
        .map(|k| sc.error_of(&k).value())
        .fold(0.0, f64::max)
}

//! Scenario builders shared by the benchmarks.

use swanmech_core::{ClientType, HeterogeneityParams, Scenario, UtilityFunction};

/// MNIST-shaped market with every population multiplied by `scale`.
pub fn mnist_like(scale: u32) -> Scenario {
    let types = [(50, 0.1, 10), (120, 0.24, 5), (300, 0.6, 5)]
        .into_iter()
        .map(|(d, c, n)| ClientType::new(d, c, n * scale))
        .collect();
    let params = HeterogeneityParams::new(784, 2.8, 0.0).expect("valid parameters");
    Scenario::new(
        types,
        params,
        UtilityFunction::power(40.0, 16.0),
        f64::INFINITY,
    )
    .expect("valid scenario")
}

/// Above the heterogeneity point: `σ²` exceeds `dγ²/D` for every type.
pub fn heterogeneous(populations: &[u32]) -> Scenario {
    let types = populations
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let d = 100 * (i as u32 + 1);
            ClientType::new(d, 0.002 * f64::from(d), n)
        })
        .collect();
    let params = HeterogeneityParams::new(10, 1.0, 0.2).expect("valid parameters");
    Scenario::new(
        types,
        params,
        UtilityFunction::power(1.0, 2.0),
        f64::INFINITY,
    )
    .expect("valid scenario")
}

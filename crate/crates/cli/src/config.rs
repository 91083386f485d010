//! TOML scenario files.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use swanmech_core::{ClientType, HeterogeneityParams, Scenario, UtilityFunction};

use crate::CliError;

/// A finite positive number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub f64);

impl Default for Bound {
    fn default() -> Self {
        Bound(f64::INFINITY)
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Bound(x)),
            Raw::Text(s) if s.eq_ignore_ascii_case("inf") => Ok(Bound(f64::INFINITY)),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeConfig {
    pub data_size: u32,
    pub cost: f64,
    pub population: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Benchmark {
    pub modified_fl_reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    UnitCost,
    EpsReq,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::UnitCost => "unit_cost",
            SweepVariable::EpsReq => "eps_req",
        })
    }
}

/// Ordered so that sweep rows sort SWAN first.
#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    Hash,
    PartialOrd,
    Ord,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Swan,
    ModifiedFl,
    Zero,
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MechanismKind::Swan => "swan",
            MechanismKind::ModifiedFl => "modified_fl",
            MechanismKind::Zero => "zero",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    #[serde(default = "all_mechanisms")]
    pub mechanisms: Vec<MechanismKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn all_mechanisms() -> Vec<MechanismKind> {
    vec![
        MechanismKind::Swan,
        MechanismKind::ModifiedFl,
        MechanismKind::Zero,
    ]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_max_rounds() -> u32 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub feature_dim: u32,
    pub data_variance: f64,
    pub client_variance: f64,
    #[serde(default)]
    pub eps_req: Bound,
    pub utility: UtilityFunction,
    pub types: Vec<TypeConfig>,
    #[serde(default)]
    pub benchmark: Option<Benchmark>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(sweep) = &cfg.sweep {
            if sweep.grid.is_empty() {
                return Err(CliError::Config("sweep grid must not be empty".into()));
            }
            if sweep.mechanisms.is_empty() || sweep.seeds.is_empty() {
                return Err(CliError::Config(
                    "sweep needs at least one mechanism and one seed".into(),
                ));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let params =
            HeterogeneityParams::new(self.feature_dim, self.data_variance, self.client_variance)?;
        let types = self
            .types
            .iter()
            .map(|t| ClientType::new(t.data_size, t.cost, t.population))
            .collect();
        let scenario = Scenario::new(types, params, self.utility.clone(), self.eps_req.0)?;
        for d in scenario.diagnostics() {
            log::warn!("{d}");
        }
        Ok(scenario)
    }

    /// Flat participation payment for Modified FL; defaults to the largest cost
    /// so that every type is at least willing to train.
    pub fn modified_fl_reward(&self) -> f64 {
        self.benchmark.as_ref().map_or_else(
            || self.types.iter().map(|t| t.cost).fold(0.0, f64::max),
            |b| b.modified_fl_reward,
        )
    }
}

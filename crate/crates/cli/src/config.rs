//! Fully resolved per-subcommand parameters. Each can be read from a JSON
//! file (`--config`), and any flag given on the command line overrides it.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pavlov_cycle::dynamics::{InitConfig, StrategyKind};
use pavlov_cycle::experiments::{DEFAULT_BAND_CONSTANT, DEFAULT_MAX_STEPS};
use pavlov_cycle::meanfield::{DEFAULT_DT, DEFAULT_ORDER};
use pavlov_cycle::weights::{Series, DEFAULT_OMEGA};

use crate::Failure;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    pub p: f64,
    pub strategy: StrategyKind,
    pub init: InitConfig,
    pub max_steps: u64,
    pub seed: u64,
    /// Emit a run-structure row every this many steps.
    pub trace: Option<u64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            n: 100,
            p: 1.0,
            strategy: StrategyKind::Rp,
            init: InitConfig::AllDefect,
            max_steps: DEFAULT_MAX_STEPS,
            seed: 0,
            trace: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub strategy: StrategyKind,
    pub p: f64,
    pub omega: f64,
    pub n: usize,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig { strategy: StrategyKind::Rp, p: 0.9, omega: DEFAULT_OMEGA, n: 100 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdsConfig {
    pub strategy: StrategyKind,
    pub series: Series,
    /// Defaults to 4 for `h` and 3 for `f`.
    pub lmin: Option<usize>,
    /// Defaults to 8 for `h` and 7 for `f`.
    pub lmax: Option<usize>,
    pub tol: f64,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig { strategy: StrategyKind::Rp, series: Series::H, lmin: None, lmax: None, tol: 1e-10 }
    }
}

impl ThresholdsConfig {
    pub fn range(&self) -> (usize, usize) {
        let (lo, hi) = match self.series {
            Series::H => (4, 8),
            Series::F => (3, 7),
        };
        (self.lmin.unwrap_or(lo), self.lmax.unwrap_or(hi))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanfieldConfig {
    pub p: f64,
    pub tau_end: f64,
    pub dt: f64,
    #[serde(rename = "L")]
    pub order: usize,
    pub sample_every: usize,
    /// Number of `P_l` columns in the trajectory CSV, counting from `P_0`.
    pub columns: usize,
    /// Cycle length and step horizon for the long-run bound.
    pub bound_n: f64,
    pub bound_t: f64,
}

impl Default for MeanfieldConfig {
    fn default() -> Self {
        MeanfieldConfig {
            p: 0.01,
            tau_end: 10.0,
            dt: DEFAULT_DT,
            order: DEFAULT_ORDER,
            sample_every: 100,
            columns: 11,
            bound_n: 2e5,
            bound_t: 1e6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefectTimeConfig {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub band_constant: f64,
}

impl Default for DefectTimeConfig {
    fn default() -> Self {
        DefectTimeConfig { n: 100, reps: 200, seed: 0, band_constant: DEFAULT_BAND_CONSTANT }
    }
}

//! Config files for the experiment subcommands.
//!
//! Every file has the same top level: an optional `seed`, `name`,
//! `output_dir` and `threads`, an optional `[estimator]` table and a
//! `[scenario]` table whose `kind` selects the experiment. A JSON sidecar
//! written by an earlier run can be passed instead of a TOML file; its
//! `config` entry is the resolved file of that run.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use swd_core::experiments::Schedule;
use swd_core::measures::DistributionSpec;
use swd_core::mswe::{Optimizer, ParametricFamily};
use swd_core::smooth::{SmoothingConfig, SmoothingMethod};
use swd_core::Seed;

use crate::CliError;

/// Smoothing settings shared by all subcommands. `sigma` lives in the
/// scenario, the noise seed is derived from the run seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub method: Option<SmoothingMethod>,
    pub replicas: Option<usize>,
    pub repeats: Option<usize>,
    pub shared_noise: Option<bool>,
    pub support_size: Option<usize>,
    pub quad_tol: Option<f64>,
    pub sinkhorn_epsilon: Option<f64>,
}

impl EstimatorConfig {
    /// Builds a smoothing config; unset fields take the given defaults.
    pub fn build(
        &self,
        sigma: f64,
        seed: Seed,
        default_method: SmoothingMethod,
        default_repeats: usize,
    ) -> SmoothingConfig {
        let base = SmoothingConfig::default();
        SmoothingConfig {
            sigma,
            replicas: self.replicas.unwrap_or(base.replicas),
            method: self.method.unwrap_or(default_method),
            noise_seed: seed,
            sinkhorn_epsilon: self.sinkhorn_epsilon,
            repeats: self.repeats.unwrap_or(default_repeats),
            shared_noise: self.shared_noise.unwrap_or(base.shared_noise),
            support_size: self.support_size.unwrap_or(base.support_size),
            quad_tol: self.quad_tol.unwrap_or(base.quad_tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile<S> {
    pub seed: Option<u64>,
    pub name: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub scenario: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RatesScenario {
    OneSample {
        spec: DistributionSpec,
        sigma: f64,
        n_grid: Vec<usize>,
        reps: usize,
        reference_size: Option<usize>,
    },
    SigmaPrefactor {
        spec: DistributionSpec,
        n: usize,
        sigma_grid: Vec<f64>,
        reps: usize,
        reference_size: Option<usize>,
    },
    IntrinsicDim {
        s: usize,
        d: usize,
        frame_seed: Option<u64>,
        sigma: f64,
        n_grid: Vec<usize>,
        reps: usize,
        reference_size: Option<usize>,
    },
    VanishingSigma {
        spec: DistributionSpec,
        schedule: Schedule,
        alpha: Option<f64>,
        n_grid: Vec<usize>,
        reps: usize,
        reference_size: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_optimizer")]
    pub method: Optimizer,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
    pub model_size: Option<usize>,
    #[serde(default = "default_model_factor")]
    pub model_factor: usize,
}

fn default_optimizer() -> Optimizer {
    Optimizer::NelderMead
}
fn default_starts() -> usize {
    3
}
fn default_tolerance() -> f64 {
    1e-5
}
fn default_max_evaluations() -> usize {
    2000
}
fn default_model_factor() -> usize {
    4
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: default_optimizer(),
            starts: default_starts(),
            tolerance: default_tolerance(),
            max_evaluations: default_max_evaluations(),
            model_size: None,
            model_factor: default_model_factor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MdeScenario {
    /// Fit one data file.
    Fit {
        data: PathBuf,
        family: ParametricFamily,
        sigma: f64,
        #[serde(default)]
        optimizer: OptimizerConfig,
    },
    /// Error of the fit against n on synthetic data.
    Rate {
        family: ParametricFamily,
        theta_star: Vec<f64>,
        data_spec: Option<DistributionSpec>,
        sigma: f64,
        n_grid: Vec<usize>,
        reps: usize,
        #[serde(default)]
        optimizer: OptimizerConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConcentrationScenario {
    Tail {
        spec: DistributionSpec,
        n: usize,
        sigma: f64,
        #[serde(default)]
        eta: f64,
        /// Explicit t values.
        t_grid: Option<Vec<f64>>,
        /// Levels of `exp(-2 n t^2 / diam^2)` whose t values join the grid.
        t_levels: Option<Vec<f64>>,
        trials: usize,
        reference_size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PowerScenarioConfig {
    LevelPower {
        null_spec: DistributionSpec,
        alt_spec: DistributionSpec,
        n: usize,
        m: usize,
        sigma: f64,
        alpha: f64,
        #[serde(rename = "B")]
        b: usize,
        trials: usize,
    },
}

/// Reads a TOML config, or the `config` entry of a JSON sidecar.
pub fn load<S: DeserializeOwned>(path: &Path) -> Result<ConfigFile<S>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let mut value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
        let config = value
            .get_mut("config")
            .map(serde_json::Value::take)
            .ok_or_else(|| {
                CliError::User(format!("{}: no `config` entry to replay", path.display()))
            })?;
        serde_json::from_value(config)
            .map_err(|e| CliError::User(format!("{}: config: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
    }
}

impl<S> ConfigFile<S> {
    /// Stem for the report files.
    pub fn stem(&self, default: &str) -> String {
        self.name.clone().unwrap_or_else(|| default.to_string())
    }
}

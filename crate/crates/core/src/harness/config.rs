//! Sectioned `key = value` experiment configuration (TOML syntax).
//!
//! ```toml
//! seed = 1
//! rounds = 5000
//! metric_stride = 10
//!
//! [topology]
//! spec = "ring:10"
//!
//! [problem]
//! kind = "logistic"
//! dim = 5
//! samples_per_agent = 100
//! epsilon = 0.1
//!
//! [algorithm]
//! compressor = "qbit:8"
//! estimator = "saga"
//!
//! [time]
//! t_g = 1.0
//! t_c = 10.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compressors::CompressorSpec;
use crate::error::{Error, Result};
use crate::estimators::EstimatorMode;
use crate::objectives::{generate_logistic, generate_quadratic, load_logistic_file, LocalProblem};
use crate::protocol::Hyperparameters;
use crate::topology::{parse_topology_spec, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed of the protocol's random streams.
    #[serde(default)]
    pub seed: u64,
    pub rounds: u64,
    #[serde(default = "default_stride")]
    pub metric_stride: u64,
    /// Stop as soon as `|grad F(x_bar)|^2` falls to this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_grad_norm_sq: Option<f64>,
    /// Solve for `x*` up front so `dist_to_opt` can be reported.
    #[serde(default = "default_true")]
    pub solve_reference: bool,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub topology: TopologyConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub time: TimeModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    /// `ring:N`, `complete:N`, `path:N` or `edges:PATH`.
    pub spec: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Logistic,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Data points (components) per agent.
    #[serde(default = "default_samples")]
    pub samples_per_agent: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Data seed; falls back to the top-level seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Load logistic data from a dump instead of generating it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmConfig {
    pub rho: f64,
    pub tau: usize,
    pub gamma: f64,
    pub beta: f64,
    pub r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub estimator: String,
    pub batch_size: usize,
    pub compressor: String,
}

/// Cost of one component-gradient evaluation and of one communication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeModel {
    pub t_g: f64,
    pub t_c: f64,
}

fn default_stride() -> u64 {
    10
}
fn default_true() -> bool {
    true
}
fn default_dim() -> usize {
    5
}
fn default_samples() -> usize {
    100
}
fn default_epsilon() -> f64 {
    0.1
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            rho: 0.1,
            tau: 5,
            gamma: 0.3,
            beta: 0.2,
            r: 1.0,
            eta: None,
            estimator: "saga".into(),
            batch_size: 1,
            compressor: "qbit:8".into(),
        }
    }
}

impl Default for TimeModel {
    fn default() -> Self {
        Self {
            t_g: 1.0,
            t_c: 10.0,
        }
    }
}

impl TimeModel {
    /// Wall time of a round where the slowest agent made `evaluations`
    /// fresh component-gradient evaluations: two communications per round.
    pub fn round_time(&self, evaluations: u64) -> f64 {
        evaluations as f64 * self.t_g + 2.0 * self.t_c
    }
}

impl ExperimentConfig {
    /// Parses and validates; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.metric_stride == 0 {
            return Err(Error::Config("metric_stride must be at least 1".into()));
        }
        if let Some(t) = self.target_grad_norm_sq {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!(
                    "target_grad_norm_sq must be >= 0, got {t}"
                )));
            }
        }
        let p = &self.problem;
        if p.dim == 0 || p.samples_per_agent == 0 {
            return Err(Error::Config(
                "problem dim and samples_per_agent must be positive".into(),
            ));
        }
        if p.kind == ProblemKind::Logistic && !(p.epsilon > 0.0 && p.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                p.epsilon
            )));
        }
        for (name, v) in [("t_g", self.time.t_g), ("t_c", self.time.t_c)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be a nonnegative number, got {v}"
                )));
            }
        }
        if self.problem.dataset.is_none() {
            let hyper = self.hyperparameters()?;
            hyper.validate(p.dim)?;
            hyper.estimator.validate(p.samples_per_agent)?;
        }
        Ok(())
    }

    pub fn hyperparameters(&self) -> Result<Hyperparameters> {
        let a = &self.algorithm;
        Ok(Hyperparameters {
            rho: a.rho,
            tau: a.tau,
            gamma: a.gamma,
            beta: a.beta,
            r: a.r,
            eta: a.eta,
            estimator: EstimatorMode::from_name(&a.estimator, a.batch_size)?,
            compressor: a.compressor.parse::<CompressorSpec>()?,
        })
    }

    pub fn build_topology(&self) -> Result<Topology> {
        parse_topology_spec(&self.topology.spec)
    }

    pub fn data_seed(&self) -> u64 {
        self.problem.seed.unwrap_or(self.seed)
    }

    pub fn build_problems(&self, n_agents: usize) -> Result<Vec<LocalProblem>> {
        let p = &self.problem;
        let problems = match (p.kind, &p.dataset) {
            (ProblemKind::Logistic, Some(path)) => load_logistic_file(path)?,
            (ProblemKind::Logistic, None) => generate_logistic(
                n_agents,
                p.dim,
                p.samples_per_agent,
                p.epsilon,
                self.data_seed(),
            )?,
            (ProblemKind::Quadratic, Some(_)) => {
                return Err(Error::Config(
                    "datasets can only be loaded for logistic problems".into(),
                ))
            }
            (ProblemKind::Quadratic, None) => {
                generate_quadratic(n_agents, p.dim, p.samples_per_agent, self.data_seed())?
            }
        };
        Error::check_dim(n_agents, problems.len())?;
        Ok(problems)
    }

    /// Non-fatal issues, currently a beta at or above the contraction bound.
    pub fn warnings(&self, topology: &Topology) -> Result<Vec<String>> {
        let a = &self.algorithm;
        let bound = topology
            .spectral_info()?
            .max_beta_bound(a.r, a.tau, a.rho)?;
        let mut out = Vec::new();
        if a.beta >= bound {
            out.push(format!(
                "beta = {} is not below the bound 2/(r^2 tau lambda_max rho) = {bound}",
                a.beta
            ));
        }
        Ok(out)
    }
}

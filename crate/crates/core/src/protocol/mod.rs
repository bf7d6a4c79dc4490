//! The synchronous round protocol.
//!
//! Each round every agent runs `tau` local gradient steps, packs compressed
//! messages with error feedback, exchanges them with its neighbors and
//! updates its edge duals. Phases are separated by barriers; inside a phase
//! agents only touch their own state, so the network may run them in
//! parallel without changing a single bit of the trajectory.

mod agent;
mod network;
mod snapshot;

pub use agent::{AgentState, EdgeMessage};
pub use network::{Network, RoundStats};
pub use snapshot::{parse_snapshots, Snapshot};

use crate::compressors::CompressorSpec;
use crate::error::{Error, Result};
use crate::estimators::EstimatorMode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    /// Penalty `rho > 0`.
    pub rho: f64,
    /// Local steps per round.
    pub tau: usize,
    /// Step size `gamma > 0`.
    pub gamma: f64,
    /// Regularization weight `beta > 0`.
    pub beta: f64,
    /// Scaling `r > 0`.
    pub r: f64,
    /// Error-feedback mixing weight in `(0, 1]`; `None` picks
    /// `min(1, 1/p)` from the compressor.
    pub eta: Option<f64>,
    pub estimator: EstimatorMode,
    pub compressor: CompressorSpec,
}

impl Hyperparameters {
    /// `tau = 5, rho = 0.1, beta = 0.2, gamma = 0.3, r = 1`, SAGA with
    /// single-sample batches.
    pub fn reference(compressor: CompressorSpec) -> Self {
        Self {
            rho: 0.1,
            tau: 5,
            gamma: 0.3,
            beta: 0.2,
            r: 1.0,
            eta: None,
            estimator: EstimatorMode::Saga { batch_size: 1 },
            compressor,
        }
    }

    pub fn eta_for(&self, dim: usize) -> f64 {
        self.eta.unwrap_or_else(|| self.compressor.default_eta(dim))
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for (name, v) in [
            ("rho", self.rho),
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("r", self.r),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tau == 0 {
            return Err(Error::param("tau must be at least 1"));
        }
        let eta = self.eta_for(dim);
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::param(format!("eta must lie in (0, 1], got {eta}")));
        }
        self.compressor.validate(dim)
    }
}

//! Simulation of decentralized consensus learning with an edge-based ADMM
//! that trains locally for several steps per round, uses SAGA
//! variance-reduced stochastic gradients, and communicates through unbiased
//! compressors with error feedback.
//!
//! The crate is organized bottom-up:
//!
//! - [`topology`]: undirected connected graphs and their Laplacian spectrum.
//! - [`objectives`]: per-agent finite-sum costs, logistic and quadratic.
//! - [`compressors`]: the identity, stochastic quantizer and rand-k operators.
//! - [`estimators`]: SAGA, plain minibatch and exact local gradients.
//! - [`protocol`]: agent state, message exchange and the round loop.
//! - [`oracle`]: independent reference implementations for validation.
//! - [`harness`]: experiment configuration, metrics and CSV output.

pub mod compressors;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod objectives;
pub mod oracle;
pub mod protocol;
pub mod rng;
pub mod topology;

/// Dense real vector used for every iterate, gradient and message.
pub type Vector = nalgebra::DVector<f64>;

pub use compressors::CompressorSpec;
pub use error::{Error, Result};
pub use estimators::{EstimatorMode, SagaTable};
pub use harness::{run_experiment, ExperimentConfig, RoundMetrics};
pub use objectives::LocalProblem;
pub use protocol::{Hyperparameters, Network};
pub use rng::{Purpose, RandomStream};
pub use topology::{SpectralInfo, Topology};

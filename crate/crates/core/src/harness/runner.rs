use std::path::Path;

use log::warn;

use crate::error::Result;
use crate::objectives::{global_gradient, quadratic_optimum, LocalProblem};
use crate::oracle::{solve_reference, DEFAULT_TOLERANCE};
use crate::protocol::Network;
use crate::Vector;

use super::{decay_diagnostic, CsvSink, DecayDiagnostic, ExperimentConfig, RoundMetrics};

const REFERENCE_ITERATIONS: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rounds_run: u64,
    pub final_grad_norm_sq: f64,
    pub min_grad_norm_sq: f64,
    /// `Some` when a target was configured.
    pub reached_target: Option<bool>,
    pub decay: Option<DecayDiagnostic>,
    /// Largest `dual_residual / (1 + |X|)` over logged rounds.
    pub max_relative_dual_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub metrics: Vec<RoundMetrics>,
    pub summary: Summary,
}

/// A configured network plus the observer that measures it.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub network: Network,
    pub reference: Option<Vector>,
    pub warnings: Vec<String>,
    model_time: f64,
    bits_sent: u64,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let topology = config.build_topology()?;
        let problems = config.build_problems(topology.node_count())?;
        let warnings = config.warnings(&topology)?;
        for w in &warnings {
            warn!("{w}");
        }
        let reference = if config.solve_reference {
            Some(reference_point(&problems)?)
        } else {
            None
        };
        let mut network = Network::new(topology, problems, config.hyperparameters()?, config.seed)?;
        network.set_parallel(config.parallel);
        Ok(Self {
            config,
            network,
            reference,
            warnings,
            model_time: 0.0,
            bits_sent: 0,
        })
    }

    pub fn metrics(&self) -> Result<RoundMetrics> {
        let net = &self.network;
        let mean = net.average_primal();
        let grad = global_gradient(net.problems(), &mean)?;
        Ok(RoundMetrics {
            round: net.round(),
            model_time: self.model_time,
            grad_norm_sq: grad.norm_squared(),
            consensus_err: net.consensus_error(),
            dist_to_opt: self
                .reference
                .as_ref()
                .map_or(f64::NAN, |x| (&mean - x).norm_squared()),
            bits_sent: self.bits_sent,
            dual_residual: net.dual_sum_residual(),
            stacked_x_norm: net.stacked_primal_norm(),
        })
    }

    /// Runs one round and returns the metrics after it.
    pub fn step(&mut self) -> Result<RoundMetrics> {
        let stats = self.network.run_round()?;
        let slowest = stats.evaluations.iter().copied().max().unwrap_or(0);
        self.model_time += self.config.time.round_time(slowest);
        self.bits_sent += stats.bits_sent;
        self.metrics()
    }

    /// Runs to `rounds` (or the target), logging every `metric_stride`
    /// rounds plus the first and last.
    pub fn run(&mut self, mut sink: Option<&mut CsvSink>) -> Result<ExperimentReport> {
        let result = self.run_inner(&mut sink);
        if let Some(sink) = sink {
            sink.flush()?;
        }
        result
    }

    fn run_inner(&mut self, sink: &mut Option<&mut CsvSink>) -> Result<ExperimentReport> {
        let stride = self.config.metric_stride;
        let target = self.config.target_grad_norm_sq;
        let mut logged = Vec::new();
        let mut log = |m: RoundMetrics, sink: &mut Option<&mut CsvSink>| -> Result<()> {
            if let Some(s) = sink.as_deref_mut() {
                s.write(&m)?;
            }
            logged.push(m);
            Ok(())
        };

        let mut current = self.metrics()?;
        let mut min_grad = current.grad_norm_sq;
        log(current, sink)?;
        let mut reached = target.map(|t| current.grad_norm_sq <= t);
        while self.network.round() < self.config.rounds && reached != Some(true) {
            current = self.step()?;
            min_grad = min_grad.min(current.grad_norm_sq);
            reached = target.map(|t| current.grad_norm_sq <= t);
            let last = self.network.round() == self.config.rounds || reached == Some(true);
            if current.round % stride == 0 || last {
                log(current, sink)?;
            }
        }

        let max_relative_dual_residual = logged
            .iter()
            .map(|m| m.dual_residual / (1.0 + m.stacked_x_norm))
            .fold(0.0, f64::max);
        let summary = Summary {
            rounds_run: self.network.round(),
            final_grad_norm_sq: current.grad_norm_sq,
            min_grad_norm_sq: min_grad,
            reached_target: reached,
            decay: decay_diagnostic(&logged),
            max_relative_dual_residual,
            warnings: self.warnings.clone(),
        };
        Ok(ExperimentReport {
            metrics: logged,
            summary,
        })
    }
}

fn reference_point(problems: &[LocalProblem]) -> Result<Vector> {
    match quadratic_optimum(problems) {
        Some(x) => Ok(x),
        None => Ok(solve_reference(problems, DEFAULT_TOLERANCE, REFERENCE_ITERATIONS)?.x),
    }
}

/// Builds the experiment, runs it and writes the CSV to `output` (or the
/// configured path). Rows logged before a failure are flushed.
pub fn run_experiment(config: ExperimentConfig, output: Option<&Path>) -> Result<ExperimentReport> {
    let path = output
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone());
    let mut experiment = Experiment::new(config)?;
    match path {
        Some(path) => {
            let mut sink = CsvSink::create(path)?;
            experiment.run(Some(&mut sink))
        }
        None => experiment.run(None),
    }
}

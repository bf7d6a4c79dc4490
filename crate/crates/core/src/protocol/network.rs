use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::LocalEstimator;
use crate::objectives::LocalProblem;
use crate::topology::Topology;
use crate::Vector;

use super::{AgentState, EdgeMessage, Hyperparameters, Snapshot};

/// What one completed round cost and whether the dual-sum invariant held.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundStats {
    /// Number of completed rounds after this one.
    pub round: u64,
    /// Fresh component-gradient evaluations per agent in this round.
    pub evaluations: Vec<u64>,
    pub messages: usize,
    /// Payload bits over all directed edges in this round.
    pub bits_sent: u64,
    /// `|r sum_ij z_ij - r^2 rho sum_i d_i x_i|`.
    pub dual_residual: f64,
    /// `|X|` over the stacked primal iterates.
    pub stacked_x_norm: f64,
}

/// All agents plus the synchronous exchange between them.
#[derive(Debug, Clone)]
pub struct Network {
    topology: Topology,
    problems: Vec<LocalProblem>,
    hyper: Hyperparameters,
    seed: u64,
    agents: Vec<AgentState>,
    round: u64,
    parallel: bool,
}

impl Network {
    /// Zero initialization: every stored vector starts at exactly zero.
    pub fn new(
        topology: Topology,
        problems: Vec<LocalProblem>,
        hyper: Hyperparameters,
        seed: u64,
    ) -> Result<Self> {
        let n = topology.node_count();
        if problems.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: problems.len(),
            });
        }
        let dim = problems[0].dimension();
        for p in &problems {
            Error::check_dim(dim, p.dimension())?;
        }
        hyper.validate(dim)?;
        let agents = problems
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let est = LocalEstimator::new(hyper.estimator, p)?;
                Ok(AgentState::zero(
                    i,
                    topology.neighbors(i).to_vec(),
                    dim,
                    est,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            topology,
            problems,
            hyper,
            seed,
            agents,
            round: 0,
            parallel: false,
        })
    }

    /// Starts from arbitrary primal iterates. A nonzero start cannot be
    /// reconstructed by neighbors from compressed traffic, so it requires
    /// `bootstrap`: a one-time uncompressed exchange installing
    /// `x_hat_0 = x_0` and `z_hat_0 = z_0 = r rho x_0` everywhere.
    pub fn with_initial_point(
        topology: Topology,
        problems: Vec<LocalProblem>,
        hyper: Hyperparameters,
        seed: u64,
        x0: Vec<Vector>,
        bootstrap: bool,
    ) -> Result<Self> {
        let mut net = Self::new(topology, problems, hyper, seed)?;
        Error::check_dim(net.agents.len(), x0.len())?;
        let dim = net.dimension();
        for x in &x0 {
            Error::check_dim(dim, x.len())?;
        }
        let nonzero = x0.iter().any(|x| x.iter().any(|&v| v != 0.0));
        if !nonzero {
            return Ok(net);
        }
        if !bootstrap {
            return Err(Error::Unsupported(
                "nonzero initial iterates need the uncompressed bootstrap exchange \
                 (pass bootstrap = true)"
                    .into(),
            ));
        }
        let scale = hyper.r * hyper.rho;
        for agent in &mut net.agents {
            let x = &x0[agent.id];
            agent.x = x.clone();
            agent.own_cx_prev = x.clone();
            agent.x_hat = x.clone();
            for slot in 0..agent.neighbors.len() {
                let j = agent.neighbors[slot];
                agent.recv_cx_prev[slot] = x0[j].clone();
                agent.z[slot] = x * scale;
                agent.cached_cz[slot] = agent.z[slot].clone();
                agent.z_hat[slot] = agent.z[slot].clone();
            }
        }
        Ok(net)
    }

    /// Runs the agent phases on the rayon pool. Results are bitwise the same
    /// either way.
    pub fn set_parallel(&mut self, parallel: bool) {
        self.parallel = parallel;
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn problems(&self) -> &[LocalProblem] {
        &self.problems
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    /// Completed rounds.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn dimension(&self) -> usize {
        self.problems[0].dimension()
    }

    pub fn primal_iterates(&self) -> Vec<Vector> {
        self.agents.iter().map(|a| a.x.clone()).collect()
    }

    pub fn average_primal(&self) -> Vector {
        let mut sum = Vector::zeros(self.dimension());
        for a in &self.agents {
            sum += &a.x;
        }
        sum / self.agents.len() as f64
    }

    /// `sum_i |x_i - x_bar|^2`.
    pub fn consensus_error(&self) -> f64 {
        let mean = self.average_primal();
        self.agents
            .iter()
            .map(|a| (&a.x - &mean).norm_squared())
            .sum()
    }

    pub fn stacked_primal_norm(&self) -> f64 {
        self.agents
            .iter()
            .map(|a| a.x.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Defect of `r sum_i sum_j z_ij = r^2 rho sum_i d_i x_i`.
    pub fn dual_sum_residual(&self) -> f64 {
        let (r, rho) = (self.hyper.r, self.hyper.rho);
        let mut defect = Vector::zeros(self.dimension());
        for a in &self.agents {
            for z in &a.z {
                defect.axpy(r, z, 1.0);
            }
            defect.axpy(-r * r * rho * a.degree() as f64, &a.x, 1.0);
        }
        defect.norm()
    }

    /// Fresh component-gradient evaluations so far, per agent.
    pub fn evaluations(&self) -> Vec<u64> {
        self.agents
            .iter()
            .map(|a| a.estimator.evaluations())
            .collect()
    }

    /// Lists every place where an agent's copy of a neighbor accumulator, or
    /// its own `z_hat`, is not bitwise what it should be. Empty when the copy
    /// mechanism is intact.
    pub fn copy_mismatches(&self) -> Vec<String> {
        let same = |a: &Vector, b: &Vector| {
            a.len() == b.len()
                && a.iter()
                    .zip(b.iter())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
        };
        let mut out = Vec::new();
        for a in &self.agents {
            for (slot, &j) in a.neighbors.iter().enumerate() {
                let other = &self.agents[j];
                if !same(&a.u_copy[slot], &other.u) {
                    out.push(format!("agent {} copy of u_{j}", a.id));
                }
                let back = other
                    .neighbors
                    .binary_search(&a.id)
                    .expect("symmetric graph");
                if !same(&a.s_copy[slot], &other.s[back]) {
                    out.push(format!("agent {} copy of s_{j}{}", a.id, a.id));
                }
                if !same(&a.z_hat[slot], &(&a.s[slot] + &a.cached_cz[slot])) {
                    out.push(format!("agent {} z_hat toward {j}", a.id));
                }
            }
        }
        out
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::capture(self)
    }

    /// One full synchronous round: train, pack, exchange, apply.
    pub fn run_round(&mut self) -> Result<RoundStats> {
        let (hyper, seed, round) = (self.hyper, self.seed, self.round);
        let before = self.evaluations();

        let problems = &self.problems;
        for_each_agent(&mut self.agents, self.parallel, |a| {
            a.local_training(&problems[a.id], &hyper, seed, round)
        })?;

        let outbound: Vec<Vec<EdgeMessage>> = if self.parallel {
            self.agents
                .par_iter_mut()
                .map(|a| a.finalize_and_pack(&hyper, seed, round))
                .collect::<Result<_>>()?
        } else {
            self.agents
                .iter_mut()
                .map(|a| a.finalize_and_pack(&hyper, seed, round))
                .collect::<Result<_>>()?
        };

        let mut inbound: Vec<Vec<EdgeMessage>> = vec![Vec::new(); self.agents.len()];
        let mut messages = 0;
        for msg in outbound.into_iter().flatten() {
            let to = msg.to;
            inbound
                .get_mut(to)
                .ok_or_else(|| Error::Protocol(format!("message to unknown agent {to}")))?
                .push(msg);
            messages += 1;
        }

        let inbound = &inbound;
        for_each_agent(&mut self.agents, self.parallel, |a| {
            a.apply_messages(&inbound[a.id], &hyper, seed, round)
        })?;
        self.round += 1;

        let evaluations = self
            .evaluations()
            .into_iter()
            .zip(before)
            .map(|(after, before)| after - before)
            .collect();
        // every message carries one dual and one primal payload
        let bits_sent = 2 * messages as u64 * hyper.compressor.payload_bits(self.dimension());
        Ok(RoundStats {
            round: self.round,
            evaluations,
            messages,
            bits_sent,
            dual_residual: self.dual_sum_residual(),
            stacked_x_norm: self.stacked_primal_norm(),
        })
    }
}

fn for_each_agent<F>(agents: &mut [AgentState], parallel: bool, f: F) -> Result<()>
where
    F: Fn(&mut AgentState) -> Result<()> + Sync + Send,
{
    if parallel {
        agents.par_iter_mut().try_for_each(f)
    } else {
        agents.iter_mut().try_for_each(f)
    }
}

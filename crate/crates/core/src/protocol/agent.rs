use crate::error::{Error, Result};
use crate::estimators::LocalEstimator;
use crate::objectives::LocalProblem;
use crate::rng::{Purpose, RandomStream};
use crate::Vector;

use super::Hyperparameters;

/// What agent `from` sends to neighbor `to` in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMessage {
    pub from: usize,
    pub to: usize,
    /// `C(z_{from,to} - s_{from,to})`, drawn at the end of the previous round.
    pub cz: Vector,
    /// `C(x_from - u_from)`; the same realization goes to every neighbor.
    pub cx: Vector,
}

/// Complete protocol state of one agent.
///
/// Per-neighbor vectors are indexed by the neighbor's position in the sorted
/// neighbor list (`neighbors[slot]`).
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub neighbors: Vec<usize>,
    /// Primal iterate.
    pub x: Vector,
    /// Edge duals `z_{ij}`.
    pub z: Vec<Vector>,
    /// Error-feedback accumulator for the primal.
    pub u: Vector,
    /// Error-feedback accumulators `s_{ij}` for the duals.
    pub s: Vec<Vector>,
    /// `z_hat_{ij} = s_{ij} + cached_cz[j]`.
    pub z_hat: Vec<Vector>,
    /// Own compressed primal `x_hat = u + C(x - u)` from the last pack.
    pub x_hat: Vector,
    /// Copy of each neighbor's `u`.
    pub u_copy: Vec<Vector>,
    /// Copy of each neighbor's `s_{ji}`.
    pub s_copy: Vec<Vector>,
    pub own_cx_prev: Vector,
    pub recv_cx_prev: Vec<Vector>,
    /// Compressed dual message to transmit next round.
    pub cached_cz: Vec<Vector>,
    pub estimator: LocalEstimator,
}

/// `acc <- acc + eta * c`. Senders and receivers both go through here so
/// accumulator copies stay bitwise identical.
fn accumulate(acc: &mut Vector, eta: f64, c: &Vector) {
    acc.axpy(eta, c, 1.0);
}

impl AgentState {
    pub(crate) fn zero(
        id: usize,
        neighbors: Vec<usize>,
        dim: usize,
        estimator: LocalEstimator,
    ) -> Self {
        let zeros = || vec![Vector::zeros(dim); neighbors.len()];
        Self {
            id,
            x: Vector::zeros(dim),
            z: zeros(),
            u: Vector::zeros(dim),
            s: zeros(),
            z_hat: zeros(),
            x_hat: Vector::zeros(dim),
            u_copy: zeros(),
            s_copy: zeros(),
            own_cx_prev: Vector::zeros(dim),
            recv_cx_prev: zeros(),
            cached_cz: zeros(),
            estimator,
            neighbors,
        }
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }

    /// Round-constant drift `beta (r^2 rho d_i x - r sum_j z_ij)` of the
    /// local steps.
    pub fn local_correction(&self, hyper: &Hyperparameters) -> Vector {
        let mut dual_sum = Vector::zeros(self.x.len());
        for z in &self.z {
            dual_sum += z;
        }
        let r = hyper.r;
        (&self.x * (r * r * hyper.rho * self.degree() as f64) - dual_sum * r) * hyper.beta
    }

    /// Runs `tau` steps `phi <- phi - gamma g(phi) - c` from `phi = x` and
    /// stores the result in `x`.
    pub fn local_training(
        &mut self,
        problem: &LocalProblem,
        hyper: &Hyperparameters,
        seed: u64,
        round: u64,
    ) -> Result<()> {
        let correction = self.local_correction(hyper);
        let mut rng = RandomStream::new(seed, self.id, round, Purpose::Batch);
        self.estimator.begin_round(problem, &self.x)?;
        let mut phi = self.x.clone();
        for _ in 0..hyper.tau {
            let g = self.estimator.step(problem, &phi, &mut rng)?;
            phi.axpy(-hyper.gamma, &g, 1.0);
            phi -= &correction;
        }
        self.x = phi;
        Ok(())
    }

    /// Advances the primal accumulator, compresses the primal once and
    /// emits one message per neighbor.
    pub fn finalize_and_pack(
        &mut self,
        hyper: &Hyperparameters,
        seed: u64,
        round: u64,
    ) -> Result<Vec<EdgeMessage>> {
        let eta = hyper.eta_for(self.x.len());
        accumulate(&mut self.u, eta, &self.own_cx_prev);
        let mut rng = RandomStream::new(seed, self.id, round, Purpose::CompressX);
        let cx = hyper.compressor.compress(&(&self.x - &self.u), &mut rng)?;
        self.x_hat = &self.u + &cx;
        self.own_cx_prev = cx;
        Ok(self
            .neighbors
            .iter()
            .zip(&self.cached_cz)
            .map(|(&to, cz)| EdgeMessage {
                from: self.id,
                to,
                cz: cz.clone(),
                cx: self.own_cx_prev.clone(),
            })
            .collect())
    }

    /// Consumes exactly one message from every neighbor and completes the
    /// round: copy tracking, the compressed dual update, the `s` shift and
    /// the next dual compression.
    pub fn apply_messages(
        &mut self,
        inbound: &[EdgeMessage],
        hyper: &Hyperparameters,
        seed: u64,
        round: u64,
    ) -> Result<()> {
        let by_slot = self.route(inbound)?;
        let eta = hyper.eta_for(self.x.len());
        let scale = hyper.r * hyper.rho;
        for (slot, msg) in by_slot.into_iter().enumerate() {
            accumulate(&mut self.u_copy[slot], eta, &self.recv_cx_prev[slot]);
            let neighbor_x_hat = &self.u_copy[slot] + &msg.cx;
            self.recv_cx_prev[slot].copy_from(&msg.cx);

            let neighbor_z_hat = &self.s_copy[slot] + &msg.cz;
            self.s_copy[slot].copy_from(&neighbor_z_hat);

            self.z[slot] = (&self.z_hat[slot] - &neighbor_z_hat) * 0.5 + &self.x * scale
                - (&self.x_hat - &neighbor_x_hat) * scale;
            self.s[slot].copy_from(&self.z_hat[slot]);

            let mut rng = RandomStream::new(
                seed,
                self.id,
                round,
                Purpose::CompressZ { neighbor: msg.from },
            );
            self.cached_cz[slot] = hyper
                .compressor
                .compress(&(&self.z[slot] - &self.s[slot]), &mut rng)?;
            self.z_hat[slot] = &self.s[slot] + &self.cached_cz[slot];
        }
        Ok(())
    }

    fn route<'m>(&self, inbound: &'m [EdgeMessage]) -> Result<Vec<&'m EdgeMessage>> {
        let mut slots: Vec<Option<&EdgeMessage>> = vec![None; self.neighbors.len()];
        for msg in inbound {
            if msg.to != self.id {
                return Err(Error::Protocol(format!(
                    "agent {} received a message addressed to {}",
                    self.id, msg.to
                )));
            }
            let slot = self.neighbors.binary_search(&msg.from).map_err(|_| {
                Error::Protocol(format!(
                    "agent {} got a message from non-neighbor {}",
                    self.id, msg.from
                ))
            })?;
            if slots[slot].replace(msg).is_some() {
                return Err(Error::Protocol(format!(
                    "agent {} got two messages from {}",
                    self.id, msg.from
                )));
            }
        }
        slots
            .into_iter()
            .zip(&self.neighbors)
            .map(|(m, j)| {
                m.ok_or_else(|| {
                    Error::Protocol(format!("agent {} is missing the message from {j}", self.id))
                })
            })
            .collect()
    }
}

//! Stacked matrix form of the protocol.
//!
//! With `X` the stacked primals (`N n`) and `Z` the stacked directed-edge
//! duals (`M n`, edges ordered by source then target), one round reads
//!
//! ```text
//! X+ = Phi^tau,  Phi <- Phi - gamma grad F(Phi) - beta r (r rho A'A X - A'Z)
//! Z+ = 1/2 (I - P) Z_hat + r rho A X+ - r rho (I - P) A X_hat+
//! ```
//!
//! where `A` maps each node to its outgoing edges and `P` swaps `(i,j)` with
//! `(j,i)`. All matrices are dense.

use nalgebra::{DMatrix, DVector};

use crate::compressors::CompressorSpec;
use crate::error::{Error, Result};
use crate::estimators::EstimatorMode;
use crate::objectives::LocalProblem;
use crate::protocol::{Hyperparameters, Snapshot};
use crate::topology::Topology;

#[derive(Debug, Clone)]
pub struct CompactForm {
    dim: usize,
    nodes: usize,
    /// Directed edges in stacking order.
    edges: Vec<(usize, usize)>,
    pub a: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// Stacked state of every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactState {
    pub round: u64,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub u: DVector<f64>,
    pub s: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub z_hat: DVector<f64>,
}

impl CompactForm {
    pub fn new(topology: &Topology, dim: usize) -> Result<Self> {
        let nodes = topology.node_count();
        let edges: Vec<(usize, usize)> = (0..nodes)
            .flat_map(|i| topology.neighbors(i).iter().map(move |&j| (i, j)))
            .collect();
        let m = edges.len();
        let mut a = DMatrix::zeros(m * dim, nodes * dim);
        let mut p = DMatrix::zeros(m * dim, m * dim);
        for (e, &(i, j)) in edges.iter().enumerate() {
            let back = edges
                .iter()
                .position(|&f| f == (j, i))
                .ok_or_else(|| Error::InvalidTopology(format!("edge ({i}, {j}) has no reverse")))?;
            for k in 0..dim {
                a[(e * dim + k, i * dim + k)] = 1.0;
                p[(e * dim + k, back * dim + k)] = 1.0;
            }
        }
        let d = a.transpose() * &a;
        let form = Self {
            dim,
            nodes,
            edges,
            a,
            p,
            d,
        };
        form.check_structure(topology)?;
        Ok(form)
    }

    /// `A'PA` must be the adjacency, `A'A` the degree matrix and `PP = I`.
    fn check_structure(&self, topology: &Topology) -> Result<()> {
        let n = self.dim;
        let adjacency = self.a.transpose() * &self.p * &self.a;
        for i in 0..self.nodes {
            for j in 0..self.nodes {
                let expected_adj = if topology.has_edge(i, j) { 1.0 } else { 0.0 };
                let expected_deg = if i == j {
                    topology.degree(i) as f64
                } else {
                    0.0
                };
                for k in 0..n {
                    for l in 0..n {
                        let diag = if k == l { 1.0 } else { 0.0 };
                        if adjacency[(i * n + k, j * n + l)] != expected_adj * diag
                            || self.d[(i * n + k, j * n + l)] != expected_deg * diag
                        {
                            return Err(Error::Numeric(
                                "compact operators are inconsistent".into(),
                            ));
                        }
                    }
                }
            }
        }
        let pp = &self.p * &self.p;
        if pp != DMatrix::identity(self.p.nrows(), self.p.ncols()) {
            return Err(Error::Numeric("edge swap is not an involution".into()));
        }
        Ok(())
    }

    pub fn directed_edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn zero_state(&self) -> CompactState {
        let nx = self.nodes * self.dim;
        let nz = self.edges.len() * self.dim;
        CompactState {
            round: 0,
            x: DVector::zeros(nx),
            z: DVector::zeros(nz),
            u: DVector::zeros(nx),
            s: DVector::zeros(nz),
            x_hat: DVector::zeros(nx),
            z_hat: DVector::zeros(nz),
        }
    }

    fn stacked_gradient(&self, problems: &[LocalProblem], phi: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let mut g = DVector::zeros(phi.len());
        for (i, p) in problems.iter().enumerate() {
            let local = phi.rows(i * n, n).into_owned();
            g.rows_mut(i * n, n).copy_from(&p.full_gradient(&local));
        }
        g
    }

    /// One round, for identity compression and exact local gradients only.
    pub fn step(
        &self,
        state: &CompactState,
        hyper: &Hyperparameters,
        problems: &[LocalProblem],
    ) -> Result<CompactState> {
        if hyper.compressor != CompressorSpec::Identity || hyper.estimator != EstimatorMode::Full {
            return Err(Error::Unsupported(
                "the compact form only replays identity compression with full gradients".into(),
            ));
        }
        Error::check_dim(self.nodes, problems.len())?;
        let (gamma, beta, r, rho) = (hyper.gamma, hyper.beta, hyper.r, hyper.rho);
        let eta = hyper.eta_for(self.dim);
        let identity = |v: DVector<f64>| v;

        let drift = (&self.d * &state.x * (r * rho) - self.a.transpose() * &state.z) * (beta * r);
        let mut phi = state.x.clone();
        for _ in 0..hyper.tau {
            phi = &phi - self.stacked_gradient(problems, &phi) * gamma - &drift;
        }
        let x = phi;

        let u = &state.u * (1.0 - eta) + &state.x_hat * eta;
        let x_hat = &u + identity(&x - &u);
        let z_hat_k = &state.s + identity(&state.z - &state.s);
        let s = z_hat_k.clone();

        let swap = DMatrix::identity(self.p.nrows(), self.p.ncols()) - &self.p;
        let z = &swap * &z_hat_k * 0.5 + &self.a * &x * (r * rho)
            - &swap * &self.a * &x_hat * (r * rho);
        let z_hat = &s + identity(&z - &s);

        Ok(CompactState {
            round: state.round + 1,
            x,
            z,
            u,
            s,
            x_hat,
            z_hat,
        })
    }

    /// Largest componentwise gap between a protocol snapshot and a compact
    /// state (primals and duals).
    pub fn max_deviation(&self, state: &CompactState, snapshot: &Snapshot) -> Result<f64> {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        let missing = |label: String| Error::Protocol(format!("snapshot lacks {label}"));
        for i in 0..self.nodes {
            let label = format!("x.{i}");
            let v = snapshot.get(&label).ok_or_else(|| missing(label))?;
            Error::check_dim(n, v.len())?;
            worst = worst.max((v - state.x.rows(i * n, n)).amax());
        }
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            let label = format!("z.{i}.{j}");
            let v = snapshot.get(&label).ok_or_else(|| missing(label))?;
            Error::check_dim(n, v.len())?;
            worst = worst.max((v - state.z.rows(e * n, n)).amax());
        }
        Ok(worst)
    }
}

use crate::error::{Error, Result};
use crate::objectives::LocalProblem;
use crate::topology::Topology;
use crate::Vector;

/// `argmin_x (1/2)|x - anchor|^2 + (weight/2)|x - v|^2`.
pub fn prox_quadratic(anchor: &Vector, weight: f64, v: &Vector) -> Vector {
    (anchor + v * weight) / (1.0 + weight)
}

/// Edge-based ADMM with exact proximal steps on quadratic costs:
///
/// ```text
/// x_i  <- prox_{f_i}^{1/(rho d_i)}( sum_j z_ij / (rho d_i) )
/// z_ij <- (z_ij - z_ji + 2 rho x_j) / 2
/// ```
#[derive(Debug, Clone)]
pub struct ExactAdmm {
    topology: Topology,
    anchors: Vec<Vector>,
    rho: f64,
    pub x: Vec<Vector>,
    /// Per node, per neighbor slot.
    pub z: Vec<Vec<Vector>>,
}

impl ExactAdmm {
    pub fn new(topology: Topology, problems: &[LocalProblem], rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::param(format!("rho must be positive, got {rho}")));
        }
        Error::check_dim(topology.node_count(), problems.len())?;
        let anchors = problems
            .iter()
            .map(|p| {
                p.quadratic_anchor().ok_or_else(|| {
                    Error::Unsupported("exact ADMM needs quadratic local costs".into())
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let dim = anchors[0].len();
        let x = vec![Vector::zeros(dim); anchors.len()];
        let z = (0..anchors.len())
            .map(|i| vec![Vector::zeros(dim); topology.degree(i)])
            .collect();
        Ok(Self {
            topology,
            anchors,
            rho,
            x,
            z,
        })
    }

    pub fn step(&mut self) {
        let rho = self.rho;
        for i in 0..self.anchors.len() {
            let weight = rho * self.topology.degree(i) as f64;
            let mut v = Vector::zeros(self.anchors[i].len());
            for z in &self.z[i] {
                v += z;
            }
            v /= weight;
            self.x[i] = prox_quadratic(&self.anchors[i], weight, &v);
        }
        let old = self.z.clone();
        for i in 0..self.anchors.len() {
            for (slot, &j) in self.topology.neighbors(i).iter().enumerate() {
                let back = self.topology.neighbor_slot(j, i).expect("symmetric graph");
                self.z[i][slot] = (&old[i][slot] - &old[j][back] + &self.x[j] * (2.0 * rho)) * 0.5;
            }
        }
    }

    /// Largest `|x_i - target|` over agents.
    pub fn distance_to(&self, target: &Vector) -> f64 {
        self.x
            .iter()
            .map(|x| (x - target).norm())
            .fold(0.0, f64::max)
    }
}

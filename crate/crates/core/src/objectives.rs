//! Local costs `f_i(x) = (1/m_i) sum_h f_{i,h}(x)` and problem generators.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::Vector;

/// One component loss `f_{i,h}`: the loss of a single data point.
pub trait ComponentLoss: Send + Sync {
    fn dimension(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// Lipschitz constant of the gradient.
    fn smoothness(&self) -> f64;
}

/// `log(1 + exp(t))` without overflow.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Regularized logistic loss `log(1 + exp(-b a.x)) + (eps/2)|x|^2` of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticDatum {
    pub features: Vector,
    /// `-1.0` or `+1.0`.
    pub label: f64,
    pub epsilon: f64,
}

impl ComponentLoss for LogisticDatum {
    fn dimension(&self) -> usize {
        self.features.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        softplus(-self.label * self.features.dot(x)) + 0.5 * self.epsilon * x.norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let margin = self.label * self.features.dot(x);
        // d/dt log(1 + exp(-t)) = -1 / (1 + exp(t)); exp overflow gives 0
        let weight = -self.label / (1.0 + margin.exp());
        let mut g = x * self.epsilon;
        g.axpy(weight, &self.features, 1.0);
        g
    }

    fn smoothness(&self) -> f64 {
        self.epsilon + 0.25 * self.features.norm_squared()
    }
}

/// `(1/2)|x - anchor|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDatum {
    pub anchor: Vector,
}

impl ComponentLoss for QuadraticDatum {
    fn dimension(&self) -> usize {
        self.anchor.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * (x - &self.anchor).norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        x - &self.anchor
    }

    fn smoothness(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    Logistic(LogisticDatum),
    Quadratic(QuadraticDatum),
}

impl ComponentLoss for Component {
    fn dimension(&self) -> usize {
        match self {
            Component::Logistic(c) => c.dimension(),
            Component::Quadratic(c) => c.dimension(),
        }
    }

    fn value(&self, x: &Vector) -> f64 {
        match self {
            Component::Logistic(c) => c.value(x),
            Component::Quadratic(c) => c.value(x),
        }
    }

    fn gradient(&self, x: &Vector) -> Vector {
        match self {
            Component::Logistic(c) => c.gradient(x),
            Component::Quadratic(c) => c.gradient(x),
        }
    }

    fn smoothness(&self) -> f64 {
        match self {
            Component::Logistic(c) => c.smoothness(),
            Component::Quadratic(c) => c.smoothness(),
        }
    }
}

/// The data held by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalProblem {
    agent_id: usize,
    dimension: usize,
    components: Vec<Component>,
    smoothness: f64,
    strong_convexity: f64,
}

impl LocalProblem {
    pub fn new(
        agent_id: usize,
        components: Vec<Component>,
        smoothness: f64,
        strong_convexity: f64,
    ) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::param(format!("agent {agent_id} has no data points")))?;
        let dimension = first.dimension();
        for c in &components {
            Error::check_dim(dimension, c.dimension())?;
        }
        if !(strong_convexity > 0.0 && strong_convexity <= smoothness && smoothness.is_finite()) {
            return Err(Error::param(format!(
                "need 0 < mu <= L < inf, got mu = {strong_convexity}, L = {smoothness}"
            )));
        }
        Ok(Self {
            agent_id,
            dimension,
            components,
            smoothness,
            strong_convexity,
        })
    }

    /// Agent whose cost is `(1/2)|x - a_i|^2`.
    pub fn quadratic(agent_id: usize, anchor: Vector) -> Self {
        Self::quadratic_components(agent_id, vec![anchor]).expect("one anchor is a valid problem")
    }

    /// Agent with one `(1/2)|x - a_h|^2` component per anchor. Its cost is a
    /// shifted `(1/2)|x - mean(a_h)|^2`.
    pub fn quadratic_components(agent_id: usize, anchors: Vec<Vector>) -> Result<Self> {
        let components = anchors
            .into_iter()
            .map(|anchor| Component::Quadratic(QuadraticDatum { anchor }))
            .collect();
        Self::new(agent_id, components, 1.0, 1.0)
    }

    /// Logistic problem with `L = eps + max_h |a_h|^2 / 4` and `mu = eps`.
    pub fn logistic(agent_id: usize, data: Vec<LogisticDatum>) -> Result<Self> {
        let epsilon = data.first().map_or(0.0, |d| d.epsilon);
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param(format!(
                "logistic regularizer must be positive for strong convexity, got {epsilon}"
            )));
        }
        let smoothness = data.iter().map(|d| d.smoothness()).fold(epsilon, f64::max);
        let components = data.into_iter().map(Component::Logistic).collect();
        Self::new(agent_id, components, smoothness, epsilon)
    }

    pub fn agent_id(&self) -> usize {
        self.agent_id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn component_value(&self, h: usize, x: &Vector) -> Result<f64> {
        Ok(self.component(h, x)?.value(x))
    }

    pub fn component_gradient(&self, h: usize, x: &Vector) -> Result<Vector> {
        Ok(self.component(h, x)?.gradient(x))
    }

    pub fn full_cost(&self, x: &Vector) -> f64 {
        let sum: f64 = self.components.iter().map(|c| c.value(x)).sum();
        sum / self.components.len() as f64
    }

    pub fn full_gradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dimension);
        for c in &self.components {
            g += c.gradient(x);
        }
        g / self.components.len() as f64
    }

    /// `Some(a)` with `f_i(x) = (1/2)|x - a|^2 + const` when every component
    /// is quadratic.
    pub fn quadratic_anchor(&self) -> Option<Vector> {
        let mut sum = Vector::zeros(self.dimension);
        for c in &self.components {
            match c {
                Component::Quadratic(q) => sum += &q.anchor,
                Component::Logistic(_) => return None,
            }
        }
        Some(sum / self.components.len() as f64)
    }

    fn component(&self, h: usize, x: &Vector) -> Result<&Component> {
        Error::check_dim(self.dimension, x.len())?;
        self.components.get(h).ok_or(Error::IndexOutOfRange {
            index: h,
            len: self.components.len(),
        })
    }
}

fn check_shared_dimension(problems: &[LocalProblem], x: &Vector) -> Result<()> {
    if problems.is_empty() {
        return Err(Error::param("no problems given"));
    }
    for p in problems {
        Error::check_dim(p.dimension(), x.len())?;
    }
    Ok(())
}

/// `(1/N) sum_i f_i(x)`.
pub fn global_cost(problems: &[LocalProblem], x: &Vector) -> Result<f64> {
    check_shared_dimension(problems, x)?;
    let sum: f64 = problems.iter().map(|p| p.full_cost(x)).sum();
    Ok(sum / problems.len() as f64)
}

/// `(1/N) sum_i grad f_i(x)`.
pub fn global_gradient(problems: &[LocalProblem], x: &Vector) -> Result<Vector> {
    check_shared_dimension(problems, x)?;
    let mut g = Vector::zeros(x.len());
    for p in problems {
        g += p.full_gradient(x);
    }
    Ok(g / problems.len() as f64)
}

/// Smoothness constant of the global cost (largest local one).
pub fn global_smoothness(problems: &[LocalProblem]) -> f64 {
    problems
        .iter()
        .map(LocalProblem::smoothness)
        .fold(0.0, f64::max)
}

/// Closed-form minimizer when every agent's cost is quadratic.
pub fn quadratic_optimum(problems: &[LocalProblem]) -> Option<Vector> {
    let first = problems.first()?;
    let mut sum = Vector::zeros(first.dimension());
    for p in problems {
        sum += p.quadratic_anchor()?;
    }
    Some(sum / problems.len() as f64)
}

/// Synthetic binary classification data.
///
/// A hidden model `w ~ N(0, I)` is drawn first; then every agent gets
/// `m_per_agent` samples with features `a ~ N(0, I)` and labels
/// `b = sign(a.w + noise)`, `noise ~ N(0, 0.1)` (variance 0.1). Output is a
/// pure function of `seed`.
pub fn generate_logistic(
    n_agents: usize,
    dim: usize,
    m_per_agent: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<LocalProblem>> {
    if n_agents == 0 || dim == 0 || m_per_agent == 0 {
        return Err(Error::param(
            "agent count, dimension and samples must be positive",
        ));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!(
            "epsilon must be positive for strong convexity, got {epsilon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1f64.sqrt()).expect("valid normal");
    let normal_vec = |rng: &mut ChaCha8Rng| Vector::from_fn(dim, |_, _| StandardNormal.sample(rng));
    let hidden = normal_vec(&mut rng);

    (0..n_agents)
        .map(|agent| {
            let data = (0..m_per_agent)
                .map(|_| {
                    let features = normal_vec(&mut rng);
                    let score = features.dot(&hidden) + noise.sample(&mut rng);
                    LogisticDatum {
                        features,
                        label: if score >= 0.0 { 1.0 } else { -1.0 },
                        epsilon,
                    }
                })
                .collect();
            LocalProblem::logistic(agent, data)
        })
        .collect()
}

/// Random quadratic problems: every component anchor is `N(0, I)`.
pub fn generate_quadratic(
    n_agents: usize,
    dim: usize,
    m_per_agent: usize,
    seed: u64,
) -> Result<Vec<LocalProblem>> {
    if n_agents == 0 || dim == 0 || m_per_agent == 0 {
        return Err(Error::param(
            "agent count, dimension and components must be positive",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_agents)
        .map(|agent| {
            let anchors = (0..m_per_agent)
                .map(|_| Vector::from_fn(dim, |_, _| rng.sample(StandardNormal)))
                .collect();
            LocalProblem::quadratic_components(agent, anchors)
        })
        .collect()
}

/// Writes logistic problems as plain text: an `epsilon E` line, then for
/// every agent an `agent I` line followed by one `label f1 .. fn` line per
/// sample.
pub fn dump_logistic(problems: &[LocalProblem]) -> Result<String> {
    let mut out = String::new();
    let mut epsilon = None;
    for p in problems {
        let _ = writeln!(out, "agent {}", p.agent_id());
        for c in p.components() {
            let Component::Logistic(d) = c else {
                return Err(Error::Unsupported(
                    "only logistic data can be dumped".into(),
                ));
            };
            epsilon.get_or_insert(d.epsilon);
            let _ = write!(out, "{}", d.label);
            for v in d.features.iter() {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
    }
    let header = format!("epsilon {}\n", epsilon.unwrap_or(0.0));
    Ok(header + &out)
}

pub fn load_logistic(text: &str) -> Result<Vec<LocalProblem>> {
    let mut epsilon = None;
    let mut agents: Vec<(usize, Vec<LogisticDatum>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let mut fields = line.split_whitespace();
        let head = fields.next().unwrap_or_default();
        match head {
            "epsilon" => {
                let v = fields.next().unwrap_or_default();
                epsilon = Some(
                    v.parse::<f64>()
                        .map_err(|e| bad(format!("bad epsilon: {e}")))?,
                );
            }
            "agent" => {
                let v = fields.next().unwrap_or_default();
                let id = v
                    .parse::<usize>()
                    .map_err(|e| bad(format!("bad agent id: {e}")))?;
                agents.push((id, Vec::new()));
            }
            _ => {
                let eps = epsilon.ok_or_else(|| bad("sample before epsilon line".into()))?;
                let (_, data) = agents
                    .last_mut()
                    .ok_or_else(|| bad("sample before first agent line".into()))?;
                let label: f64 = head.parse().map_err(|e| bad(format!("bad label: {e}")))?;
                if label != 1.0 && label != -1.0 {
                    return Err(bad(format!("label must be +1 or -1, got {label}")));
                }
                let features = fields
                    .map(str::parse::<f64>)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| bad(format!("bad feature: {e}")))?;
                data.push(LogisticDatum {
                    features: Vector::from_vec(features),
                    label,
                    epsilon: eps,
                });
            }
        }
    }
    agents
        .into_iter()
        .map(|(id, data)| LocalProblem::logistic(id, data))
        .collect()
}

pub fn load_logistic_file(path: impl AsRef<Path>) -> Result<Vec<LocalProblem>> {
    load_logistic(&std::fs::read_to_string(path)?)
}

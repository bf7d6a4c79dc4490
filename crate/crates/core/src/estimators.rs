//! Local gradient oracles used during local training.
//!
//! [`SagaTable`] keeps, for every component `h`, the point `r_h` at which its
//! gradient was last evaluated together with that gradient, plus their
//! running mean. The stored gradient term of the SAGA estimate is a lookup,
//! and a component gradient is only counted as a fresh evaluation when the
//! table does not already hold it at the requested point.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::objectives::LocalProblem;
use crate::rng::RandomStream;
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorMode {
    /// Variance-reduced SAGA estimate over a random batch.
    Saga { batch_size: usize },
    /// Plain minibatch gradient, no correction.
    Sgd { batch_size: usize },
    /// Exact local gradient.
    Full,
}

impl EstimatorMode {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorMode::Saga { .. } => "saga",
            EstimatorMode::Sgd { .. } => "sgd",
            EstimatorMode::Full => "full",
        }
    }

    pub fn batch_size(&self) -> Option<usize> {
        match *self {
            EstimatorMode::Saga { batch_size } | EstimatorMode::Sgd { batch_size } => {
                Some(batch_size)
            }
            EstimatorMode::Full => None,
        }
    }

    pub fn from_name(name: &str, batch_size: usize) -> Result<Self> {
        match name {
            "saga" => Ok(EstimatorMode::Saga { batch_size }),
            "sgd" => Ok(EstimatorMode::Sgd { batch_size }),
            "full" => Ok(EstimatorMode::Full),
            other => Err(Error::Config(format!(
                "unknown estimator {other:?}, expected saga, sgd or full"
            ))),
        }
    }

    /// Requires `1 <= |B| < m` for the stochastic modes.
    pub fn validate(&self, component_count: usize) -> Result<()> {
        match self.batch_size() {
            Some(b) if b == 0 || b >= component_count => Err(Error::param(format!(
                "batch size must satisfy 1 <= |B| < m = {component_count}, got {b}"
            ))),
            _ => Ok(()),
        }
    }

    /// Fresh component-gradient evaluations spent by one round of `tau`
    /// local steps on `m` components.
    pub fn evaluations_per_round(&self, m: usize, tau: usize) -> u64 {
        let (m, tau) = (m as u64, tau as u64);
        match *self {
            EstimatorMode::Saga { batch_size } => m + (tau - 1) * batch_size as u64,
            EstimatorMode::Sgd { batch_size } => tau * batch_size as u64,
            EstimatorMode::Full => tau * m,
        }
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.batch_size() {
            Some(b) => write!(f, "{}:{b}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;

    /// `saga`, `saga:B`, `sgd`, `sgd:B` or `full`; the batch defaults to 1.
    fn from_str(s: &str) -> Result<Self> {
        let (name, batch) = match s.trim().split_once(':') {
            Some((name, b)) => (
                name,
                b.parse::<usize>()
                    .map_err(|e| Error::Config(format!("bad batch size in {s:?}: {e}")))?,
            ),
            None => (s.trim(), 1),
        };
        Self::from_name(name, batch)
    }
}

/// Uniform random batch without replacement. `Full` returns every index.
pub fn draw_batch(mode: EstimatorMode, m: usize, rng: &mut RandomStream) -> Result<Vec<usize>> {
    mode.validate(m)?;
    Ok(match mode.batch_size() {
        Some(b) => rng.subset(m, b),
        None => (0..m).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct SagaTable {
    points: Vec<Vector>,
    gradients: Vec<Vector>,
    average: Vector,
    evaluations: u64,
    initialized: bool,
    /// Evaluations made by the last `estimate` call: `(h, point, gradient)`.
    recent: Vec<(usize, Vector, Vector)>,
}

impl SagaTable {
    pub fn new(dimension: usize, component_count: usize) -> Self {
        Self {
            points: vec![Vector::zeros(dimension); component_count],
            gradients: vec![Vector::zeros(dimension); component_count],
            average: Vector::zeros(dimension),
            evaluations: 0,
            initialized: false,
            recent: Vec::new(),
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn stored_gradients(&self) -> &[Vector] {
        &self.gradients
    }

    pub fn stored_points(&self) -> &[Vector] {
        &self.points
    }

    pub fn running_average(&self) -> &Vector {
        &self.average
    }

    /// Total fresh component-gradient evaluations so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Evaluates every component at `x`: `m` fresh evaluations.
    pub fn reset(&mut self, p: &LocalProblem, x: &Vector) -> Result<()> {
        Error::check_dim(p.dimension(), x.len())?;
        self.check_problem(p)?;
        let mut sum = Vector::zeros(x.len());
        for (h, (point, grad)) in self.points.iter_mut().zip(&mut self.gradients).enumerate() {
            *grad = p.component_gradient(h, x)?;
            point.copy_from(x);
            sum += &*grad;
        }
        self.average = sum / p.component_count() as f64;
        self.evaluations += p.component_count() as u64;
        self.initialized = true;
        self.recent.clear();
        Ok(())
    }

    /// `(1/|B|) sum_{h in B} (grad f_h(phi) - stored_h) + average`.
    pub fn estimate(&mut self, p: &LocalProblem, phi: &Vector, batch: &[usize]) -> Result<Vector> {
        self.check_ready(p, phi, batch)?;
        self.recent.clear();
        let mut correction = Vector::zeros(phi.len());
        for &h in batch {
            if self.points[h] == *phi {
                // stored gradient is already grad f_h(phi); the difference is zero
                continue;
            }
            let fresh = p.component_gradient(h, phi)?;
            self.evaluations += 1;
            correction += &fresh - &self.gradients[h];
            self.recent.push((h, phi.clone(), fresh));
        }
        if !batch.is_empty() {
            correction /= batch.len() as f64;
        }
        Ok(correction + &self.average)
    }

    /// Sets `r_h = phi` and refreshes the stored gradient for `h` in `batch`.
    /// Gradients computed by the preceding `estimate` at the same point are
    /// reused rather than recounted.
    pub fn update_table(&mut self, p: &LocalProblem, phi: &Vector, batch: &[usize]) -> Result<()> {
        self.check_ready(p, phi, batch)?;
        let m = p.component_count() as f64;
        for &h in batch {
            if self.points[h] == *phi {
                continue;
            }
            let cached = self
                .recent
                .iter()
                .position(|(i, point, _)| *i == h && point == phi);
            let fresh = match cached {
                Some(pos) => self.recent.swap_remove(pos).2,
                None => {
                    self.evaluations += 1;
                    p.component_gradient(h, phi)?
                }
            };
            self.average += (&fresh - &self.gradients[h]) / m;
            self.gradients[h] = fresh;
            self.points[h].copy_from(phi);
        }
        Ok(())
    }

    /// Recomputes the running mean from the stored gradients.
    pub fn recompute_average(&mut self) {
        let mut sum = Vector::zeros(self.average.len());
        for g in &self.gradients {
            sum += g;
        }
        self.average = sum / self.gradients.len() as f64;
    }

    fn check_problem(&self, p: &LocalProblem) -> Result<()> {
        Error::check_dim(self.points.len(), p.component_count())?;
        Error::check_dim(self.average.len(), p.dimension())
    }

    fn check_ready(&self, p: &LocalProblem, phi: &Vector, batch: &[usize]) -> Result<()> {
        if !self.initialized {
            return Err(Error::Protocol("SAGA table used before reset".into()));
        }
        self.check_problem(p)?;
        Error::check_dim(p.dimension(), phi.len())?;
        let m = self.points.len();
        for (pos, &h) in batch.iter().enumerate() {
            if h >= m {
                return Err(Error::IndexOutOfRange { index: h, len: m });
            }
            if batch[..pos].contains(&h) {
                return Err(Error::param(format!("batch index {h} repeated")));
            }
        }
        Ok(())
    }
}

/// One agent's gradient oracle for local training: the configured mode plus
/// whatever state it needs.
#[derive(Debug, Clone)]
pub struct LocalEstimator {
    mode: EstimatorMode,
    table: SagaTable,
    evaluations: u64,
}

impl LocalEstimator {
    pub fn new(mode: EstimatorMode, p: &LocalProblem) -> Result<Self> {
        mode.validate(p.component_count())?;
        Ok(Self {
            mode,
            table: SagaTable::new(p.dimension(), p.component_count()),
            evaluations: 0,
        })
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    pub fn table(&self) -> &SagaTable {
        &self.table
    }

    /// Fresh component-gradient evaluations across all modes.
    pub fn evaluations(&self) -> u64 {
        self.evaluations + self.table.evaluations()
    }

    /// Called once per round at the round-start iterate.
    pub fn begin_round(&mut self, p: &LocalProblem, x: &Vector) -> Result<()> {
        if let EstimatorMode::Saga { .. } = self.mode {
            self.table.reset(p, x)?;
        }
        Ok(())
    }

    /// Gradient estimate at `phi` for one local step. For SAGA the sampled
    /// entries are refreshed at `phi`, reusing the evaluations just made.
    pub fn step(
        &mut self,
        p: &LocalProblem,
        phi: &Vector,
        rng: &mut RandomStream,
    ) -> Result<Vector> {
        let m = p.component_count();
        match self.mode {
            EstimatorMode::Saga { .. } => {
                let batch = draw_batch(self.mode, m, rng)?;
                let g = self.table.estimate(p, phi, &batch)?;
                self.table.update_table(p, phi, &batch)?;
                Ok(g)
            }
            EstimatorMode::Sgd { .. } => {
                let batch = draw_batch(self.mode, m, rng)?;
                let mut g = Vector::zeros(phi.len());
                for &h in &batch {
                    g += p.component_gradient(h, phi)?;
                }
                self.evaluations += batch.len() as u64;
                Ok(g / batch.len() as f64)
            }
            EstimatorMode::Full => {
                self.evaluations += m as u64;
                Ok(p.full_gradient(phi))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::generate_logistic;
    use crate::rng::Purpose;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn two_component_quadratic() -> LocalProblem {
        LocalProblem::quadratic_components(0, vec![v(&[1.0, 0.0]), v(&[-3.0, 2.0])]).unwrap()
    }

    fn mean(vs: &[Vector]) -> Vector {
        let mut s = Vector::zeros(vs[0].len());
        for x in vs {
            s += x;
        }
        s / vs.len() as f64
    }

    #[test]
    fn reset_stores_component_gradients() {
        let p = &generate_logistic(1, 5, 20, 0.1, 1).unwrap()[0];
        let x = Vector::from_fn(5, |i, _| 0.1 * i as f64 - 0.2);
        let mut t = SagaTable::new(5, 20);
        t.reset(p, &x).unwrap();
        assert!((t.running_average() - p.full_gradient(&x)).amax() < 1e-14);
        assert_eq!(t.evaluations(), 20);

        let q = LocalProblem::quadratic(0, v(&[1.0, 2.0]));
        let mut t = SagaTable::new(2, 1);
        t.reset(&q, &v(&[3.0, 3.0])).unwrap();
        assert_eq!(t.stored_gradients(), &[v(&[2.0, 1.0])]);
        assert_eq!(t.running_average(), &q.full_gradient(&v(&[3.0, 3.0])));
    }

    #[test]
    fn estimate_at_reset_point_is_exact_and_free() {
        let p = &generate_logistic(1, 5, 20, 0.1, 2).unwrap()[0];
        let x = Vector::from_element(5, 0.3);
        let mut t = SagaTable::new(5, 20);
        t.reset(p, &x).unwrap();
        for h in 0..20 {
            let g = t.estimate(p, &x, &[h]).unwrap();
            assert_eq!(g, *t.running_average());
        }
        assert_eq!(t.evaluations(), 20);
    }

    #[test]
    fn two_component_expansion() {
        let p = two_component_quadratic();
        let x = v(&[0.5, -1.0]);
        let phi = v(&[2.0, 0.25]);
        let mut t = SagaTable::new(2, 2);
        t.reset(&p, &x).unwrap();
        for h in 0..2 {
            let g = t.estimate(&p, &phi, &[h]).unwrap();
            let grad = |i: usize, y: &Vector| p.component_gradient(i, y).unwrap();
            let expected = grad(h, &phi) - grad(h, &x) + (grad(0, &x) + grad(1, &x)) * 0.5;
            assert!((g - expected).amax() < 1e-15);
        }
    }

    #[test]
    fn batch_expectation_is_full_gradient() {
        let p = &generate_logistic(1, 3, 5, 0.1, 3).unwrap()[0];
        let mut t = SagaTable::new(3, 5);
        t.reset(p, &v(&[0.1, 0.2, 0.3])).unwrap();
        // move some entries away from the reset point
        t.update_table(p, &v(&[-0.4, 1.0, 0.0]), &[1, 3]).unwrap();
        t.update_table(p, &v(&[0.7, 0.7, -0.2]), &[4]).unwrap();
        let phi = v(&[0.5, -0.5, 0.9]);
        let all: Vec<Vector> = (0..5)
            .map(|h| t.clone().estimate(p, &phi, &[h]).unwrap())
            .collect();
        assert!((mean(&all) - p.full_gradient(&phi)).amax() < 1e-12);
    }

    #[test]
    fn update_with_full_batch_equals_reset() {
        let p = &generate_logistic(1, 4, 6, 0.1, 4).unwrap()[0];
        let mut t = SagaTable::new(4, 6);
        t.reset(p, &Vector::zeros(4)).unwrap();
        let next = v(&[0.3, -0.1, 0.2, 1.0]);
        t.update_table(p, &next, &[0, 1, 2, 3, 4, 5]).unwrap();
        let mut fresh = SagaTable::new(4, 6);
        fresh.reset(p, &next).unwrap();
        assert_eq!(t.stored_gradients(), fresh.stored_gradients());
        assert!((t.running_average() - fresh.running_average()).amax() < 1e-14);
    }

    #[test]
    fn empty_batch_leaves_table_unchanged() {
        let p = two_component_quadratic();
        let mut t = SagaTable::new(2, 2);
        t.reset(&p, &v(&[1.0, 1.0])).unwrap();
        let before = t.stored_gradients().to_vec();
        let avg = t.running_average().clone();
        t.update_table(&p, &v(&[5.0, 5.0]), &[]).unwrap();
        assert_eq!(t.stored_gradients(), before.as_slice());
        assert_eq!(t.running_average(), &avg);
    }

    #[test]
    fn incremental_average_matches_recomputation() {
        let p = &generate_logistic(1, 5, 10, 0.1, 5).unwrap()[0];
        let mut t = SagaTable::new(5, 10);
        t.reset(p, &Vector::zeros(5)).unwrap();
        let mut rng = RandomStream::new(0, 0, 0, Purpose::Custom(9));
        for step in 0..200 {
            let h = rng.below(10);
            let phi = Vector::from_fn(5, |i, _| ((step * 7 + i) as f64).sin());
            t.update_table(p, &phi, &[h]).unwrap();
            let direct = mean(t.stored_gradients());
            assert!((t.running_average() - direct).amax() < 1e-12);
        }
    }

    #[test]
    fn estimate_then_update_counts_once() {
        let p = &generate_logistic(1, 3, 8, 0.1, 6).unwrap()[0];
        let mut t = SagaTable::new(3, 8);
        t.reset(p, &Vector::zeros(3)).unwrap();
        let phi = v(&[0.1, 0.2, 0.3]);
        t.estimate(p, &phi, &[2, 5]).unwrap();
        assert_eq!(t.evaluations(), 10);
        t.update_table(p, &phi, &[2, 5]).unwrap();
        assert_eq!(t.evaluations(), 10);
        t.update_table(p, &v(&[1.0, 1.0, 1.0]), &[2]).unwrap();
        assert_eq!(t.evaluations(), 11);
    }

    #[test]
    fn table_errors() {
        let p = two_component_quadratic();
        let mut t = SagaTable::new(2, 2);
        assert!(matches!(
            t.estimate(&p, &Vector::zeros(2), &[0]),
            Err(Error::Protocol(_))
        ));
        t.reset(&p, &Vector::zeros(2)).unwrap();
        assert!(matches!(
            t.estimate(&p, &Vector::zeros(2), &[2]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(t.estimate(&p, &Vector::zeros(2), &[0, 0]).is_err());
        assert!(matches!(
            t.reset(&p, &Vector::zeros(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn batch_draws() {
        let mut rng = RandomStream::new(1, 0, 0, Purpose::Batch);
        let b = draw_batch(EstimatorMode::Saga { batch_size: 1 }, 100, &mut rng).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b[0] < 100);
        assert!(draw_batch(EstimatorMode::Saga { batch_size: 5 }, 5, &mut rng).is_err());
        assert!(draw_batch(EstimatorMode::Sgd { batch_size: 0 }, 5, &mut rng).is_err());
        assert_eq!(
            draw_batch(EstimatorMode::Full, 3, &mut rng).unwrap(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn batch_frequencies_are_uniform() {
        let draws = 100_000;
        let mut counts = [0usize; 5];
        for i in 0..draws {
            let mut rng = RandomStream::new(3, 0, i, Purpose::Batch);
            let b = draw_batch(EstimatorMode::Saga { batch_size: 1 }, 5, &mut rng).unwrap();
            counts[b[0]] += 1;
        }
        let p = 0.2;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!(
                (c as f64 - draws as f64 * p).abs() < 3.0 * sigma,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn one_round_evaluation_count() {
        let p = &generate_logistic(1, 5, 100, 0.1, 7).unwrap()[0];
        for (mode, expected) in [
            (EstimatorMode::Saga { batch_size: 1 }, 104),
            (EstimatorMode::Saga { batch_size: 3 }, 112),
            (EstimatorMode::Sgd { batch_size: 1 }, 5),
            (EstimatorMode::Full, 500),
        ] {
            let mut est = LocalEstimator::new(mode, p).unwrap();
            let mut rng = RandomStream::new(0, 0, 0, Purpose::Batch);
            let mut phi = Vector::from_element(5, 0.1);
            est.begin_round(p, &phi).unwrap();
            for _ in 0..5 {
                let g = est.step(p, &phi, &mut rng).unwrap();
                phi -= g * 0.3;
            }
            assert_eq!(est.evaluations(), expected, "{mode}");
            assert_eq!(mode.evaluations_per_round(100, 5), expected);
        }
    }

    #[test]
    fn mode_strings() {
        assert_eq!(
            "saga".parse::<EstimatorMode>().unwrap(),
            EstimatorMode::Saga { batch_size: 1 }
        );
        assert_eq!(
            "sgd:4".parse::<EstimatorMode>().unwrap(),
            EstimatorMode::Sgd { batch_size: 4 }
        );
        assert_eq!(
            "full".parse::<EstimatorMode>().unwrap(),
            EstimatorMode::Full
        );
        assert!("svrg".parse::<EstimatorMode>().is_err());
        assert_eq!(EstimatorMode::Saga { batch_size: 2 }.to_string(), "saga:2");
    }
}

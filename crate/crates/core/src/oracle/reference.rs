use crate::error::{Error, Result};
use crate::objectives::{global_gradient, global_smoothness, LocalProblem};
use crate::Vector;

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x: Vector,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Centralized minimizer of `(1/N) sum_i f_i` by gradient descent with step
/// `1/L`, run until `|grad| <= tolerance`.
pub fn solve_reference(
    problems: &[LocalProblem],
    tolerance: f64,
    max_iterations: usize,
) -> Result<ReferenceSolution> {
    let dim = problems
        .first()
        .ok_or_else(|| Error::param("no problems given"))?
        .dimension();
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::param(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let step = 1.0 / global_smoothness(problems);
    let mut x = Vector::zeros(dim);
    for iterations in 0..=max_iterations {
        let g = global_gradient(problems, &x)?;
        let gradient_norm = g.norm();
        if !gradient_norm.is_finite() {
            return Err(Error::Solver("gradient descent diverged".into()));
        }
        if gradient_norm <= tolerance {
            return Ok(ReferenceSolution {
                x,
                gradient_norm,
                iterations,
            });
        }
        x.axpy(-step, &g, 1.0);
    }
    Err(Error::Solver(format!(
        "gradient norm still above {tolerance} after {max_iterations} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{generate_logistic, global_cost, LogisticDatum};

    #[test]
    fn quadratic_optimum_is_the_mean() {
        let problems: Vec<_> = [[1.0, 2.0], [3.0, -2.0], [-1.0, 3.0]]
            .iter()
            .enumerate()
            .map(|(i, a)| LocalProblem::quadratic(i, Vector::from_row_slice(a)))
            .collect();
        let sol = solve_reference(&problems, 1e-12, 100).unwrap();
        assert!((sol.x - Vector::from_row_slice(&[1.0, 1.0])).amax() < 1e-12);
    }

    /// Root of `x - 1/(1 + e^x)` by bisection.
    fn bisection_root() -> f64 {
        let f = |x: f64| x - 1.0 / (1.0 + x.exp());
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn one_sample_logistic_root() {
        let datum = LogisticDatum {
            features: Vector::from_row_slice(&[1.0]),
            label: 1.0,
            epsilon: 1.0,
        };
        let problems = vec![LocalProblem::logistic(0, vec![datum]).unwrap()];
        let sol = solve_reference(&problems, 1e-12, 10_000).unwrap();
        let root = bisection_root();
        assert!((root - 0.401058).abs() < 1e-6);
        assert!((sol.x[0] - root).abs() < 1e-11);
    }

    #[test]
    fn reference_is_a_strict_minimum() {
        let problems = generate_logistic(10, 5, 100, 0.1, 1).unwrap();
        let sol = solve_reference(&problems, DEFAULT_TOLERANCE, 1_000_000).unwrap();
        assert!(sol.gradient_norm <= DEFAULT_TOLERANCE);
        let f = |x: &Vector| global_cost(&problems, x).unwrap();
        let center = f(&sol.x);
        for i in 0..5 {
            for delta in [1e-4, -1e-4] {
                let mut probe = sol.x.clone();
                probe[i] += delta;
                assert!(f(&probe) > center);
            }
        }
    }

    #[test]
    fn iteration_cap_reported() {
        let problems = generate_logistic(2, 3, 10, 0.1, 1).unwrap();
        assert!(matches!(
            solve_reference(&problems, 1e-12, 3),
            Err(Error::Solver(_))
        ));
    }
}

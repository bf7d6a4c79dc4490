/// Observer-side quantities after `round` completed rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundMetrics {
    pub round: u64,
    /// Accumulated modeled wall time.
    pub model_time: f64,
    /// `|grad F(x_bar)|^2`.
    pub grad_norm_sq: f64,
    /// `sum_i |x_i - x_bar|^2`.
    pub consensus_err: f64,
    /// `|x_bar - x*|^2`; NaN when no reference solution is known.
    pub dist_to_opt: f64,
    /// Accumulated payload bits over all directed edges.
    pub bits_sent: u64,
    pub dual_residual: f64,
    /// `|X|`, the scale for `dual_residual`. Not written to CSV.
    pub stacked_x_norm: f64,
}

impl RoundMetrics {
    /// Whether the dual-sum identity holds to `tol * (1 + |X|)`.
    pub fn dual_residual_ok(&self, tol: f64) -> bool {
        self.dual_residual <= tol * (1.0 + self.stacked_x_norm)
    }
}

/// Geometric-decay statistics of a positive series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayDiagnostic {
    pub points: usize,
    /// Median of successive ratios `v[k+1] / v[k]`.
    pub median_ratio: f64,
    /// Least-squares slope of `ln v` against the round.
    pub slope: f64,
    pub r_squared: f64,
}

impl DecayDiagnostic {
    pub fn is_geometric(&self, min_r_squared: f64) -> bool {
        self.median_ratio < 1.0 && self.slope < 0.0 && self.r_squared >= min_r_squared
    }
}

/// Decay statistics of `grad_norm_sq` over the last half of `series`.
/// `None` with fewer than three usable points.
pub fn decay_diagnostic(series: &[RoundMetrics]) -> Option<DecayDiagnostic> {
    let tail: Vec<(f64, f64)> = series[series.len() / 2..]
        .iter()
        .filter(|m| m.grad_norm_sq > 0.0 && m.grad_norm_sq.is_finite())
        .map(|m| (m.round as f64, m.grad_norm_sq))
        .collect();
    if tail.len() < 3 {
        return None;
    }
    let mut ratios: Vec<f64> = tail.windows(2).map(|w| w[1].1 / w[0].1).collect();
    ratios.sort_by(f64::total_cmp);
    let mid = ratios.len() / 2;
    let median_ratio = if ratios.len() % 2 == 1 {
        ratios[mid]
    } else {
        0.5 * (ratios[mid - 1] + ratios[mid])
    };

    let n = tail.len() as f64;
    let mean_x = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = tail.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, v) in &tail {
        let (dx, dy) = (x - mean_x, v.ln() - mean_y);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(DecayDiagnostic {
        points: tail.len(),
        median_ratio,
        slope,
        r_squared,
    })
}

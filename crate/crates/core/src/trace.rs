//! Per-iteration diagnostic records produced by every solver.

use serde::{Deserialize, Serialize};

/// Which potential the `potential` column of a trace holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// `λ‖x−x*‖ + ‖y−∇g*(Ax)‖`, the batch primal-dual certificate.
    P,
    /// `‖x−x*‖² + μ‖y−∇g*(Ax)‖²`, the primal-dual SVRG certificate.
    Q,
    /// `η₂‖x−x*‖² + η₁‖y−y*‖²`, the certificate when both blocks are strongly convex.
    R,
}

/// Why a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    GradientTolerance,
    DistanceTolerance,
    Budget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// Full-gradient-equivalent units consumed so far.
    pub grad_evals: f64,
    pub dist_x: Option<f64>,
    pub dist_y: Option<f64>,
    /// `‖y − ∇g*(Ax)‖`
    pub b_t: Option<f64>,
    pub potential: Option<f64>,
    pub primal_value: Option<f64>,
    pub elapsed_seconds: f64,
}

impl TraceRow {
    /// Equality ignoring wall-clock time.
    pub fn same_numbers(&self, other: &Self) -> bool {
        fn bits(v: Option<f64>) -> Option<u64> {
            v.map(f64::to_bits)
        }
        self.iter == other.iter
            && self.grad_evals.to_bits() == other.grad_evals.to_bits()
            && bits(self.dist_x) == bits(other.dist_x)
            && bits(self.dist_y) == bits(other.dist_y)
            && bits(self.b_t) == bits(other.b_t)
            && bits(self.potential) == bits(other.potential)
            && bits(self.primal_value) == bits(other.primal_value)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub potential_kind: Option<PotentialKind>,
    pub stop_reason: Option<StopReason>,
    /// Gradient evaluations spent inside iterative conjugate-gradient solves.
    pub inner_evals: u64,
    /// Per-inner-iteration rows, only filled by stochastic solvers in verbose mode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inner_rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new(potential_kind: Option<PotentialKind>) -> Self {
        Self {
            potential_kind,
            ..Self::default()
        }
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn final_dist_x(&self) -> Option<f64> {
        self.last().and_then(|r| r.dist_x)
    }

    /// Grad-units at the first row with `dist_x <= tol`.
    pub fn units_to_reach(&self, tol: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.dist_x.is_some_and(|d| d <= tol)).map(|r| r.grad_evals)
    }

    /// Bitwise comparison of every recorded number except wall-clock time.
    pub fn same_numbers(&self, other: &Self) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| a.same_numbers(b))
            && self.inner_rows.len() == other.inner_rows.len()
            && self.inner_rows.iter().zip(&other.inner_rows).all(|(a, b)| a.same_numbers(b))
    }

    /// Ordinary least-squares slope of `log10(dist_x)` against grad-units,
    /// skipping the first `burn_in` fraction of rows and rows without a positive distance.
    pub fn log_slope(&self, burn_in: f64) -> Option<f64> {
        let skip = (self.rows.len() as f64 * burn_in).floor() as usize;
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .skip(skip)
            .filter_map(|r| match r.dist_x {
                Some(d) if d > 0.0 && d.is_finite() => Some((r.grad_evals, d.log10())),
                _ => None,
            })
            .collect();
        ols_slope(&pts)
    }
}

/// Slope of the least-squares line through `pts`; `None` with fewer than two
/// distinct abscissae.
pub fn ols_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iter: usize, units: f64, d: f64) -> TraceRow {
        TraceRow {
            iter,
            grad_evals: units,
            dist_x: Some(d),
            dist_y: None,
            b_t: None,
            potential: None,
            primal_value: None,
            elapsed_seconds: 0.0,
        }
    }

    #[test]
    fn slope_of_geometric_decay() {
        let mut t = Trace::new(None);
        for k in 0..50 {
            t.rows.push(row(k, k as f64, 10f64.powf(-0.5 * k as f64)));
        }
        assert!((t.log_slope(0.1).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(t.units_to_reach(1e-3), Some(6.0));
    }

    #[test]
    fn slope_needs_two_points() {
        assert!(ols_slope(&[(1.0, 1.0)]).is_none());
        assert!(ols_slope(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }
}

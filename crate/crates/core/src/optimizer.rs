//! Long-only global minimum variance allocation over synthetic ETFs.
//!
//! Covariance is the sample covariance of daily log-returns. The allocation
//! minimizes `ωᵀΣω` over the probability simplex with projected gradient
//! descent (backtracking step) and finishes with an exact solve of the KKT
//! system on the identified support.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;
use tracing::warn;

use crate::setf::{weighted_abs_change, SetfError};

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("need at least 2 aligned price observations, got {0}")]
    TooFewObservations(usize),
    #[error("series {series} has {actual} observations, expected {expected}")]
    Misaligned {
        series: usize,
        expected: usize,
        actual: usize,
    },
    #[error("series {series} observation {index} is not a positive price ({value})")]
    NonPositivePrice {
        series: usize,
        index: usize,
        value: f64,
    },
    #[error("no series given")]
    Empty,
    #[error("covariance matrix has a non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("solver did not converge in {iterations} iterations (projected gradient norm {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lookback {
    /// Number of price observations the matrix was estimated from.
    pub window: usize,
    pub end: Option<NaiveDate>,
}

/// Symmetric covariance matrix, possibly with a small ridge on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    n: usize,
    values: Vec<f64>,
    ridge: f64,
    lookback: Lookback,
}

impl CovarianceMatrix {
    /// Wrap a dense row-major matrix. The caller guarantees symmetry.
    pub fn from_dense(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n);
        Self {
            n,
            values,
            ridge: 0.0,
            lookback: Lookback { window: 0, end: None },
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Ridge added to every diagonal entry (zero when none was needed).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Entry without the ridge.
    pub fn raw(&self, i: usize, j: usize) -> f64 {
        let v = self.get(i, j);
        if i == j {
            v - self.ridge
        } else {
            v
        }
    }

    pub fn lookback(&self) -> Lookback {
        self.lookback
    }

    pub fn with_end(mut self, end: NaiveDate) -> Self {
        self.lookback.end = Some(end);
        self
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v * c).collect(),
            ridge: self.ridge * c,
            lookback: self.lookback,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let m = DMatrix::from_row_slice(self.n, self.n, &self.values);
        m.symmetric_eigenvalues().min()
    }

    /// `ωᵀΣω`.
    pub fn quad_form(&self, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for j in 0..self.n {
                row += self.values[i * self.n + j] * w[j];
            }
            acc += w[i] * row;
        }
        acc
    }

    fn mat_vec(&self, w: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut row = 0.0;
            for j in 0..self.n {
                row += self.values[i * self.n + j] * w[j];
            }
            out[i] = row;
        }
    }
}

/// Sample covariance (divisor `T − 1`) of the log-returns of each price
/// series. Series must be aligned and strictly positive.
///
/// When the smallest eigenvalue falls below `1e-12 · trace`, a ridge of
/// `1e-10 · mean(diag)` is added to the diagonal.
pub fn log_return_covariance(histories: &[Vec<f64>]) -> Result<CovarianceMatrix, OptimizerError> {
    let n = histories.len();
    if n == 0 {
        return Err(OptimizerError::Empty);
    }
    let len = histories[0].len();
    for (s, h) in histories.iter().enumerate() {
        if h.len() != len {
            return Err(OptimizerError::Misaligned {
                series: s,
                expected: len,
                actual: h.len(),
            });
        }
        if let Some(i) = h.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(OptimizerError::NonPositivePrice {
                series: s,
                index: i,
                value: h[i],
            });
        }
    }
    if len < 2 {
        return Err(OptimizerError::TooFewObservations(len));
    }

    let returns: Vec<Vec<f64>> = histories
        .iter()
        .map(|h| h.windows(2).map(|w| libm::log(w[1] / w[0])).collect())
        .collect();
    let t = len - 1;
    let centred: Vec<Vec<f64>> = returns
        .iter()
        .map(|r| {
            let mut sum = 0.0;
            for v in r {
                sum += v;
            }
            let mean = sum / t as f64;
            r.iter().map(|v| v - mean).collect()
        })
        .collect();
    let divisor = (t.max(2) - 1) as f64;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..t {
                acc += centred[i][k] * centred[j][k];
            }
            let c = acc / divisor;
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }

    let mut cov = CovarianceMatrix {
        n,
        values,
        ridge: 0.0,
        lookback: Lookback {
            window: len,
            end: None,
        },
    };
    let trace = cov.trace();
    if cov.min_eigenvalue() < 1e-12 * trace {
        let ridge = 1e-10 * trace / n as f64;
        for i in 0..n {
            cov.values[i * n + i] += ridge;
        }
        cov.ridge = ridge;
    }
    Ok(cov)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub objective: f64,
    pub iterations: usize,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights {
    pub weights: Vec<f64>,
    pub report: SolveReport,
}

/// One row of the optional solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub constraint_violation: f64,
}

pub fn write_trace_csv<W: std::io::Write>(trace: &[TracePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,objective,constraint_violation")?;
    for p in trace {
        writeln!(out, "{},{},{}", p.iteration, p.objective, p.constraint_violation)?;
    }
    Ok(())
}

/// Frank-Wolfe gap accepted as optimal, in units of the trace-normalized
/// objective.
const GAP_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Bound on the norm of the projected-gradient step at unit step length,
    /// measured on the trace-normalized problem.
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-10,
        }
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}` (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

pub fn max_violation(w: &[f64]) -> f64 {
    let sum: f64 = w.iter().sum();
    let neg = w.iter().fold(0.0f64, |m, &x| m.max(-x));
    (sum - 1.0).abs().max(neg)
}

/// Long-only minimum variance weights for `cov`.
pub fn solve_gmv(cov: &CovarianceMatrix) -> Result<PortfolioWeights, OptimizerError> {
    solve_gmv_with(cov, SolverOptions::default(), None)
}

pub fn solve_gmv_traced(
    cov: &CovarianceMatrix,
    options: SolverOptions,
) -> Result<(PortfolioWeights, Vec<TracePoint>), OptimizerError> {
    let mut trace = Vec::new();
    let w = solve_gmv_with(cov, options, Some(&mut trace))?;
    Ok((w, trace))
}

pub fn solve_gmv_with(
    cov: &CovarianceMatrix,
    options: SolverOptions,
    mut trace: Option<&mut Vec<TracePoint>>,
) -> Result<PortfolioWeights, OptimizerError> {
    let n = cov.n();
    for i in 0..n {
        for j in 0..n {
            if !cov.get(i, j).is_finite() {
                return Err(OptimizerError::NonFinite(i, j));
            }
        }
    }
    if n == 0 {
        return Err(OptimizerError::Empty);
    }
    let equal = vec![1.0 / n as f64; n];
    let scale = (0..n).map(|i| cov.get(i, i).abs()).sum::<f64>() / n as f64;
    if scale == 0.0 {
        if cov.values().iter().all(|&v| v == 0.0) {
            warn!("covariance matrix is identically zero; using equal weights");
        }
        return Ok(finish(cov, equal, 0));
    }
    if n == 1 {
        return Ok(finish(cov, vec![1.0], 0));
    }

    // Work on Σ / mean(diag) so the tolerance and step sizes are scale free.
    let q = cov.scaled(1.0 / scale);
    let objective = |w: &[f64]| q.quad_form(w);

    let mut w = equal;
    let mut f = objective(&w);
    let mut grad = vec![0.0; n];
    let mut step = 0.5 / (0..n).map(|i| q.get(i, i)).fold(0.0f64, f64::max).max(1e-300);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        q.mat_vec(&w, &mut grad);
        grad.iter_mut().for_each(|g| *g *= 2.0);

        let unit: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x - g).collect();
        let unit = project_simplex(&unit);
        residual = w
            .iter()
            .zip(&unit)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if let Some(t) = trace.as_deref_mut() {
            t.push(TracePoint {
                iteration: iterations,
                objective: f * scale,
                constraint_violation: max_violation(&w),
            });
        }
        if residual <= options.tolerance {
            break;
        }
        // f(w) − f* is bounded by the Frank-Wolfe gap and, since f* ≥ 0 for
        // PSD Σ, by f(w) itself. Either certifies the objective even when a
        // singular Σ leaves the minimizer non-unique.
        let min_g = grad.iter().copied().fold(f64::INFINITY, f64::min);
        let gap: f64 = w.iter().zip(&grad).map(|(x, g)| x * (g - min_g)).sum();
        if gap.min(f) <= GAP_TOLERANCE {
            residual = 0.0;
            break;
        }
        if iterations % 25 == 0 {
            if let Some((p, fp)) = polish(&q, &w) {
                if fp <= f + 1e-12 * f.abs() {
                    w = p;
                    f = fp;
                    residual = 0.0;
                    break;
                }
            }
        }

        // Backtracking on the projected step (sufficient-decrease test).
        step *= 2.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
            let trial = project_simplex(&trial);
            let ft = objective(&trial);
            let mut lin = 0.0;
            let mut dist2 = 0.0;
            for i in 0..n {
                let d = trial[i] - w[i];
                lin += grad[i] * d;
                dist2 += d * d;
            }
            if ft <= f + lin + dist2 / (2.0 * step) || step < 1e-300 {
                w = trial;
                f = ft;
                break;
            }
            step *= 0.5;
        }
    }

    if let Some((p, fp)) = polish(&q, &w) {
        if fp <= f + 1e-12 * f.abs() {
            w = p;
            residual = 0.0;
        }
    }
    if residual > options.tolerance {
        return Err(OptimizerError::NotConverged {
            iterations,
            residual,
            best: w,
        });
    }
    Ok(finish(cov, w, iterations))
}

fn finish(cov: &CovarianceMatrix, w: Vec<f64>, iterations: usize) -> PortfolioWeights {
    PortfolioWeights {
        report: SolveReport {
            objective: cov.quad_form(&w),
            iterations,
            max_violation: max_violation(&w),
        },
        weights: w,
    }
}

/// Minimizer of `xᵀQx` over `{Σx = 1}` restricted to the indices in `support`,
/// with the multiplier `ν`. The bordered system
///
/// ```text
/// [2Q_SS  -1] [x]   [0]
/// [1ᵀ      0] [ν] = [1]
/// ```
///
/// is always consistent for PSD `Q`, so a pseudo-inverse solve also covers
/// singular `Q_SS`.
fn equality_minimizer(q: &CovarianceMatrix, support: &[usize]) -> Option<(Vec<f64>, f64)> {
    let m = support.len();
    let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[(r, c)] = 2.0 * q.get(i, j);
        }
        a[(r, m)] = -1.0;
        a[(m, r)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m + 1);
    b[m] = 1.0;
    let sol = match a.clone().lu().solve(&b) {
        Some(sol) if sol.iter().all(|v| v.is_finite()) => sol,
        _ => {
            let svd = a.svd(true, true);
            let eps = 1e-12 * svd.singular_values.max();
            svd.solve(&b, eps).ok()?
        }
    };
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.iter().take(m).copied().collect(), sol[m]))
}

/// Primal active-set refinement from the feasible point `w`. Returns a point
/// satisfying the KKT conditions of the simplex-constrained problem, or
/// `None` if none was reached within the step budget.
fn polish(q: &CovarianceMatrix, w: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = q.n();
    let mut x: Vec<f64> = w.iter().map(|&v| if v > 1e-14 { v } else { 0.0 }).collect();
    let total: f64 = x.iter().sum();
    if total <= 0.0 {
        return None;
    }
    x.iter_mut().for_each(|v| *v /= total);
    let mut free: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let mut g = vec![0.0; n];

    for _ in 0..(4 * n + 20) {
        let support: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let (target, _) = equality_minimizer(q, &support)?;

        // Move towards the equality minimizer until a weight hits zero.
        let mut alpha = 1.0;
        let mut blocking = None;
        for (r, &i) in support.iter().enumerate() {
            if target[r] < x[i] {
                let a = x[i] / (x[i] - target[r]);
                if a < alpha {
                    alpha = a;
                    blocking = Some(i);
                }
            }
        }
        for (r, &i) in support.iter().enumerate() {
            x[i] += alpha * (target[r] - x[i]);
        }
        if let Some(b) = blocking {
            x[b] = 0.0;
            free[b] = false;
            let total: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= total);
            continue;
        }
        for (i, v) in x.iter_mut().enumerate() {
            if free[i] && *v < 0.0 {
                *v = 0.0;
            }
        }
        let total: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= total);

        // Optimal unless some excluded asset has a smaller marginal variance.
        q.mat_vec(&x, &mut g);
        let nu = support.iter().map(|&i| 2.0 * g[i] * x[i]).sum::<f64>();
        let tol = 1e-10 * nu.abs() + 1e-15;
        let entering = (0..n)
            .filter(|&i| !free[i] && 2.0 * g[i] < nu - tol)
            .min_by(|&a, &b| g[a].total_cmp(&g[b]));
        match entering {
            Some(i) => free[i] = true,
            None => {
                let f = q.quad_form(&x);
                return Some((x, f));
            }
        }
    }
    None
}

/// `Σ_i |ω_new_i − ω_old_i| · π_i`.
pub fn rebalancing_turnover(w_old: &[f64], w_new: &[f64], etf_prices: &[f64]) -> Result<f64, OptimizerError> {
    weighted_abs_change(w_old, w_new, etf_prices).map_err(|e| match e {
        SetfError::LengthMismatch { left, right } => OptimizerError::LengthMismatch(left, right),
        other => unreachable!("{other}"),
    })
}

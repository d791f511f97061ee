use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::dataset::{compress, CompressedDataset, Dataset};
use crate::error::{Error, Result};

/// Tolerances for the Gram-form solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// First jitter, relative to `trace(G) / k`.
    pub jitter_scale: f64,
    pub jitter_growth: f64,
    /// Number of jittered Cholesky retries before the eigen fallback.
    pub max_jitter_steps: u32,
    /// A Cholesky factor is accepted only if its pivot ratio
    /// `min(diag L)^2 / max(diag L)^2` is at least this.
    pub min_pivot_ratio: f64,
    /// Eigenvalues below `eigen_cutoff * max eigenvalue` are dropped in the
    /// fallback pseudo-inverse.
    pub eigen_cutoff: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            jitter_scale: 1e-12,
            jitter_growth: 10.0,
            max_jitter_steps: 3,
            min_pivot_ratio: 1e-10,
            eigen_cutoff: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Cholesky,
    Eigen,
    /// Parameters were supplied directly, not fitted.
    Fixed,
}

/// A linear predictor `x -> theta . x` with the diagnostics of the solve
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub theta: Vec<f64>,
    pub solver_rank: usize,
    pub max_interpolation_residual: f64,
    pub jitter_applied: f64,
    pub method: SolveMethod,
    /// Reciprocal-condition proxy of the Gram system that was solved.
    pub rcond_estimate: f64,
}

impl LinearModel {
    pub fn from_theta(theta: Vec<f64>) -> Self {
        Self {
            theta,
            solver_rank: 0,
            max_interpolation_residual: 0.0,
            jitter_applied: 0.0,
            method: SolveMethod::Fixed,
            rcond_estimate: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.theta, &self.theta).sqrt()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four lanes so the compiler vectorizes the reduction.
    let mut acc = [0.0f64; 4];
    let (ca, ra) = a.split_at(a.len() - a.len() % 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Evaluates `theta . x`.
pub fn predict(model: &LinearModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    Ok(dot(&model.theta, x))
}

/// Minimum-norm least-squares fit of `sample`.
///
/// The fit depends on the sample only through its compression; duplicate
/// design points with differing labels are resolved by their label mean,
/// which is what the least-squares objective forces.
pub fn least_norm_fit(sample: &Dataset, config: &SolverConfig) -> Result<LinearModel> {
    if sample.dim() == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    let compressed = compress(sample)?;
    fit_compressed(&compressed, config)
}

/// Row-major `k x k` Gram matrix of a row-major `k x d` design.
fn gram(design: &[f64], k: usize, d: usize) -> DMatrix<f64> {
    let mut out = vec![0.0; k * k];
    // SAFETY: `design` holds k*d values and `out` k*k; the strides describe
    // A = design (k x d, row-major) and B = design^T (d x k).
    unsafe {
        matrixmultiply::dgemm(
            k,
            d,
            k,
            1.0,
            design.as_ptr(),
            d as isize,
            1,
            design.as_ptr(),
            1,
            d as isize,
            0.0,
            out.as_mut_ptr(),
            k as isize,
            1,
        );
    }
    let mut g = DMatrix::from_row_slice(k, k, &out);
    for i in 0..k {
        for j in 0..i {
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

fn combine(design: &[f64], coeffs: &[f64], d: usize) -> Vec<f64> {
    let mut theta = vec![0.0; d];
    for (row, &c) in design.chunks_exact(d).zip(coeffs) {
        for (t, x) in theta.iter_mut().zip(row) {
            *t += c * x;
        }
    }
    theta
}

fn pivot_range(chol: &Cholesky<f64, nalgebra::Dyn>) -> (f64, f64) {
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..l.nrows() {
        let p = l[(i, i)] * l[(i, i)];
        lo = lo.min(p);
        hi = hi.max(p);
    }
    (lo, hi)
}

/// Minimum-norm weighted least-squares fit on a compressed sample, each
/// point weighted by its multiplicity.
///
/// Solved in Gram form: `G a = v`, `theta = X^T a`, with `G` the Gram
/// matrix of the distinct points. Cholesky is tried first, then up to
/// `max_jitter_steps` jittered retries, then a truncated eigendecomposition
/// of the multiplicity-weighted Gram matrix.
pub fn fit_compressed(data: &CompressedDataset, config: &SolverConfig) -> Result<LinearModel> {
    let k = data.len();
    let d = data.dim();
    if k == 0 {
        return Err(Error::domain("cannot fit an empty sample"));
    }
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    let mut design = Vec::with_capacity(k * d);
    for p in data.points() {
        design.extend_from_slice(&p.u);
    }
    let targets: Vec<f64> = data.points().iter().map(|p| p.v_mean).collect();
    if design.iter().chain(&targets).any(|v| !v.is_finite()) {
        return Err(Error::Solver {
            condition_estimate: f64::NAN,
        });
    }
    // Weighting by sqrt(multiplicity) makes the solve minimize
    // sum_i m_i (theta.u_i - v_i)^2, the original sample's objective. When
    // G is invertible the weights cancel and theta interpolates.
    let w: Vec<f64> = data
        .points()
        .iter()
        .map(|p| (p.multiplicity as f64).sqrt())
        .collect();
    let g = gram(&design, k, d);
    let gw = DMatrix::from_fn(k, k, |i, j| w[i] * g[(i, j)] * w[j]);
    let vw = DVector::from_fn(k, |i, _| w[i] * targets[i]);
    let scale = gw.trace() / k as f64;

    for step in 0..=config.max_jitter_steps {
        let mut attempt = gw.clone();
        let jitter = if step == 0 {
            0.0
        } else {
            config.jitter_scale * scale * config.jitter_growth.powi(step as i32 - 1)
        };
        if jitter > 0.0 {
            for i in 0..k {
                attempt[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(attempt) {
            let (lo, hi) = pivot_range(&chol);
            let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
            // Jitter may only absorb roundoff, never a genuine rank deficiency.
            if ratio >= config.min_pivot_ratio && lo >= 100.0 * jitter {
                let a = chol.solve(&vw);
                let coeffs: Vec<f64> = (0..k).map(|i| w[i] * a[i]).collect();
                let theta = combine(&design, &coeffs, d);
                return Ok(finish(theta, &design, &targets, k, jitter, SolveMethod::Cholesky, ratio));
            }
        }
    }

    let eig = SymmetricEigen::new(gw);
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let low = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !top.is_finite() || eig.eigenvectors.iter().any(|x| !x.is_finite()) {
        return Err(Error::Solver {
            condition_estimate: top / low,
        });
    }
    let cutoff = config.eigen_cutoff * top;
    let mut a = DVector::zeros(k);
    let mut rank = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff && lambda > 0.0 {
            let q = eig.eigenvectors.column(i);
            a += q * (q.dot(&vw) / lambda);
            rank += 1;
        }
    }
    let coeffs: Vec<f64> = (0..k).map(|i| w[i] * a[i]).collect();
    let theta = combine(&design, &coeffs, d);
    let rcond = if top > 0.0 { low.max(0.0) / top } else { 0.0 };
    Ok(finish(theta, &design, &targets, rank, 0.0, SolveMethod::Eigen, rcond))
}

fn finish(
    theta: Vec<f64>,
    design: &[f64],
    targets: &[f64],
    rank: usize,
    jitter: f64,
    method: SolveMethod,
    rcond: f64,
) -> LinearModel {
    let d = theta.len();
    let residual = design
        .chunks_exact(d)
        .zip(targets)
        .map(|(u, v)| (dot(&theta, u) - v).abs())
        .fold(0.0, f64::max);
    LinearModel {
        theta,
        solver_rank: rank,
        max_interpolation_residual: residual,
        jitter_applied: jitter,
        method,
        rcond_estimate: rcond,
    }
}

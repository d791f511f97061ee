//! Exact checks of bounded antimonotonicity, strong density and binomial
//! central mass.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::bounds::BoundFunction;
use crate::distributions::binomial_pmf;
use crate::error::{Error, Result};
use crate::interpolant::LinearModel;

/// A pair `n1 <= n2 <= 2 n1` with `eps(h, n2) > c eps(h, n1)`. For each
/// model and `n2` only the `n1` minimizing `eps(h, n1)` is reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntimonoViolation {
    pub model_index: usize,
    pub n1: usize,
    pub n2: usize,
    pub eps_n1: f64,
    pub eps_n2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntimonoReport {
    pub ok: bool,
    pub violations: Vec<AntimonoViolation>,
}

/// Checks `eps(h, n2, delta) <= c eps(h, n1, delta)` for every model and
/// every grid pair with `n2 / 2 <= n1 <= n2`.
///
/// Runs in time linear in the grid per model: the smallest `eps` over the
/// admissible window of `n1` is tracked with a monotone deque.
pub fn check_bounded_antimonotonic(
    bound: &dyn BoundFunction,
    models: &[LinearModel],
    n_grid: &[usize],
    delta: f64,
    c: f64,
) -> Result<AntimonoReport> {
    if !(c >= 1.0) {
        return Err(Error::domain(format!("c must be at least 1, got {c}")));
    }
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut violations = Vec::new();
    for (model_index, model) in models.iter().enumerate() {
        let eps: Vec<f64> = grid.iter().map(|&n| bound.eval(model, n, delta)).collect();
        if let Some(bad) = eps.iter().position(|e| !(*e >= 0.0)) {
            return Err(Error::domain(format!(
                "bound {} returned {} at n={}",
                bound.id(),
                eps[bad],
                grid[bad]
            )));
        }
        let mut window: VecDeque<usize> = VecDeque::new();
        let mut left = 0;
        for j in 0..grid.len() {
            while window.back().is_some_and(|&i| eps[i] >= eps[j]) {
                window.pop_back();
            }
            window.push_back(j);
            while 2 * grid[left] < grid[j] {
                left += 1;
            }
            while window.front().is_some_and(|&i| i < left) {
                window.pop_front();
            }
            let i = *window.front().expect("window holds j");
            if eps[j] > c * eps[i] {
                violations.push(AntimonoViolation {
                    model_index,
                    n1: grid[i],
                    n2: grid[j],
                    eps_n1: eps[i],
                    eps_n2: eps[j],
                });
            }
        }
    }
    Ok(AntimonoReport {
        ok: violations.is_empty(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBin {
    pub s: u64,
    pub count: u64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    /// True when every inspected bin reaches `beta`; vacuously true when
    /// no bin fits between `n0` and `horizon`.
    pub ok: bool,
    pub bins: Vec<DensityBin>,
}

/// Fraction of each bin `[s^2, (s+1)^2 - 1]` covered by `set`, for every
/// `s` with `s^2 >= n0` and `(s+1)^2 <= horizon`.
pub fn strong_density(
    set: impl IntoIterator<Item = u64>,
    beta: f64,
    n0: u64,
    horizon: u64,
) -> Result<DensityReport> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::domain(format!("beta must lie in [0, 1], got {beta}")));
    }
    let mut members: Vec<u64> = set.into_iter().collect();
    members.sort_unstable();
    members.dedup();
    let below = |x: u64| members.partition_point(|&m| m < x) as u64;
    let mut s = (n0 as f64).sqrt() as u64;
    while s * s < n0 {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= n0 {
        s -= 1;
    }
    let mut bins = Vec::new();
    while (s + 1) * (s + 1) <= horizon {
        let count = below((s + 1) * (s + 1)) - below(s * s);
        bins.push(DensityBin {
            s,
            count,
            density: count as f64 / (2 * s + 1) as f64,
        });
        s += 1;
    }
    Ok(DensityReport {
        ok: bins.iter().all(|b| b.density >= beta),
        bins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralMass {
    /// Smallest pmf over integers within `halfwidth` of the mean.
    pub min_pmf: f64,
    /// `min_pmf * sqrt(mean)`.
    pub min_pmf_scaled: f64,
    /// Exact probability of landing farther than `halfwidth` from the mean.
    pub outside_mass: f64,
    /// Chebyshev's bound `var / halfwidth^2` on `outside_mass`, capped at 1.
    pub chebyshev_bound: f64,
}

pub fn binomial_central_mass_check(trials: u64, p: f64, halfwidth: u64) -> Result<CentralMass> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    let mean = trials as f64 * p;
    let var = mean * (1.0 - p);
    let w = halfwidth as f64;
    let mut min_pmf = f64::INFINITY;
    let mut outside = 0.0;
    for k in 0..=trials {
        let pmf = binomial_pmf(k, trials, p);
        if (k as f64 - mean).abs() <= w {
            min_pmf = min_pmf.min(pmf);
        } else {
            outside += pmf;
        }
    }
    if !min_pmf.is_finite() {
        return Err(Error::domain("no integer lies within the window"));
    }
    let chebyshev_bound = if halfwidth == 0 { 1.0 } else { (var / (w * w)).min(1.0) };
    Ok(CentralMass {
        min_pmf,
        min_pmf_scaled: min_pmf * mean.sqrt(),
        outside_mass: outside,
        chebyshev_bound,
    })
}

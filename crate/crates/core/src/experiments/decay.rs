use serde::{Deserialize, Serialize};

use super::harness::run_trials;
use super::stats;
use crate::distributions::{sample_pn, FamilyParams, LabelMode, RngStream};
use crate::error::{Error, Result};
use crate::interpolant::{least_norm_fit, SolverConfig};
use crate::risk::{bllt_bound, excess_risk_gaussian, BlltConstants};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// Fit the least-norm interpolant to `S ~ P_n^n`.
    #[default]
    Fit,
    /// Skip fitting and score `theta = theta*`.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub n: usize,
    pub d: usize,
    pub median_excess: f64,
    /// `(1 - delta)`-quantile of the excess.
    pub q_excess: f64,
    pub bllt_bound: Option<f64>,
    pub excesses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub delta: f64,
    pub trials: usize,
    pub points: Vec<DecayPoint>,
    /// Slope of log median excess against log n; NaN with fewer than two
    /// points or a zero median.
    pub log_log_slope: f64,
    pub strictly_decreasing: bool,
}

/// Excess risk under `P_n` of the interpolant fitted to `n` rows, across a
/// grid of family members.
pub fn run_benign_decay(
    grid: &[FamilyParams],
    trials: usize,
    delta: f64,
    mode: DecayMode,
    stream: &RngStream,
) -> Result<DecayReport> {
    if grid.windows(2).any(|w| w[0].n() >= w[1].n()) {
        return Err(Error::domain("grid must be sorted by increasing n"));
    }
    if trials == 0 || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("need trials > 0 and delta in (0, 1)"));
    }
    let config = SolverConfig::default();
    let mut points = Vec::with_capacity(grid.len());
    for params in grid {
        let n = params.n();
        let experiment = format!("benign/n{n}");
        let excesses = run_trials(stream, &experiment, trials, |t| {
            let theta = match mode {
                DecayMode::Fit => {
                    let sample = sample_pn(params, &mut t.rng("sample"), n, LabelMode::ScaledVariance)?;
                    least_norm_fit(&sample, &config)?.theta
                }
                DecayMode::Oracle => params.theta_star().to_vec(),
            };
            excess_risk_gaussian(&theta, params.theta_star(), params.spectrum())
        })?;
        points.push(DecayPoint {
            n,
            d: params.d(),
            median_excess: stats::median(&excesses),
            q_excess: stats::quantile(&excesses, 1.0 - delta),
            bllt_bound: bllt_bound(params.spectrum(), n, delta, BlltConstants::default())?.value(),
            excesses,
        });
    }
    let strictly_decreasing = points.windows(2).all(|w| w[1].median_excess < w[0].median_excess);
    let log_log_slope = if points.len() >= 2 && points.iter().all(|p| p.median_excess > 0.0) {
        let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.median_excess.ln()).collect();
        stats::ols_slope(&x, &y)
    } else {
        f64::NAN
    };
    Ok(DecayReport {
        delta,
        trials,
        points,
        log_log_slope,
        strictly_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(ns: &[usize]) -> Vec<FamilyParams> {
        ns.iter().map(|&n| FamilyParams::standard(n).unwrap()).collect()
    }

    #[test]
    fn oracle_mode_has_zero_excess() {
        let r = run_benign_decay(&grid(&[4, 9, 16]), 5, 0.05, DecayMode::Oracle, &RngStream::new(1)).unwrap();
        assert!(r.points.iter().all(|p| p.excesses.iter().all(|&e| e == 0.0)));
        assert!(r.log_log_slope.is_nan());
        assert!(!r.strictly_decreasing);
    }

    #[test]
    fn small_fit_run() {
        let r = run_benign_decay(&grid(&[9, 16, 25]), 40, 0.05, DecayMode::Fit, &RngStream::new(2)).unwrap();
        assert_eq!(r.points.len(), 3);
        for p in &r.points {
            assert!(p.median_excess > 0.0 && p.q_excess >= p.median_excess);
            assert!(p.bllt_bound.is_some());
        }
        assert!(r.log_log_slope.is_finite());
    }

    #[test]
    fn rejects_unsorted_grid() {
        assert!(run_benign_decay(&grid(&[16, 9]), 5, 0.05, DecayMode::Fit, &RngStream::new(1)).is_err());
    }
}

//! Closed-form risks, effective ranks and the benign-overfitting upper
//! bound evaluator.

use serde::{Deserialize, Serialize};

use crate::distributions::{compensated_sum, FamilyParams, Spectrum, SupportSet};
use crate::error::{Error, Result};
use crate::interpolant::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionTag {
    Gaussian,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub excess_risk: f64,
    pub bayes_risk: f64,
    pub distribution_tag: DistributionTag,
}

impl RiskReport {
    /// Excess and Bayes risk of `theta` under `P_n`.
    pub fn gaussian(theta: &[f64], params: &FamilyParams) -> Result<Self> {
        Ok(Self {
            excess_risk: excess_risk_gaussian(theta, params.theta_star(), params.spectrum())?,
            bayes_risk: bayes_risk_pn(params),
            distribution_tag: DistributionTag::Gaussian,
        })
    }

    /// Excess and Bayes risk of `theta` under the `Q_n` with this support.
    pub fn discrete(theta: &[f64], support: &SupportSet) -> Result<Self> {
        let params = support.params();
        Ok(Self {
            excess_risk: excess_risk_discrete(theta, params.theta_star(), support)?,
            bayes_risk: params.sigma_y2(),
            distribution_tag: DistributionTag::Discrete,
        })
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `sum_i lambda_i (theta_i - theta*_i)^2`, the excess risk under any
/// distribution with this diagonal covariance and regression function
/// `theta* . x`.
pub fn excess_risk_gaussian(theta: &[f64], theta_star: &[f64], spectrum: &Spectrum) -> Result<f64> {
    check_dims(spectrum.dim(), theta.len())?;
    check_dims(spectrum.dim(), theta_star.len())?;
    Ok(compensated_sum(
        spectrum
            .eigenvalues()
            .iter()
            .zip(theta.iter().zip(theta_star))
            .map(|(l, (t, s))| l * (t - s) * (t - s)),
    ))
}

/// `(1/|U|) sum_{u in U} ((theta - theta*) . u)^2`, the exact excess risk
/// under `Q_n`.
pub fn excess_risk_discrete(theta: &[f64], theta_star: &[f64], support: &SupportSet) -> Result<f64> {
    if support.is_empty() {
        return Err(Error::domain("empty support"));
    }
    check_dims(support.dim(), theta.len())?;
    check_dims(support.dim(), theta_star.len())?;
    let diff: Vec<f64> = theta.iter().zip(theta_star).map(|(t, s)| t - s).collect();
    let total = compensated_sum(support.atoms().map(|u| {
        let e = dot(&diff, u);
        e * e
    }));
    Ok(total / support.len() as f64)
}

/// `E[1/Z]` for `Z` zero-truncated `Poi(lambda)`.
///
/// Series `sum_k (1/k) lambda^k e^{-lambda} / (k! (1 - e^{-lambda}))`,
/// stopped once a term drops below 1e-16 past the mode.
pub fn inverse_mean_zero_truncated(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let norm = -(-lambda).exp_m1();
    let mut p = (-lambda).exp();
    let mut total = 0.0;
    let mut k = 0u64;
    loop {
        k += 1;
        p *= lambda / k as f64;
        let term = p / (k as f64 * norm);
        total += term;
        if (k as f64 > lambda && term < 1e-16) || k > 100_000 {
            break;
        }
    }
    total
}

/// Bayes risk of `P_n`: `sigma_y2 * E[1/Z]` with `Z` zero-truncated
/// `Poi(c/b)`.
pub fn bayes_risk_pn(params: &FamilyParams) -> f64 {
    params.sigma_y2() * inverse_mean_zero_truncated(params.rate())
}

/// Run-length view of a sorted spectrum, with tail sums after each run.
struct Runs {
    values: Vec<f64>,
    /// First eigenvalue index of each run.
    starts: Vec<usize>,
    ends: Vec<usize>,
    /// `sum lambda` and `sum lambda^2` over all runs after run j.
    after1: Vec<f64>,
    after2: Vec<f64>,
}

impl Runs {
    fn new(spectrum: &Spectrum) -> Self {
        let ev = spectrum.eigenvalues();
        let (mut values, mut starts, mut ends) = (Vec::new(), Vec::new(), Vec::new());
        let mut i = 0;
        while i < ev.len() {
            let mut j = i + 1;
            while j < ev.len() && ev[j] == ev[i] {
                j += 1;
            }
            values.push(ev[i]);
            starts.push(i);
            ends.push(j);
            i = j;
        }
        let r = values.len();
        let mut after1 = vec![0.0; r];
        let mut after2 = vec![0.0; r];
        for j in (0..r.saturating_sub(1)).rev() {
            let cnt = (ends[j + 1] - starts[j + 1]) as f64;
            after1[j] = compensated_sum([after1[j + 1], cnt * values[j + 1]]);
            after2[j] = compensated_sum([after2[j + 1], cnt * values[j + 1] * values[j + 1]]);
        }
        Self {
            values,
            starts,
            ends,
            after1,
            after2,
        }
    }

    /// `(r_k, R_k)`, normalized by `lambda_{k+1}` so that runs of equal
    /// eigenvalues contribute exact integer counts.
    fn ranks(&self, k: usize) -> (f64, f64) {
        let j = self.ends.partition_point(|&e| e <= k);
        debug_assert!(self.starts[j] <= k);
        let lambda = self.values[j];
        let remaining = (self.ends[j] - k) as f64;
        let a = self.after1[j] / lambda;
        let b = self.after2[j] / (lambda * lambda);
        let r = remaining + a;
        (r, r * r / (remaining + b))
    }
}

fn check_k(spectrum: &Spectrum, k: usize) -> Result<()> {
    if k >= spectrum.dim() {
        return Err(Error::domain(format!(
            "k={k} must be below the spectrum dimension {}",
            spectrum.dim()
        )));
    }
    Ok(())
}

/// `r_k = sum_{i>k} lambda_i / lambda_{k+1}`.
pub fn effective_rank_r(spectrum: &Spectrum, k: usize) -> Result<f64> {
    check_k(spectrum, k)?;
    Ok(Runs::new(spectrum).ranks(k).0)
}

/// `R_k = (sum_{i>k} lambda_i)^2 / sum_{i>k} lambda_i^2`.
pub fn effective_rank_big_r(spectrum: &Spectrum, k: usize) -> Result<f64> {
    check_k(spectrum, k)?;
    Ok(Runs::new(spectrum).ranks(k).1)
}

/// Smallest `k >= 0` with `r_k >= b_const * n`.
pub fn critical_k(spectrum: &Spectrum, n: usize, b_const: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let runs = Runs::new(spectrum);
    let target = b_const * n as f64;
    (0..spectrum.dim())
        .find(|&k| runs.ranks(k).0 >= target)
        .ok_or_else(|| {
            Error::domain(format!(
                "rank condition unsatisfied: no k with r_k >= {target}"
            ))
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub k: usize,
    pub r: f64,
    pub big_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub entries: Vec<RankEntry>,
    /// `None` when the rank condition cannot be met.
    pub k_star: Option<usize>,
}

/// Effective ranks at each requested `k`, plus `k*` for `(n, b_const)`.
pub fn rank_profile(spectrum: &Spectrum, ks: &[usize], n: usize, b_const: f64) -> Result<RankProfile> {
    let runs = Runs::new(spectrum);
    let entries = ks
        .iter()
        .map(|&k| {
            check_k(spectrum, k)?;
            let (r, big_r) = runs.ranks(k);
            Ok(RankEntry { k, r, big_r })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankProfile {
        entries,
        k_star: critical_k(spectrum, n, b_const).ok(),
    })
}

/// The unspecified absolute constants of the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlltConstants {
    pub b_const: f64,
    pub c_const: f64,
    pub c1_const: f64,
}

impl Default for BlltConstants {
    fn default() -> Self {
        Self {
            b_const: 1.0,
            c_const: 1.0,
            c1_const: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlltBound {
    Value(f64),
    Inapplicable(String),
}

impl BlltBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            BlltBound::Value(v) => Some(*v),
            BlltBound::Inapplicable(_) => None,
        }
    }
}

/// Evaluates
/// `c (max{sqrt(r0/n), r0/n, sqrt(L/n)} + L (k*/n + n/R_{k*}))`, `L = ln(1/delta)`,
/// or reports which precondition fails.
pub fn bllt_bound(spectrum: &Spectrum, n: usize, delta: f64, constants: BlltConstants) -> Result<BlltBound> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let nf = n as f64;
    let log_term = (1.0 / delta).ln();
    if log_term >= nf / constants.c_const {
        return Ok(BlltBound::Inapplicable(format!(
            "log(1/delta) = {log_term} is not below n/c = {}",
            nf / constants.c_const
        )));
    }
    let k_star = match critical_k(spectrum, n, constants.b_const) {
        Ok(k) => k,
        Err(e) => return Ok(BlltBound::Inapplicable(e.to_string())),
    };
    if k_star as f64 >= nf / constants.c1_const {
        return Ok(BlltBound::Inapplicable(format!(
            "k* = {k_star} is not below n/c1 = {}",
            nf / constants.c1_const
        )));
    }
    let runs = Runs::new(spectrum);
    let r0 = runs.ranks(0).0;
    let big_r = runs.ranks(k_star).1;
    let lead = (r0 / nf).sqrt().max(r0 / nf).max((log_term / nf).sqrt());
    Ok(BlltBound::Value(
        constants.c_const * (lead + log_term * (k_star as f64 / nf + nf / big_r)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::make_spectrum;

    #[test]
    fn excess_gaussian_plug_in() {
        let s = make_spectrum(81).unwrap();
        let mut star = vec![0.0; 81];
        star[0] = 1.0;
        assert_eq!(excess_risk_gaussian(&star, &star, &s).unwrap(), 0.0);
        let mut theta = star.clone();
        theta[0] += 1.0;
        assert!((excess_risk_gaussian(&theta, &star, &s).unwrap() - 1.0 / 81.0).abs() < 1e-17);
        assert!(excess_risk_gaussian(&theta[..3], &star, &s).is_err());
    }

    #[test]
    fn inverse_mean_series() {
        // sum_k ln2^k / (k k!), frozen from a 60-term series evaluation.
        let v = inverse_mean_zero_truncated(std::f64::consts::LN_2);
        let mut oracle = 0.0;
        let mut fact = 1.0;
        for k in 1..=60 {
            fact *= k as f64;
            oracle += std::f64::consts::LN_2.powi(k) / (k as f64 * fact);
        }
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.834).abs() < 1e-3);
        assert!((inverse_mean_zero_truncated(1e-9) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bayes_risk_default_and_monotone() {
        let p = FamilyParams::standard(16).unwrap();
        assert!((bayes_risk_pn(&p) - 0.01030).abs() < 1e-5);
        let grid = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 60.0];
        let vals: Vec<f64> = grid.iter().map(|&l| inverse_mean_zero_truncated(l)).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    }

    #[test]
    fn two_level_spectrum_ranks() {
        let s = make_spectrum(81).unwrap();
        assert_eq!(effective_rank_r(&s, 1).unwrap(), 80.0);
        assert_eq!(effective_rank_big_r(&s, 1).unwrap(), 80.0);
        let r0 = effective_rank_r(&s, 0).unwrap();
        assert!((r0 - (1.0 + 6480.0 / 6561.0)).abs() < 1e-14);
        assert!(effective_rank_r(&s, 81).is_err());
    }

    #[test]
    fn flat_spectrum_ranks() {
        let s = Spectrum::flat(10, 1.0).unwrap();
        assert_eq!(effective_rank_r(&s, 0).unwrap(), 10.0);
        assert_eq!(effective_rank_big_r(&s, 0).unwrap(), 10.0);
    }

    #[test]
    fn ranks_match_direct_sums_on_generic_spectrum() {
        let ev: Vec<f64> = (1..=40).map(|i| 1.0 / (i as f64).powf(1.3)).collect();
        let s = Spectrum::new(ev.clone()).unwrap();
        for k in 0..40 {
            let t1: f64 = ev[k..].iter().sum();
            let t2: f64 = ev[k..].iter().map(|l| l * l).sum();
            assert!((effective_rank_r(&s, k).unwrap() - t1 / ev[k]).abs() < 1e-12);
            assert!((effective_rank_big_r(&s, k).unwrap() - t1 * t1 / t2).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_k_cases() {
        assert_eq!(critical_k(&make_spectrum(256).unwrap(), 16, 2.0).unwrap(), 1);
        assert_eq!(critical_k(&Spectrum::flat(100, 1.0).unwrap(), 10, 2.0).unwrap(), 0);
        let err = critical_k(&Spectrum::new(vec![1.0]).unwrap(), 10, 2.0).unwrap_err();
        assert!(err.to_string().contains("rank condition unsatisfied"));
    }

    #[test]
    fn bllt_reference_value() {
        let d = 10_000usize;
        let s = make_spectrum(d).unwrap();
        let got = bllt_bound(&s, 100, 0.1, BlltConstants::default()).unwrap().value().unwrap();
        let r0 = 1.0 + 81.0 * (d as f64 - 1.0) / (d as f64 * d as f64);
        let l = 10f64.ln();
        let lead = (r0 / 100.0).sqrt().max(r0 / 100.0).max((l / 100.0).sqrt());
        assert_eq!(lead, (l / 100.0).sqrt());
        let expected = lead + l * (1.0 / 100.0 + 100.0 / (d as f64 - 1.0));
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn bllt_limits_and_preconditions() {
        let s = make_spectrum(10_000).unwrap();
        let near_one = bllt_bound(&s, 100, 1.0 - 1e-12, BlltConstants::default())
            .unwrap()
            .value()
            .unwrap();
        let r0 = effective_rank_r(&s, 0).unwrap();
        assert!((near_one - (r0 / 100.0).sqrt().max(r0 / 100.0)).abs() < 1e-5);
        // n = 2 is below c log(1/delta) at delta = 0.01
        assert!(matches!(
            bllt_bound(&s, 2, 0.01, BlltConstants::default()).unwrap(),
            BlltBound::Inapplicable(_)
        ));
        assert!(bllt_bound(&s, 100, 1.0, BlltConstants::default()).is_err());
    }

    #[test]
    fn r0_stays_bounded() {
        for d in [81usize, 256, 1000, 4096, 10_000, 20_736, 1_000_000] {
            let r0 = effective_rank_r(&make_spectrum(d).unwrap(), 0).unwrap();
            assert!(r0 <= 2.0, "d={d}: r0={r0}");
        }
    }
}

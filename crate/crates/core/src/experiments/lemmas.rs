//! Poissonization, the singleton floor on `Q_n` excess, and the
//! distributional equivalence between compressed `Q_n` samples and `P_n`
//! samples.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::harness::run_trials;
use super::stats::{self, bonferroni, chi_square_gof, two_sample_ks, ChiSquareResult, KsResult};
use crate::certify::{certify_unit_scale, CertReport};
use crate::distributions::{
    binomial_pmf, draw_qn_support_shared, poisson_pmf, poisson_sf, poissonized_balls_in_bins,
    sample_binomial, sample_pn, sample_qn_poissonized, zero_truncated_poisson_pmf, FamilyParams,
    LabelMode, RngStream, SupportSet,
};
use crate::error::{Error, Result};
use crate::interpolant::{compress, dot, fit_compressed, Dataset, LinearModel, SolverConfig};
use crate::risk::{excess_risk_discrete, excess_risk_gaussian};

/// Largest pairwise bin correlation accepted as independence.
pub const CORRELATION_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonizationReport {
    pub mean_total: f64,
    pub bins: usize,
    pub trials: usize,
    pub bin_means: Vec<f64>,
    pub bin_p_values: Vec<f64>,
    /// Bonferroni level applied to each bin.
    pub alpha_per_bin: f64,
    pub max_abs_correlation: f64,
    pub correlation_limit: f64,
    pub passed: bool,
    /// Per-trial bin counts, in trial order.
    pub trial_counts: Vec<Vec<u64>>,
}

/// Throws `Poi(mean_total)` balls into `bins` bins per trial and tests the
/// per-bin counts against `Poi(mean_total / bins)` and for pairwise
/// independence.
pub fn run_poissonization(
    mean_total: f64,
    bins: usize,
    trials: usize,
    alpha: f64,
    stream: &RngStream,
) -> Result<PoissonizationReport> {
    if bins < 2 || trials < 2 {
        return Err(Error::domain("need at least two bins and two trials"));
    }
    let counts = run_trials(stream, "lemma2", trials, |t| {
        poissonized_balls_in_bins(mean_total, bins, &mut t.rng("balls"))
    })?;
    let lambda = mean_total / bins as f64;
    let columns: Vec<Vec<f64>> = (0..bins)
        .map(|j| counts.iter().map(|c| c[j] as f64).collect())
        .collect();

    let top = (lambda + 10.0 * lambda.sqrt() + 10.0).ceil() as u64;
    let mut probs: Vec<f64> = (0..top).map(|k| poisson_pmf(k, lambda)).collect();
    probs.push(poisson_sf(top, lambda));
    let mut bin_p_values = Vec::with_capacity(bins);
    for j in 0..bins {
        let mut hist = vec![0u64; top as usize + 1];
        for c in &counts {
            hist[c[j].min(top) as usize] += 1;
        }
        bin_p_values.push(chi_square_gof(&hist, &probs)?.p_value);
    }
    let mut max_abs_correlation: f64 = 0.0;
    for i in 0..bins {
        for j in i + 1..bins {
            max_abs_correlation = max_abs_correlation.max(stats::pearson(&columns[i], &columns[j]).abs());
        }
    }
    let alpha_per_bin = bonferroni(alpha, bins);
    Ok(PoissonizationReport {
        mean_total,
        bins,
        trials,
        bin_means: columns.iter().map(|c| stats::mean(c)).collect(),
        passed: bin_p_values.iter().all(|&p| p >= alpha_per_bin)
            && max_abs_correlation <= CORRELATION_LIMIT,
        bin_p_values,
        alpha_per_bin,
        max_abs_correlation,
        correlation_limit: CORRELATION_LIMIT,
        trial_counts: counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Trial {
    /// Poissonized sample size.
    pub t: usize,
    /// Distinct atoms in the sample.
    pub compressed_size: usize,
    /// Atoms seen exactly once.
    pub singleton_count: usize,
    pub excess_qn: f64,
    pub cert: CertReport,
}

/// Per-atom occupancy counts of a sample drawn by atom index.
fn occupancy(picks: &[usize], atoms: usize) -> Vec<u32> {
    let mut counts = vec![0u32; atoms];
    for &i in picks {
        counts[i] += 1;
    }
    counts
}

/// Least-norm fit; the empty sample gives `theta = 0`.
fn fit_or_zero(sample: &Dataset, config: &SolverConfig) -> Result<LinearModel> {
    if sample.is_empty() {
        return Ok(LinearModel::from_theta(vec![0.0; sample.dim()]));
    }
    fit_compressed(&compress(sample)?, config)
}

/// One trial on a fixed support: `t ~ Poi(c n)`, `S ~ Q_n^t`, fit, and
/// score on the whole support.
pub fn run_lemma3_on_support<R: Rng + ?Sized>(
    support: &SupportSet,
    rng: &mut R,
    config: &SolverConfig,
) -> Result<Lemma3Trial> {
    let (picks, sample) = sample_qn_poissonized(support, rng)?;
    let counts = occupancy(&picks, support.len());
    let model = fit_or_zero(&sample, config)?;
    Ok(Lemma3Trial {
        t: picks.len(),
        compressed_size: counts.iter().filter(|&&c| c > 0).count(),
        singleton_count: counts.iter().filter(|&&c| c == 1).count(),
        excess_qn: excess_risk_discrete(&model.theta, support.params().theta_star(), support)?,
        cert: certify_unit_scale(support),
    })
}

/// Draws a fresh support and runs one trial on it.
pub fn run_lemma3_trial<R: Rng + ?Sized>(params: &Arc<FamilyParams>, rng: &mut R) -> Result<Lemma3Trial> {
    let support = draw_qn_support_shared(params.clone(), rng)?;
    run_lemma3_on_support(&support, rng, &SolverConfig::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Report {
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub mean_excess: f64,
    pub se_excess: f64,
    pub singleton_fraction_mean: f64,
    /// `(c/b) exp(-c/b)`.
    pub singleton_fraction_target: f64,
    pub floor: f64,
    pub floor_ok: bool,
    pub cert_pass_rate: f64,
    pub records: Vec<Lemma3Trial>,
}

pub fn run_lemma3(params: &FamilyParams, trials: usize, floor: f64, stream: &RngStream) -> Result<Lemma3Report> {
    if trials == 0 {
        return Err(Error::domain("trials must be positive"));
    }
    let shared = Arc::new(params.clone());
    let experiment = format!("lemma3/n{}", params.n());
    let records = run_trials(stream, &experiment, trials, |t| {
        run_lemma3_trial(&shared, &mut t.rng("trial"))
    })?;
    let excess: Vec<f64> = records.iter().map(|r| r.excess_qn).collect();
    let m = params.support_size() as f64;
    let fractions: Vec<f64> = records.iter().map(|r| r.singleton_count as f64 / m).collect();
    let mean_excess = stats::mean(&excess);
    let rate = params.rate();
    Ok(Lemma3Report {
        n: params.n(),
        d: params.d(),
        trials,
        mean_excess,
        se_excess: stats::std_error(&excess),
        singleton_fraction_mean: stats::mean(&fractions),
        singleton_fraction_target: rate * (-rate).exp(),
        floor,
        floor_ok: mean_excess >= floor,
        cert_pass_rate: records.iter().filter(|r| r.cert.overall).count() as f64 / trials as f64,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRecord {
    pub compressed_size: usize,
    pub singleton_count: usize,
    /// `multiplicity_hist[k]`: kept atoms seen exactly `k` times.
    pub multiplicity_hist: Vec<u32>,
    pub norm_a: f64,
    pub dot_a: f64,
    pub excess_a: f64,
    pub r: usize,
    pub norm_b: f64,
    pub dot_b: f64,
    pub excess_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n: usize,
    pub trials: usize,
    /// Mean `b n (1 - exp(-c/b))` of the kept-atom count.
    pub binomial_mean: f64,
    pub size_test: ChiSquareResult,
    pub multiplicity_test: ChiSquareResult,
    pub ks_norm: KsResult,
    pub ks_dot: KsResult,
    pub ks_excess: KsResult,
    pub singleton_fraction_mean: f64,
    pub singleton_fraction_target: f64,
    pub alpha: f64,
    pub alpha_per_test: f64,
    pub passed: bool,
    pub records: Vec<EquivalenceRecord>,
}

impl EquivalenceReport {
    pub fn p_values(&self) -> [(&'static str, f64); 5] {
        [
            ("compressed_size", self.size_test.p_value),
            ("multiplicity", self.multiplicity_test.p_value),
            ("ks_norm", self.ks_norm.p_value),
            ("ks_dot", self.ks_dot.p_value),
            ("ks_excess", self.ks_excess.p_value),
        ]
    }
}

fn equivalence_trial(params: &Arc<FamilyParams>, seed: &super::TrialSeed) -> Result<EquivalenceRecord> {
    let config = SolverConfig::default();
    let theta_star = params.theta_star();

    let mut rng = seed.rng("pipeline_a");
    let support = draw_qn_support_shared(params.clone(), &mut rng)?;
    let (picks, sample) = sample_qn_poissonized(&support, &mut rng)?;
    let counts = occupancy(&picks, support.len());
    let mut multiplicity_hist = vec![0u32; counts.iter().copied().max().unwrap_or(0) as usize + 1];
    for &c in &counts {
        if c > 0 {
            multiplicity_hist[c as usize] += 1;
        }
    }
    let a = fit_or_zero(&sample, &config)?;

    let mut rng = seed.rng("pipeline_b");
    let r = sample_binomial(params.support_size() as u64, params.seen_probability(), &mut rng)? as usize;
    let t = sample_pn(params, &mut rng, r, LabelMode::ScaledVariance)?;
    let b = fit_or_zero(&t, &config)?;

    Ok(EquivalenceRecord {
        compressed_size: counts.iter().filter(|&&c| c > 0).count(),
        singleton_count: counts.iter().filter(|&&c| c == 1).count(),
        multiplicity_hist,
        norm_a: a.norm(),
        dot_a: dot(&a.theta, theta_star),
        excess_a: excess_risk_gaussian(&a.theta, theta_star, params.spectrum())?,
        r,
        norm_b: b.norm(),
        dot_b: dot(&b.theta, theta_star),
        excess_b: excess_risk_gaussian(&b.theta, theta_star, params.spectrum())?,
    })
}

/// Pipeline A compresses a Poissonized `Q_n` sample; pipeline B draws
/// `r ~ Bin(b n, 1 - exp(-c/b))` rows from `P_n`. Both laws should agree.
pub fn run_lemma4_equivalence(
    params: &FamilyParams,
    trials: usize,
    alpha: f64,
    stream: &RngStream,
) -> Result<EquivalenceReport> {
    if trials < 1000 {
        return Err(Error::domain(format!("need at least 1000 trials, got {trials}")));
    }
    let shared = Arc::new(params.clone());
    let experiment = format!("lemma4/n{}", params.n());
    let records = run_trials(stream, &experiment, trials, |t| equivalence_trial(&shared, t))?;

    let m = params.support_size();
    let p = params.seen_probability();
    let mut size_hist = vec![0u64; m + 1];
    let mut mult_hist: Vec<u64> = Vec::new();
    for rec in &records {
        size_hist[rec.compressed_size] += 1;
        if mult_hist.len() < rec.multiplicity_hist.len() {
            mult_hist.resize(rec.multiplicity_hist.len(), 0);
        }
        for (k, &c) in rec.multiplicity_hist.iter().enumerate() {
            mult_hist[k] += c as u64;
        }
    }
    let size_probs: Vec<f64> = (0..=m as u64).map(|k| binomial_pmf(k, m as u64, p)).collect();
    let size_test = chi_square_gof(&size_hist, &size_probs)?;

    // Categories 1, 2, ..., K-1 and a pooled tail at K.
    let rate = params.rate();
    let top = mult_hist.len().max(2);
    let mut mult_obs: Vec<u64> = (1..top).map(|k| mult_hist.get(k).copied().unwrap_or(0)).collect();
    mult_obs.push(0);
    let mut mult_probs: Vec<f64> = (1..top as u64).map(|k| zero_truncated_poisson_pmf(k, rate)).collect();
    mult_probs.push((1.0 - mult_probs.iter().sum::<f64>()).max(0.0));
    let multiplicity_test = chi_square_gof(&mult_obs, &mult_probs)?;

    let col = |f: fn(&EquivalenceRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
    let ks_norm = two_sample_ks(&col(|r| r.norm_a), &col(|r| r.norm_b))?;
    let ks_dot = two_sample_ks(&col(|r| r.dot_a), &col(|r| r.dot_b))?;
    let ks_excess = two_sample_ks(&col(|r| r.excess_a), &col(|r| r.excess_b))?;
    let fractions = col(|r| r.singleton_count as f64);

    let alpha_per_test = bonferroni(alpha, 5);
    let mut report = EquivalenceReport {
        n: params.n(),
        trials,
        binomial_mean: m as f64 * p,
        size_test,
        multiplicity_test,
        ks_norm,
        ks_dot,
        ks_excess,
        singleton_fraction_mean: stats::mean(&fractions) / m as f64,
        singleton_fraction_target: rate * (-rate).exp(),
        alpha,
        alpha_per_test,
        passed: false,
        records,
    };
    report.passed = report.p_values().iter().all(|(_, p)| *p >= alpha_per_test);
    Ok(report)
}

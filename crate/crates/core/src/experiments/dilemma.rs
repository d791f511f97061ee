use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::bounds::BoundFunction;
use super::harness::run_trials;
use super::stats;
use super::thresholds::ThresholdConfig;
use crate::distributions::{
    draw_qn_support_shared, sample_pn, sample_qn_poissonized, FamilyParams, LabelMode, RngStream,
};
use crate::error::{Error, Result};
use crate::interpolant::{compress, fit_compressed, LinearModel, SolverConfig};
use crate::risk::{excess_risk_discrete, excess_risk_gaussian};

/// Sample-size argument of the bound on the `Q_n` pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityArgument {
    /// Number of distinct points `|C(S)|`.
    #[default]
    Compressed,
    /// Raw Poissonized sample size `t`.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilemmaRecord {
    pub excess_pn: f64,
    pub eps_pn: f64,
    pub t: usize,
    pub compressed_size: usize,
    pub excess_qn: f64,
    pub eps_qn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilemmaPoint {
    pub n: usize,
    /// Fraction of `P_n` trials with excess at most `c0 / sqrt(n)`.
    pub prob_small_excess: f64,
    /// Fraction of `P_n` trials with `eps > c2`.
    pub prob_bound_large: f64,
    /// Fraction of `Q_n` trials with excess above `eps`.
    pub validity_failure_rate: f64,
    /// Median of `eps / excess` over `P_n` trials.
    pub looseness_ratio_median: f64,
    /// `validity_failure_rate > delta` or looseness at least
    /// `looseness_min`.
    pub dichotomy_holds: bool,
    pub records: Vec<DilemmaRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilemmaReport {
    pub bound_id: String,
    pub delta: f64,
    pub trials: usize,
    pub validity_argument: ValidityArgument,
    pub points: Vec<DilemmaPoint>,
}

fn fit(sample: &crate::interpolant::Dataset, config: &SolverConfig) -> Result<LinearModel> {
    if sample.is_empty() {
        return Ok(LinearModel::from_theta(vec![0.0; sample.dim()]));
    }
    fit_compressed(&compress(sample)?, config)
}

/// Audits a bound on both sides of the dilemma: is it small where
/// interpolation is benign (`P_n`), and is it valid where it is not (`Q_n`)?
pub fn run_dilemma(
    bound: &dyn BoundFunction,
    grid: &[FamilyParams],
    delta: f64,
    thresholds: &ThresholdConfig,
    trials: usize,
    argument: ValidityArgument,
    stream: &RngStream,
) -> Result<DilemmaReport> {
    if trials == 0 || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("need trials > 0 and delta in (0, 1)"));
    }
    let config = SolverConfig::default();
    let mut points = Vec::with_capacity(grid.len());
    for params in grid {
        let n = params.n();
        let shared = Arc::new(params.clone());
        let experiment = format!("dilemma/{}/n{n}", bound.id());
        let records = run_trials(stream, &experiment, trials, |t| {
            let sample = sample_pn(params, &mut t.rng("pn"), n, LabelMode::ScaledVariance)?;
            let h = fit(&sample, &config)?;
            let excess_pn = excess_risk_gaussian(&h.theta, params.theta_star(), params.spectrum())?;
            let eps_pn = bound.eval(&h, n, delta);

            let mut rng = t.rng("qn");
            let support = draw_qn_support_shared(shared.clone(), &mut rng)?;
            let (picks, sample) = sample_qn_poissonized(&support, &mut rng)?;
            let compressed = if sample.is_empty() { 0 } else { compress(&sample)?.len() };
            let g = fit(&sample, &config)?;
            let arg = match argument {
                ValidityArgument::Compressed => compressed,
                ValidityArgument::Raw => picks.len(),
            };
            Ok(DilemmaRecord {
                excess_pn,
                eps_pn,
                t: picks.len(),
                compressed_size: compressed,
                excess_qn: excess_risk_discrete(&g.theta, params.theta_star(), &support)?,
                eps_qn: bound.eval(&g, arg.max(1), delta),
            })
        })?;
        let frac = |pred: &dyn Fn(&DilemmaRecord) -> bool| {
            records.iter().filter(|r| pred(r)).count() as f64 / trials as f64
        };
        let small = thresholds.c0 / (n as f64).sqrt();
        let prob_small_excess = frac(&|r| r.excess_pn <= small);
        let prob_bound_large = frac(&|r| r.eps_pn > thresholds.c2);
        // A NaN bound value certifies nothing, so it counts as a failure.
        let validity_failure_rate = frac(&|r| !(r.excess_qn <= r.eps_qn));
        let ratios: Vec<f64> = records
            .iter()
            .map(|r| if r.excess_pn > 0.0 { r.eps_pn / r.excess_pn } else { f64::INFINITY })
            .collect();
        let looseness_ratio_median = stats::median(&ratios);
        points.push(DilemmaPoint {
            n,
            prob_small_excess,
            prob_bound_large,
            validity_failure_rate,
            looseness_ratio_median,
            dichotomy_holds: validity_failure_rate > delta
                || looseness_ratio_median >= thresholds.looseness_min,
            records,
        });
    }
    Ok(DilemmaReport {
        bound_id: bound.id().to_string(),
        delta,
        trials,
        validity_argument: argument,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::bounds::{BoundRegistry, NormSqrt};

    fn run(bound_id: &str, ns: &[usize], trials: usize) -> DilemmaReport {
        let grid: Vec<FamilyParams> = ns.iter().map(|&n| FamilyParams::standard(n).unwrap()).collect();
        let bound = BoundRegistry::builtin().get(bound_id).unwrap();
        run_dilemma(
            bound.as_ref(),
            &grid,
            0.05,
            &ThresholdConfig::default(),
            trials,
            ValidityArgument::Compressed,
            &RngStream::new(5),
        )
        .unwrap()
    }

    #[test]
    fn zero_bound_is_almost_never_valid() {
        let r = run("zero", &[9], 100);
        assert!(r.points[0].validity_failure_rate > 0.95);
        assert_eq!(r.points[0].prob_bound_large, 0.0);
        assert_eq!(r.points[0].looseness_ratio_median, 0.0);
    }

    #[test]
    fn vacuous_bound_is_always_valid_and_large() {
        let p = &run("vacuous", &[9], 50).points[0];
        assert_eq!(p.validity_failure_rate, 0.0);
        assert_eq!(p.prob_bound_large, 1.0);
        assert!(p.dichotomy_holds);
    }

    #[test]
    fn probabilities_are_well_formed() {
        let r = run("norm_sqrt", &[9, 16], 40);
        for p in &r.points {
            for v in [p.prob_small_excess, p.prob_bound_large, p.validity_failure_rate] {
                assert!((0.0..=1.0).contains(&v));
            }
            assert!(!p.looseness_ratio_median.is_nan());
        }
    }

    #[test]
    fn raw_argument_changes_only_qn_bound() {
        let grid = vec![FamilyParams::standard(9).unwrap()];
        let go = |arg| {
            run_dilemma(&NormSqrt, &grid, 0.05, &ThresholdConfig::default(), 20, arg, &RngStream::new(3)).unwrap()
        };
        let a = go(ValidityArgument::Compressed);
        let b = go(ValidityArgument::Raw);
        for (x, y) in a.points[0].records.iter().zip(&b.points[0].records) {
            assert_eq!(x.excess_qn, y.excess_qn);
            assert_eq!(x.eps_pn, y.eps_pn);
            assert!(y.eps_qn <= x.eps_qn);
        }
    }
}

//! Empirical unit-scale certification of discrete distributions.
//!
//! A vector `(X_1, ..., X_d, Y)` is sub-Gaussian with parameter 1 if
//! `X_1`, `Y` and the block `(X_2, ..., X_d)` are each sub-Gaussian with
//! parameter 1/3, since parameters add over sums of (possibly dependent)
//! sub-Gaussian vectors. Each piece is checked with a sufficient
//! condition:
//!
//! * scalars: `E[exp(a X^2)] <= 2` with `a = 18/e`;
//! * the tail block: every atom's tail has norm at most 1/6.
//!
//! A failed check means "not certified", not "not sub-Gaussian".

use serde::{Deserialize, Serialize};

use crate::distributions::SupportSet;
use crate::error::{Error, Result};

/// `a = 18 / e`.
pub const EXP_SQ_COEFF: f64 = 18.0 / std::f64::consts::E;

/// Pass threshold of the moment statistic.
pub const MOMENT_LIMIT: f64 = 2.0;

/// Relative rounding allowance when comparing against [`MOMENT_LIMIT`].
const MOMENT_SLACK: f64 = 1e-12;

/// Largest tail norm compatible with parameter 1/3 for the tail block.
pub const TAIL_NORM_LIMIT: f64 = 1.0 / 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub x1_ok: bool,
    pub y_ok: bool,
    pub tail_ok: bool,
    pub overall: bool,
    pub z_statistic_x1: f64,
    pub z_statistic_y: f64,
    pub max_tail_norm: f64,
    pub tail_threshold: f64,
}

pub fn moment_passes(statistic: f64) -> bool {
    statistic <= MOMENT_LIMIT * (1.0 + MOMENT_SLACK)
}

/// `sum_i w_i exp(a x_i^2)`; `+inf` on overflow.
pub fn moment_z_statistic(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            got: weights.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::domain("no values"));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::domain("weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("weights sum to {total}, not 1")));
    }
    Ok(values
        .iter()
        .zip(weights)
        .map(|(x, w)| if *w == 0.0 { 0.0 } else { w * (EXP_SQ_COEFF * x * x).exp() })
        .sum())
}

/// [`moment_z_statistic`] under the uniform distribution on `values`.
pub fn uniform_moment_z_statistic(values: &[f64]) -> Result<f64> {
    let w = vec![1.0 / values.len().max(1) as f64; values.len()];
    moment_z_statistic(values, &w)
}

/// `E[exp(a X^2)] = 1 / sqrt(1 - 2 a sigma^2)` for `X ~ N(0, sigma^2)`;
/// `None` when the expectation diverges.
pub fn gaussian_exp_z_mean(sigma: f64) -> Option<f64> {
    let q = 1.0 - 2.0 * EXP_SQ_COEFF * sigma * sigma;
    (q > 0.0).then(|| 1.0 / q.sqrt())
}

/// Upper bound `1 / (m sqrt(1 - 4 a sigma^2))` on the variance of the
/// empirical statistic over `m` Gaussian draws; `None` when it diverges.
pub fn gaussian_exp_z_var_bound(sigma: f64, m: usize) -> Option<f64> {
    let q = 1.0 - 4.0 * EXP_SQ_COEFF * sigma * sigma;
    (q > 0.0 && m > 0).then(|| 1.0 / (m as f64 * q.sqrt()))
}

/// Exact `E[exp(a Y^2)]` for `Y` under `Q_n`: uniform atom `u`, then
/// `Y ~ N(theta* . u, sigma_y2)`. `+inf` in the divergent region.
pub fn y_moment_statistic(support: &SupportSet) -> f64 {
    let sigma2 = support.params().sigma_y2();
    let q = 1.0 - 2.0 * EXP_SQ_COEFF * sigma2;
    if q <= 0.0 {
        return f64::INFINITY;
    }
    let means = support.label_means();
    let total: f64 = means
        .iter()
        .map(|mu| (EXP_SQ_COEFF * mu * mu / q).exp())
        .sum();
    total / (means.len() as f64 * q.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailNormTest {
    pub max_norm: f64,
    /// `log(e m^2 / 3) / sqrt(d)`, the high-probability envelope for
    /// Gaussian tails.
    pub threshold: f64,
    pub ok: bool,
}

/// Largest Euclidean norm of coordinates `2..d` over the atoms.
pub fn tail_norm_test(support: &SupportSet) -> TailNormTest {
    let max_norm = support
        .atoms()
        .map(|u| u[1.min(u.len())..].iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let m = support.len() as f64;
    let threshold = (std::f64::consts::E * m * m / 3.0).ln() / (support.dim() as f64).sqrt();
    TailNormTest {
        max_norm,
        threshold,
        ok: max_norm <= TAIL_NORM_LIMIT,
    }
}

/// Checks `X_1`, `Y` and the tail block separately and reports their
/// conjunction.
pub fn certify_unit_scale(support: &SupportSet) -> CertReport {
    let x1: Vec<f64> = support.atoms().map(|u| u[0]).collect();
    let z_x1 = uniform_moment_z_statistic(&x1).unwrap_or(f64::INFINITY);
    let z_y = y_moment_statistic(support);
    let tail = tail_norm_test(support);
    let x1_ok = moment_passes(z_x1);
    let y_ok = moment_passes(z_y);
    CertReport {
        x1_ok,
        y_ok,
        tail_ok: tail.ok,
        overall: x1_ok && y_ok && tail.ok,
        z_statistic_x1: z_x1,
        z_statistic_y: z_y,
        max_tail_norm: tail.max_norm,
        tail_threshold: tail.threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{FamilyOptions, FamilyParams};
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn zeros_give_one() {
        assert_eq!(uniform_moment_z_statistic(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn boundary_value_passes() {
        let x = (std::f64::consts::LN_2 / EXP_SQ_COEFF).sqrt();
        assert!((x - 0.3236).abs() < 1e-4);
        let z = uniform_moment_z_statistic(&[x]).unwrap();
        assert!((z - 2.0).abs() < 1e-14);
        assert!(moment_passes(z));
        assert!(!moment_passes(2.0 + 1e-9));
    }

    #[test]
    fn unit_value_fails() {
        let z = uniform_moment_z_statistic(&[1.0]).unwrap();
        assert!((z - EXP_SQ_COEFF.exp()).abs() < 1e-9);
        assert!((z - 751.32).abs() < 0.01);
        assert!(!moment_passes(z));
    }

    #[test]
    fn overflow_is_infinite() {
        let z = uniform_moment_z_statistic(&[100.0]).unwrap();
        assert!(z.is_infinite());
        assert!(!moment_passes(z));
    }

    #[test]
    fn bad_weights() {
        assert!(moment_z_statistic(&[0.0, 1.0], &[0.5, 0.6]).is_err());
        assert!(moment_z_statistic(&[0.0, 1.0], &[1.5, -0.5]).is_err());
        assert!(moment_z_statistic(&[0.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn gaussian_closed_forms() {
        let s = 1.0 / 9.0;
        let q = 2.0 * EXP_SQ_COEFF * s * s;
        assert!((q - 0.163501).abs() < 1e-6);
        assert!((gaussian_exp_z_mean(s).unwrap() - 1.09337).abs() < 1e-5);
        assert!((gaussian_exp_z_mean(1e-8).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(gaussian_exp_z_mean(1.0), None);
        let v = gaussian_exp_z_var_bound(s, 100).unwrap();
        assert!((v - 1.0 / (100.0 * (1.0 - 2.0 * q).sqrt())).abs() < 1e-15);
        assert_eq!(gaussian_exp_z_var_bound(0.3, 10), None);
    }

    fn custom_support(d: usize, sigma_y2: f64, atoms: Vec<f64>) -> SupportSet {
        let params = FamilyParams::new(
            4,
            FamilyOptions {
                sigma_y2,
                d_override: Some(d),
                ..Default::default()
            },
        )
        .unwrap();
        SupportSet::from_atoms(Arc::new(params), atoms).unwrap()
    }

    #[test]
    fn y_statistic_with_centered_means() {
        // theta* = e1 and first coordinates zero: every mean is 0.
        let mut atoms = vec![0.0; 3 * 9];
        atoms[1] = 0.1;
        atoms[9 + 2] = 0.1;
        atoms[18 + 3] = 0.1;
        let s = custom_support(9, 1.0 / 81.0, atoms.clone());
        let expected = gaussian_exp_z_mean(1.0 / 9.0).unwrap();
        assert!((y_moment_statistic(&s) - expected).abs() < 1e-14);
        assert!((expected - 1.0934).abs() < 1e-4);
        let noiseless = custom_support(9, 0.0, atoms);
        assert_eq!(y_moment_statistic(&noiseless), 1.0);
        let divergent = custom_support(9, 1.0, vec![0.0; 9]);
        assert!(y_moment_statistic(&divergent).is_infinite());
    }

    #[test]
    fn tail_norm_cases() {
        let mut atoms = vec![0.0; 2 * 9];
        atoms[0] = 0.3;
        atoms[9] = -0.2;
        let s = custom_support(9, 1.0 / 81.0, atoms.clone());
        let t = tail_norm_test(&s);
        assert_eq!(t.max_norm, 0.0);
        assert!(t.ok);
        atoms[9 + 4] = 0.2;
        let t = tail_norm_test(&custom_support(9, 1.0 / 81.0, atoms));
        assert!((t.max_norm - 0.2).abs() < 1e-15);
        assert!(!t.ok);
        let m: f64 = 2.0;
        assert!((t.threshold - (std::f64::consts::E * m * m / 3.0).ln() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_tail_is_decided_by_the_coordinates() {
        let atoms = vec![0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let report = certify_unit_scale(&custom_support(9, 1.0 / 81.0, atoms));
        assert!(report.tail_ok);
        assert_eq!(report.overall, report.x1_ok && report.y_ok);
        assert!(report.overall);
    }

    proptest! {
        #[test]
        fn statistic_is_monotone_under_scaling(
            values in prop::collection::vec(-1.0f64..1.0, 1..20),
            scale in 1.0f64..5.0,
        ) {
            let base = uniform_moment_z_statistic(&values).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            prop_assert!(uniform_moment_z_statistic(&scaled).unwrap() >= base);
        }
    }
}

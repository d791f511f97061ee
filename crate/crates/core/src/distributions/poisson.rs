//! Poisson, zero-truncated Poisson and binomial utilities.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{Error, Result};

/// Rates at or below this use sequential-search inversion.
const INVERSION_LIMIT: f64 = 30.0;

/// Draws from `Poi(lambda)`; `lambda = 0` gives 0.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain(format!("Poisson rate must be >= 0, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    if lambda <= INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        return Ok(k);
    }
    let dist = Poisson::new(lambda).map_err(|e| Error::domain(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

/// Draws from `Poi(lambda)` conditioned on being at least 1.
pub fn sample_zero_truncated_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain(format!(
            "zero-truncated Poisson rate must be > 0, got {lambda}"
        )));
    }
    if lambda <= INVERSION_LIMIT {
        // Inversion on the truncated pmf, P(Z=1) = lambda / (e^lambda - 1).
        let u: f64 = rng.random();
        let mut p = lambda / lambda.exp_m1();
        let mut cdf = p;
        let mut k = 1u64;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        return Ok(k);
    }
    // P(0) < 1e-13 here, so rejection almost never loops.
    loop {
        let k = sample_poisson(lambda, rng)?;
        if k >= 1 {
            return Ok(k);
        }
    }
}

pub fn sample_binomial<R: Rng + ?Sized>(trials: u64, p: f64, rng: &mut R) -> Result<u64> {
    let dist = Binomial::new(trials, p).map_err(|e| Error::domain(e.to_string()))?;
    Ok(dist.sample(rng))
}

pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * lambda.ln() - lambda - ln_factorial(k)).exp()
}

/// `P(X >= k)` for `X ~ Poi(lambda)`, summed directly over the upper tail.
pub fn poisson_sf(k: u64, lambda: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mode = lambda.floor() as u64;
    if k <= mode {
        let lower: f64 = (0..k).map(|j| poisson_pmf(j, lambda)).sum();
        return (1.0 - lower).max(0.0);
    }
    let mut total = 0.0;
    let mut p = poisson_pmf(k, lambda);
    let mut j = k;
    while p > 0.0 && p > total * 1e-18 {
        total += p;
        j += 1;
        p *= lambda / j as f64;
    }
    total
}

/// pmf of the zero-truncated Poisson; 0 at `k = 0`.
pub fn zero_truncated_poisson_pmf(k: u64, lambda: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    poisson_pmf(k, lambda) / -(-lambda).exp_m1()
}

pub fn binomial_pmf(k: u64, trials: u64, p: f64) -> f64 {
    if k > trials {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == trials { 1.0 } else { 0.0 };
    }
    (ln_binomial(trials, k) + k as f64 * p.ln() + (trials - k) as f64 * (-p).ln_1p()).exp()
}

/// Upper bound `exp(-alpha^2 lambda / (2 (1 + alpha)))` on
/// `P(r >= (1 + alpha) lambda)` for `r ~ Poi(lambda)`.
pub fn poisson_tail_bound(lambda: f64, alpha: f64) -> f64 {
    (-alpha * alpha * lambda / (2.0 * (1.0 + alpha))).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    #[test]
    fn truncated_pmf_at_ln2() {
        // P(Z=1) = ln2 * (1/2) / (1/2) = ln 2
        assert!((zero_truncated_poisson_pmf(1, LN_2) - LN_2).abs() < 1e-15);
        let total: f64 = (1..60).map(|k| zero_truncated_poisson_pmf(k, LN_2)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tiny_rate_always_gives_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            assert_eq!(sample_zero_truncated_poisson(1e-6, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn rejects_bad_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_zero_truncated_poisson(0.0, &mut rng).is_err());
        assert!(sample_zero_truncated_poisson(-1.0, &mut rng).is_err());
        assert!(sample_poisson(f64::NAN, &mut rng).is_err());
        assert_eq!(sample_poisson(0.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn large_rate_truncated_is_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mean: f64 = (0..20_000)
            .map(|_| sample_zero_truncated_poisson(50.0, &mut rng).unwrap() as f64)
            .sum::<f64>()
            / 20_000.0;
        assert!((mean - 50.0).abs() < 3.0 * (50.0f64 / 20_000.0).sqrt());
    }

    #[test]
    fn poisson_means_on_both_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for lambda in [0.3, 5.0, 29.5, 30.5, 200.0] {
            let m = 40_000;
            let mean = (0..m)
                .map(|_| sample_poisson(lambda, &mut rng).unwrap() as f64)
                .sum::<f64>()
                / m as f64;
            let se = (lambda / m as f64).sqrt();
            assert!((mean - lambda).abs() < 4.0 * se, "lambda={lambda} mean={mean}");
        }
    }

    #[test]
    fn tail_bound_plug_in() {
        assert!((poisson_tail_bound(1.0, 1.0) - (-0.25f64).exp()).abs() < 1e-15);
        assert!((poisson_tail_bound(1.0, 1e-9) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_bound_dominates_exact_tail() {
        for lambda in [1.0f64, 5.0, 20.0] {
            for alpha in [0.5, 1.0, 2.0] {
                let threshold = ((1.0 + alpha) * lambda).ceil() as u64;
                let exact = poisson_sf(threshold, lambda);
                let bound = poisson_tail_bound(lambda, alpha);
                assert!(bound >= exact, "lambda={lambda} alpha={alpha}: {bound} < {exact}");
            }
        }
    }

    #[test]
    fn survival_function_agrees_with_cdf() {
        for lambda in [0.5, 4.0, 12.0] {
            for k in 0..30u64 {
                let lower: f64 = (0..k).map(|j| poisson_pmf(j, lambda)).sum();
                assert!((poisson_sf(k, lambda) - (1.0 - lower)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        let total: f64 = (0..=128).map(|k| binomial_pmf(k, 128, 0.5)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((binomial_pmf(2, 4, 0.5) - 6.0 / 16.0).abs() < 1e-15);
        assert_eq!(binomial_pmf(5, 4, 0.5), 0.0);
    }
}

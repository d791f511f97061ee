use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ridgeless_core::certify::y_moment_statistic;
use ridgeless_core::distributions::{
    draw_qn_support_shared, sample_dn, sample_pn, sample_qn, sample_zero_truncated_poisson, FamilyParams, LabelMode,
};
use ridgeless_core::experiments::stats::{chi_square_gof, two_sample_ks};
use ridgeless_core::risk::{bayes_risk_pn, excess_risk_discrete, excess_risk_gaussian};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `E[1/Z]` for zero-truncated `Poi(lambda)` by a fixed 60-term series.
fn inverse_mean_oracle(lambda: f64) -> f64 {
    let mut term = (-lambda).exp();
    let mut total = 0.0;
    for k in 1..=60 {
        term *= lambda / k as f64;
        total += term / k as f64;
    }
    total / (1.0 - (-lambda).exp())
}

#[test]
fn dn_coordinates_have_the_spectrum_as_variance() {
    let params = FamilyParams::standard(9).unwrap();
    let data = sample_dn(&params, &mut rng(1), 40_000);
    let d = params.d();
    let mut second = vec![0.0; d];
    let mut resid = 0.0;
    for (x, y) in data.rows() {
        for (s, v) in second.iter_mut().zip(x) {
            *s += v * v;
        }
        resid += (y - x[0]).powi(2);
    }
    let rows = data.n_rows() as f64;
    let eig = params.spectrum().eigenvalues();
    for (s, l) in second.iter().zip(eig) {
        // Sample variance of a Gaussian square has sd l*sqrt(2/rows) ~ 0.7% of l.
        assert!((s / rows - l).abs() < 0.04 * l, "{} vs {l}", s / rows);
    }
    assert!((resid / rows * 81.0 - 1.0).abs() < 0.04);
}

#[test]
fn zero_truncated_poisson_matches_its_pmf() {
    let lambda = std::f64::consts::LN_2;
    let mut r = rng(2);
    let mut counts = vec![0u64; 8];
    for _ in 0..100_000 {
        let z = sample_zero_truncated_poisson(lambda, &mut r).unwrap() as usize;
        assert!(z >= 1);
        counts[(z - 1).min(7)] += 1;
    }
    let norm = 1.0 - (-lambda).exp();
    let mut probs: Vec<f64> = (1..8)
        .scan((-lambda).exp(), |p, k| {
            *p *= lambda / k as f64;
            Some(*p / norm)
        })
        .collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let test = chi_square_gof(&counts, &probs).unwrap();
    assert!(test.p_value > 1e-3, "{test:?}");
}

#[test]
fn pn_label_noise_matches_the_truncated_series() {
    let params = FamilyParams::standard(9).unwrap();
    let expected = params.sigma_y2() * inverse_mean_oracle(params.rate());
    assert!((expected - 0.010_30).abs() < 5e-5);
    assert!((bayes_risk_pn(&params) - expected).abs() < 1e-12);
    for mode in [LabelMode::ScaledVariance, LabelMode::LiteralAverage] {
        let data = sample_pn(&params, &mut rng(3), 60_000, mode).unwrap();
        let mse = data.rows().map(|(x, y)| (y - x[0]).powi(2)).sum::<f64>() / data.n_rows() as f64;
        assert!((mse / expected - 1.0).abs() < 0.03, "{mode:?}: {mse} vs {expected}");
    }
}

#[test]
fn both_label_modes_share_a_law() {
    let params = FamilyParams::standard(4).unwrap();
    let resid = |mode, seed| {
        let data = sample_pn(&params, &mut rng(seed), 20_000, mode).unwrap();
        data.rows().map(|(x, y)| y - x[0]).collect::<Vec<f64>>()
    };
    let ks = two_sample_ks(&resid(LabelMode::ScaledVariance, 4), &resid(LabelMode::LiteralAverage, 5)).unwrap();
    assert!(ks.p_value > 1e-3, "{ks:?}");
}

#[test]
fn qn_draws_only_support_atoms_uniformly() {
    let params = Arc::new(FamilyParams::standard(4).unwrap());
    let support = draw_qn_support_shared(params.clone(), &mut rng(6)).unwrap();
    assert_eq!(support.len(), 8);
    let data = sample_qn(&support, &mut rng(7), 40_000);
    let mut counts = vec![0u64; support.len()];
    for (x, _) in data.rows() {
        let i = support.atoms().position(|u| u == x).expect("row is an atom");
        counts[i] += 1;
    }
    let probs = vec![1.0 / support.len() as f64; support.len()];
    assert!(chi_square_gof(&counts, &probs).unwrap().p_value > 1e-3);
}

#[test]
fn gaussian_excess_risk_matches_monte_carlo() {
    let params = FamilyParams::standard(9).unwrap();
    let d = params.d();
    let mut theta = vec![0.0; d];
    theta[0] = 0.7;
    theta[3] = 2.0;
    theta[d - 1] = -1.5;
    let exact = excess_risk_gaussian(&theta, params.theta_star(), params.spectrum()).unwrap();
    let data = sample_dn(&params, &mut rng(8), 100_000);
    let mc = data
        .rows()
        .map(|(x, _)| {
            let e: f64 = x.iter().zip(&theta).zip(params.theta_star()).map(|((v, t), s)| v * (t - s)).sum();
            e * e
        })
        .sum::<f64>()
        / data.n_rows() as f64;
    assert!((mc / exact - 1.0).abs() < 0.02, "{mc} vs {exact}");
}

#[test]
fn discrete_excess_risk_matches_sampled_rows() {
    let params = Arc::new(FamilyParams::standard(9).unwrap());
    let support = draw_qn_support_shared(params.clone(), &mut rng(9)).unwrap();
    let theta: Vec<f64> = (0..params.d()).map(|i| (i as f64 * 0.37).sin()).collect();
    let exact = excess_risk_discrete(&theta, params.theta_star(), &support).unwrap();
    let data = sample_qn(&support, &mut rng(10), 200_000);
    let mc = data
        .rows()
        .map(|(x, _)| {
            let e: f64 = x.iter().zip(&theta).zip(params.theta_star()).map(|((v, t), s)| v * (t - s)).sum();
            e * e
        })
        .sum::<f64>()
        / data.n_rows() as f64;
    assert!((mc / exact - 1.0).abs() < 0.03, "{mc} vs {exact}");
}

#[test]
fn y_statistic_matches_monte_carlo_of_exp_square() {
    let params = Arc::new(FamilyParams::standard(16).unwrap());
    let support = draw_qn_support_shared(params.clone(), &mut rng(11)).unwrap();
    let exact = y_moment_statistic(&support);
    let a = 18.0 / std::f64::consts::E;
    let data = sample_qn(&support, &mut rng(12), 400_000);
    let mc = data.rows().map(|(_, y)| (a * y * y).exp()).sum::<f64>() / data.n_rows() as f64;
    assert!(exact.is_finite());
    assert!((mc / exact - 1.0).abs() < 0.02, "{mc} vs {exact}");
}

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ridgeless_core::interpolant::io::{read_binary, read_csv, write_binary, write_csv};
use ridgeless_core::interpolant::{compress, least_norm_fit, predict, Dataset, SolverConfig};

fn gaussian_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let xs: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Dataset::from_parts(d, xs, ys).unwrap()
}

/// Minimum-norm least-squares solution through an SVD pseudo-inverse.
fn svd_oracle(data: &Dataset) -> DVector<f64> {
    let x = DMatrix::from_row_slice(data.n_rows(), data.dim(), data.xs());
    let y = DVector::from_column_slice(data.ys());
    x.pseudo_inverse(1e-12).unwrap() * y
}

fn rel_err(a: &[f64], b: &DVector<f64>) -> f64 {
    let num: f64 = a.iter().zip(b.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    num / b.norm().max(1e-300)
}

#[test]
fn matches_svd_on_wide_designs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(n, d) in &[(1, 5), (5, 20), (30, 31), (40, 400)] {
        let data = gaussian_dataset(&mut rng, n, d);
        let model = least_norm_fit(&data, &SolverConfig::default()).unwrap();
        assert!(rel_err(&model.theta, &svd_oracle(&data)) < 1e-8, "n={n} d={d}");
        for (x, y) in data.rows() {
            assert!((predict(&model, x).unwrap() - y).abs() < 1e-8);
        }
    }
}

#[test]
fn duplicates_are_averaged_like_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base = gaussian_dataset(&mut rng, 6, 30);
    let mut data = base.clone();
    // Three repeats of row 0 and one of row 4, with fresh labels.
    for &i in &[0, 0, 0, 4] {
        data.push(base.x(i), rng.sample(StandardNormal)).unwrap();
    }
    let model = least_norm_fit(&data, &SolverConfig::default()).unwrap();
    assert!(rel_err(&model.theta, &svd_oracle(&data)) < 1e-8);
}

#[test]
fn overdetermined_matches_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = gaussian_dataset(&mut rng, 25, 6);
    let model = least_norm_fit(&data, &SolverConfig::default()).unwrap();
    assert!(rel_err(&model.theta, &svd_oracle(&data)) < 1e-8);
}

#[test]
fn fit_lies_in_row_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = gaussian_dataset(&mut rng, 10, 50);
    let model = least_norm_fit(&data, &SolverConfig::default()).unwrap();
    let x = DMatrix::from_row_slice(10, 50, data.xs());
    // Projector onto the row space: X^T (X X^T)^{-1} X.
    let gram = &x * x.transpose();
    let proj = x.transpose() * gram.try_inverse().unwrap() * &x;
    let theta = DVector::from_column_slice(&model.theta);
    assert!((&proj * &theta - &theta).norm() < 1e-9 * theta.norm());
}

#[test]
fn binary_and_csv_round_trip_through_files() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = gaussian_dataset(&mut rng, 7, 4);
    let dir = tempfile::tempdir().unwrap();

    let bin = dir.path().join("d.bin");
    write_binary(&data, std::fs::File::create(&bin).unwrap()).unwrap();
    let back = read_binary(std::fs::File::open(&bin).unwrap()).unwrap();
    assert_eq!(back, data);
    assert_eq!(std::fs::metadata(&bin).unwrap().len(), 16 + 8 * 7 * 5);

    let csv = dir.path().join("d.csv");
    write_csv(&data, std::fs::File::create(&csv).unwrap()).unwrap();
    let back = read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(back, data);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Any other interpolant differs by a null-space vector and is longer.
    #[test]
    fn perturbing_along_null_space_grows_the_norm(seed in any::<u64>(), n in 1usize..8, extra in 1usize..12) {
        let d = n + extra;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = gaussian_dataset(&mut rng, n, d);
        let model = least_norm_fit(&data, &SolverConfig::default()).unwrap();
        let x = DMatrix::from_row_slice(n, d, data.xs());
        let proj = x.transpose() * (&x * x.transpose()).try_inverse().unwrap() * &x;
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let null = &v - &proj * &v;
        let theta = DVector::from_column_slice(&model.theta);
        let other = &theta + &null;
        for (i, (_, y)) in data.rows().enumerate() {
            let fitted: f64 = x.row(i).iter().zip(other.iter()).map(|(a, b)| a * b).sum();
            prop_assert!((fitted - y).abs() < 1e-6);
        }
        prop_assert!(other.norm() + 1e-12 >= theta.norm());
    }

    #[test]
    fn row_order_does_not_change_the_compression(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = gaussian_dataset(&mut rng, n, 3);
        let x0 = data.x(0).to_vec();
        data.push(&x0, 0.5).unwrap();
        let mut order: Vec<usize> = (0..data.n_rows()).collect();
        order.reverse();
        prop_assert_eq!(compress(&data).unwrap(), compress(&data.permuted(&order)).unwrap());
    }
}

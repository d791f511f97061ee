use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues of a diagonal covariance, non-increasing and positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::domain("spectrum needs at least one eigenvalue"));
        }
        if let Some(i) = eigenvalues.iter().position(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::domain(format!(
                "eigenvalue {i} is {} (must be positive)",
                eigenvalues[i]
            )));
        }
        if let Some(i) = eigenvalues.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::domain(format!(
                "eigenvalues must be non-increasing: lambda[{}]={} < lambda[{}]={}",
                i,
                eigenvalues[i],
                i + 1,
                eigenvalues[i + 1]
            )));
        }
        Ok(Self { eigenvalues })
    }

    pub fn flat(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim])
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        compensated_sum(self.eigenvalues.iter().copied())
    }

    pub fn std_devs(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.sqrt()).collect()
    }
}

/// Neumaier summation.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `(1/81, 1/d^2, ..., 1/d^2)`: one strong direction and a flat tail.
pub fn make_spectrum(d: usize) -> Result<Spectrum> {
    if d < 2 {
        return Err(Error::domain(format!("spectrum needs d >= 2, got {d}")));
    }
    let tail = 1.0 / (d as f64 * d as f64);
    let mut eigenvalues = vec![tail; d];
    eigenvalues[0] = 1.0 / 81.0;
    Spectrum::new(eigenvalues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn two_level_spectrum_at_81() {
        let s = make_spectrum(81).unwrap();
        assert_eq!(s.dim(), 81);
        assert_eq!(s.eigenvalues()[0], 1.0 / 81.0);
        assert!(s.eigenvalues()[1..].iter().all(|&l| l == 1.0 / 6561.0));
    }

    #[test]
    fn trace_matches_exact_rational() {
        for d in [9usize, 81, 256, 4096, 10000] {
            let exact = Ratio::new(1i64, 81) + Ratio::new(d as i64 - 1, (d * d) as i64);
            let exact = *exact.numer() as f64 / *exact.denom() as f64;
            let got = make_spectrum(d).unwrap().trace();
            assert!((got - exact).abs() <= 1e-15 * exact, "d={d}: {got} vs {exact}");
        }
        let t81 = make_spectrum(81).unwrap().trace();
        assert!((t81 - 0.0245389).abs() < 5e-8);
        // 1/81 + 80/6561 = 161/6561
        assert!((t81 - 161.0 / 6561.0).abs() < 1e-17);
    }

    #[test]
    fn small_d_violates_ordering() {
        assert!(make_spectrum(4).is_err());
        assert!(make_spectrum(1).is_err());
        assert!(make_spectrum(9).is_ok());
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(Spectrum::new(vec![1.0, 0.0]).is_err());
        assert!(Spectrum::new(vec![]).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0]).is_err());
    }
}

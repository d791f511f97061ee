use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// User-set thresholds standing in for the unspecified absolute constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Small-excess level: excess counts as small when at most `c0 / sqrt(n)`.
    pub c0: f64,
    /// A bound value above `c2` counts as large.
    pub c2: f64,
    /// Floor on the mean `Q_n` excess.
    pub c7_floor: f64,
    /// Constant of bounded antimonotonicity.
    pub antimono_c: f64,
    /// Confidence parameter handed to bounds.
    pub validity_alpha: f64,
    /// Significance level of the statistical tests.
    pub test_alpha: f64,
    pub trials: usize,
    pub n_grid: Vec<usize>,
    /// Median looseness ratio counted as uninformative.
    pub looseness_min: f64,
    /// Density level for `strong_density`.
    pub density_beta: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self::scaled_to(1.0 / 81.0)
    }
}

impl ThresholdConfig {
    /// Defaults with the noise-dependent thresholds set for `sigma_y2`.
    pub fn scaled_to(sigma_y2: f64) -> Self {
        let singleton_level = std::f64::consts::LN_2 / 2.0 * sigma_y2;
        Self {
            c0: 1.0,
            c2: 0.5 * singleton_level,
            c7_floor: 0.8 * singleton_level,
            antimono_c: 2.0,
            validity_alpha: 0.05,
            test_alpha: 1e-3,
            trials: 500,
            n_grid: vec![36, 64, 100],
            looseness_min: 10.0,
            density_beta: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c0", self.c0),
            ("c2", self.c2),
            ("c7_floor", self.c7_floor),
            ("antimono_c", self.antimono_c),
            ("validity_alpha", self.validity_alpha),
            ("test_alpha", self.test_alpha),
            ("looseness_min", self.looseness_min),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{key} must be positive, got {v}")));
            }
        }
        for (key, v) in [("test_alpha", self.test_alpha), ("validity_alpha", self.validity_alpha)] {
            if v >= 1.0 {
                return Err(Error::domain(format!("{key} must lie in (0, 1), got {v}")));
            }
        }
        if self.antimono_c < 1.0 {
            return Err(Error::domain("antimono_c must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.density_beta) {
            return Err(Error::domain("density_beta must lie in [0, 1]"));
        }
        if self.trials == 0 {
            return Err(Error::domain("trials must be positive"));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::domain("n_grid must be a nonempty list of positive sizes"));
        }
        Ok(())
    }
}

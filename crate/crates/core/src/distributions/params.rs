use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spectrum::{make_spectrum, Spectrum};
use crate::error::{Error, Result};

/// `(s, N, d)` with `s = floor(sqrt(n))`, `N = s^2`, `d = N^2`.
pub fn derive_dims(n: usize) -> (usize, usize, usize) {
    let mut s = (n as f64).sqrt() as usize;
    // Correct float rounding around perfect squares.
    while s * s > n {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= n {
        s += 1;
    }
    let big_n = s * s;
    (s, big_n, big_n * big_n)
}

/// The unit-length regression direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThetaStar {
    /// Standard basis vector `e_{k+1}` (0-based index `k`).
    Axis(usize),
    /// An explicit vector; must have unit norm and length `d`.
    Vector(Vec<f64>),
}

impl Default for ThetaStar {
    /// The top eigendirection of the diagonal covariance.
    fn default() -> Self {
        ThetaStar::Axis(0)
    }
}

impl fmt::Display for ThetaStar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaStar::Axis(k) => write!(f, "e{}", k + 1),
            ThetaStar::Vector(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl FromStr for ThetaStar {
    type Err = Error;

    /// Accepts `e<k>` (1-based axis) or a comma-separated vector.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix('e') {
            if let Ok(k) = rest.parse::<usize>() {
                if k == 0 {
                    return Err(Error::domain("theta_star axes are 1-based"));
                }
                return Ok(ThetaStar::Axis(k - 1));
            }
        }
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::domain(format!("bad theta_star {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(ThetaStar::Vector)
    }
}

/// User-settable knobs of the construction; everything else is derived
/// from `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptions {
    /// Support multiplier: `Q_n` is uniform on `b * n` atoms.
    pub b: u32,
    /// Poissonization rate multiplier: samples have `Poi(c * n)` rows.
    pub c: f64,
    /// Conditional label noise variance.
    pub sigma_y2: f64,
    pub theta_star: ThetaStar,
    /// Replaces `d = N^2`. Exploratory use only.
    pub d_override: Option<usize>,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            b: 2,
            c: 2.0 * std::f64::consts::LN_2,
            sigma_y2: 1.0 / 81.0,
            theta_star: ThetaStar::default(),
            d_override: None,
        }
    }
}

/// All scalars defining the distribution family at sample-size index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyParams {
    n: usize,
    s: usize,
    big_n: usize,
    d: usize,
    options: FamilyOptions,
    spectrum: Spectrum,
    theta_star: Vec<f64>,
}

impl FamilyParams {
    pub fn new(n: usize, options: FamilyOptions) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("n must be at least 1"));
        }
        if options.b == 0 {
            return Err(Error::domain("b must be at least 1"));
        }
        if !(options.c.is_finite() && options.c > 0.0) {
            return Err(Error::domain(format!("c must be positive, got {}", options.c)));
        }
        if !(options.sigma_y2.is_finite() && options.sigma_y2 >= 0.0) {
            return Err(Error::domain(format!(
                "sigma_y2 must be nonnegative, got {}",
                options.sigma_y2
            )));
        }
        let (s, big_n, natural_d) = derive_dims(n);
        let d = options.d_override.unwrap_or(natural_d);
        let spectrum = make_spectrum(d)?;
        let theta_star = match &options.theta_star {
            ThetaStar::Axis(k) if *k < d => {
                let mut v = vec![0.0; d];
                v[*k] = 1.0;
                v
            }
            ThetaStar::Axis(k) => {
                return Err(Error::domain(format!("theta_star axis e{} exceeds d={d}", k + 1)))
            }
            ThetaStar::Vector(v) => {
                if v.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: v.len(),
                    });
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::domain(format!("theta_star has norm {norm}, not 1")));
                }
                v.clone()
            }
        };
        Ok(Self {
            n,
            s,
            big_n,
            d,
            options,
            spectrum,
            theta_star,
        })
    }

    /// Standard construction: `b = 2`, `c = 2 ln 2`, `sigma_y2 = 1/81`, `theta* = e1`.
    pub fn standard(n: usize) -> Result<Self> {
        Self::new(n, FamilyOptions::default())
    }

    /// The same options at a different sample-size index.
    pub fn at(&self, n: usize) -> Result<Self> {
        Self::new(n, self.options.clone())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn big_n(&self) -> usize {
        self.big_n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn b(&self) -> u32 {
        self.options.b
    }

    pub fn c(&self) -> f64 {
        self.options.c
    }

    pub fn sigma_y2(&self) -> f64 {
        self.options.sigma_y2
    }

    pub fn options(&self) -> &FamilyOptions {
        &self.options
    }

    pub fn d_overridden(&self) -> bool {
        self.options.d_override.is_some()
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    /// Number of atoms in the `Q_n` support, `b * n`.
    pub fn support_size(&self) -> usize {
        self.options.b as usize * self.n
    }

    /// Per-atom Poisson rate `c / b`.
    pub fn rate(&self) -> f64 {
        self.options.c / self.options.b as f64
    }

    /// Mean Poissonized sample size `c * n`.
    pub fn poisson_mean(&self) -> f64 {
        self.options.c * self.n as f64
    }

    /// Probability that a given atom appears in a Poissonized sample,
    /// `1 - exp(-c/b)`.
    pub fn seen_probability(&self) -> f64 {
        -(-self.rate()).exp_m1()
    }

    /// Whether some `c9` fits strictly between `c/2` and `b(1 - e^{-c/b})`.
    pub fn chernoff_window_ok(&self) -> bool {
        self.options.c / 2.0 < self.options.b as f64 * self.seen_probability()
    }

    /// Flat key-value view, in a fixed key order.
    pub fn to_kv(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n", self.n.to_string()),
            ("s", self.s.to_string()),
            ("N", self.big_n.to_string()),
            ("d", self.d.to_string()),
            ("d_override", self.options.d_override.is_some().to_string()),
            ("b", self.options.b.to_string()),
            ("c", format!("{:?}", self.options.c)),
            ("sigma_y2", format!("{:?}", self.options.sigma_y2)),
            ("theta_star", self.options.theta_star.to_string()),
        ]
    }
}

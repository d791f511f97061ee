//! Flat `key = value` configuration, shared by config files, flags and run
//! manifests.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ridgeless_core::distributions::{FamilyOptions, FamilyParams, ThetaStar};
use ridgeless_core::experiments::{ThresholdConfig, ValidityArgument};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn invalid(key: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

/// Keys that set something.
const SETTABLE: &[&str] = &[
    "n",
    "b",
    "c",
    "sigma_y2",
    "theta_star",
    "d_override",
    "seed",
    "trials",
    "n_grid",
    "delta",
    "bound",
    "validity_argument",
    "out_dir",
    "workers",
    "c0",
    "c2",
    "c7_floor",
    "antimono_c",
    "validity_alpha",
    "test_alpha",
    "looseness_min",
    "density_beta",
    "density_set",
    "density_n0",
    "density_horizon",
    "antimono_horizon",
    "decay_slope_max",
    "poisson_mean_total",
    "poisson_bins",
];

/// Keys a manifest records for reference; accepted and ignored on input.
const INFORMATIONAL: &[&str] = &[
    "s",
    "N",
    "d",
    "params_hash",
    "artifact_version",
    "started_unix",
    "finished_unix",
    "output.manifest",
    "output.trials",
    "output.summary",
    "output.plots",
];

/// Threshold keys reachable through `--threshold key=value`.
pub const THRESHOLD_KEYS: &[&str] = &[
    "c0",
    "c2",
    "c7_floor",
    "antimono_c",
    "validity_alpha",
    "test_alpha",
    "looseness_min",
    "density_beta",
    "decay_slope_max",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Everything one run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Subcommand recorded in a manifest, if one was loaded.
    pub command: Option<String>,
    pub n: usize,
    pub family: FamilyOptions,
    pub seed: u64,
    /// `None` means the experiment's own default.
    pub trials: Option<usize>,
    /// `None` means the experiment's own default.
    pub n_grid: Option<Vec<usize>>,
    pub thresholds: ThresholdConfig,
    pub bound: String,
    pub validity_argument: ValidityArgument,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
    pub density_set: String,
    pub density_n0: u64,
    pub density_horizon: u64,
    pub antimono_horizon: usize,
    pub decay_slope_max: f64,
    pub poisson_mean_total: f64,
    pub poisson_bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let family = FamilyOptions::default();
        Self {
            command: None,
            n: 64,
            thresholds: ThresholdConfig::scaled_to(family.sigma_y2),
            family,
            seed: 0,
            trials: None,
            n_grid: None,
            bound: "norm_sqrt".into(),
            validity_argument: ValidityArgument::Compressed,
            out_dir: PathBuf::from("out"),
            workers: None,
            density_set: "even".into(),
            density_n0: 25,
            density_horizon: 10_000,
            antimono_horizon: 1000,
            decay_slope_max: -0.35,
            poisson_mean_total: 50.0,
            poisson_bins: 10,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| invalid(key, format!("{v:?}: {e}")))
}

fn parse_grid(key: &str, v: &str) -> Result<Vec<usize>, ConfigError> {
    let grid = v
        .split(',')
        .map(|p| num::<usize>(key, p.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() || grid.contains(&0) {
        return Err(invalid(key, "expected a comma-separated list of positive sizes"));
    }
    Ok(grid)
}

impl RunConfig {
    /// Applies settings in order; later values win. Noise-dependent
    /// thresholds follow `sigma_y2` unless set explicitly.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut merged: BTreeMap<&str, &str> = BTreeMap::new();
        let mut command = None;
        for (k, v) in pairs {
            if k == "command" {
                command = Some(v.clone());
            } else if SETTABLE.contains(&k.as_str()) {
                merged.insert(k, v);
            } else if !INFORMATIONAL.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(k.clone()));
            }
        }
        let mut cfg = RunConfig {
            command,
            ..Default::default()
        };
        for (&k, &v) in &merged {
            cfg.apply_family(k, v)?;
        }
        cfg.thresholds = ThresholdConfig::scaled_to(cfg.family.sigma_y2);
        for (&k, &v) in &merged {
            cfg.apply_rest(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_family(&mut self, k: &str, v: &str) -> Result<(), ConfigError> {
        match k {
            "n" => {
                self.n = num(k, v)?;
                if self.n == 0 {
                    return Err(invalid(k, "must be at least 1"));
                }
            }
            "b" => {
                self.family.b = num(k, v)?;
                if self.family.b == 0 {
                    return Err(invalid(k, "must be at least 1"));
                }
            }
            "c" => {
                self.family.c = num(k, v)?;
                if !(self.family.c.is_finite() && self.family.c > 0.0) {
                    return Err(invalid(k, "must be positive"));
                }
            }
            "sigma_y2" => {
                self.family.sigma_y2 = num(k, v)?;
                if !(self.family.sigma_y2.is_finite() && self.family.sigma_y2 >= 0.0) {
                    return Err(invalid(k, "must be nonnegative"));
                }
            }
            "theta_star" => {
                self.family.theta_star = v.parse::<ThetaStar>().map_err(|e| invalid(k, e))?;
            }
            "d_override" => {
                self.family.d_override = if v == "none" { None } else { Some(num(k, v)?) };
            }
            _ => {}
        }
        Ok(())
    }

    fn apply_rest(&mut self, k: &str, v: &str) -> Result<(), ConfigError> {
        let t = &mut self.thresholds;
        match k {
            "seed" => self.seed = num(k, v)?,
            "trials" if v == "default" => self.trials = None,
            "n_grid" if v == "default" => self.n_grid = None,
            "trials" => {
                let trials = num(k, v)?;
                if trials == 0 {
                    return Err(invalid(k, "must be positive"));
                }
                self.trials = Some(trials);
            }
            "n_grid" => self.n_grid = Some(parse_grid(k, v)?),
            "delta" | "validity_alpha" => t.validity_alpha = num(k, v)?,
            "bound" => self.bound = v.to_string(),
            "validity_argument" => {
                self.validity_argument = match v {
                    "compressed" => ValidityArgument::Compressed,
                    "raw" => ValidityArgument::Raw,
                    _ => return Err(invalid(k, "expected `compressed` or `raw`")),
                }
            }
            "out_dir" => self.out_dir = PathBuf::from(v),
            "workers" => {
                self.workers = if v == "auto" { None } else { Some(num(k, v)?) };
                if self.workers == Some(0) {
                    return Err(invalid(k, "must be positive or `auto`"));
                }
            }
            "c0" => t.c0 = num(k, v)?,
            "c2" => t.c2 = num(k, v)?,
            "c7_floor" => t.c7_floor = num(k, v)?,
            "antimono_c" => t.antimono_c = num(k, v)?,
            "test_alpha" => t.test_alpha = num(k, v)?,
            "looseness_min" => t.looseness_min = num(k, v)?,
            "density_beta" => t.density_beta = num(k, v)?,
            "density_set" => {
                density_members(v, 1).map_err(|e| invalid(k, e))?;
                self.density_set = v.to_string();
            }
            "density_n0" => self.density_n0 = num(k, v)?,
            "density_horizon" => self.density_horizon = num(k, v)?,
            "antimono_horizon" => self.antimono_horizon = num(k, v)?,
            "decay_slope_max" => self.decay_slope_max = num(k, v)?,
            "poisson_mean_total" => self.poisson_mean_total = num(k, v)?,
            "poisson_bins" => self.poisson_bins = num(k, v)?,
            _ => {}
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.thresholds;
        let checks: [(&str, bool, &str); 9] = [
            ("c0", t.c0 > 0.0, "must be positive"),
            ("c2", t.c2 > 0.0, "must be positive"),
            ("c7_floor", t.c7_floor > 0.0, "must be positive"),
            ("antimono_c", t.antimono_c >= 1.0, "must be at least 1"),
            ("validity_alpha", t.validity_alpha > 0.0 && t.validity_alpha < 1.0, "must lie in (0, 1)"),
            ("test_alpha", t.test_alpha > 0.0 && t.test_alpha < 1.0, "must lie in (0, 1)"),
            ("looseness_min", t.looseness_min > 0.0, "must be positive"),
            ("density_beta", (0.0..=1.0).contains(&t.density_beta), "must lie in [0, 1]"),
            ("poisson_bins", self.poisson_bins >= 2, "must be at least 2"),
        ];
        for (key, ok, reason) in checks {
            if !ok {
                return Err(invalid(key, reason));
            }
        }
        if !(self.poisson_mean_total > 0.0) {
            return Err(invalid("poisson_mean_total", "must be positive"));
        }
        self.family_at(self.n).map(|_| ())
    }

    /// Family member at `n` with the configured options.
    pub fn family_at(&self, n: usize) -> Result<FamilyParams, ConfigError> {
        FamilyParams::new(n, self.family.clone()).map_err(|e| invalid("n", format!("n={n}: {e}")))
    }

    /// Settings in canonical order, excluding where and how fast the run
    /// executes.
    pub fn canonical_pairs(&self) -> Vec<(&'static str, String)> {
        let t = &self.thresholds;
        let f = &self.family;
        let grid = |g: &Option<Vec<usize>>| match g {
            Some(g) => g.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
            None => "default".into(),
        };
        vec![
            ("n", self.n.to_string()),
            ("b", f.b.to_string()),
            ("c", format!("{:?}", f.c)),
            ("sigma_y2", format!("{:?}", f.sigma_y2)),
            ("theta_star", f.theta_star.to_string()),
            ("d_override", f.d_override.map_or("none".into(), |d| d.to_string())),
            ("seed", self.seed.to_string()),
            ("trials", self.trials.map_or("default".into(), |t| t.to_string())),
            ("n_grid", grid(&self.n_grid)),
            ("bound", self.bound.clone()),
            (
                "validity_argument",
                match self.validity_argument {
                    ValidityArgument::Compressed => "compressed".into(),
                    ValidityArgument::Raw => "raw".into(),
                },
            ),
            ("c0", format!("{:?}", t.c0)),
            ("c2", format!("{:?}", t.c2)),
            ("c7_floor", format!("{:?}", t.c7_floor)),
            ("antimono_c", format!("{:?}", t.antimono_c)),
            ("validity_alpha", format!("{:?}", t.validity_alpha)),
            ("test_alpha", format!("{:?}", t.test_alpha)),
            ("looseness_min", format!("{:?}", t.looseness_min)),
            ("density_beta", format!("{:?}", t.density_beta)),
            ("density_set", self.density_set.clone()),
            ("density_n0", self.density_n0.to_string()),
            ("density_horizon", self.density_horizon.to_string()),
            ("antimono_horizon", self.antimono_horizon.to_string()),
            ("decay_slope_max", format!("{:?}", self.decay_slope_max)),
            ("poisson_mean_total", format!("{:?}", self.poisson_mean_total)),
            ("poisson_bins", self.poisson_bins.to_string()),
        ]
    }

    /// SHA-256 over the canonical settings, hex encoded.
    pub fn params_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.canonical_pairs() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Members below `horizon` of a named set: `all`, `even`, `odd`,
/// `squares`, or `mod:m:r` (residue `r` modulo `m`).
pub fn density_members(spec: &str, horizon: u64) -> Result<Vec<u64>, String> {
    let filter: Box<dyn Fn(u64) -> bool> = match spec {
        "all" => Box::new(|_| true),
        "even" => Box::new(|x| x % 2 == 0),
        "odd" => Box::new(|x| x % 2 == 1),
        "squares" => Box::new(|x| {
            let r = (x as f64).sqrt() as u64;
            (r.saturating_sub(1)..=r + 1).any(|s| s * s == x)
        }),
        other => {
            let parts: Vec<&str> = other.split(':').collect();
            match parts.as_slice() {
                ["mod", m, r] => {
                    let m: u64 = m.parse().map_err(|_| format!("bad modulus in {other:?}"))?;
                    let r: u64 = r.parse().map_err(|_| format!("bad residue in {other:?}"))?;
                    if m == 0 {
                        return Err("modulus must be positive".into());
                    }
                    Box::new(move |x| x % m == r)
                }
                _ => return Err(format!("unknown set {other:?}; use all, even, odd, squares or mod:m:r")),
            }
        }
    };
    Ok((0..horizon).filter(|&x| filter(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_pairs(&parse_kv(text)?)
    }

    #[test]
    fn empty_config_gives_defaults() {
        let c = cfg("").unwrap();
        assert_eq!(c.family.b, 2);
        assert!((c.family.c - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(c.family.sigma_y2, 1.0 / 81.0);
        assert_eq!(c.family_at(100).unwrap().d(), 10_000);
    }

    #[test]
    fn comments_and_overrides() {
        let c = cfg("# a run\nn = 100 # inline\nseed=7\nn = 36\n").unwrap();
        assert_eq!(c.n, 36);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn errors_name_the_key() {
        let e = cfg("b = 0").unwrap_err().to_string();
        assert!(e.contains("`b`"), "{e}");
        let e = cfg("frobnicate = 1").unwrap_err().to_string();
        assert!(e.contains("frobnicate"));
        let e = cfg("test_alpha = 2").unwrap_err().to_string();
        assert!(e.contains("test_alpha"));
        assert!(matches!(cfg("just words"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(cfg("n_grid = 4,0").is_err());
        assert!(cfg("density_set = primes").is_err());
    }

    #[test]
    fn thresholds_follow_noise_unless_set() {
        let c = cfg("sigma_y2 = 0.02").unwrap();
        assert!((c.thresholds.c2 - 0.5 * std::f64::consts::LN_2 / 2.0 * 0.02).abs() < 1e-15);
        let c = cfg("sigma_y2 = 0.02\nc2 = 0.5").unwrap();
        assert_eq!(c.thresholds.c2, 0.5);
    }

    #[test]
    fn canonical_pairs_round_trip() {
        let c = cfg("n = 36\nn_grid = 9,16\ntrials = 12\ntheta_star = e2\nd_override = 100\nvalidity_argument = raw").unwrap();
        let text: String = c
            .canonical_pairs()
            .iter()
            .filter(|(_, v)| v != "default")
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let again = cfg(&text).unwrap();
        assert_eq!(again.canonical_pairs(), c.canonical_pairs());
        assert_eq!(again.params_hash(), c.params_hash());
        assert_ne!(cfg("").unwrap().params_hash(), c.params_hash());
    }

    #[test]
    fn informational_keys_are_ignored() {
        let c = cfg("d = 5\ncommand = ranks\nparams_hash = abc").unwrap();
        assert_eq!(c.command.as_deref(), Some("ranks"));
    }

    #[test]
    fn named_sets() {
        assert_eq!(density_members("even", 7).unwrap(), [0, 2, 4, 6]);
        assert_eq!(density_members("squares", 17).unwrap(), [0, 1, 4, 9, 16]);
        assert_eq!(density_members("mod:3:1", 8).unwrap(), [1, 4, 7]);
        assert!(density_members("mod:0:1", 8).is_err());
    }
}

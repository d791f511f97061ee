//! Model-dependent generalization bounds `epsilon(h, n, delta)`.
//!
//! A bound may look at the fitted model, the sample size and the
//! confidence parameter, and nothing else.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::distributions::{make_spectrum, ThetaStar};
use crate::error::{Error, Result};
use crate::interpolant::LinearModel;
use crate::risk::excess_risk_gaussian;

pub trait BoundFunction: Send + Sync {
    fn id(&self) -> &str;

    /// Must be deterministic and nonnegative. NaN marks a model the bound
    /// is not defined for.
    fn eval(&self, model: &LinearModel, n: usize, delta: f64) -> f64;
}

/// Adapts a closure.
pub struct FnBound<F> {
    id: String,
    f: F,
}

impl<F> FnBound<F>
where
    F: Fn(&LinearModel, usize, f64) -> f64 + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        Self { id: id.into(), f }
    }
}

impl<F> BoundFunction for FnBound<F>
where
    F: Fn(&LinearModel, usize, f64) -> f64 + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn eval(&self, model: &LinearModel, n: usize, delta: f64) -> f64 {
        (self.f)(model, n, delta)
    }
}

/// `||theta|| (1 + sqrt(2 log(1/delta))) / sqrt(n)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormSqrt;

fn norm_sqrt(model: &LinearModel, n: usize, delta: f64) -> f64 {
    model.norm() * (1.0 + (2.0 * (1.0 / delta).ln()).sqrt()) / (n as f64).sqrt()
}

impl BoundFunction for NormSqrt {
    fn id(&self) -> &str {
        "norm_sqrt"
    }

    fn eval(&self, model: &LinearModel, n: usize, delta: f64) -> f64 {
        norm_sqrt(model, n, delta)
    }
}

/// [`NormSqrt`] plus a constant floor.
#[derive(Debug, Clone, Copy)]
pub struct NormSqrtClamped {
    pub floor: f64,
}

impl Default for NormSqrtClamped {
    fn default() -> Self {
        Self { floor: 0.01 }
    }
}

impl BoundFunction for NormSqrtClamped {
    fn id(&self) -> &str {
        "norm_sqrt_clamped"
    }

    fn eval(&self, model: &LinearModel, n: usize, delta: f64) -> f64 {
        self.floor + norm_sqrt(model, n, delta)
    }
}

/// Reports the exact excess risk under the Gaussian-marginal member of the
/// family whose dimension matches the model. This is only valid for `P_n`
/// and exists to show how a bound tuned to one distribution fails on its
/// discrete counterpart.
#[derive(Debug, Clone, Default)]
pub struct OracleCheat {
    pub theta_star: ThetaStar,
}

impl BoundFunction for OracleCheat {
    fn id(&self) -> &str {
        "oracle_cheat"
    }

    fn eval(&self, model: &LinearModel, _n: usize, _delta: f64) -> f64 {
        let d = model.dim();
        let Ok(spectrum) = make_spectrum(d) else {
            return f64::NAN;
        };
        let theta_star = match &self.theta_star {
            ThetaStar::Axis(k) if *k < d => {
                let mut v = vec![0.0; d];
                v[*k] = 1.0;
                v
            }
            ThetaStar::Vector(v) if v.len() == d => v.clone(),
            _ => return f64::NAN,
        };
        excess_risk_gaussian(&model.theta, &theta_star, &spectrum).unwrap_or(f64::NAN)
    }
}

/// A constant bound.
#[derive(Debug, Clone)]
pub struct ConstantBound {
    id: String,
    value: f64,
}

impl ConstantBound {
    pub fn new(id: impl Into<String>, value: f64) -> Self {
        Self {
            id: id.into(),
            value,
        }
    }
}

impl BoundFunction for ConstantBound {
    fn id(&self) -> &str {
        &self.id
    }

    fn eval(&self, _model: &LinearModel, _n: usize, _delta: f64) -> f64 {
        self.value
    }
}

/// Bounds registered by id.
#[derive(Clone, Default)]
pub struct BoundRegistry {
    entries: BTreeMap<String, Arc<dyn BoundFunction>>,
}

impl BoundRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `norm_sqrt`, `norm_sqrt_clamped`, `oracle_cheat`, `zero` and
    /// `vacuous` (the constant 1e6).
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(NormSqrt));
        r.register(Arc::new(NormSqrtClamped::default()));
        r.register(Arc::new(OracleCheat::default()));
        r.register(Arc::new(ConstantBound::new("zero", 0.0)));
        r.register(Arc::new(ConstantBound::new("vacuous", 1e6)));
        r
    }

    /// Adds or replaces the bound under its id.
    pub fn register(&mut self, bound: Arc<dyn BoundFunction>) {
        self.entries.insert(bound.id().to_string(), bound);
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn BoundFunction>> {
        self.entries.get(id).cloned().ok_or_else(|| {
            Error::domain(format!(
                "unknown bound {id:?}; known: {}",
                self.ids().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.keys().map(String::as_str)
    }
}

/// All builtin bounds.
pub fn builtin_bounds() -> Vec<Arc<dyn BoundFunction>> {
    BoundRegistry::builtin().entries.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_sqrt_values() {
        let zero = LinearModel::from_theta(vec![0.0; 4]);
        for n in [1, 10, 1000] {
            assert_eq!(NormSqrt.eval(&zero, n, 0.05), 0.0);
        }
        let m = LinearModel::from_theta(vec![3.0, 4.0]);
        let expected = 5.0 * (1.0 + (2.0 * 20f64.ln()).sqrt()) / 10.0;
        assert!((NormSqrt.eval(&m, 100, 0.05) - expected).abs() < 1e-14);
        let clamped = NormSqrtClamped { floor: 0.5 };
        assert!((clamped.eval(&m, 100, 0.05) - expected - 0.5).abs() < 1e-14);
        assert!((clamped.eval(&zero, 100, 0.05) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn norm_sqrt_decreases_in_n() {
        let m = LinearModel::from_theta(vec![0.3, -1.2, 0.7]);
        let values: Vec<f64> = (1..200).map(|n| NormSqrt.eval(&m, n, 0.1)).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn oracle_cheat_is_gaussian_excess() {
        let mut theta = vec![0.0; 16];
        theta[0] = 1.0;
        let m = LinearModel::from_theta(theta.clone());
        assert_eq!(OracleCheat::default().eval(&m, 4, 0.05), 0.0);
        theta[0] = 0.0;
        theta[5] = 2.0;
        let m = LinearModel::from_theta(theta);
        let expected = 1.0 / 81.0 + 4.0 / 256.0;
        assert!((OracleCheat::default().eval(&m, 4, 0.05) - expected).abs() < 1e-15);
        assert!(OracleCheat::default().eval(&LinearModel::from_theta(vec![1.0]), 4, 0.05).is_nan());
    }

    #[test]
    fn registry_lookup() {
        let r = BoundRegistry::builtin();
        let ids: Vec<&str> = r.ids().collect();
        assert_eq!(ids, ["norm_sqrt", "norm_sqrt_clamped", "oracle_cheat", "vacuous", "zero"]);
        assert_eq!(r.get("zero").unwrap().id(), "zero");
        let err = r.get("nope").err().unwrap().to_string();
        assert!(err.contains("nope") && err.contains("norm_sqrt"));
        assert_eq!(builtin_bounds().len(), 5);
    }

    #[test]
    fn closures_register() {
        let mut r = BoundRegistry::empty();
        r.register(Arc::new(FnBound::new("linear", |_: &LinearModel, n: usize, _| n as f64)));
        let m = LinearModel::from_theta(vec![1.0]);
        assert_eq!(r.get("linear").unwrap().eval(&m, 7, 0.1), 7.0);
    }
}

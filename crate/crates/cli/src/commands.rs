//! Subcommands as registered [`Experiment`]s.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use ridgeless_core::certify::{certify_unit_scale, gaussian_exp_z_mean};
use ridgeless_core::distributions::{draw_qn_support_shared, sample_pn, LabelMode, RngStream};
use ridgeless_core::experiments::{
    check_bounded_antimonotonic, run_benign_decay, run_dilemma, run_lemma3, run_lemma4_equivalence,
    run_poissonization, run_trials, strong_density, BoundRegistry, DecayMode,
};
use ridgeless_core::interpolant::{least_norm_fit, SolverConfig};
use ridgeless_core::risk::rank_profile;
use ridgeless_core::{Error, Result};
use serde_json::{json, Value};

use crate::config::{density_members, RunConfig};
use crate::output::{decay_plot, dilemma_plot, f, Table};

/// Pass rate a certification run must reach.
pub const CERT_PASS_MIN: f64 = 0.95;

/// Everything an experiment sees.
pub struct RunContext<'a> {
    pub config: &'a RunConfig,
    pub stream: RngStream,
    pub params_hash: String,
    pub bounds: &'a BoundRegistry,
}

impl RunContext<'_> {
    pub fn trials(&self, exp: &dyn Experiment) -> usize {
        self.config.trials.unwrap_or(exp.default_trials())
    }

    pub fn grid(&self, exp: &dyn Experiment) -> Vec<usize> {
        self.config.n_grid.clone().unwrap_or_else(|| exp.default_grid().to_vec())
    }

    /// A JSONL record tagged with the params hash and seed path.
    fn record(&self, experiment: &str, trial: usize, mut metrics: Value) -> Value {
        let map = metrics.as_object_mut().expect("metrics are an object");
        map.insert("params_hash".into(), json!(self.params_hash));
        map.insert("seed_path".into(), json!(format!("{}/{experiment}:{trial}", self.stream)));
        map.insert("trial".into(), json!(trial));
        metrics
    }
}

pub struct Outcome {
    pub passed: bool,
    pub records: Vec<Value>,
    pub summary: Table,
    pub plots: Vec<(&'static str, Table)>,
    /// One-screen human summary.
    pub display: String,
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn default_trials(&self) -> usize {
        1
    }
    /// Sample sizes swept by default; empty for single-size experiments.
    fn default_grid(&self) -> &'static [usize] {
        &[]
    }
    fn run(&self, ctx: &RunContext) -> Result<Outcome>;
}

/// Experiments registered by subcommand name.
pub struct ExperimentRegistry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn builtin() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register(Box::new(Lemma2));
        r.register(Box::new(Lemma3));
        r.register(Box::new(Lemma4));
        r.register(Box::new(Benign));
        r.register(Box::new(Dilemma));
        r.register(Box::new(Certify));
        r.register(Box::new(Ranks));
        r.register(Box::new(Density));
        r.register(Box::new(Antimono));
        r
    }

    pub fn register(&mut self, exp: Box<dyn Experiment>) {
        self.entries.insert(exp.name(), exp);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Experiment> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Experiment> + '_ {
        self.entries.values().map(|b| b.as_ref())
    }
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

struct Lemma2;

impl Experiment for Lemma2 {
    fn name(&self) -> &'static str {
        "lemma2"
    }
    fn about(&self) -> &'static str {
        "Poissonized balls in bins: per-bin Poisson laws and independence"
    }
    fn default_trials(&self) -> usize {
        200_000
    }
    fn run(&self, ctx: &RunContext) -> Result<Outcome> {
        let cfg = ctx.config;
        let r = run_poissonization(
            cfg.poisson_mean_total,
            cfg.poisson_bins,
            ctx.trials(self),
            cfg.thresholds.test_alpha,
            &ctx.stream,
        )?;
        let records = r
            .trial_counts
            .iter()
            .enumerate()
            .map(|(i, c)| ctx.record("lemma2", i, json!({ "counts": c })))
            .collect();
        let mut summary = Table::new(&["bin", "mean", "chi_square_p"])
            .doc(format!("bin counts of Poi({}) balls over {} bins", r.mean_total, r.bins));
        let mut display = format!(
            "Poissonization: {} trials, {} balls on average, {} bins\n\n bin   mean     chi2 p\n",
            r.trials, r.mean_total, r.bins
        );
        for (j, (m, p)) in r.bin_means.iter().zip(&r.bin_p_values).enumerate() {
            summary.push(vec![j.to_string(), f(*m), f(*p)]);
            let _ = writeln!(display, "{j:>4}  {m:>7.4}  {p:>9.4}");
        }
        let _ = write!(
            display,
            "\nper-bin level {:.1e} (Bonferroni), max |rho| {:.4} (limit {})\n",
            r.alpha_per_bin, r.max_abs_correlation, r.correlation_limit
        );
        Ok(Outcome {
            passed: r.passed,
            records,
            summary,
            plots: vec![],
            display,
        })
    }
}

struct Lemma3;

impl Experiment for Lemma3 {
    fn default_grid(&self) -> &'static [usize] {
        &[36, 64, 100]
    }
    fn name(&self) -> &'static str {
        "lemma3"
    }
    fn about(&self) -> &'static str {
        "Q_n excess of the least-norm fit against the singleton floor"
    }
    fn default_trials(&self) -> usize {
        1000
    }
    fn run(&self, ctx: &RunContext) -> Result<Outcome> {
        let cfg = ctx.config;
        let mut records = Vec::new();
        let mut summary = Table::new(&[
            "n",
            "d",
            "mean_excess",
            "se_excess",
            "singleton_fraction",
            "singleton_target",
            "floor",
            "floor_ok",
            "cert_pass_rate",
        ]);
        let mut display = String::from("    n       d  mean excess     (se)  singletons (target)  floor ok\n");
        let mut passed = true;
        for n in ctx.grid(self) {
            let params = cfg.family_at(n).map_err(|e| Error::Domain(e.to_string()))?;
            let r = run_lemma3(&params, ctx.trials(self), cfg.thresholds.c7_floor, &ctx.stream)?;
            passed &= r.floor_ok;
            for (i, t) in r.records.iter().enumerate() {
                records.push(ctx.record(
                    &format!("lemma3/n{n}"),
                    i,
                    json!({
                        "n": n,
                        "t": t.t,
                        "compressed_size": t.compressed_size,
                        "singleton_count": t.singleton_count,
                        "excess_qn": t.excess_qn,
                        "cert_overall": t.cert.overall,
                    }),
                ));
            }
            summary.push(vec![
                n.to_string(),
                r.d.to_string(),
                f(r.mean_excess),
                f(r.se_excess),
                f(r.singleton_fraction_mean),
                f(r.singleton_fraction_target),
                f(r.floor),
                r.floor_ok.to_string(),
                f(r.cert_pass_rate),
            ]);
            let _ = writeln!(
                display,
                "{n:>5} {:>7}  {:>11.6} ({:>7.6})  {:>10.5} ({:.5})  {}",
                r.d,
                r.mean_excess,
                r.se_excess,
                r.singleton_fraction_mean,
                r.singleton_fraction_target,
                pass_word(r.floor_ok)
            );
        }
        Ok(Outcome {
            passed,
            records,
            summary,
            plots: vec![],
            display,
        })
    }
}

struct Lemma4;

impl Experiment for Lemma4 {
    fn name(&self) -> &'static str {
        "lemma4"
    }
    fn about(&self) -> &'static str {
        "compressed Poissonized Q_n samples against binomial-size P_n samples"
    }
    fn default_trials(&self) -> usize {
        20_000
    }
    fn run(&self, ctx: &RunContext) -> Result<Outcome> {
        let cfg = ctx.config;
        let params = cfg.family_at(cfg.n).map_err(|e| Error::Domain(e.to_string()))?;
        let r = run_lemma4_equivalence(&params, ctx.trials(self), cfg.thresholds.test_alpha, &ctx.stream)?;
        let exp = format!("lemma4/n{}", cfg.n);
        let records = r
            .records
            .iter()
            .enumerate()
            .map(|(i, rec)| ctx.record(&exp, i, serde_json::to_value(rec).expect("record serializes")))
            .collect();
        let mut summary = Table::new(&["test", "statistic", "p_value", "passed"]);
        let mut display = format!(
            "n={} d={} trials={}; kept-atom count mean {:.4}\n\n test               statistic    p-value\n",
            r.n,
            params.d(),
            r.trials,
            r.binomial_mean
        );
        let stats = [
            ("compressed_size", r.size_test.statistic),
            ("multiplicity", r.multiplicity_test.statistic),
            ("ks_norm", r.ks_norm.statistic),
            ("ks_dot", r.ks_dot.statistic),
            ("ks_excess", r.ks_excess.statistic),
        ];
        for ((name, p), (_, stat)) in r.p_values().iter().zip(stats) {
            let ok = *p >= r.alpha_per_test;
            summary.push(vec![name.to_string(), f(stat), f(*p), ok.to_string()]);
            let _ = writeln!(display, " {name:<17} {stat:>10.4} {p:>10.4}  {}", pass_word(ok));
        }
        summary.push(vec![
            "singleton_fraction".into(),
            f(r.singleton_fraction_mean),
            f(r.singleton_fraction_target),
            String::new(),
        ]);
        let _ = write!(
            display,
            "\nsingleton fraction {:.5} (target {:.5}); per-test level {:.1e}\n",
            r.singleton_fraction_mean, r.singleton_fraction_target, r.alpha_per_test
        );
        Ok(Outcome {
            passed: r.passed,
            records,
            summary,
            plots: vec![],
            display,
        })
    }
}

struct Benign;

impl Experiment for Benign {
    fn name(&self) -> &'static str {
        "benign"
    }
    fn about(&self) -> &'static str {
        "decay of the P_n excess risk along an n grid"
    }
    fn default_trials(&self) -> usize {
        200
    }
    fn default_grid(&self) -> &'static [usize] {
        &[16, 36, 64, 100, 144]
    }
    fn run(&self, ctx: &RunContext) -> Result<Outcome> {
        let cfg = ctx.config;
        let mut grid = ctx.grid(self);
        grid.sort_unstable();
        grid.dedup();
        let params = grid
            .iter()
            .map(|&n| cfg.family_at(n).map_err(|e| Error::Domain(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let delta = cfg.thresholds.validity_alpha;
        let r = run_benign_decay(&params, ctx.trials(self), delta, DecayMode::Fit, &ctx.stream)?;
        let mut records = Vec::new();
        for p in &r.points {
            for (i, e) in p.excesses.iter().enumerate() {
                records.push(ctx.record(&format!("benign/n{}", p.n), i, json!({ "n": p.n, "excess": e })));
            }
        }
        let passed = r.strictly_decreasing && r.log_log_slope <= cfg.decay_slope_max;
        let plot = decay_plot(&r);
        let mut display = String::from("    n        d  median excess   q excess   reference bound\n");
        for p in &r.points {
            let _ = writeln!(
                display,
                "{:>5} {:>8}  {:>13.4e}  {:>9.4e}   {}",
                p.n,
                p.d,
                p.median_excess,
                p.q_excess,
                p.bllt_bound.map_or("inapplicable".into(), |b| format!("{b:.4e}"))
            );
        }
        let _ = write!(
            display,
            "\nstrictly decreasing: {}; log-log slope {:.3} (max {})\n",
            r.strictly_decreasing, r.log_log_slope, cfg.decay_slope_max
        );
        Ok(Outcome {
            passed,
            records,
            summary: plot.clone(),
            plots: vec![("decay", plot)],
            display,
        })
    }
}

struct Dilemma;

impl Experiment for Dilemma {
    fn default_grid(&self) -> &'static [usize] {
        &[36, 64, 100]
    }
    fn name(&self) -> &'static str {
        "dilemma"
    }
    fn about(&self) -> &'static str {
        "audit a bound: small on P_n, valid on Q_n?"
    }
    fn default_trials(&self) -> usize {
        500
    }
    fn run(&self, ctx: &RunContext) -> Result<Outcome> {
        let cfg = ctx.config;
        let bound = ctx.bounds.get(&cfg.bound)?;
        let params = ctx
            .grid(self)
            .iter()
            .map(|&n| cfg.family_at(n).map_err(|e| Error::Domain(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let delta = cfg.thresholds.validity_alpha;
        let r = run_dilemma(
            bound.as_ref(),
            &params,
            delta,
            &cfg.thresholds,
            ctx.trials(self),
            cfg.validity_argument,
            &ctx.stream,
        )?;
        let mut records = Vec::new();
        for p in &r.points {
            let exp = format!("dilemma/{}/n{}", r.bound_id, p.n);
            for (i, rec) in p.records.iter().enumerate() {
                let mut v = serde_json::to_value(rec).expect("record serializes");
                v["n"] = json!(p.n);
                records.push(ctx.record(&exp, i, v));
            }
        }
        let mut summary = Table::new(&[
            "n",
            "prob_small_excess",
            "prob_bound_large",
            "validity_failure_rate",
            "looseness_ratio_median",
            "dichotomy_holds",
        ]);
        let mut display = format!(
            "bound {} at delta {delta}\n\n    n  P(small excess)  P(bound large)  Q_n failure  looseness  holds\n",
            r.bound_id
        );
        for p in &r.points {
            summary.push(vec![
                p.n.to_string(),
                f(p.prob_small_excess),
                f(p.prob_bound_large),
                f(p.validity_failure_rate),
                f(p.looseness_ratio_median),
                p.dichotomy_holds.to_string(),
            ]);
            let _ = writeln!(
                display,
                "{:>5}  {:>15.3}  {:>14.3}  {:>11.3}  {:>9.3e}  {}",
                p.n,
                p.prob_small_excess,
                p.prob_bound_large,
                p.validity_failure_rate,
                p.looseness_ratio_median,
                pass_word(p.dichotomy_holds)
            );
        }
        Ok(Outcome {
            passed: r.points.iter().all(|p| p.dichotomy_holds),
            records,
            summary,
            plots: vec![("dilemma", dilemma_plot(&r))],
            display,
        })
    }
}

struct Certify;

impl Experiment for Certify {
    fn name(&self) -> &'static str {
        "certify"
    }
    fn about(&self) -> &'static str {
        "unit-scale certification of random Q_n supports and inflated copies"
    }
    fn default_trials(&self) -> usize {
        200
    }
    fn run(&self, ctx: &RunContext) -> Result<Outcome> {
        let cfg = ctx.config;
        let params = Arc::new(cfg.family_at(cfg.n).map_err(|e| Error::Domain(e.to_string()))?);
        let trials = ctx.trials(self);
        let reports = run_trials(&ctx.stream, "certify", trials, |t| {
            let support = draw_qn_support_shared(params.clone(), &mut t.rng("support"))?;
            let plain = certify_unit_scale(&support);
            let inflated = certify_unit_scale(&support.scale_coordinate(0, 9.0)?);
            Ok((plain, inflated))
        })?;
        let records = reports
            .iter()
            .enumerate()
            .map(|(i, (p, q))| ctx.record("certify", i, json!({ "plain": p, "inflated": q })))
            .collect();
        let pass_rate = reports.iter().filter(|(p, _)| p.overall).count() as f64 / trials as f64;
        let fail_rate = reports.iter().filter(|(_, q)| !q.overall).count() as f64 / trials as f64;
        let mean = |g: fn(&ridgeless_core::certify::CertReport) -> f64| {
            reports.iter().map(|(p, _)| g(p)).sum::<f64>() / trials as f64
        };
        let (zx, zy, tail) = (
            mean(|r| r.z_statistic_x1),
            mean(|r| r.z_statistic_y),
            mean(|r| r.max_tail_norm),
        );
        let reference = gaussian_exp_z_mean(params.spectrum().eigenvalues()[0].sqrt()).unwrap_or(f64::INFINITY);
        let mut summary = Table::new(&["metric", "value"]);
        for (k, v) in [
            ("pass_rate", pass_rate),
            ("inflated_fail_rate", fail_rate),
            ("mean_z_x1", zx),
            ("gaussian_z_x1", reference),
            ("mean_z_y", zy),
            ("mean_max_tail_norm", tail),
        ] {
            summary.push(vec![k.into(), f(v)]);
        }
        let display = format!(
            "n={} d={} supports={trials}\n\n pass rate            {pass_rate:.3} (min {CERT_PASS_MIN})\n inflated fail rate   {fail_rate:.3} (min {CERT_PASS_MIN})\n mean z(x1)           {zx:.4} (Gaussian value {reference:.4})\n mean z(y)            {zy:.4}\n mean max tail norm   {tail:.4}\n",
            cfg.n,
            params.d()
        );
        Ok(Outcome {
            passed: pass_rate >= CERT_PASS_MIN && fail_rate >= CERT_PASS_MIN,
            records,
            summary,
            plots: vec![],
            display,
        })
    }
}

struct Ranks;

impl Experiment for Ranks {
    fn name(&self) -> &'static str {
        "ranks"
    }
    fn about(&self) -> &'static str {
        "effective ranks r_k, R_k and the critical index k*"
    }
    fn run(&self, ctx: &RunContext) -> Result<Outcome> {
        let cfg = ctx.config;
        let params = cfg.family_at(cfg.n).map_err(|e| Error::Domain(e.to_string()))?;
        let d = params.d();
        let ks: Vec<usize> = [0, 1, 2, d / 2, d - 1].into_iter().filter(|&k| k < d).collect();
        let mut ks = ks;
        ks.dedup();
        let profile = rank_profile(params.spectrum(), &ks, cfg.n, 1.0)?;
        let df = d as f64;
        let r0_closed = 1.0 + 81.0 * (df - 1.0) / (df * df);
        let mut passed = profile.k_star == Some(1);
        let mut summary = Table::new(&["k", "r_k", "R_k", "closed_form_r_k"]);
        let mut display = format!("n={} d={d}\n\n    k            r_k            R_k   closed form\n", cfg.n);
        let mut records = Vec::new();
        for (i, e) in profile.entries.iter().enumerate() {
            let closed = if e.k == 0 { r0_closed } else { (d - e.k) as f64 };
            let ok = if e.k == 0 {
                (e.r - closed).abs() <= 1e-12 * closed
            } else {
                e.r == closed && e.big_r == closed
            };
            passed &= ok;
            summary.push(vec![e.k.to_string(), f(e.r), f(e.big_r), f(closed)]);
            records.push(ctx.record("ranks", i, json!({ "k": e.k, "r": e.r, "big_r": e.big_r })));
            let _ = writeln!(display, "{:>5} {:>14.6} {:>14.6} {:>13.6}  {}", e.k, e.r, e.big_r, closed, pass_word(ok));
        }
        let _ = write!(display, "\nk* = {:?} (expected 1)\n", profile.k_star);
        Ok(Outcome {
            passed,
            records,
            summary,
            plots: vec![],
            display,
        })
    }
}

struct Density;

impl Experiment for Density {
    fn name(&self) -> &'static str {
        "density"
    }
    fn about(&self) -> &'static str {
        "strong density of a set of sample sizes over square bins"
    }
    fn run(&self, ctx: &RunContext) -> Result<Outcome> {
        let cfg = ctx.config;
        let members = density_members(&cfg.density_set, cfg.density_horizon).map_err(Error::Domain)?;
        let beta = cfg.thresholds.density_beta;
        let r = strong_density(members, beta, cfg.density_n0, cfg.density_horizon)?;
        let mut summary = Table::new(&["s", "count", "density"]);
        let mut records = Vec::new();
        let mut worst = (f64::INFINITY, 0);
        for (i, b) in r.bins.iter().enumerate() {
            summary.push(vec![b.s.to_string(), b.count.to_string(), f(b.density)]);
            records.push(ctx.record("density", i, json!({ "s": b.s, "count": b.count, "density": b.density })));
            if b.density < worst.0 {
                worst = (b.density, b.s);
            }
        }
        let display = format!(
            "set {} with beta {beta}, n0 {}, horizon {}: {} bins, lowest density {:.4} at s={}\n",
            cfg.density_set,
            cfg.density_n0,
            cfg.density_horizon,
            r.bins.len(),
            worst.0,
            worst.1
        );
        Ok(Outcome {
            passed: r.ok,
            records,
            summary,
            plots: vec![],
            display,
        })
    }
}

struct Antimono;

impl Experiment for Antimono {
    fn name(&self) -> &'static str {
        "antimono"
    }
    fn about(&self) -> &'static str {
        "bounded antimonotonicity of a bound on fitted models"
    }
    fn default_trials(&self) -> usize {
        5
    }
    fn run(&self, ctx: &RunContext) -> Result<Outcome> {
        let cfg = ctx.config;
        let bound = ctx.bounds.get(&cfg.bound)?;
        let params = cfg.family_at(cfg.n).map_err(|e| Error::Domain(e.to_string()))?;
        let models = run_trials(&ctx.stream, "antimono", ctx.trials(self), |t| {
            let sample = sample_pn(&params, &mut t.rng("sample"), cfg.n, LabelMode::ScaledVariance)?;
            least_norm_fit(&sample, &SolverConfig::default())
        })?;
        let grid = cfg
            .n_grid
            .clone()
            .unwrap_or_else(|| (1..=cfg.antimono_horizon).collect());
        let c = cfg.thresholds.antimono_c;
        let r = check_bounded_antimonotonic(bound.as_ref(), &models, &grid, cfg.thresholds.validity_alpha, c)?;
        let mut summary = Table::new(&["model", "n1", "n2", "eps_n1", "eps_n2"]);
        for v in &r.violations {
            summary.push(vec![
                v.model_index.to_string(),
                v.n1.to_string(),
                v.n2.to_string(),
                f(v.eps_n1),
                f(v.eps_n2),
            ]);
        }
        let records = models
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mine: Vec<_> = r.violations.iter().filter(|v| v.model_index == i).collect();
                ctx.record(
                    "antimono",
                    i,
                    json!({ "theta_norm": m.norm(), "violations": mine }),
                )
            })
            .collect();
        let display = format!(
            "bound {} with c = {c} on {} fitted models over {} grid points: {} violating (model, n2) pairs\n",
            bound.id(),
            models.len(),
            grid.len(),
            r.violations.len()
        );
        Ok(Outcome {
            passed: r.ok,
            records,
            summary,
            plots: vec![],
            display,
        })
    }
}

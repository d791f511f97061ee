//! `ridgeless` command-line front end.
//!
//! Exit codes: 0 pass, 1 statistical failure, 2 usage error, 3 internal error.

pub mod commands;
pub mod config;
pub mod output;

use std::fs;
use std::io::{self, Write as _};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use ridgeless_core::distributions::RngStream;
use ridgeless_core::experiments::BoundRegistry;

use commands::{ExperimentRegistry, RunContext};
use config::{parse_kv, ConfigError, RunConfig, THRESHOLD_KEYS};
use output::RunDir;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Bumped whenever outputs of a fixed configuration may change.
pub const ARTIFACT_VERSION: &str = concat!("ridgeless-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(name = "ridgeless", about = "Run interpolation and bound-audit experiments")]
struct Args {
    /// Experiment to run.
    command: String,
    /// Flat `key = value` file, such as a previous run.manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Builtin bound id.
    #[arg(long)]
    bound: Option<String>,
    /// Threshold override as KEY=VALUE; repeatable.
    #[arg(long, value_name = "KEY=VALUE")]
    threshold: Vec<String>,
}

fn usage(registry: &ExperimentRegistry) -> String {
    let mut s = String::from(
        "usage: ridgeless <COMMAND> [--config FILE] [--seed S] [--trials T] [--n N] [--n-grid N,N,..]\n\
         \x20                [--delta D] [--out-dir DIR] [--workers W] [--bound ID] [--threshold KEY=VALUE]\n\ncommands:\n",
    );
    for e in registry.iter() {
        s.push_str(&format!("  {:<10} {}\n", e.name(), e.about()));
    }
    s
}

enum Failure {
    Usage(String),
    Internal(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn io_fail(e: io::Error) -> Failure {
    Failure::Internal(e.to_string())
}

/// Merges the config file and flags, flags last.
fn collect_pairs(args: &Args) -> Result<Vec<(String, String)>, Failure> {
    let mut pairs = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.clone(),
                source,
            })?;
            parse_kv(&text)?
        }
        None => Vec::new(),
    };
    if let Some((_, cmd)) = pairs.iter().rev().find(|(k, _)| k == "command") {
        if *cmd != args.command {
            return Err(Failure::Usage(format!(
                "config is for `{cmd}` but the command is `{}`",
                args.command
            )));
        }
    }
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    push("seed", args.seed.map(|v| v.to_string()));
    push("trials", args.trials.map(|v| v.to_string()));
    push("n", args.n.map(|v| v.to_string()));
    push("n_grid", args.n_grid.clone());
    push("delta", args.delta.map(|v| format!("{v:?}")));
    push("out_dir", args.out_dir.as_ref().map(|p| p.display().to_string()));
    push("workers", args.workers.map(|v| v.to_string()));
    push("bound", args.bound.clone());
    for t in &args.threshold {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--threshold expects KEY=VALUE, got `{t}`")))?;
        let k = k.trim();
        if !THRESHOLD_KEYS.contains(&k) {
            return Err(Failure::Usage(format!(
                "unknown threshold `{k}`; known: {}",
                THRESHOLD_KEYS.join(", ")
            )));
        }
        pairs.push((k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn manifest_text(cfg: &RunConfig, command: &str, hash: &str, started: u64, finished: Option<u64>) -> String {
    let mut out = format!(
        "# ridgeless run manifest\n# master_seed = {}\n# params_hash = {hash}\ncommand = {command}\nartifact_version = {ARTIFACT_VERSION}\nparams_hash = {hash}\n",
        cfg.seed
    );
    for (k, v) in cfg.canonical_pairs() {
        out.push_str(&format!("{k} = {v}\n"));
    }
    if let Ok(p) = cfg.family_at(cfg.n) {
        out.push_str(&format!("s = {}\nN = {}\nd = {}\n", p.s(), p.big_n(), p.d()));
    }
    out.push_str(&format!("started_unix = {started}\n"));
    if let Some(t) = finished {
        out.push_str(&format!("finished_unix = {t}\n"));
    }
    out.push_str(
        "output.manifest = run.manifest\noutput.trials = trials.jsonl\noutput.summary = summary.csv\noutput.plots = plot/\n",
    );
    out
}

fn execute(args: Args, registry: &ExperimentRegistry) -> Result<i32, Failure> {
    let exp = registry
        .get(&args.command)
        .ok_or_else(|| Failure::Usage(format!("unknown command `{}`", args.command)))?;
    let pairs = collect_pairs(&args)?;
    let mut cfg = RunConfig::from_pairs(&pairs)?;
    // Pin defaults so the manifest alone reproduces the run.
    cfg.trials.get_or_insert(exp.default_trials());
    if !exp.default_grid().is_empty() && cfg.n_grid.is_none() {
        cfg.n_grid = Some(exp.default_grid().to_vec());
    }
    let bounds = BoundRegistry::builtin();
    bounds.get(&cfg.bound).map_err(|e| Failure::Usage(e.to_string()))?;

    let hash = cfg.params_hash();
    let started = unix_now();
    let mut run = RunDir::create(&cfg.out_dir).map_err(io_fail)?;
    run.stage(
        "run.manifest",
        manifest_text(&cfg, exp.name(), &hash, started, None).as_bytes(),
    )
    .map_err(io_fail)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Failure::Internal(e.to_string()))?;
    let ctx = RunContext {
        config: &cfg,
        stream: RngStream::new(cfg.seed),
        params_hash: hash.clone(),
        bounds: &bounds,
    };
    let outcome = pool
        .install(|| exp.run(&ctx))
        .map_err(|e| Failure::Internal(format!("{} failed: {e}", exp.name())))?;

    let mut jsonl = Vec::new();
    for r in &outcome.records {
        serde_json::to_writer(&mut jsonl, r).map_err(|e| Failure::Internal(e.to_string()))?;
        jsonl.push(b'\n');
    }
    run.stage("trials.jsonl", &jsonl).map_err(io_fail)?;
    run.stage(
        "summary.csv",
        &outcome.summary.render(cfg.seed, &hash).map_err(io_fail)?,
    )
    .map_err(io_fail)?;
    for (name, table) in &outcome.plots {
        run.stage(
            &format!("plot/{name}.csv"),
            &table.render(cfg.seed, &hash).map_err(io_fail)?,
        )
        .map_err(io_fail)?;
    }
    // The manifest is restaged with the finish time before committing.
    let manifest = manifest_text(&cfg, exp.name(), &hash, started, Some(unix_now()));
    run.stage("run.manifest", manifest.as_bytes()).map_err(io_fail)?;
    let root = run.root().to_path_buf();
    run.commit().map_err(io_fail)?;

    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{} (seed {}, params {})", exp.name(), cfg.seed, &hash[..12]);
    let _ = writeln!(out, "{}", outcome.display);
    let _ = writeln!(
        out,
        "{}; outputs in {}",
        if outcome.passed { "PASS" } else { "FAIL" },
        root.display()
    );
    Ok(if outcome.passed { EXIT_PASS } else { EXIT_FAIL })
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let registry = ExperimentRegistry::builtin();
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            if code == EXIT_USAGE {
                eprint!("\n{}", usage(&registry));
            }
            return code;
        }
    };
    match execute(args, &registry) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{}", usage(&registry));
            EXIT_USAGE
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INTERNAL
        }
    }
}

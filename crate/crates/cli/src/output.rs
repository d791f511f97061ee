//! Run directory layout: `run.manifest`, `trials.jsonl`, `summary.csv` and
//! `plot/*.csv`. Files are written under a `.partial` suffix and renamed
//! once the run succeeds.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ridgeless_core::experiments::{DecayReport, DilemmaReport};

/// A CSV table with documentation lines emitted as `#` comments.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub doc: Vec<String>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            doc: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn doc(mut self, line: impl Into<String>) -> Self {
        self.doc.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Header comments naming the seed and params hash, then the CSV body.
    pub fn render(&self, master_seed: u64, params_hash: &str) -> io::Result<Vec<u8>> {
        let mut out = format!("# master_seed = {master_seed}\n# params_hash = {params_hash}\n");
        for line in &self.doc {
            out.push_str(&format!("# {line}\n"));
        }
        let mut w = csv::Writer::from_writer(out.into_bytes());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| io::Error::other(e.to_string()))
    }
}

/// Formats a float losslessly; non-finite values become `nan`, `inf`, `-inf`.
pub fn f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

pub fn decay_plot(report: &DecayReport) -> Table {
    let mut t = Table::new(&["n", "median_excess", "q95_excess", "bllt_bound"])
        .doc("one row per sample size n")
        .doc("median_excess: median P_n excess risk of the least-norm fit")
        .doc(format!(
            "q95_excess: ({})-quantile of the same excess",
            1.0 - report.delta
        ))
        .doc("bllt_bound: reference upper bound with unit constants (empty if inapplicable)");
    for p in &report.points {
        t.push(vec![
            p.n.to_string(),
            f(p.median_excess),
            f(p.q_excess),
            p.bllt_bound.map(f).unwrap_or_default(),
        ]);
    }
    t
}

pub fn dilemma_plot(report: &DilemmaReport) -> Table {
    let mut t = Table::new(&["n", "prob_small_excess", "prob_bound_large", "validity_failure_rate"])
        .doc("one row per sample size n")
        .doc("prob_small_excess: fraction of P_n trials with excess <= c0/sqrt(n)")
        .doc("prob_bound_large: fraction of P_n trials with bound > c2")
        .doc(format!(
            "validity_failure_rate: fraction of Q_n trials with excess above the bound `{}`",
            report.bound_id
        ));
    for p in &report.points {
        t.push(vec![
            p.n.to_string(),
            f(p.prob_small_excess),
            f(p.prob_bound_large),
            f(p.validity_failure_rate),
        ]);
    }
    t
}

/// Writes one table to `path` directly.
pub fn emit_plotdata(table: &Table, path: &Path, master_seed: u64, params_hash: &str) -> io::Result<()> {
    fs::write(path, table.render(master_seed, params_hash)?)
}

/// Pending outputs of one run.
pub struct RunDir {
    root: PathBuf,
    pending: Vec<PathBuf>,
}

impl RunDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root.join("plot"))?;
        Ok(Self {
            root: root.to_path_buf(),
            pending: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `rel.partial` inside the run directory.
    pub fn stage(&mut self, rel: &str, contents: &[u8]) -> io::Result<()> {
        let target = self.root.join(rel);
        fs::write(partial(&target), contents)?;
        if !self.pending.contains(&target) {
            self.pending.push(target);
        }
        Ok(())
    }

    /// Renames every staged file to its final name.
    pub fn commit(self) -> io::Result<()> {
        for target in &self.pending {
            fs::rename(partial(target), target)?;
        }
        Ok(())
    }
}

fn partial(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A multiset of labelled points `(x, y)` with `x` in `R^dim`.
///
/// Rows are stored row-major in one flat buffer. Row order carries no
/// meaning for any downstream operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            xs: Vec::new(),
            ys: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            xs: Vec::with_capacity(dim * rows),
            ys: Vec::with_capacity(rows),
        }
    }

    /// Builds a dataset from a row-major design buffer and labels.
    pub fn from_parts(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != dim * ys.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * ys.len(),
                got: xs.len(),
            });
        }
        Ok(Self { dim, xs, ys })
    }

    pub fn from_rows<I, X>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (X, f64)>,
        X: AsRef<[f64]>,
    {
        let mut data = Self::new(dim);
        for (x, y) in rows {
            data.push(x.as_ref(), y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = (&[f64], f64)> + '_ {
        (0..self.n_rows()).map(move |i| (self.x(i), self.ys[i]))
    }

    /// Returns a copy with rows reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.dim, order.len());
        for &i in order {
            out.xs.extend_from_slice(self.x(i));
            out.ys.push(self.ys[i]);
        }
        out
    }
}

/// One distinct design point of a compressed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedPoint {
    pub u: Vec<f64>,
    pub v_mean: f64,
    pub multiplicity: usize,
}

/// Deduplicated sample: distinct design points, the mean of the labels
/// attached to each, and how often each occurred.
///
/// Points are kept in canonical order (lexicographic under
/// `f64::total_cmp`), so the compression of a sample does not depend on
/// the order in which its rows were listed.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedDataset {
    dim: usize,
    points: Vec<CompressedPoint>,
}

impl CompressedDataset {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[CompressedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum of multiplicities, i.e. the row count of the source sample.
    pub fn total_multiplicity(&self) -> usize {
        self.points.iter().map(|p| p.multiplicity).sum()
    }

    /// Number of points seen exactly once.
    pub fn singleton_count(&self) -> usize {
        self.points.iter().filter(|p| p.multiplicity == 1).count()
    }

    /// The compressed points as a plain dataset, one row per distinct point.
    pub fn to_dataset(&self) -> Dataset {
        let mut out = Dataset::with_capacity(self.dim, self.points.len());
        for p in &self.points {
            out.xs.extend_from_slice(&p.u);
            out.ys.push(p.v_mean);
        }
        out
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Groups identical design points (exact bitwise equality) and averages
/// their labels.
pub fn compress(sample: &Dataset) -> Result<CompressedDataset> {
    if sample.is_empty() {
        return Err(Error::domain("cannot compress an empty sample"));
    }
    let mut order: Vec<usize> = (0..sample.n_rows()).collect();
    order.sort_by(|&i, &j| lex_cmp(sample.x(i), sample.x(j)));

    let mut points = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let head = sample.x(order[start]);
        let mut end = start + 1;
        while end < order.len() && bitwise_eq(head, sample.x(order[end])) {
            end += 1;
        }
        // Sum in sorted order so the mean is bit-identical under row shuffles.
        let mut labels: Vec<f64> = order[start..end].iter().map(|&i| sample.y(i)).collect();
        labels.sort_by(f64::total_cmp);
        let count = labels.len();
        points.push(CompressedPoint {
            u: head.to_vec(),
            v_mean: labels.iter().sum::<f64>() / count as f64,
            multiplicity: count,
        });
        start = end;
    }
    Ok(CompressedDataset {
        dim: sample.dim(),
        points,
    })
}

//! Dataset persistence.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! u64 dim
//! u64 n_rows
//! f64 x[0][0..n_rows]        column 0
//! ...
//! f64 x[dim-1][0..n_rows]    column dim-1
//! f64 y[0..n_rows]
//! ```
//!
//! CSV has a header `x0,...,x{dim-1},y` and one row per sample row.

use std::io::{Read, Write};

use super::dataset::Dataset;
use crate::error::{Error, Result};

pub fn write_binary<W: Write>(data: &Dataset, mut w: W) -> Result<()> {
    let (d, n) = (data.dim(), data.n_rows());
    w.write_all(&(d as u64).to_le_bytes())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * n);
    for j in 0..d {
        buf.clear();
        for i in 0..n {
            buf.extend_from_slice(&data.x(i)[j].to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    buf.clear();
    for &y in data.ys() {
        buf.extend_from_slice(&y.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Dataset> {
    let d = read_u64(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    let total = d
        .checked_add(1)
        .and_then(|c| c.checked_mul(n))
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("header too large: dim={d}, n_rows={n}")))?;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() != total {
        return Err(Error::Format(format!(
            "expected {total} payload bytes, found {}",
            raw.len()
        )));
    }
    let value = |idx: usize| f64::from_le_bytes(raw[8 * idx..8 * idx + 8].try_into().unwrap());
    let mut xs = vec![0.0; d * n];
    for j in 0..d {
        for i in 0..n {
            xs[i * d + j] = value(j * n + i);
        }
    }
    let ys = (0..n).map(|i| value(d * n + i)).collect();
    Dataset::from_parts(d, xs, ys)
}

pub fn write_csv<W: Write>(data: &Dataset, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    out.write_record(&header)?;
    for (x, y) in data.rows() {
        // `{:?}` prints the shortest representation that round-trips.
        out.write_record(x.iter().chain(std::iter::once(&y)).map(|v| format!("{v:?}")))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Dataset> {
    let mut input = csv::Reader::from_reader(r);
    let width = input.headers()?.len();
    if width < 2 {
        return Err(Error::Format("csv needs at least one x column and y".into()));
    }
    let mut data = Dataset::new(width - 1);
    for record in input.records() {
        let record = record?;
        let values = record
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad number {f:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        data.push(&values[..width - 1], values[width - 1])?;
    }
    Ok(data)
}

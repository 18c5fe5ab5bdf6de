//! Long-format (coordinate) CSV ingestion and export.
//!
//! The only ingest format is a CSV with header `idx1,...,idxK,value`,
//! one row per cell: 1-based integer indices and a numeric value or the
//! literal `NA` for a missing observation. Cells absent from the file
//! are treated as missing. Duplicate cells are rejected with both line
//! numbers. Export writes every cell in the same schema (`NA` for
//! missing), value-exact for finite values.

use std::path::Path;

use anyhow::{bail, Context, Result};
use tuckermc::DenseTensor;

pub fn read_long_csv(path: &Path, dims: &[usize]) -> Result<DenseTensor> {
    let k = dims.len();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;

    let headers = reader.headers()?.clone();
    let expected: Vec<String> = (1..=k)
        .map(|i| format!("idx{}", i))
        .chain(std::iter::once("value".to_string()))
        .collect();
    let got: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    if got != expected {
        bail!(
            "{}: header must be {:?} for declared dims {:?}, got {:?}",
            path.display(),
            expected.join(","),
            dims,
            got.join(",")
        );
    }

    let n: usize = dims.iter().product();
    let mut values = vec![f64::NAN; n];
    let mut mask = vec![false; n];
    // first line seen per cell, for duplicate reports
    let mut seen: Vec<u64> = vec![0; n];

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != k + 1 {
            bail!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                line,
                k + 1,
                record.len()
            );
        }
        let mut idx = Vec::with_capacity(k);
        for (mode, field) in record.iter().take(k).enumerate() {
            let i: usize = field.parse().with_context(|| {
                format!(
                    "{}:{}: index {} is not an integer: {:?}",
                    path.display(),
                    line,
                    mode + 1,
                    field
                )
            })?;
            if i < 1 || i > dims[mode] {
                bail!(
                    "{}:{}: index {} out of range 1..={} at position {}",
                    path.display(),
                    line,
                    i,
                    dims[mode],
                    mode + 1
                );
            }
            idx.push(i - 1);
        }
        let mut lin = 0usize;
        for mode in (0..k).rev() {
            lin = lin * dims[mode] + idx[mode];
        }
        if seen[lin] != 0 {
            bail!(
                "{}:{}: duplicate cell {:?} (first seen at line {})",
                path.display(),
                line,
                record.iter().take(k).collect::<Vec<_>>(),
                seen[lin]
            );
        }
        seen[lin] = line;
        let field = record.get(k).unwrap();
        if field.eq_ignore_ascii_case("na") {
            continue; // stays masked
        }
        let v: f64 = field.parse().with_context(|| {
            format!(
                "{}:{}: value is neither numeric nor NA: {:?}",
                path.display(),
                line,
                field
            )
        })?;
        if !v.is_finite() {
            bail!("{}:{}: value must be finite, got {}", path.display(), line, v);
        }
        values[lin] = v;
        mask[lin] = true;
    }

    if mask.iter().all(|&m| m) {
        Ok(DenseTensor::new(dims.to_vec(), values)?)
    } else {
        Ok(DenseTensor::with_mask(dims.to_vec(), values, mask)?)
    }
}

/// Writes every cell of `t` in the ingest schema; masked or non-finite
/// entries become `NA`.
pub fn write_long_csv(t: &DenseTensor, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    let k = t.order();
    for i in 1..=k {
        write!(w, "idx{},", i)?;
    }
    writeln!(w, "value")?;
    for lin in 0..t.len() {
        let idx = t.multi_index(lin);
        for i in idx {
            write!(w, "{},", i + 1)?;
        }
        let v = t.values()[lin];
        if t.is_observed(lin) && v.is_finite() {
            writeln!(w, "{}", v)?;
        } else {
            writeln!(w, "NA")?;
        }
    }
    Ok(())
}

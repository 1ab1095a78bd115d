//! File formats of the CLI subcommands: series CSV, plain vector files, and
//! JSON mirrors of the library result types.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a
//! write/read cycle reproduces every value bit-for-bit.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hdns_core::inference::TestOutcome;
use hdns_core::models::TimeSeriesMatrix;
use serde::{Deserialize, Serialize};

/// Writes a series as CSV with header `t,x1,...,xd`; one row per time index,
/// t counting from 1.
pub fn write_series_csv(path: &Path, x: &TimeSeriesMatrix) -> Result<()> {
    let (n, d) = (x.n(), x.d());
    let mut out = String::from("t");
    for j in 1..=d {
        out.push_str(&format!(",x{j}"));
    }
    out.push('\n');
    for i in 0..n {
        out.push_str(&(i + 1).to_string());
        for &v in x.row(i) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Reads a series written by [`write_series_csv`] (the `t` column is
/// presentational and ignored beyond a shape check).
pub fn read_series_csv(path: &Path) -> Result<TimeSeriesMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty series file")?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 2 || cols[0] != "t" {
        bail!("bad series header {header:?} (want t,x1,...,xd)");
    }
    for (j, col) in cols[1..].iter().enumerate() {
        if *col != format!("x{}", j + 1) {
            bail!("bad series header column {col:?} (want x{})", j + 1);
        }
    }
    let d = cols.len() - 1;
    let mut data = Vec::new();
    let mut n = 0;
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            bail!(
                "row {}: expected {} fields, got {}",
                idx + 2,
                d + 1,
                fields.len()
            );
        }
        for field in &fields[1..] {
            let v: f64 = field.parse().with_context(|| format!("row {}", idx + 2))?;
            data.push(v);
        }
        n += 1;
    }
    TimeSeriesMatrix::new(n, d, data).map_err(|e| anyhow::anyhow!("invalid series: {e}"))
}

/// Writes a vector one value per line.
pub fn write_vector(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::new();
    for v in values {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Reads a vector written one value per line (blank lines skipped).
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().with_context(|| format!("line {}", idx + 1))?;
        values.push(v);
    }
    Ok(values)
}

/// JSON mirror of a [`TestOutcome`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// "combined" or "threshold".
    pub kind: String,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    /// Block size the run used (auto-selected when the CLI got `--L auto`).
    pub l: usize,
    pub b: usize,
    pub seed: u64,
    /// All bootstrap draws, sorted ascending.
    pub boot_draws: Vec<f64>,
}

impl From<&TestOutcome> for TestReport {
    fn from(out: &TestOutcome) -> Self {
        TestReport {
            kind: out.meta.kind.as_str().to_string(),
            statistic: out.statistic,
            critical_value: out.critical_value,
            p_value: out.p_value,
            alpha: out.alpha,
            reject: out.reject,
            l: out.meta.l,
            b: out.meta.b,
            seed: out.meta.seed,
            boot_draws: out.boot_draws.clone(),
        }
    }
}

/// Serializes any report type as pretty JSON.
pub fn write_json_value<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use hdns_core::models::{simulate_model, ModelId, ModelSpec};

    #[test]
    fn series_csv_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let x = simulate_model(&ModelSpec::new(ModelId::M3, 40, 3, 99)).unwrap();
        write_series_csv(&path, &x).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,x1,x2,x3\n1,"));
        let back = read_series_csv(&path).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn vector_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("beta.csv");
        let v = vec![1.0, -0.25, 3.5e-17, 12345.678901234567];
        write_vector(&path, &v).unwrap();
        assert_eq!(read_vector(&path).unwrap(), v);
    }

    #[test]
    fn malformed_series_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_series_csv(&path).is_err());
        fs::write(&path, "t,x1\n1,2\n2\n").unwrap();
        assert!(read_series_csv(&path).is_err());
        fs::write(&path, "t,x1\n1,nanny\n").unwrap();
        assert!(read_series_csv(&path).is_err());
    }
}

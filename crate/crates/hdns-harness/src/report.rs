//! Report records and their CSV/JSON serializations.
//!
//! The CSV schema is fixed at ten columns —
//! `kind,model,n,d,alpha,delta,r,rejection_rate,mc_se,reps` — with empty
//! fields for the options a cell does not use, and floats printed in
//! shortest round-trip decimal form (parse of an emitted row reproduces
//! every record bit-for-bit). JSON mirrors the whole [`ExperimentReport`]
//! including the seed ledger and the rate/ga detail structs the CSV has no
//! columns for.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::experiment::ExperimentConfig;

pub const CSV_HEADER: &str = "kind,model,n,d,alpha,delta,r,rejection_rate,mc_se,reps";

/// One grid cell of an experiment.
///
/// For the rejection kinds `rejection_rate` is the empirical rejection
/// fraction and `mc_se` its binomial standard error √(p̂(1−p̂)/reps). The
/// rate kinds have no rejection rate, so the two metric columns carry their
/// headline numbers instead: RATE_DELTA puts the median Frobenius error in
/// `rejection_rate` and the median max-norm error in `mc_se` (full detail in
/// `rate`); RATE_GA puts the Kolmogorov proxy distance in `rejection_rate`
/// and the fitted-vs-target covariance W₂ in `mc_se` (full detail in `ga`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub kind: String,
    pub model: String,
    pub n: usize,
    pub d: usize,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub r: Option<usize>,
    pub rejection_rate: f64,
    pub mc_se: f64,
    /// Completed reps behind the cell.
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateDetail>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ga: Option<GaDetail>,
}

/// Bootstrap covariance-error detail of one RATE_DELTA cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateDetail {
    /// Block size ⌈n^{1/3}⌉ the cell ran at.
    pub l: usize,
    /// Reference curve d(√(L/n) + 1/L).
    pub reference: f64,
    pub median_delta_frobenius: f64,
    pub median_delta_max: f64,
    pub ratio_to_reference: f64,
}

/// Gaussian-approximation detail of one RATE_GA cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaDetail {
    /// Independent draws of X_n/√n behind the cell.
    pub m: usize,
    /// Two-sample Kolmogorov distance between the scalar statistic of the
    /// data draws and of the matched Gaussian draws.
    pub kolmogorov: f64,
    /// Gaussian W₂ between the fitted covariance and the Monte Carlo target.
    pub w2_covariance: f64,
    /// 1-d empirical W₂ between data and Gaussian draws; d = 1 cells only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w2_1d: Option<f64>,
}

/// Stream identifiers of one completed rep: everything needed to replay it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedLedgerEntry {
    /// Cell group label, e.g. `TYPE1_COMBINED:n=500,d=5`.
    pub cell: String,
    pub rep: usize,
    pub data_seed: u64,
    /// Multiplier-stream seed; absent for rate reps, which draw no
    /// multipliers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_seed: Option<u64>,
    /// 1 when the first attempt succeeded; retries increment it.
    pub attempts: u32,
}

/// Everything one experiment run produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellRecord>,
    /// Wall-clock duration; the one field excluded from reproducibility
    /// guarantees.
    pub runtime_seconds: f64,
    pub config_echo: ExperimentConfig,
    pub seed_ledger: Vec<SeedLedgerEntry>,
}

fn format_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn format_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders cells in the fixed ten-column schema (header always present).
pub fn cells_to_csv(cells: &[CellRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.kind,
            c.model,
            c.n,
            c.d,
            format_opt_f64(c.alpha),
            format_opt_f64(c.delta),
            format_opt_usize(c.r),
            c.rejection_rate,
            c.mc_se,
            c.reps,
        ));
    }
    out
}

/// Parses text produced by [`cells_to_csv`]. The detail structs have no CSV
/// columns, so parsed records carry `rate: None, ga: None`.
pub fn cells_from_csv(text: &str) -> Result<Vec<CellRecord>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty input")?;
    if header.trim_end() != CSV_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut cells = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(format!(
                "row {}: expected 10 fields, got {}",
                idx + 2,
                fields.len()
            ));
        }
        let opt_f64 = |s: &str, name: &str| -> Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| format!("row {}: {name}: {e}", idx + 2))
            }
        };
        let req_f64 = |s: &str, name: &str| -> Result<f64, String> {
            s.parse()
                .map_err(|e| format!("row {}: {name}: {e}", idx + 2))
        };
        let req_usize = |s: &str, name: &str| -> Result<usize, String> {
            s.parse()
                .map_err(|e| format!("row {}: {name}: {e}", idx + 2))
        };
        cells.push(CellRecord {
            kind: fields[0].to_string(),
            model: fields[1].to_string(),
            n: req_usize(fields[2], "n")?,
            d: req_usize(fields[3], "d")?,
            alpha: opt_f64(fields[4], "alpha")?,
            delta: opt_f64(fields[5], "delta")?,
            r: if fields[6].is_empty() {
                None
            } else {
                Some(req_usize(fields[6], "r")?)
            },
            rejection_rate: req_f64(fields[7], "rejection_rate")?,
            mc_se: req_f64(fields[8], "mc_se")?,
            reps: req_usize(fields[9], "reps")?,
            rate: None,
            ga: None,
        });
    }
    Ok(cells)
}

pub fn write_csv(path: &Path, report: &ExperimentReport) -> std::io::Result<()> {
    fs::write(path, cells_to_csv(&report.cells))
}

pub fn write_json(path: &Path, report: &ExperimentReport) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    fs::write(path, text)
}

pub fn read_json(path: &Path) -> std::io::Result<ExperimentReport> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cell() -> CellRecord {
        CellRecord {
            kind: "TYPE1_COMBINED".into(),
            model: "M1".into(),
            n: 500,
            d: 5,
            alpha: Some(0.05),
            delta: None,
            r: None,
            rejection_rate: 0.0515,
            mc_se: 0.004_938_463_829_277_636,
            reps: 2000,
            rate: None,
            ga: None,
        }
    }

    #[test]
    fn empty_grid_yields_header_only_csv() {
        assert_eq!(cells_to_csv(&[]), format!("{CSV_HEADER}\n"));
        assert_eq!(
            cells_from_csv(&cells_to_csv(&[])).unwrap(),
            Vec::<CellRecord>::new()
        );
    }

    #[test]
    fn single_cell_round_trips_exactly() {
        let cell = sample_cell();
        let text = cells_to_csv(std::slice::from_ref(&cell));
        assert_eq!(text.lines().count(), 2);
        let parsed = cells_from_csv(&text).unwrap();
        assert_eq!(parsed, vec![cell]);
    }

    #[test]
    fn optional_fields_round_trip_as_empty() {
        let mut cell = sample_cell();
        cell.kind = "RATE_DELTA".into();
        cell.alpha = None;
        cell.delta = Some(0.1);
        cell.r = Some(2);
        let text = cells_to_csv(std::slice::from_ref(&cell));
        assert!(text.lines().nth(1).unwrap().contains(",,0.1,2,"));
        assert_eq!(cells_from_csv(&text).unwrap(), vec![cell]);
    }

    #[test]
    fn csv_rejects_malformed_rows() {
        assert!(cells_from_csv("bad header\n").is_err());
        let text = format!("{CSV_HEADER}\nTYPE1_COMBINED,M1,500,5,0.05\n");
        assert!(cells_from_csv(&text).is_err());
        let text = format!("{CSV_HEADER}\nTYPE1_COMBINED,M1,500,5,x,,,0.05,0.004,2000\n");
        assert!(cells_from_csv(&text).is_err());
    }
}

//! CSV and JSON writers. Column orders are fixed:
//!
//! | table       | CSV columns                                      |
//! |-------------|--------------------------------------------------|
//! | expansion   | `b,predicted,mc,se,residual,band_lo,band_hi`     |
//! | sprt        | `rep,stop_n,boundary,overshoot`                  |
//! | xi-scaling  | `n,var_ratio,mean_residual,se`                   |
//! | diagnostics | `condition,n,estimate,std_error,pass`            |
//! | constants   | `quantity,value,err_estimate`                    |
//!
//! JSON output is the whole summary, except for diagnostics (a bare array
//! of records) and constants (`{mu, h_integral, c_eta, err_estimates}`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ReplicationSummary, Table};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Serialize)]
struct ConstantsJson<'a> {
    mu: f64,
    h_integral: Option<f64>,
    c_eta: f64,
    err_estimates: &'a crate::constants::ErrEstimates,
}

#[derive(Serialize)]
struct ConstantsCsvRow {
    quantity: &'static str,
    value: Option<f64>,
    err_estimate: Option<f64>,
}

/// Serializes `summary` to any writer.
pub fn write_summary<W: Write>(
    summary: &ReplicationSummary,
    format: OutputFormat,
    mut w: W,
) -> Result<()> {
    match format {
        OutputFormat::Json => {
            match &summary.table {
                Table::Diagnostics(records) => serde_json::to_writer_pretty(&mut w, records)?,
                Table::Constants(r) => serde_json::to_writer_pretty(
                    &mut w,
                    &ConstantsJson {
                        mu: r.mu,
                        h_integral: r.h_integral,
                        c_eta: r.c_eta,
                        err_estimates: &r.err_estimates,
                    },
                )?,
                _ => serde_json::to_writer_pretty(&mut w, summary)?,
            }
            writeln!(w)?;
        }
        OutputFormat::Csv => {
            let mut csv = csv::Writer::from_writer(&mut w);
            match &summary.table {
                Table::Expansion(rows) => rows.iter().try_for_each(|r| csv.serialize(r))?,
                Table::Sprt(rows) => rows.iter().try_for_each(|r| csv.serialize(r))?,
                Table::XiScaling(rows) => rows.iter().try_for_each(|r| csv.serialize(r))?,
                Table::Diagnostics(rows) => rows.iter().try_for_each(|r| csv.serialize(r))?,
                Table::Constants(r) => {
                    let rows = [
                        ConstantsCsvRow {
                            quantity: "mu",
                            value: Some(r.mu),
                            err_estimate: Some(r.err_estimates.mu),
                        },
                        ConstantsCsvRow {
                            quantity: "h_integral",
                            value: r.h_integral,
                            err_estimate: r.err_estimates.h_integral,
                        },
                        ConstantsCsvRow {
                            quantity: "c_eta",
                            value: Some(r.c_eta),
                            err_estimate: Some(r.err_estimates.c_eta),
                        },
                    ];
                    rows.iter().try_for_each(|r| csv.serialize(r))?
                }
            }
            csv.flush()?;
        }
    }
    Ok(())
}

/// Writes `summary` to `path`; I/O failures map to exit code 4.
pub fn emit(summary: &ReplicationSummary, path: &Path, format: OutputFormat) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_summary(summary, format, &mut w)?;
    w.flush()?;
    Ok(())
}

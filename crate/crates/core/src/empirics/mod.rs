//! Embedded round/energy measurements and the models fitted on them.
//!
//! Rows are indexed by participation probability; the duration model is
//! indexed by participant count, bridged through `k = N * p`.

mod fit;
mod table;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::{Error, Result};

pub use fit::{
    fit_duration_model, fit_energy_linear, DurationModel, EnergyLinearModel, FitMode, Residual,
    DEFAULT_DEGREE, DEFAULT_RESAMPLES, D_FLOOR, MAX_DEGREE, SIGMA_FLOOR,
};

/// Which measurement table a row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    SingleSeed,
    Averaged,
}

impl TableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TableKind::SingleSeed => "single_seed",
            TableKind::Averaged => "averaged",
        }
    }
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "single_seed" | "single" => Ok(TableKind::SingleSeed),
            "averaged" | "average" => Ok(TableKind::Averaged),
            other => Err(format!("unknown table `{other}`")),
        }
    }
}

/// One measured configuration: rounds and energy (Wh) at probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalRow {
    pub p: f64,
    pub d_mean: f64,
    pub d_std: f64,
    pub e_mean: f64,
    pub e_std: f64,
    pub source: TableKind,
}

impl EmpiricalRow {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.p)
            && self.d_mean >= 1.0
            && self.e_mean > 0.0
            && self.d_std >= 0.0
            && self.e_std >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid empirical row {self:?}"
            )))
        }
    }
}

/// The embedded measurement table, verbatim.
pub fn load_empirical_table(which: TableKind) -> Vec<EmpiricalRow> {
    match which {
        TableKind::SingleSeed => table::SINGLE_SEED
            .iter()
            .map(|&(p, e_mean, d_mean)| EmpiricalRow {
                p,
                d_mean,
                d_std: 0.0,
                e_mean,
                e_std: 0.0,
                source: TableKind::SingleSeed,
            })
            .collect(),
        TableKind::Averaged => table::AVERAGED
            .iter()
            .map(|&(p, d_mean, d_std, e_mean, e_std)| EmpiricalRow {
                p,
                d_mean,
                d_std,
                e_mean,
                e_std,
                source: TableKind::Averaged,
            })
            .collect(),
    }
}

pub const CSV_HEADER: [&str; 6] = ["p", "d_mean", "d_std", "e_mean", "e_std", "source"];

/// Write rows in the `p,d_mean,d_std,e_mean,e_std,source` schema.
pub fn write_rows_csv<W: Write>(rows: &[EmpiricalRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            format!("{:.3}", r.p),
            format!("{:.2}", r.d_mean),
            format!("{:.2}", r.d_std),
            format!("{:.2}", r.e_mean),
            format!("{:.2}", r.e_std),
            r.source.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parse rows in the export schema. Errors carry the 1-based file line.
pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<EmpiricalRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header_ok = reader
        .headers()
        .map(|h| h.iter().eq(CSV_HEADER.iter().copied()))
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
    if !header_ok {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message };
        if record.len() != CSV_HEADER.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                CSV_HEADER.len(),
                record.len()
            )));
        }
        let num = |idx: usize| -> Result<f64> {
            record[idx].parse::<f64>().map_err(|_| {
                parse_err(format!(
                    "{}: `{}` is not a number",
                    CSV_HEADER[idx], &record[idx]
                ))
            })
        };
        let row = EmpiricalRow {
            p: num(0)?,
            d_mean: num(1)?,
            d_std: num(2)?,
            e_mean: num(3)?,
            e_std: num(4)?,
            source: record[5].parse().map_err(parse_err)?,
        };
        row.validate().map_err(|e| parse_err(e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

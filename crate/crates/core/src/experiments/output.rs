use super::breakdown::BreakdownReport;
use super::sweep::SweepResult;
use super::{ExperimentError, Result};
use crate::estimators::{DataSet, Status};
use nalgebra::DMatrix;
use std::io::Write;
use std::path::Path;

pub const SWEEP_HEADER: [&str; 5] = [
    "axis_value",
    "estimator",
    "rmse",
    "trials_ok",
    "trials_failed",
];
pub const BREAKDOWN_HEADER: [&str; 6] = [
    "epsilon_m",
    "status",
    "count",
    "lambda_max",
    "threshold_lo",
    "threshold_hi",
];

/// Anything that can be written as one of the result tables.
pub enum CsvReport<'a> {
    Sweep(&'a SweepResult),
    /// One row per status class for every contamination level.
    Breakdown(&'a [BreakdownReport]),
}

impl<'a> From<&'a SweepResult> for CsvReport<'a> {
    fn from(r: &'a SweepResult) -> Self {
        CsvReport::Sweep(r)
    }
}

impl<'a> From<&'a [BreakdownReport]> for CsvReport<'a> {
    fn from(r: &'a [BreakdownReport]) -> Self {
        CsvReport::Breakdown(r)
    }
}

impl<'a> From<&'a Vec<BreakdownReport>> for CsvReport<'a> {
    fn from(r: &'a Vec<BreakdownReport>) -> Self {
        CsvReport::Breakdown(r)
    }
}

impl<'a> From<&'a BreakdownReport> for CsvReport<'a> {
    fn from(r: &'a BreakdownReport) -> Self {
        CsvReport::Breakdown(std::slice::from_ref(r))
    }
}

/// Writes the table to `path`.
pub fn emit_csv<'a>(report: impl Into<CsvReport<'a>>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(report, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes the table to any writer (LF line endings).
pub fn write_csv<'a, W: Write>(report: impl Into<CsvReport<'a>>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    match report.into() {
        CsvReport::Sweep(r) => {
            w.write_record(SWEEP_HEADER)?;
            for (value, row) in r.grid.iter().zip(&r.cells) {
                for (label, cell) in r.estimators.iter().zip(row) {
                    w.write_record([
                        value.to_string(),
                        label.clone(),
                        cell.rmse.to_string(),
                        cell.trials_ok.to_string(),
                        cell.trials_failed.to_string(),
                    ])?;
                }
            }
        }
        CsvReport::Breakdown(reports) => {
            w.write_record(BREAKDOWN_HEADER)?;
            for r in reports {
                for status in Status::ALL {
                    let count = r.tally.get(&status).copied().unwrap_or(0);
                    let lambda = r.lambda_max.get(&status).copied().unwrap_or(f64::NAN);
                    w.write_record([
                        r.epsilon_m.to_string(),
                        status.to_string(),
                        count.to_string(),
                        lambda.to_string(),
                        r.threshold_lo.to_string(),
                        r.threshold_hi.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a matrix as comma-separated rows without a header.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric table, one observation per row.
pub fn read_csv_dataset(path: impl AsRef<Path>, skip_header: bool) -> Result<DataSet> {
    let file = std::fs::File::open(path.as_ref())?;
    read_dataset(file, skip_header)
}

pub fn read_dataset<R: std::io::Read>(reader: R, skip_header: bool) -> Result<DataSet> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    ExperimentError::Config(format!("row {}: {f:?} is not a number", i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(DataSet::from_rows(&rows)?)
}

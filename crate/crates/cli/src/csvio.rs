//! CSV artifacts. Floats use Rust's shortest round-trip formatting, so
//! parsing an emitted file recovers every value bit for bit.

use std::fs::File;
use std::path::{Path, PathBuf};

use ocdeepiv_bench::{ComparisonTable, RowStatus};
use ocdeepiv_core::{Dataset, LossRecord};

use crate::error::{CliError, Result};

pub const DATASET_FILE: &str = "dataset.csv";
pub const LOSSES_FILE: &str = "losses.csv";
pub const STAGE1_LOSSES_FILE: &str = "losses_stage1.csv";
pub const THETA_FILE: &str = "theta.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Parse {
            path: path.to_path_buf(),
            row: 0,
            message: format!("{other:?}"),
        },
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns `z1,z2,z3,x1,x2,t,[y],theta_true`; `y` is omitted when absent.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = create(path)?;
    let mut header = vec!["z1", "z2", "z3", "x1", "x2", "t"];
    if data.y.is_some() {
        header.push("y");
    }
    header.push("theta_true");
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.z.row(i).iter().chain(data.x.row(i)).map(f64::to_string).collect();
        row.push(data.t.get(i, 0).to_string());
        if let Some(y) = &data.y {
            row.push(y.get(i, 0).to_string());
        }
        row.push(data.theta_true.get(i, 0).to_string());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Streams `epoch,total,mse,ortho` rows, flushing each one so a run that
/// diverges leaves every completed epoch on disk. `ortho` is empty for
/// epochs up to the switch.
pub struct LossWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
    switch_epoch: usize,
}

impl LossWriter {
    pub fn create(path: &Path, switch_epoch: usize) -> Result<Self> {
        let mut writer = create(path)?;
        writer
            .write_record(["epoch", "total", "mse", "ortho"])
            .map_err(|e| csv_err(path, e))?;
        writer.flush().map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
            switch_epoch,
        })
    }

    pub fn push(&mut self, r: &LossRecord) -> Result<()> {
        let ortho = if r.epoch <= self.switch_epoch { String::new() } else { r.ortho.to_string() };
        self.writer
            .write_record([r.epoch.to_string(), r.total.to_string(), r.mse.to_string(), ortho])
            .map_err(|e| csv_err(&self.path, e))?;
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn write_theta(path: &Path, theta_true: &[f64], theta_hat: &[f64], theta_smooth: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["index", "theta_true", "theta_hat", "theta_smooth"])
        .map_err(|e| csv_err(path, e))?;
    for (i, ((t, h), s)) in theta_true.iter().zip(theta_hat).zip(theta_smooth).enumerate() {
        w.write_record([i.to_string(), t.to_string(), h.to_string(), s.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One row per estimator in declared order. Standard deviations are blank
/// for a single replication; failed rows carry `failed: <reason>`.
pub fn write_comparison(path: &Path, table: &ComparisonTable) -> Result<()> {
    let mut w = create(path)?;
    w.write_record([
        "kind",
        "status",
        "rank",
        "replications",
        "mse_raw",
        "mse_raw_std",
        "mse_smoothed",
        "mse_smoothed_std",
        "final_ortho",
    ])
    .map_err(|e| csv_err(path, e))?;
    for row in &table.rows {
        let status = match &row.status {
            RowStatus::Ok => "ok".to_string(),
            RowStatus::Failed(reason) => format!("failed: {reason}"),
        };
        let std = |m: Option<ocdeepiv_bench::MetricSummary>| {
            if row.replications > 1 {
                fmt_opt(m.map(|m| m.std))
            } else {
                String::new()
            }
        };
        w.write_record([
            row.kind.name().to_string(),
            status,
            row.rank.map(|r| r.to_string()).unwrap_or_default(),
            row.replications.to_string(),
            fmt_opt(row.mse_raw.map(|m| m.mean)),
            std(row.mse_raw),
            fmt_opt(row.mse_smoothed.map(|m| m.mean)),
            std(row.mse_smoothed),
            fmt_opt(row.final_ortho.map(|m| m.mean)),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// A numeric CSV file: empty fields read as `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

/// Reads a header plus numeric rows. Errors name the 1-based file line.
pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let parse_err = |row: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(parse_err(1, "missing header".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let values = record
            .iter()
            .map(|f| {
                let f = f.trim();
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|_| parse_err(line, format!("'{f}' is not a number")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    Ok(Table { headers, rows })
}

fn required(table: &Table, path: &Path, name: &str) -> Result<usize> {
    table.column_index(name).ok_or_else(|| CliError::Parse {
        path: path.to_path_buf(),
        row: 1,
        message: format!("missing column '{name}'"),
    })
}

fn cell(table: &Table, path: &Path, row: usize, col: usize) -> Result<f64> {
    table.rows[row][col].ok_or_else(|| CliError::Parse {
        path: path.to_path_buf(),
        row: row + 2,
        message: format!("empty '{}' field", table.headers[col]),
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThetaColumns {
    pub theta_true: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub theta_smooth: Vec<f64>,
}

pub fn read_theta(path: &Path) -> Result<ThetaColumns> {
    let table = read_table(path)?;
    let cols = [
        required(&table, path, "theta_true")?,
        required(&table, path, "theta_hat")?,
        required(&table, path, "theta_smooth")?,
    ];
    let mut out = ThetaColumns::default();
    for r in 0..table.rows.len() {
        out.theta_true.push(cell(&table, path, r, cols[0])?);
        out.theta_hat.push(cell(&table, path, r, cols[1])?);
        out.theta_smooth.push(cell(&table, path, r, cols[2])?);
    }
    Ok(out)
}

/// `(epoch, total, mse, ortho)`; `ortho` is `None` where the field was empty.
pub type LossRow = (usize, f64, f64, Option<f64>);

pub fn read_losses(path: &Path) -> Result<Vec<LossRow>> {
    let table = read_table(path)?;
    let cols = [
        required(&table, path, "epoch")?,
        required(&table, path, "total")?,
        required(&table, path, "mse")?,
        required(&table, path, "ortho")?,
    ];
    (0..table.rows.len())
        .map(|r| {
            let epoch = cell(&table, path, r, cols[0])?;
            if epoch.fract() != 0.0 || epoch < 0.0 {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    row: r + 2,
                    message: format!("epoch '{epoch}' is not a non-negative integer"),
                });
            }
            Ok((
                epoch as usize,
                cell(&table, path, r, cols[1])?,
                cell(&table, path, r, cols[2])?,
                table.rows[r][cols[3]],
            ))
        })
        .collect()
}

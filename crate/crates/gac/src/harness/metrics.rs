//! Per-iteration metrics persistence.
//!
//! One CSV per run with a fixed column set. Floats are serialized with
//! Rust's shortest round-trip formatting, so a file read back yields the
//! exact bit pattern that was written.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::agent::IterationRow;
use crate::error::{GacError, Result};

pub const METRICS_COLUMNS: [&str; 9] = [
    "step",
    "env_steps",
    "eval_return_mean",
    "eval_return_std",
    "critic_loss",
    "actor_loss",
    "mmd_value",
    "alpha",
    "beta",
];

fn header() -> String {
    METRICS_COLUMNS.join(",")
}

/// One row in file order.
pub fn format_row(row: &IterationRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        row.step,
        row.env_steps,
        row.eval_return_mean,
        row.eval_return_std,
        row.critic_loss,
        row.actor_loss,
        row.mmd_value,
        row.alpha,
        row.beta
    )
}

/// Append-only metrics file, flushed after every row so interrupted runs
/// stay inspectable.
pub struct MetricsWriter {
    path: PathBuf,
    file: BufWriter<File>,
}

impl MetricsWriter {
    /// Creates (or truncates) the file and writes the header.
    pub fn create(path: &Path) -> Result<Self> {
        let io = |e| GacError::io(path.to_path_buf(), e);
        let mut file = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(file, "{}", header()).map_err(io)?;
        file.flush().map_err(io)?;
        Ok(MetricsWriter { path: path.to_path_buf(), file })
    }

    /// Reopens an existing file for resumption, keeping only rows with
    /// step ≤ `upto_step` so the continued run appends exactly after the
    /// checkpointed iteration.
    pub fn resume(path: &Path, upto_step: u64) -> Result<Self> {
        let rows = read_metrics(path)?;
        let keep: Vec<&IterationRow> = rows.iter().filter(|r| r.step <= upto_step).collect();
        let io = |e| GacError::io(path.to_path_buf(), e);
        let mut file = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(file, "{}", header()).map_err(io)?;
        for row in keep {
            writeln!(file, "{}", format_row(row)).map_err(io)?;
        }
        file.flush().map_err(io)?;
        Ok(MetricsWriter { path: path.to_path_buf(), file })
    }

    pub fn append(&mut self, row: &IterationRow) -> Result<()> {
        let io = |e| GacError::io(self.path.clone(), e);
        writeln!(self.file, "{}", format_row(row)).map_err(io)?;
        self.file.flush().map_err(io)
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, col: &str, v: &str) -> Result<T> {
    v.parse::<T>().map_err(|_| {
        GacError::Metrics(format!("{}: line {line}: bad value {v:?} in column {col}", path.display()))
    })
}

/// Reads a full metrics file, checking the header column by column.
pub fn read_metrics(path: &Path) -> Result<Vec<IterationRow>> {
    let file = File::open(path).map_err(|e| GacError::io(path.to_path_buf(), e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = match lines.next() {
        Some(l) => l.map_err(|e| GacError::io(path.to_path_buf(), e))?,
        None => return Err(GacError::Metrics(format!("{}: empty file", path.display()))),
    };
    let found: Vec<&str> = header_line.split(',').collect();
    for (i, want) in METRICS_COLUMNS.iter().enumerate() {
        match found.get(i) {
            Some(got) if got == want => {}
            Some(got) => {
                return Err(GacError::Metrics(format!(
                    "{}: column {} is {got:?}, expected {want:?}",
                    path.display(),
                    i + 1
                )))
            }
            None => {
                return Err(GacError::Metrics(format!(
                    "{}: missing column {want:?}",
                    path.display()
                )))
            }
        }
    }
    if found.len() > METRICS_COLUMNS.len() {
        return Err(GacError::Metrics(format!(
            "{}: unexpected extra column {:?}",
            path.display(),
            found[METRICS_COLUMNS.len()]
        )));
    }

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| GacError::io(path.to_path_buf(), e))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != METRICS_COLUMNS.len() {
            return Err(GacError::Metrics(format!(
                "{}: line {lineno}: {} fields, expected {}",
                path.display(),
                f.len(),
                METRICS_COLUMNS.len()
            )));
        }
        rows.push(IterationRow {
            step: parse_field(path, lineno, "step", f[0])?,
            env_steps: parse_field(path, lineno, "env_steps", f[1])?,
            eval_return_mean: parse_field(path, lineno, "eval_return_mean", f[2])?,
            eval_return_std: parse_field(path, lineno, "eval_return_std", f[3])?,
            critic_loss: parse_field(path, lineno, "critic_loss", f[4])?,
            actor_loss: parse_field(path, lineno, "actor_loss", f[5])?,
            mmd_value: parse_field(path, lineno, "mmd_value", f[6])?,
            alpha: parse_field(path, lineno, "alpha", f[7])?,
            beta: parse_field(path, lineno, "beta", f[8])?,
        });
    }
    Ok(rows)
}

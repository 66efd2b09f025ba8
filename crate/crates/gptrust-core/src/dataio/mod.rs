//! Time-series tables, the CSV dialect, and seeded synthetic benchmarks.
//!
//! A [`SeriesTable`] is a set of named columns with one declared time
//! column (always present, finite, strictly increasing) and one declared y
//! column in which values may be missing. `#`-prefixed comment lines in a
//! CSV are preserved as metadata and re-emitted on write.

mod csv;
mod synth;

pub use csv::{read_csv, read_x_csv, read_xy_csv, to_csv_string, write_csv, ReadOptions};
pub use synth::{
    censor, synth_periodic_drift, synth_toy_anomaly, LabeledDataset, PeriodicDriftConfig,
    SynthConfig, TruthFn,
};

use crate::gpr::{Dataset, GprError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("file has no header row")]
    NoHeader,
    #[error("need at least two columns when no y column is named, got {got}")]
    NotEnoughColumns { got: usize },
    #[error("no column named `{name}`")]
    MissingColumn { name: String },
    #[error("time and y must be different columns (both are `{name}`)")]
    SameColumn { name: String },
    #[error("line {line}: {detail}")]
    Malformed { line: usize, detail: String },
    #[error("line {line}: time value is missing (time column must be fully populated)")]
    MissingTime { line: usize },
    #[error("time must be strictly increasing: line {prev_line} has t={prev}, line {line} has t={curr}")]
    NonIncreasingTime {
        prev_line: usize,
        line: usize,
        prev: f64,
        curr: f64,
    },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("censor spans [{a0}, {a1}) and [{b0}, {b1}) overlap")]
    OverlappingSpans { a0: f64, a1: f64, b0: f64, b1: f64 },
    #[error(transparent)]
    Gpr(#[from] GprError),
}

/// Named columns with a declared time column and y column.
#[derive(Debug, Clone)]
pub struct SeriesTable {
    /// Comment text (everything after the leading `#`), in file order.
    comments: Vec<String>,
    headers: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
    time_col: usize,
    y_col: usize,
    /// Where the table came from: a path plus parse options, or a
    /// generator plus its full configuration.
    provenance: Option<String>,
}

impl SeriesTable {
    /// Builds a table, enforcing equal column lengths and a fully present,
    /// finite, strictly increasing time column.
    pub fn new(
        headers: Vec<String>,
        columns: Vec<Vec<Option<f64>>>,
        time_col: usize,
        y_col: usize,
    ) -> Result<Self, DataError> {
        if headers.is_empty() {
            return Err(DataError::NoHeader);
        }
        if headers.len() != columns.len() {
            return Err(DataError::BadConfig(format!(
                "{} headers but {} columns",
                headers.len(),
                columns.len()
            )));
        }
        if time_col >= headers.len() || y_col >= headers.len() {
            return Err(DataError::BadConfig(
                "time/y column index out of range".to_string(),
            ));
        }
        if time_col == y_col {
            return Err(DataError::SameColumn {
                name: headers[time_col].clone(),
            });
        }
        let len = columns[0].len();
        if columns.iter().any(|c| c.len() != len) {
            return Err(DataError::BadConfig("ragged columns".to_string()));
        }
        let mut prev: Option<f64> = None;
        for (row, v) in columns[time_col].iter().enumerate() {
            // Synthetic rows have no file lines; report 1-based row numbers.
            let line = row + 2;
            let t = match v {
                Some(t) if t.is_finite() => *t,
                Some(_) | None => return Err(DataError::MissingTime { line }),
            };
            if let Some(p) = prev {
                if t <= p {
                    return Err(DataError::NonIncreasingTime {
                        prev_line: line - 1,
                        line,
                        prev: p,
                        curr: t,
                    });
                }
            }
            prev = Some(t);
        }
        Ok(SeriesTable {
            comments: Vec::new(),
            headers,
            columns,
            time_col,
            y_col,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn comments(&self) -> &[String] {
        &self.comments
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn time_name(&self) -> &str {
        &self.headers[self.time_col]
    }

    pub fn y_name(&self) -> &str {
        &self.headers[self.y_col]
    }

    /// The time column; always fully present by construction.
    pub fn time(&self) -> Vec<f64> {
        self.columns[self.time_col]
            .iter()
            .map(|v| v.expect("time column validated at construction"))
            .collect()
    }

    pub fn y(&self) -> &[Option<f64>] {
        &self.columns[self.y_col]
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Median spacing between consecutive timestamps; 1.0 for fewer than
    /// two samples.
    pub fn median_dt(&self) -> f64 {
        let t = self.time();
        let mut dts: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        if dts.is_empty() {
            return 1.0;
        }
        dts.sort_by(|a, b| a.partial_cmp(b).expect("timestamps are finite"));
        dts[dts.len() / 2]
    }

    /// The rows with a present y value, as a one-dimensional training set.
    pub fn present_dataset(&self) -> Result<Dataset, DataError> {
        let t = self.time();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, y) in self.y().iter().enumerate() {
            if let Some(y) = y {
                xs.push(t[i]);
                ys.push(*y);
            }
        }
        Ok(Dataset::from_1d(&xs, &ys)?)
    }

    pub(crate) fn set_comments(&mut self, comments: Vec<String>) {
        self.comments = comments;
    }

    pub(crate) fn set_provenance(&mut self, p: String) {
        self.provenance = Some(p);
    }

    pub(crate) fn replace_y(&self, y: Vec<Option<f64>>) -> SeriesTable {
        let mut out = self.clone();
        out.columns[self.y_col] = y;
        out
    }
}

/// Formats a value at 17 significant digits, enough to reparse to the
/// identical `f64`.
pub fn format_full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

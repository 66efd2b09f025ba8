//! The CSV dialect: comma-separated, one header row, `#` comment lines
//! preserved, empty/`NaN`/`NA` (any case) marking missing values, LF or
//! CRLF accepted on read, LF emitted on write, all values at full
//! precision. Errors cite 1-based file line numbers.

use super::{DataError, SeriesTable};
use std::path::Path;

/// Column selection for [`read_csv`]; `None` picks the first column as time
/// and the second as y.
#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    pub time_column: Option<String>,
    pub y_column: Option<String>,
}

struct RawTable {
    comments: Vec<String>,
    headers: Vec<String>,
    /// Rows paired with the file line they came from.
    rows: Vec<(usize, Vec<Option<f64>>)>,
}

fn parse_raw(text: &str) -> Result<RawTable, DataError> {
    let mut comments = Vec::new();
    let mut headers: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if let Some(comment) = line.strip_prefix('#') {
            comments.push(comment.to_string());
            continue;
        }
        match &headers {
            None => {
                if line.trim().is_empty() {
                    return Err(DataError::Malformed {
                        line: line_no,
                        detail: "expected a header row, found a blank line".to_string(),
                    });
                }
                headers = Some(line.split(',').map(|h| h.trim().to_string()).collect());
            }
            Some(names) => {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != names.len() {
                    return Err(DataError::Malformed {
                        line: line_no,
                        detail: format!(
                            "expected {} fields, found {}",
                            names.len(),
                            fields.len()
                        ),
                    });
                }
                let mut row = Vec::with_capacity(fields.len());
                for raw in fields {
                    row.push(parse_field(raw, line_no)?);
                }
                rows.push((line_no, row));
            }
        }
    }
    Ok(RawTable {
        comments,
        headers: headers.ok_or(DataError::NoHeader)?,
        rows,
    })
}

fn parse_field(raw: &str, line: usize) -> Result<Option<f64>, DataError> {
    let field = raw.trim();
    if field.is_empty() || field.eq_ignore_ascii_case("nan") || field.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(DataError::Malformed {
            line,
            detail: format!("`{field}` is not a finite number"),
        }),
    }
}

fn resolve_column(headers: &[String], name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| DataError::MissingColumn {
            name: name.to_string(),
        })
}

/// Parses series CSV text. Exposed for in-memory callers; [`read_csv`] is
/// the file-path wrapper.
pub(crate) fn parse_series(text: &str, options: &ReadOptions) -> Result<SeriesTable, DataError> {
    let raw = parse_raw(text)?;
    let time_col = match &options.time_column {
        Some(name) => resolve_column(&raw.headers, name)?,
        None => 0,
    };
    let y_col = match &options.y_column {
        Some(name) => resolve_column(&raw.headers, name)?,
        None => {
            if raw.headers.len() < 2 {
                return Err(DataError::NotEnoughColumns {
                    got: raw.headers.len(),
                });
            }
            if time_col == 1 {
                0
            } else {
                1
            }
        }
    };
    if time_col == y_col {
        return Err(DataError::SameColumn {
            name: raw.headers[time_col].clone(),
        });
    }

    // Validate the time column against real file lines before handing the
    // columns to the structural constructor.
    let mut prev: Option<(usize, f64)> = None;
    for (line, row) in &raw.rows {
        let t = match row[time_col] {
            Some(t) => t,
            None => return Err(DataError::MissingTime { line: *line }),
        };
        if let Some((prev_line, p)) = prev {
            if t <= p {
                return Err(DataError::NonIncreasingTime {
                    prev_line,
                    line: *line,
                    prev: p,
                    curr: t,
                });
            }
        }
        prev = Some((*line, t));
    }

    let n_cols = raw.headers.len();
    let mut columns = vec![Vec::with_capacity(raw.rows.len()); n_cols];
    for (_, row) in &raw.rows {
        for (c, v) in row.iter().enumerate() {
            columns[c].push(*v);
        }
    }
    let mut table = SeriesTable::new(raw.headers, columns, time_col, y_col)?;
    table.set_comments(raw.comments);
    Ok(table)
}

/// Reads a series table from a CSV file.
pub fn read_csv(path: &Path, options: &ReadOptions) -> Result<SeriesTable, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut table = parse_series(&text, options)?;
    table.set_provenance(format!(
        "read_csv(path={}, time={}, y={})",
        path.display(),
        table.time_name(),
        table.y_name()
    ));
    Ok(table)
}

/// Serializes a table in the dialect: comments, header, full-precision
/// rows, LF line endings, missing values as empty fields.
pub fn to_csv_string(table: &SeriesTable) -> String {
    let mut out = String::new();
    for c in table.comments() {
        out.push('#');
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(&table.headers().join(","));
    out.push('\n');
    for row in 0..table.len() {
        let mut first = true;
        for col in 0..table.headers().len() {
            if !first {
                out.push(',');
            }
            first = false;
            if let Some(v) = column_value(table, col, row) {
                out.push_str(&super::format_full_precision(v));
            }
        }
        out.push('\n');
    }
    out
}

fn column_value(table: &SeriesTable, col: usize, row: usize) -> Option<f64> {
    table.column(&table.headers()[col]).expect("col in range")[row]
}

/// Writes a series table to a CSV file.
pub fn write_csv(table: &SeriesTable, path: &Path) -> Result<(), DataError> {
    std::fs::write(path, to_csv_string(table)).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a single numeric column (by name, default the first) from a CSV in
/// the same dialect. Values must all be present and finite; no ordering is
/// required, so this suits query files.
pub fn read_x_csv(path: &Path, column: Option<&str>) -> Result<Vec<f64>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw = parse_raw(&text)?;
    let col = match column {
        Some(name) => resolve_column(&raw.headers, name)?,
        None => 0,
    };
    raw.rows
        .iter()
        .map(|(line, row)| {
            row[col].ok_or(DataError::Malformed {
                line: *line,
                detail: format!("missing value in column `{}`", raw.headers[col]),
            })
        })
        .collect()
}

/// Reads `(x, y)` pairs from a CSV in the same dialect. Both values must be
/// present in every row; x need not be ordered.
pub fn read_xy_csv(
    path: &Path,
    x_column: Option<&str>,
    y_column: Option<&str>,
) -> Result<Vec<(f64, f64)>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw = parse_raw(&text)?;
    if raw.headers.len() < 2 {
        return Err(DataError::NotEnoughColumns {
            got: raw.headers.len(),
        });
    }
    let xc = match x_column {
        Some(name) => resolve_column(&raw.headers, name)?,
        None => 0,
    };
    let yc = match y_column {
        Some(name) => resolve_column(&raw.headers, name)?,
        None => {
            if xc == 1 {
                0
            } else {
                1
            }
        }
    };
    if xc == yc {
        return Err(DataError::SameColumn {
            name: raw.headers[xc].clone(),
        });
    }
    raw.rows
        .iter()
        .map(|(line, row)| {
            let get = |c: usize| {
                row[c].ok_or(DataError::Malformed {
                    line: *line,
                    detail: format!("missing value in column `{}`", raw.headers[c]),
                })
            };
            Ok((get(xc)?, get(yc)?))
        })
        .collect()
}

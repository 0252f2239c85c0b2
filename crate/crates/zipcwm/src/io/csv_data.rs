//! CSV ingestion and emission for datasets.
//!
//! Rows with missing or unparseable cells are dropped with a warning rather
//! than aborting the load; an empty dataset after drops is an error. Floats
//! are written with 17 significant digits so emit-then-load reproduces the
//! continuous block exactly.

use crate::error::{Error, Result};
use crate::io::schema::{ColumnRole, DatasetSchema};
use crate::math::fmt_f64;
use crate::model::{CategoricalCoding, CategoricalColumn, Dataset};
use nalgebra::DMatrix;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

const MAX_STORED_WARNINGS: usize = 20;

/// A loaded dataset plus the bookkeeping of what was read and dropped.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub warnings: Vec<String>,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema, coding: CategoricalCoding) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_reader(file, schema, coding)
}

/// Parse CSV text already in memory; the entry point the fuzz targets drive.
pub fn load_csv_str(text: &str, schema: &DatasetSchema, coding: CategoricalCoding) -> Result<LoadedDataset> {
    load_csv_reader(text.as_bytes(), schema, coding)
}

pub fn load_csv_reader<R: Read>(
    reader: R,
    schema: &DatasetSchema,
    coding: CategoricalCoding,
) -> Result<LoadedDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    // Every schema column must appear in the header and vice versa.
    let mut positions = Vec::with_capacity(schema.columns.len());
    for (name, _) in &schema.columns {
        let pos = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("column `{name}` missing from header")))?;
        positions.push(pos);
    }
    for header in headers.iter() {
        if !schema.columns.iter().any(|(name, _)| name == header) {
            return Err(Error::InvalidData(format!(
                "header column `{header}` is not declared in the schema"
            )));
        }
    }

    let mut y = Vec::new();
    let mut q_rows: Vec<Vec<f64>> = Vec::new();
    let mut w_rows: Vec<Vec<usize>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut warnings = Vec::new();
    let mut rows_read = 0usize;
    let mut rows_dropped = 0usize;
    let mut suppressed = 0usize;

    let mut warn = |warnings: &mut Vec<String>, message: String| {
        if warnings.len() < MAX_STORED_WARNINGS {
            warnings.push(message);
        } else {
            suppressed += 1;
        }
    };

    'rows: for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        rows_read += 1;
        let line = row_idx + 2; // header is line 1

        let mut row_y = 0u64;
        let mut row_q = Vec::new();
        let mut row_w = Vec::new();
        let mut row_label = None;

        for ((name, role), &pos) in schema.columns.iter().zip(&positions) {
            let cell = record.get(pos).unwrap_or("");
            if cell.is_empty() && *role != ColumnRole::Ignore {
                warn(&mut warnings, format!("line {line}: missing `{name}`; row dropped"));
                rows_dropped += 1;
                continue 'rows;
            }
            match role {
                ColumnRole::Response => match cell.parse::<u64>() {
                    Ok(v) => row_y = v,
                    Err(_) => {
                        warn(
                            &mut warnings,
                            format!("line {line}: response `{cell}` is not a nonnegative integer; row dropped"),
                        );
                        rows_dropped += 1;
                        continue 'rows;
                    }
                },
                ColumnRole::Continuous => match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => row_q.push(v),
                    _ => {
                        warn(
                            &mut warnings,
                            format!("line {line}: continuous `{name}` value `{cell}` unparseable; row dropped"),
                        );
                        rows_dropped += 1;
                        continue 'rows;
                    }
                },
                ColumnRole::Categorical(levels) => match cell.parse::<usize>() {
                    Ok(code) if (1..=*levels).contains(&code) => row_w.push(code - 1),
                    _ => {
                        warn(
                            &mut warnings,
                            format!(
                                "line {line}: categorical `{name}` value `{cell}` outside 1..={levels}; row dropped"
                            ),
                        );
                        rows_dropped += 1;
                        continue 'rows;
                    }
                },
                ColumnRole::TrueLabel => match cell.parse::<usize>() {
                    Ok(l) if l >= 1 => row_label = Some(l),
                    _ => {
                        warn(
                            &mut warnings,
                            format!("line {line}: true_label `{cell}` is not a positive integer; row dropped"),
                        );
                        rows_dropped += 1;
                        continue 'rows;
                    }
                },
                ColumnRole::Ignore => {}
            }
        }

        y.push(row_y);
        q_rows.push(row_q);
        w_rows.push(row_w);
        if let Some(l) = row_label {
            labels.push(l);
        }
    }

    if suppressed > 0 {
        warnings.push(format!("...and {suppressed} more warnings suppressed"));
    }
    if y.is_empty() {
        return Err(Error::InvalidData("no usable rows after drops".into()));
    }

    let n = y.len();
    let q_dim = q_rows[0].len();
    let q = DMatrix::from_fn(n, q_dim, |i, j| q_rows[i][j]);
    let level_counts: Vec<usize> = schema
        .columns
        .iter()
        .filter_map(|(_, role)| match role {
            ColumnRole::Categorical(r) => Some(*r),
            _ => None,
        })
        .collect();
    let w = level_counts
        .iter()
        .enumerate()
        .map(|(k, &r)| CategoricalColumn::new(w_rows.iter().map(|row| row[k]).collect(), r))
        .collect::<Result<Vec<_>>>()?;
    let true_labels = if schema.has_true_label() { Some(labels) } else { None };
    let dataset = Dataset::new(y, q, w, coding, true_labels)?;
    Ok(LoadedDataset {
        dataset,
        rows_read,
        rows_dropped,
        warnings,
    })
}

/// Write a dataset in the canonical column layout (`y`, `q*`, `w*`,
/// `true_label`); [`DatasetSchema::canonical_for`] describes the result.
pub fn write_dataset_csv(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let schema = DatasetSchema::canonical_for(dataset);
    let header: Vec<&str> = schema.columns.iter().map(|(name, _)| name.as_str()).collect();
    writeln!(out, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for i in 0..dataset.n() {
        let mut cells = vec![dataset.y[i].to_string()];
        for j in 0..dataset.q_dim() {
            cells.push(fmt_f64(dataset.q[(i, j)]));
        }
        for col in &dataset.w {
            cells.push((col.levels[i] + 1).to_string());
        }
        if let Some(labels) = &dataset.true_labels {
            cells.push(labels[i].to_string());
        }
        writeln!(out, "{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

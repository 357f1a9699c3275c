//! CSV ingestion and export.
//!
//! Format: UTF-8, comma-separated, optional header row (detected by a
//! non-numeric feature cell in the first row). The label column is
//! selectable; it defaults to the last column. Labels may be integers or
//! class strings and are canonicalized to `0..C-1` by first appearance.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Dataset;

fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        })?;
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            path: path.display().to_string(),
            row: i + 1,
            col: 0,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

fn is_numeric(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

fn parse_cell<T: Scalar>(path: &Path, cell: &str, row: usize, col: usize) -> Result<T> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
        path: path.display().to_string(),
        row,
        col,
        message: format!("non-numeric feature cell {cell:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Csv {
            path: path.display().to_string(),
            row,
            col,
            message: format!("non-finite feature value {cell:?}"),
        });
    }
    Ok(T::of(v))
}

fn check_arity(path: &Path, records: &[csv::StringRecord], width: usize) -> Result<()> {
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Csv {
                path: path.display().to_string(),
                row: i + 1,
                col: rec.len(),
                message: format!("ragged row: expected {width} cells, found {}", rec.len()),
            });
        }
    }
    Ok(())
}

/// Load a labeled dataset. `label_column` is 0-based; `None` selects the
/// last column.
pub fn load_csv<T: Scalar>(
    path: impl AsRef<Path>,
    label_column: Option<usize>,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let records = read_records(path)?;
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("csv file {}", path.display())));
    }
    let width = records[0].len();
    check_arity(path, &records, width)?;
    if width < 2 {
        return Err(Error::Csv {
            path: path.display().to_string(),
            row: 1,
            col: width,
            message: "need at least one feature column and one label column".into(),
        });
    }
    let label_col = label_column.unwrap_or(width - 1);
    if label_col >= width {
        return Err(Error::InvalidConfig(format!(
            "label column {label_col} out of range for {width} columns"
        )));
    }

    // Header iff some feature cell of the first row is non-numeric.
    let first_feature_cells_numeric = records[0]
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_col)
        .all(|(_, cell)| is_numeric(cell));
    let has_header = !first_feature_cells_numeric;
    let feature_names = if has_header {
        Some(
            records[0]
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != label_col)
                .map(|(_, c)| c.to_string())
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let data_rows = &records[usize::from(has_header)..];
    if data_rows.is_empty() {
        return Err(Error::EmptyInput(format!(
            "csv file {} has a header but no data rows",
            path.display()
        )));
    }

    let n = data_rows.len();
    let d = width - 1;
    let mut features = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    for (i, rec) in data_rows.iter().enumerate() {
        let row_no = i + 1;
        let mut out_col = 0usize;
        for (j, cell) in rec.iter().enumerate() {
            if j == label_col {
                let key = cell.trim().to_string();
                let next = label_ids.len();
                let id = *label_ids.entry(key).or_insert(next);
                labels.push(id);
            } else {
                features[(i, out_col)] = parse_cell(path, cell, row_no, j + 1)?;
                out_col += 1;
            }
        }
    }
    Dataset::new(features, labels, feature_names)
}

/// Load an unlabeled feature matrix (all columns numeric, optional header).
pub fn load_features_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<DMatrix<T>> {
    let path = path.as_ref();
    let records = read_records(path)?;
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("csv file {}", path.display())));
    }
    let width = records[0].len();
    check_arity(path, &records, width)?;
    let has_header = !records[0].iter().all(is_numeric);
    let data_rows = &records[usize::from(has_header)..];
    if data_rows.is_empty() {
        return Err(Error::EmptyInput(format!(
            "csv file {} has a header but no data rows",
            path.display()
        )));
    }
    let mut features = DMatrix::zeros(data_rows.len(), width);
    for (i, rec) in data_rows.iter().enumerate() {
        for (j, cell) in rec.iter().enumerate() {
            features[(i, j)] = parse_cell(path, cell, i + 1, j + 1)?;
        }
    }
    Ok(features)
}

fn format_scalar<T: Scalar>(v: T) -> String {
    // Rust's shortest round-trip formatting; exact on reload.
    format!("{}", v.to_f64_value())
}

/// Write a labeled dataset; label goes in the last column. A header is
/// emitted when feature names are present.
pub fn write_csv<T: Scalar>(dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    })?;
    let io_err = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    };
    if let Some(names) = &dataset.feature_names {
        let mut row = names.clone();
        row.push("label".to_string());
        writer.write_record(&row).map_err(io_err)?;
    }
    for i in 0..dataset.n_samples() {
        let mut row: Vec<String> = (0..dataset.dim())
            .map(|j| format_scalar(dataset.features[(i, j)]))
            .collect();
        row.push(dataset.labels[i].to_string());
        writer.write_record(&row).map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

/// Write an unlabeled feature matrix.
pub fn write_features_csv<T: Scalar>(features: &DMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    })?;
    for i in 0..features.nrows() {
        let row: Vec<String> = (0..features.ncols())
            .map(|j| format_scalar(features[(i, j)]))
            .collect();
        writer.write_record(&row).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        })?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

//! CSV reading and writing. UTF-8, header row, `.` decimal separator, row
//! order significant. Floats are written in Rust's shortest round-trip form,
//! so a write→read cycle reproduces every value bit for bit.

use crate::error::{CliError, Result};
use otmap::{Dataset, GroupedDataset};
use std::path::Path;

/// A parsed CSV: column names plus the numeric rows.
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn parse_cell(raw: &str, path: &Path, row: usize, col: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| CliError::BadCell {
        path: path.display().to_string(),
        row,
        column: col.to_string(),
        value: raw.to_string(),
    })
}

/// Reads every column as a float.
pub fn read_table(path: &Path) -> Result<CsvTable> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
        let mut row = Vec::with_capacity(headers.len());
        for (h, cell) in headers.iter().zip(record.iter()) {
            row.push(parse_cell(cell, path, i, h)?);
        }
        if row.len() != headers.len() {
            return Err(CliError::Csv(
                path.display().to_string(),
                format!("row {i} has {} cells, header has {}", row.len(), headers.len()),
            ));
        }
        rows.push(row);
    }
    Ok(CsvTable { headers, rows })
}

/// Reads a plain feature table.
pub fn read_dataset(path: &Path) -> Result<(Vec<String>, Dataset)> {
    let table = read_table(path)?;
    let ds = Dataset::new(table.rows)?;
    Ok((table.headers, ds))
}

/// Reads a table with a 0/1 sensitive-attribute column; the remaining
/// columns become the features.
pub fn read_grouped(path: &Path, sensitive_col: &str) -> Result<(Vec<String>, GroupedDataset)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let s_idx = headers
        .iter()
        .position(|h| h == sensitive_col)
        .ok_or_else(|| CliError::MissingColumn {
            path: path.display().to_string(),
            column: sensitive_col.to_string(),
        })?;
    let feature_headers: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != s_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
        let mut row = Vec::with_capacity(feature_headers.len());
        for (j, cell) in record.iter().enumerate() {
            if j == s_idx {
                let v = parse_cell(cell, path, i, &headers[j])?;
                if v != 0.0 && v != 1.0 {
                    return Err(CliError::BadSensitiveValue {
                        path: path.display().to_string(),
                        row: i,
                        value: cell.trim().to_string(),
                    });
                }
                labels.push(v as u8);
            } else {
                row.push(parse_cell(cell, path, i, &headers[j])?);
            }
        }
        rows.push(row);
    }
    let grouped = GroupedDataset::new(Dataset::new(rows)?, labels)?;
    Ok((feature_headers, grouped))
}

/// Writes a feature table; one header per column, shortest round-trip floats.
pub fn write_dataset(path: &Path, headers: &[String], ds: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
    writer
        .write_record(headers)
        .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
    for row in ds.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writer
            .write_record(&cells)
            .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
    Ok(())
}

/// Writes rows that mix the dataset with an extra integer column (repair
/// output keeps the sensitive attribute next to the repaired features).
pub fn write_dataset_with_labels(
    path: &Path,
    feature_headers: &[String],
    label_header: &str,
    ds: &Dataset,
    labels: &[u8],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
    let mut headers: Vec<String> = feature_headers.to_vec();
    headers.push(label_header.to_string());
    writer
        .write_record(&headers)
        .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
    for (row, &s) in ds.rows().zip(labels) {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        cells.push(s.to_string());
        writer
            .write_record(&cells)
            .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Csv(path.display().to_string(), e.to_string()))?;
    Ok(())
}

/// Reads the 0/1 labels produced by an external classifier for the two-phase
/// audit: columns `original` and `counterfactual`.
pub fn read_predictions(path: &Path) -> Result<(Vec<u8>, Vec<u8>)> {
    let table = read_table(path)?;
    let find = |name: &str| {
        table
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn {
                path: path.display().to_string(),
                column: name.to_string(),
            })
    };
    let oi = find("original")?;
    let ci = find("counterfactual")?;
    let mut orig = Vec::with_capacity(table.rows.len());
    let mut cf = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        for (idx, out) in [(oi, &mut orig), (ci, &mut cf)] {
            let v = row[idx];
            if v != 0.0 && v != 1.0 {
                return Err(CliError::BadPrediction {
                    path: path.display().to_string(),
                    row: i,
                    value: v,
                });
            }
            out.push(v as u8);
        }
    }
    Ok((orig, cf))
}

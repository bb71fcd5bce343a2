//! CSV formats: response matrices (first column respondent id, header row
//! item ids, empty cell or "NA" missing) and IRF tables (first column the
//! grid, one column per item).

use std::path::Path;
use std::sync::Arc;

use crate::error::{GpirtError, Result};
use crate::gp::ThetaGrid;
use crate::model::{recode, validate_responses, Coding, ResponseMatrix};
use crate::scoring::IRFTable;

/// Load, recode, and validate a response matrix.
pub fn load_responses_csv(path: &Path, coding: Coding) -> Result<ResponseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(e, path))?;

    let headers = reader.headers().map_err(|e| csv_error_at(e, 1))?.clone();
    if headers.len() < 2 {
        return Err(GpirtError::Parse {
            line: 1,
            message: "header must name a respondent column and at least one item".into(),
        });
    }
    let item_ids: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();

    let mut respondent_ids = Vec::new();
    let mut raw_cells: Vec<Option<i8>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| csv_error_at(e, line))?;
        if record.len() != headers.len() {
            return Err(GpirtError::Parse {
                line,
                message: format!(
                    "ragged row: {} fields, expected {}",
                    record.len(),
                    headers.len()
                ),
            });
        }
        respondent_ids.push(record[0].trim().to_string());
        for field in record.iter().skip(1) {
            let field = field.trim();
            if field.is_empty() || field.eq_ignore_ascii_case("na") {
                raw_cells.push(None);
            } else {
                let value: i8 = field.parse().map_err(|_| GpirtError::Parse {
                    line,
                    message: format!("cell '{field}' is not an integer response code"),
                })?;
                raw_cells.push(Some(value));
            }
        }
    }

    let cells = recode(&raw_cells, coding)?;
    validate_responses(ResponseMatrix::from_cells(respondent_ids, item_ids, cells)?)
}

/// Write a response matrix in the -1/+1 coding with empty cells for
/// missing responses.
pub fn write_responses_csv(data: &ResponseMatrix, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(e, path))?;
    let mut header = vec!["respondent".to_string()];
    header.extend(data.item_ids().iter().cloned());
    writer.write_record(&header).map_err(|e| csv_error(e, path))?;
    for r in 0..data.n_respondents() {
        let mut row = vec![data.respondent_ids()[r].clone()];
        for i in 0..data.n_items() {
            row.push(match data.get(r, i) {
                Some(v) => v.to_string(),
                None => String::new(),
            });
        }
        writer.write_record(&row).map_err(|e| csv_error(e, path))?;
    }
    writer.flush()?;
    Ok(())
}

/// Write an IRF table: column one is the grid, then one probability
/// column per item at full round-trip precision.
pub fn write_irf_csv(irfs: &IRFTable, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(e, path))?;
    let mut header = vec!["theta".to_string()];
    header.extend(irfs.items().iter().cloned());
    writer.write_record(&header).map_err(|e| csv_error(e, path))?;
    for (k, &theta) in irfs.grid().points().iter().enumerate() {
        let mut row = vec![format!("{theta}")];
        for i in 0..irfs.n_items() {
            row.push(format!("{}", irfs.row(i)[k]));
        }
        writer.write_record(&row).map_err(|e| csv_error(e, path))?;
    }
    writer.flush()?;
    Ok(())
}

/// Read an IRF table written by [`write_irf_csv`]. The grid is
/// reconstructed from the theta column.
pub fn read_irf_csv(path: &Path) -> Result<IRFTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(e, path))?;
    let headers = reader.headers().map_err(|e| csv_error_at(e, 1))?.clone();
    if headers.len() < 2 || &headers[0] != "theta" {
        return Err(GpirtError::Format(
            "IRF table must start with a 'theta' column".into(),
        ));
    }
    let items: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    let mut thetas = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); items.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| csv_error_at(e, line))?;
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| GpirtError::Parse {
                line,
                message: format!("'{s}' is not a number"),
            })
        };
        thetas.push(parse(&record[0])?);
        for (i, col) in columns.iter_mut().enumerate() {
            col.push(parse(&record[i + 1])?);
        }
    }
    if thetas.len() < 2 {
        return Err(GpirtError::Format("IRF table needs at least two rows".into()));
    }
    let step = thetas[1] - thetas[0];
    let grid = ThetaGrid::new(thetas[0], *thetas.last().unwrap(), step)?;
    if grid.len() != thetas.len() {
        return Err(GpirtError::Format(
            "IRF table grid is not evenly spaced".into(),
        ));
    }
    IRFTable::new(Arc::new(grid), items, columns)
}

fn csv_error(e: csv::Error, path: &Path) -> GpirtError {
    GpirtError::Parse {
        line: 0,
        message: format!("{}: {e}", path.display()),
    }
}

fn csv_error_at(e: csv::Error, line: usize) -> GpirtError {
    GpirtError::Parse {
        line,
        message: e.to_string(),
    }
}

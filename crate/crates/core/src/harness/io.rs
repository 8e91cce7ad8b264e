//! CSV datasets: one column per input coordinate named `x0, x1, …` and an
//! optional label column `y`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::points::Points;

pub struct Dataset {
    pub xs: Points,
    pub y: Option<Vec<f64>>,
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let x_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| headers[i].trim().starts_with('x'))
        .collect();
    if x_cols.is_empty() {
        return Err(Error::contract(format!(
            "{}: no input columns (expected headers x0, x1, …)",
            path.display()
        )));
    }
    let y_col = (0..headers.len()).find(|&i| headers[i].trim() == "y");
    let mut data = Vec::new();
    let mut y = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::contract(format!("{} row {}: {e}", path.display(), line + 1)))
        };
        for &c in &x_cols {
            data.push(parse(c)?);
        }
        if let Some(c) = y_col {
            y.push(parse(c)?);
        }
    }
    Ok(Dataset {
        xs: Points::new(x_cols.len(), data)?,
        y: y_col.map(|_| y),
    })
}

pub fn write_dataset(path: &Path, xs: &Points, y: Option<&[f64]>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..xs.dim()).map(|i| format!("x{i}")).collect();
    if y.is_some() {
        header.push("y".into());
    }
    writer.write_record(&header)?;
    for (i, x) in xs.iter().enumerate() {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        if let Some(y) = y {
            row.push(y[i].to_string());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

//! Delimited text input with a header row.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("input is empty")]
    Empty,
    #[error("malformed delimited text: {0}")]
    Malformed(String),
    #[error("column {name:?} not found; available columns: {available:?}")]
    MissingColumn {
        name: String,
        available: Vec<String>,
    },
    #[error("row {row}, column {column:?}: {value:?} is not a finite number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
}

/// Raw table: header names and string cells, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Tab if the header line contains one, otherwise comma.
pub fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

pub fn parse_table(text: &str) -> Result<Table, DataError> {
    if text.trim().is_empty() {
        return Err(DataError::Empty);
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Malformed(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if let Some(dup) = headers
        .iter()
        .enumerate()
        .find_map(|(i, h)| headers[..i].contains(h).then_some(h))
    {
        return Err(DataError::Malformed(format!("duplicate column {dup:?}")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Malformed(e.to_string()))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(Table { headers, rows })
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize, DataError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                name: name.to_string(),
                available: self.headers.clone(),
            })
    }

    /// Numeric column by name. Rows are numbered from 1, excluding the header.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>, DataError> {
        let j = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let cell = row.get(j).map(String::as_str).unwrap_or("");
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DataError::NonNumeric {
                        row: i + 1,
                        column: name.to_string(),
                        value: cell.to_string(),
                    })
            })
            .collect()
    }
}

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// `n` observations, each a fixed-width row of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    column_names: Vec<String>,
    values: Vec<f64>,
    width: usize,
}

impl Dataset {
    /// Builds a dataset from row-major values. Requires at least two rows,
    /// a positive width and finite entries.
    pub fn from_flat(column_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let width = column_names.len();
        if width == 0 {
            return Err(Error::InvalidDataset("no columns".into()));
        }
        if !values.len().is_multiple_of(width) {
            return Err(Error::InvalidDataset(format!(
                "{} values do not fill rows of width {width}",
                values.len()
            )));
        }
        let n = values.len() / width;
        if n < 2 {
            return Err(Error::SampleSizeTooSmall(n));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value {} in row {}, column '{}'",
                values[pos],
                pos / width,
                column_names[pos % width]
            )));
        }
        Ok(Self { column_names, values, width })
    }

    pub fn from_rows(column_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let width = column_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::InvalidDataset(format!(
                "row {bad} has {} fields, expected {width}",
                rows[bad].len()
            )));
        }
        Self::from_flat(column_names, rows.concat())
    }

    /// Single-column dataset.
    pub fn from_column(name: &str, values: Vec<f64>) -> Result<Self> {
        Self::from_flat(vec![name.to_string()], values)
    }

    /// Strict CSV ingestion: a header row, one observation per line, decimal
    /// reals only. `NaN`/`inf` tokens and empty fields are rejected.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let column_names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut values = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            for (col, field) in record.iter().enumerate() {
                values.push(parse_strict(field).ok_or_else(|| {
                    Error::InvalidDataset(format!(
                        "record {}: column '{}' has invalid value '{field}'",
                        line + 1,
                        column_names.get(col).map(String::as_str).unwrap_or("?")
                    ))
                })?);
            }
        }
        Self::from_flat(column_names, values)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::DataIo { path: path.to_path_buf(), source })?;
        Self::from_csv_reader(file)
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.width)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_names.iter().position(|c| c == name)?;
        Some(self.rows().map(|r| r[j]).collect())
    }

    /// Copy with rows reordered by `order` (a permutation of `0..n`).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(self.values.len());
        for &i in order {
            values.extend_from_slice(self.row(i));
        }
        Self::from_flat(self.column_names.clone(), values)
    }
}

fn parse_strict(field: &str) -> Option<f64> {
    let ok = !field.is_empty()
        && field
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    if !ok {
        return None;
    }
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

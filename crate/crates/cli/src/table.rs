//! Minimal CSV tables with column lookup by name.

use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(path, &bytes)
    }

    pub fn parse(path: &Path, bytes: &[u8]) -> Result<Self, CliError> {
        let schema = |reason: String| CliError::Schema {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(bytes);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| schema(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| schema(e.to_string()))?;
            rows.push(record.iter().map(str::to_owned).collect());
        }
        Ok(Self {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Schema {
                path: self.path.clone(),
                reason: format!("missing column `{name}`"),
            })
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    /// Fails unless the header is exactly `expected`, naming the first offending column.
    pub fn require_header(&self, expected: &[&str]) -> Result<(), CliError> {
        for name in expected {
            self.column(name)?;
        }
        if self.header != expected {
            return Err(CliError::Schema {
                path: self.path.clone(),
                reason: format!("columns out of order, expected `{}`", expected.join(",")),
            });
        }
        Ok(())
    }

    pub fn real(&self, row: usize, col: usize) -> Result<f64, CliError> {
        let cell = &self.rows[row][col];
        cell.parse().map_err(|_| CliError::Schema {
            path: self.path.clone(),
            reason: format!(
                "row {}: column `{}` holds `{cell}`, not a number",
                row + 2,
                self.header[col]
            ),
        })
    }
}

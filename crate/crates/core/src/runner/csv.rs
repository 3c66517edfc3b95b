use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Numeric table written as comma-separated text with CRLF line endings.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn add_column(&mut self, name: &str, values: &[f64]) -> Result<()> {
        if values.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                found: values.len(),
            });
        }
        self.header.push(name.to_string());
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.push(*v);
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push_str("\r\n");
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push_str("\r\n");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Domain("empty csv".into()))?
            .split(',')
            .map(|h| h.trim().to_string())
            .collect();
        let mut table = Self::new(header);
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Domain(format!("csv row {}: {e}", i + 2)))?;
            if row.len() != table.header.len() {
                return Err(Error::DimensionMismatch {
                    expected: table.header.len(),
                    found: row.len(),
                });
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        fs::write(path, self.render())?;
        Ok(path.to_path_buf())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_and_parse_round_trip() {
        let mut t = CsvTable::new(vec!["t".into(), "x".into()]);
        t.push(vec![0.0, 1.5]);
        t.push(vec![0.1, -2.0e-17]);
        let text = t.render();
        assert_eq!(text, "t,x\r\n0e0,1.5e0\r\n1e-1,-2e-17\r\n");
        assert_eq!(CsvTable::parse(&text).unwrap(), t);
        assert_eq!(t.column("x").unwrap(), vec![1.5, -2.0e-17]);
    }

    #[test]
    fn add_column_checks_length() {
        let mut t = CsvTable::new(vec!["t".into()]);
        t.push(vec![0.0]);
        assert!(t.add_column("y", &[1.0, 2.0]).is_err());
        t.add_column("y", &[3.0]).unwrap();
        assert_eq!(t.rows[0], vec![0.0, 3.0]);
    }
}

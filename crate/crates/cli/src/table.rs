//! In-memory CSV tables.

use crate::error::{CliError, CliResult};

/// Column excluded from replay comparison.
pub const WALL_COLUMN: &str = "wall_ms";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Values of column `name`, one per row.
    pub fn values(&self, name: &str) -> Vec<&str> {
        match self.column(name) {
            Some(c) => self.rows.iter().map(|r| r[c].as_str()).collect(),
            None => Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn from_csv(text: &str) -> CliResult<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r
            .headers()
            .map_err(|e| CliError::Validation(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(|e| CliError::Validation(e.to_string()))?.iter().map(String::from).collect());
        }
        Ok(Table { headers, rows })
    }

    /// The table without the wall-clock column.
    pub fn deterministic(&self) -> Table {
        let keep: Vec<usize> = (0..self.headers.len()).filter(|&i| self.headers[i] != WALL_COLUMN).collect();
        Table {
            headers: keep.iter().map(|&i| self.headers[i].clone()).collect(),
            rows: self.rows.iter().map(|r| keep.iter().map(|&i| r[i].clone()).collect()).collect(),
        }
    }
}

/// Compare two tables outside the wall-clock column; describes the first
/// difference.
pub fn first_difference(expected: &Table, actual: &Table) -> Option<String> {
    let (a, b) = (expected.deterministic(), actual.deterministic());
    if a.headers != b.headers {
        return Some(format!("header: expected {:?}, got {:?}", a.headers, b.headers));
    }
    for (i, (x, y)) in a.rows.iter().zip(&b.rows).enumerate() {
        if x != y {
            return Some(format!("row {}: expected {}, got {}", i + 1, x.join(","), y.join(",")));
        }
    }
    if a.rows.len() != b.rows.len() {
        return Some(format!("expected {} rows, got {}", a.rows.len(), b.rows.len()));
    }
    None
}

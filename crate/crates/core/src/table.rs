//! Column-labelled numeric tables used for every data export.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Panics if the row width differs from the header; rows are built by
    /// this crate, so a mismatch is a bug.
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Multiplies the named columns by `factor` (unit conversion).
    pub fn scale_columns(&mut self, names: &[&str], factor: f64) {
        let idx: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| names.contains(&c.as_str()))
            .map(|(i, _)| i)
            .collect();
        for row in &mut self.rows {
            for &i in &idx {
                row[i] *= factor;
            }
        }
    }

    /// Concatenates rows of tables sharing a header.
    pub fn concat(tables: impl IntoIterator<Item = Table>) -> Option<Table> {
        let mut iter = tables.into_iter();
        let mut first = iter.next()?;
        for t in iter {
            if t.columns != first.columns {
                return None;
            }
            first.rows.extend(t.rows);
        }
        Some(first)
    }
}

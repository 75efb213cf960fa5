//! In-memory analysis tables: the data surface shared by the cube, the
//! mining algorithms, the analysis-process engine and deployment.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;
use crate::scalar::Scalar;

/// Semantic type of a column. Everything except `Categorical` holds numbers;
/// the variants differ only in how values are formatted on output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    Money,
    Probability,
    Integer,
}

impl ColumnKind {
    pub fn is_numeric(self) -> bool {
        !matches!(self, ColumnKind::Categorical)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Column { name: name.into(), kind }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical)
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Numeric)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell<F> {
    Num(F),
    Text(String),
}

impl<F: Scalar> Cell<F> {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_num(&self) -> Option<F> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            Cell::Num(_) => None,
        }
    }

    /// Number held by the cell, parsing text cells that hold a decimal number.
    pub fn coerce_num(&self) -> Option<F> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(s) => s.trim().parse::<f64>().ok().map(F::of),
        }
    }

    /// Canonical text for the cell under the given column kind.
    pub fn format(&self, kind: ColumnKind) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => format_number(*v, kind),
        }
    }
}

/// Output formatting per column kind. Probabilities keep five decimals with
/// trailing zeros dropped (`0.78571`, `0.75`, `1`); money prints as a plain
/// decimal; numeric columns use the shortest round-trip representation.
pub fn format_number<F: Scalar>(v: F, kind: ColumnKind) -> String {
    let x = v.as_f64();
    match kind {
        ColumnKind::Probability => format_probability(x),
        ColumnKind::Money => match Money::from_f64(x) {
            Some(m) => m.to_string(),
            None => format!("{v}"),
        },
        ColumnKind::Integer => format!("{}", x.round() as i64),
        ColumnKind::Numeric | ColumnKind::Categorical => format!("{v}"),
    }
}

pub fn format_probability(p: f64) -> String {
    let s = format!("{p:.5}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("row has {got} cells, table has {expected} columns")]
    Arity { expected: usize, got: usize },
    #[error("column `{column}` expects {expected} cells")]
    CellKind { column: String, expected: &'static str },
}

/// Read access to named attribute values, implemented by table rows and
/// free-standing records.
pub trait AttributeSource<F> {
    fn attribute(&self, name: &str) -> Option<&Cell<F>>;
}

/// A free-standing record keyed by attribute name.
pub type Record<F> = BTreeMap<String, Cell<F>>;

impl<F> AttributeSource<F> for BTreeMap<String, Cell<F>> {
    fn attribute(&self, name: &str) -> Option<&Cell<F>> {
        self.get(name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table<F> {
    columns: Vec<Column>,
    rows: Vec<Vec<Cell<F>>>,
}

#[derive(Clone, Copy, Debug)]
pub struct RowRef<'a, F> {
    table: &'a Table<F>,
    index: usize,
}

impl<'a, F> RowRef<'a, F> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn cells(&self) -> &'a [Cell<F>] {
        &self.table.rows[self.index]
    }
}

impl<F> AttributeSource<F> for RowRef<'_, F> {
    fn attribute(&self, name: &str) -> Option<&Cell<F>> {
        let c = self.table.columns.iter().position(|c| c.name == name)?;
        Some(&self.table.rows[self.index][c])
    }
}

impl<F: Scalar> Table<F> {
    pub fn new(columns: Vec<Column>) -> Result<Self, TableError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(TableError::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(Table { columns, rows: Vec::new() })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize, TableError> {
        self.column_index(name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn rows(&self) -> &[Vec<Cell<F>>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, index: usize) -> RowRef<'_, F> {
        assert!(index < self.rows.len(), "row {index} out of range");
        RowRef { table: self, index }
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = RowRef<'_, F>> {
        (0..self.rows.len()).map(move |index| RowRef { table: self, index })
    }

    pub fn record(&self, index: usize) -> Record<F> {
        self.columns
            .iter()
            .zip(&self.rows[index])
            .map(|(c, v)| (c.name.clone(), v.clone()))
            .collect()
    }

    pub fn push_row(&mut self, row: Vec<Cell<F>>) -> Result<(), TableError> {
        if row.len() != self.columns.len() {
            return Err(TableError::Arity { expected: self.columns.len(), got: row.len() });
        }
        for (c, v) in self.columns.iter().zip(&row) {
            let ok = match (c.kind, v) {
                (ColumnKind::Categorical, Cell::Text(_)) => true,
                (k, Cell::Num(_)) => k.is_numeric(),
                _ => false,
            };
            if !ok {
                let expected = if c.kind.is_numeric() { "numeric" } else { "text" };
                return Err(TableError::CellKind { column: c.name.clone(), expected });
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Column values as text, formatted per column kind.
    pub fn formatted_row(&self, index: usize) -> Vec<String> {
        self.columns
            .iter()
            .zip(&self.rows[index])
            .map(|(c, v)| v.format(c.kind))
            .collect()
    }

    /// New table with the listed columns in the listed order.
    pub fn select(&self, names: &[impl AsRef<str>]) -> Result<Self, TableError> {
        let idx = names
            .iter()
            .map(|n| self.require_column(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let columns = idx.iter().map(|&i| self.columns[i].clone()).collect();
        let mut out = Table::new(columns)?;
        out.rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
            .collect();
        Ok(out)
    }

    /// New table holding the given rows in the given order.
    pub fn take_rows(&self, indices: &[usize]) -> Self {
        Table {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn filter_rows(&self, mut keep: impl FnMut(RowRef<'_, F>) -> bool) -> Self {
        let idx: Vec<usize> = self.iter_rows().filter(|r| keep(*r)).map(|r| r.index).collect();
        self.take_rows(&idx)
    }

    /// Appends a column computed per row.
    pub fn with_column(
        &self,
        column: Column,
        values: Vec<Cell<F>>,
    ) -> Result<Self, TableError> {
        if self.column_index(&column.name).is_some() {
            return Err(TableError::DuplicateColumn(column.name));
        }
        if values.len() != self.rows.len() {
            return Err(TableError::Arity { expected: self.rows.len(), got: values.len() });
        }
        let mut columns = self.columns.clone();
        columns.push(column);
        let mut out = Table::new(columns)?;
        for (r, v) in self.rows.iter().zip(values) {
            let mut row = r.clone();
            row.push(v);
            out.push_row(row)?;
        }
        Ok(out)
    }

    pub fn numeric_column(&self, name: &str) -> Result<Vec<F>, TableError> {
        let c = self.require_column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].coerce_num().ok_or_else(|| TableError::CellKind {
                    column: name.to_string(),
                    expected: "numeric",
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table<f64> {
        let mut t = Table::new(vec![
            Column::categorical("VENDOR"),
            Column::new("AMOUNT", ColumnKind::Money),
        ])
        .unwrap();
        t.push_row(vec![Cell::text("114033"), Cell::Num(100000.0)]).unwrap();
        t.push_row(vec![Cell::text("200710"), Cell::Num(1853.5)]).unwrap();
        t
    }

    #[test]
    fn probability_formatting_matches_result_layout() {
        assert_eq!(format_probability(11.0 / 14.0), "0.78571");
        assert_eq!(format_probability(1.0), "1");
        assert_eq!(format_probability(0.2), "0.2");
        assert_eq!(format_probability(0.75), "0.75");
        assert_eq!(format_probability(11.0 / 23.0), "0.47826");
        assert_eq!(format_probability(0.0), "0");
    }

    #[test]
    fn push_row_checks_kinds_and_arity() {
        let mut t = sample();
        assert!(matches!(
            t.push_row(vec![Cell::Num(1.0), Cell::Num(1.0)]),
            Err(TableError::CellKind { .. })
        ));
        assert!(matches!(t.push_row(vec![Cell::text("x")]), Err(TableError::Arity { .. })));
    }

    #[test]
    fn select_and_format() {
        let t = sample();
        let s = t.select(&["AMOUNT"]).unwrap();
        assert_eq!(s.formatted_row(1), vec!["1853.50"]);
        assert!(matches!(t.select(&["NOPE"]), Err(TableError::UnknownColumn(_))));
    }

    #[test]
    fn duplicate_columns_rejected() {
        let err = Table::<f64>::new(vec![Column::numeric("A"), Column::numeric("A")]).unwrap_err();
        assert_eq!(err, TableError::DuplicateColumn("A".into()));
    }

    #[test]
    fn row_ref_resolves_attributes() {
        let t = sample();
        let r = t.row(0);
        assert_eq!(r.attribute("VENDOR"), Some(&Cell::text("114033")));
        assert_eq!(r.attribute("missing"), None);
    }
}

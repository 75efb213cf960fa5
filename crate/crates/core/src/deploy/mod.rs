//! Deployment surfaces: delimited result files, chart files with a text
//! fallback, and a JSON-lines report feed.

mod chart;

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::table::{Cell, Column, ColumnKind, Table, TableError};

pub use chart::{render_chart, render_svg, render_text, ChartData, ChartFiles, ChartKind, ChartSpec};

#[derive(Debug, Error)]
pub enum DeployError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot render chart: {0}")]
    Render(String),
    #[error("report feed line {line}: {reason}")]
    Feed { line: usize, reason: String },
    #[error(transparent)]
    Table(#[from] TableError),
}

impl DeployError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        DeployError::Io { path: path.to_path_buf(), source }
    }
}

/// Output column families added by model-apply steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelColumn {
    TreeNode,
    TreeProbability,
    TreeValue,
    Cluster,
    Score,
}

impl ModelColumn {
    pub fn prefix(self) -> &'static str {
        match self {
            ModelColumn::TreeNode => "DT_PRED_NODE",
            ModelColumn::TreeProbability => "DT_PRED_PROB",
            ModelColumn::TreeValue => "DT_PRED_VAL",
            ModelColumn::Cluster => "CL_PRED_CLUSTER",
            ModelColumn::Score => "SC_SCORE",
        }
    }

    /// Column name for the model at 1-based position `index`, e.g.
    /// `DT_PRED_VAL002`.
    pub fn name(self, index: usize) -> String {
        format!("{}{index:03}", self.prefix())
    }
}

/// Delimited text of `table`: header row, then one line per row with cells
/// formatted per column kind.
pub fn to_flat_string<F: Scalar>(table: &Table<F>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(table.column_names()).expect("in-memory write");
    for i in 0..table.len() {
        w.write_record(table.formatted_row(i)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are utf-8")
}

pub fn write_flat_file<F: Scalar>(table: &Table<F>, destination: &Path) -> Result<PathBuf, DeployError> {
    if let Some(dir) = destination.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DeployError::io(dir, e))?;
    }
    fs::write(destination, to_flat_string(table)).map_err(|e| DeployError::io(destination, e))?;
    Ok(destination.to_path_buf())
}

/// Parses a delimited result file. All columns come back categorical, so
/// writing the result again reproduces the file byte for byte.
pub fn read_flat_file<F: Scalar>(path: &Path) -> Result<Table<F>, DeployError> {
    let text = fs::read_to_string(path).map_err(|e| DeployError::io(path, e))?;
    parse_flat(&text)
}

pub fn parse_flat<F: Scalar>(text: &str) -> Result<Table<F>, DeployError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<Column> = r.headers()?.iter().map(Column::categorical).collect();
    let mut t = Table::new(header)?;
    for rec in r.records() {
        t.push_row(rec?.iter().map(Cell::text).collect())?;
    }
    Ok(t)
}

fn json_value<F: Scalar>(cell: &Cell<F>, kind: ColumnKind) -> Value {
    match cell {
        Cell::Text(s) => Value::String(s.clone()),
        Cell::Num(v) => {
            let v = v.as_f64();
            if kind == ColumnKind::Integer && v.fract() == 0.0 && v.abs() < 9.0e15 {
                Value::Number((v as i64).into())
            } else {
                Number::from_f64(v).map_or(Value::Null, Value::Number)
            }
        }
    }
}

/// One JSON object per row, keys in column order, numbers as JSON numbers
/// (integers for integer columns).
pub fn report_feed<F: Scalar>(table: &Table<F>, out: &mut impl Write) -> io::Result<()> {
    for row in table.rows() {
        let obj: Map<String, Value> =
            table.columns().iter().zip(row).map(|(c, v)| (c.name.clone(), json_value(v, c.kind))).collect();
        serde_json::to_writer(&mut *out, &obj)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn report_feed_string<F: Scalar>(table: &Table<F>) -> String {
    let mut buf = Vec::new();
    report_feed(table, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Reads a report feed back into records, preserving key order.
pub fn read_report_feed(input: impl BufRead) -> Result<Vec<Map<String, Value>>, DeployError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| DeployError::Feed { line: i + 1, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value =
            serde_json::from_str(&line).map_err(|e| DeployError::Feed { line: i + 1, reason: e.to_string() })?;
        match v {
            Value::Object(m) => out.push(m),
            _ => return Err(DeployError::Feed { line: i + 1, reason: "expected an object".into() }),
        }
    }
    Ok(out)
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Characteristic, Cube, CubeError, KEY_FIGURE};
use crate::money::Money;
use crate::scalar::Scalar;
use crate::table::{Cell, Column, ColumnKind, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Sum,
    Count,
    Mean,
}

impl Aggregate {
    pub fn column_name(self) -> String {
        match self {
            Aggregate::Sum => format!("SUM_{KEY_FIGURE}"),
            Aggregate::Count => "COUNT".to_string(),
            Aggregate::Mean => format!("MEAN_{KEY_FIGURE}"),
        }
    }
}

impl std::str::FromStr for Aggregate {
    type Err = CubeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" => Ok(Aggregate::Sum),
            "count" => Ok(Aggregate::Count),
            "mean" => Ok(Aggregate::Mean),
            other => Err(CubeError::Query(format!("unknown aggregate `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Filter {
    /// Keep facts whose value is in the set.
    In(Characteristic, BTreeSet<String>),
    /// Keep facts whose value lies in `[from, to]` under string order; for
    /// `YYYYMMDD` dates this is date order.
    Range(Characteristic, String, String),
}

impl Filter {
    fn characteristic(&self) -> Characteristic {
        match self {
            Filter::In(c, _) | Filter::Range(c, _, _) => *c,
        }
    }

    fn accepts(&self, v: &str) -> bool {
        match self {
            Filter::In(_, set) => set.contains(v),
            Filter::Range(_, lo, hi) => lo.as_str() <= v && v <= hi.as_str(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub group_by: Vec<Characteristic>,
    pub filters: Vec<Filter>,
    pub aggregate: Aggregate,
}

impl QuerySpec {
    pub fn new(group_by: Vec<Characteristic>, aggregate: Aggregate) -> Self {
        QuerySpec { group_by, filters: Vec::new(), aggregate }
    }

    pub fn filter(mut self, f: Filter) -> Self {
        self.filters.push(f);
        self
    }

    /// Builds a spec from characteristic names; unknown names fail.
    pub fn parse(
        group_by: &[impl AsRef<str>],
        aggregate: &str,
    ) -> Result<Self, CubeError> {
        Ok(QuerySpec::new(super::parse_characteristics(group_by)?, aggregate.parse()?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregateValue {
    Money(Money),
    Count(u64),
}

impl std::fmt::Display for AggregateValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AggregateValue::Money(m) => write!(f, "{m}"),
            AggregateValue::Count(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRow {
    pub groups: Vec<String>,
    pub value: AggregateValue,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub group_by: Vec<Characteristic>,
    pub aggregate: Aggregate,
    pub rows: Vec<QueryRow>,
}

impl QueryResult {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = self.group_by.iter().map(|c| c.technical_name().to_string()).collect();
        h.push(self.aggregate.column_name());
        h
    }

    pub fn to_table<F: Scalar>(&self) -> Table<F> {
        let kind = match self.aggregate {
            Aggregate::Count => ColumnKind::Integer,
            Aggregate::Sum | Aggregate::Mean => ColumnKind::Money,
        };
        let mut cols: Vec<Column> =
            self.group_by.iter().map(|c| Column::categorical(c.technical_name())).collect();
        cols.push(Column::new(self.aggregate.column_name(), kind));
        let mut t = Table::new(cols).expect("distinct group columns");
        for r in &self.rows {
            let mut row: Vec<Cell<F>> = r.groups.iter().map(Cell::text).collect();
            row.push(Cell::Num(F::of(match r.value {
                AggregateValue::Money(m) => m.to_f64(),
                AggregateValue::Count(n) => n as f64,
            })));
            t.push_row(row).expect("row matches header");
        }
        t
    }

    /// Column-aligned text rendering.
    pub fn to_text(&self) -> String {
        let header = self.header();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = r.groups.clone();
                v.push(r.value.to_string());
                v
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for r in &body {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let last = widths.len() - 1;
        let line = |out: &mut String, cells: &[String]| {
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    out.push_str("  ");
                }
                if i == last {
                    let _ = write!(out, "{c:>w$}");
                } else {
                    let _ = write!(out, "{c:<w$}");
                }
            }
            out.push('\n');
        };
        line(&mut out, &header);
        for r in &body {
            line(&mut out, r);
        }
        out
    }

    /// Comma-separated rendering with a header row.
    pub fn to_delimited(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for r in &self.rows {
            let mut rec = r.groups.clone();
            rec.push(r.value.to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

impl Cube {
    /// Grouped aggregation over the fact table. Rows come back ordered by
    /// group values; sums are exact.
    pub fn query(&self, spec: &QuerySpec) -> Result<QueryResult, CubeError> {
        let mut seen = BTreeSet::new();
        if let Some(dup) = spec.group_by.iter().find(|c| !seen.insert(**c)) {
            return Err(CubeError::Query(format!("{dup} grouped twice")));
        }
        let mut groups: BTreeMap<Vec<String>, (Money, u64)> = BTreeMap::new();
        for f in self.facts() {
            if !spec.filters.iter().all(|flt| flt.accepts(self.value(f, flt.characteristic()))) {
                continue;
            }
            let key = spec.group_by.iter().map(|c| self.value(f, *c).to_string()).collect();
            let slot = groups.entry(key).or_insert((Money::ZERO, 0));
            slot.0 += f.amount;
            slot.1 += 1;
        }
        let rows = groups
            .into_iter()
            .map(|(groups, (sum, n))| QueryRow {
                groups,
                value: match spec.aggregate {
                    Aggregate::Sum => AggregateValue::Money(sum),
                    Aggregate::Count => AggregateValue::Count(n),
                    Aggregate::Mean => {
                        AggregateValue::Money(Money::mean(sum, n).expect("groups are non-empty"))
                    }
                },
            })
            .collect();
        Ok(QueryResult { group_by: spec.group_by.clone(), aggregate: spec.aggregate, rows })
    }
}

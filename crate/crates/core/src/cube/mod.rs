//! Star-schema cash-flow cube: three dimension tables around one fact
//! table carrying a single additive key figure.
//!
//! | dimension   | characteristics                                   |
//! |-------------|---------------------------------------------------|
//! | `ZFI_CASH1` | `ZBUSNHEAD`, `0AC_DOC_NO`, `0COMP_CODE`           |
//! | `ZFI_CASH2` | `0GL_ACCOUNT`, `0CHRT_ACCTS`, `0PSTNG_DATE`       |
//! | `ZFI_CASH3` | `0DEBITOR`, `0CREDITOR`                           |
//!
//! Key figure: `ZAMOUNT1`, exact fixed-point money.

mod query;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use query::{Aggregate, AggregateValue, Filter, QueryResult, QueryRow, QuerySpec};

use crate::money::Money;
use crate::scalar::Scalar;
use crate::staging::DsoRecord;
use crate::table::{Cell, Column, ColumnKind, Table};

pub const KEY_FIGURE: &str = "ZAMOUNT1";
/// Value stored for an absent vendor or customer.
pub const NOT_ASSIGNED: &str = "#";

#[derive(Debug, Error)]
pub enum CubeError {
    #[error("unknown characteristic `{0}`")]
    UnknownCharacteristic(String),
    #[error("invalid query: {0}")]
    Query(String),
    #[error("corrupt cube data: {0}")]
    Corrupt(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("delimited file error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "ZFI_CASH1")]
    BusinessHead,
    #[serde(rename = "ZFI_CASH2")]
    GlAccount,
    #[serde(rename = "ZFI_CASH3")]
    Partner,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::BusinessHead, Dimension::GlAccount, Dimension::Partner];

    pub fn technical_name(self) -> &'static str {
        match self {
            Dimension::BusinessHead => "ZFI_CASH1",
            Dimension::GlAccount => "ZFI_CASH2",
            Dimension::Partner => "ZFI_CASH3",
        }
    }

    pub fn characteristics(self) -> &'static [Characteristic] {
        use Characteristic::*;
        match self {
            Dimension::BusinessHead => &[BusinessHead, DocumentNo, CompanyCode],
            Dimension::GlAccount => &[GlAccount, ChartOfAccounts, PostingDate],
            Dimension::Partner => &[Customer, Vendor],
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Characteristic {
    BusinessHead,
    DocumentNo,
    CompanyCode,
    GlAccount,
    ChartOfAccounts,
    PostingDate,
    Customer,
    Vendor,
}

impl Characteristic {
    pub const ALL: [Characteristic; 8] = [
        Characteristic::BusinessHead,
        Characteristic::DocumentNo,
        Characteristic::CompanyCode,
        Characteristic::GlAccount,
        Characteristic::ChartOfAccounts,
        Characteristic::PostingDate,
        Characteristic::Customer,
        Characteristic::Vendor,
    ];

    pub fn technical_name(self) -> &'static str {
        match self {
            Characteristic::BusinessHead => "ZBUSNHEAD",
            Characteristic::DocumentNo => "0AC_DOC_NO",
            Characteristic::CompanyCode => "0COMP_CODE",
            Characteristic::GlAccount => "0GL_ACCOUNT",
            Characteristic::ChartOfAccounts => "0CHRT_ACCTS",
            Characteristic::PostingDate => "0PSTNG_DATE",
            Characteristic::Customer => "0DEBITOR",
            Characteristic::Vendor => "0CREDITOR",
        }
    }

    pub fn alias(self) -> &'static str {
        match self {
            Characteristic::BusinessHead => "business_head",
            Characteristic::DocumentNo => "document_no",
            Characteristic::CompanyCode => "company_code",
            Characteristic::GlAccount => "gl_account",
            Characteristic::ChartOfAccounts => "chart_of_accounts",
            Characteristic::PostingDate => "posting_date",
            Characteristic::Customer => "customer",
            Characteristic::Vendor => "vendor",
        }
    }

    pub fn dimension(self) -> Dimension {
        Dimension::ALL
            .into_iter()
            .find(|d| d.characteristics().contains(&self))
            .expect("every characteristic has a dimension")
    }

    /// Position of the characteristic within its dimension row.
    fn slot(self) -> usize {
        self.dimension()
            .characteristics()
            .iter()
            .position(|c| *c == self)
            .expect("characteristic belongs to its dimension")
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.technical_name())
    }
}

impl FromStr for Characteristic {
    type Err = CubeError;

    /// Accepts technical names (`0GL_ACCOUNT`) and aliases (`gl_account`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Characteristic::ALL
            .into_iter()
            .find(|c| c.technical_name().eq_ignore_ascii_case(t) || c.alias().eq_ignore_ascii_case(t))
            .ok_or_else(|| CubeError::UnknownCharacteristic(t.to_string()))
    }
}

/// Company code to chart of accounts. Unlisted company codes map to
/// `default`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartOfAccountsMap {
    pub default: String,
    #[serde(default)]
    pub by_company: BTreeMap<String, String>,
}

impl Default for ChartOfAccountsMap {
    fn default() -> Self {
        ChartOfAccountsMap { default: "CAIN".to_string(), by_company: BTreeMap::new() }
    }
}

impl ChartOfAccountsMap {
    pub fn resolve(&self, company_code: &str) -> &str {
        self.by_company.get(company_code).unwrap_or(&self.default)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct DimensionTable {
    rows: Vec<Vec<String>>,
    index: HashMap<Vec<String>, u32>,
}

impl DimensionTable {
    /// Surrogate key for the row, adding it if unseen. Keys start at 1 and
    /// follow first-seen order.
    fn intern(&mut self, row: Vec<String>) -> (u32, bool) {
        if let Some(&k) = self.index.get(&row) {
            return (k, false);
        }
        self.rows.push(row.clone());
        let k = self.rows.len() as u32;
        self.index.insert(row, k);
        (k, true)
    }

    fn get(&self, key: u32) -> Option<&[String]> {
        self.rows.get(key.checked_sub(1)? as usize).map(Vec::as_slice)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactRow {
    pub dim_keys: [u32; 3],
    pub amount: Money,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub facts_added: usize,
    /// New dimension rows per dimension, in `ZFI_CASH1..3` order.
    pub dim_rows_added: [usize; 3],
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cube {
    dims: [DimensionTable; 3],
    facts: Vec<FactRow>,
    charts: ChartOfAccountsMap,
}

impl Cube {
    pub fn new(charts: ChartOfAccountsMap) -> Self {
        Cube { charts, ..Default::default() }
    }

    pub fn facts(&self) -> &[FactRow] {
        &self.facts
    }

    pub fn dimension_len(&self, d: Dimension) -> usize {
        self.dims[d.index()].rows.len()
    }

    pub fn grand_total(&self) -> Money {
        self.facts.iter().map(|f| f.amount).sum()
    }

    /// Adds one fact per record, interning dimension rows.
    pub fn load<'a>(&mut self, records: impl IntoIterator<Item = &'a DsoRecord>) -> LoadStats {
        let mut stats = LoadStats::default();
        for r in records {
            let chart = self.charts.resolve(&r.key.company_code).to_string();
            let or_na = |v: &Option<String>| v.clone().unwrap_or_else(|| NOT_ASSIGNED.to_string());
            let rows = [
                vec![r.payload.business_head.clone(), r.key.document_no.clone(), r.key.company_code.clone()],
                vec![
                    r.payload.gl_account.clone(),
                    chart,
                    r.payload.posting_date.format("%Y%m%d").to_string(),
                ],
                vec![or_na(&r.payload.customer), or_na(&r.payload.vendor)],
            ];
            let mut dim_keys = [0u32; 3];
            for (i, row) in rows.into_iter().enumerate() {
                let (k, added) = self.dims[i].intern(row);
                dim_keys[i] = k;
                stats.dim_rows_added[i] += added as usize;
            }
            self.facts.push(FactRow { dim_keys, amount: r.payload.amount });
            stats.facts_added += 1;
        }
        stats
    }

    /// Value of a characteristic for one fact.
    pub fn value(&self, fact: &FactRow, c: Characteristic) -> &str {
        let d = c.dimension().index();
        &self.dims[d].get(fact.dim_keys[d]).expect("fact keys resolve")[c.slot()]
    }

    /// One row per fact with the requested characteristics resolved from
    /// their dimensions, optionally followed by the key figure.
    pub fn extract_dataset<F: Scalar>(
        &self,
        attributes: &[Characteristic],
        key_figure: bool,
    ) -> Table<F> {
        let mut columns: Vec<Column> =
            attributes.iter().map(|c| Column::categorical(c.technical_name())).collect();
        if key_figure {
            columns.push(Column::new(KEY_FIGURE, ColumnKind::Money));
        }
        let mut t = Table::new(columns).expect("characteristics are distinct");
        for f in &self.facts {
            let mut row: Vec<Cell<F>> =
                attributes.iter().map(|c| Cell::text(self.value(f, *c))).collect();
            if key_figure {
                row.push(Cell::Num(F::of(f.amount.to_f64())));
            }
            t.push_row(row).expect("row matches header");
        }
        t
    }

    /// Like [`Cube::extract_dataset`] with characteristics given by name.
    pub fn extract_named<F: Scalar>(
        &self,
        attributes: &[impl AsRef<str>],
        key_figure: bool,
    ) -> Result<Table<F>, CubeError> {
        let chars = parse_characteristics(attributes)?;
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = chars.iter().find(|c| !seen.insert(**c)) {
            return Err(CubeError::Query(format!("{dup} requested twice")));
        }
        Ok(self.extract_dataset(&chars, key_figure))
    }

    /// Files: `fact.csv` plus one file per dimension, named by its technical name.
    pub fn save(&self, dir: &Path) -> Result<(), CubeError> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in self.serialize() {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    /// Serialized files as `(file name, bytes)`, in a fixed order.
    pub fn serialize(&self) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        let mut w = writer();
        w.write_record(["DIMID_1", "DIMID_2", "DIMID_3", KEY_FIGURE]).expect("in-memory write");
        for f in &self.facts {
            w.write_record([
                f.dim_keys[0].to_string(),
                f.dim_keys[1].to_string(),
                f.dim_keys[2].to_string(),
                f.amount.to_string(),
            ])
            .expect("in-memory write");
        }
        out.push(("fact.csv".to_string(), w.into_inner().expect("in-memory flush")));
        for d in Dimension::ALL {
            let mut w = writer();
            let mut header = vec!["DIMID".to_string()];
            header.extend(d.characteristics().iter().map(|c| c.technical_name().to_string()));
            w.write_record(&header).expect("in-memory write");
            for (i, row) in self.dims[d.index()].rows.iter().enumerate() {
                let mut rec = vec![(i + 1).to_string()];
                rec.extend(row.iter().cloned());
                w.write_record(&rec).expect("in-memory write");
            }
            out.push((format!("{}.csv", d.technical_name()), w.into_inner().expect("in-memory flush")));
        }
        out
    }

    pub fn load_from(dir: &Path, charts: ChartOfAccountsMap) -> Result<Self, CubeError> {
        let mut cube = Cube::new(charts);
        for d in Dimension::ALL {
            let mut rdr = csv::Reader::from_path(dir.join(format!("{}.csv", d.technical_name())))?;
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let width = d.characteristics().len();
                if rec.len() != width + 1 || rec[0] != (i + 1).to_string() {
                    return Err(CubeError::Corrupt(format!("{} row {}", d.technical_name(), i + 1)));
                }
                cube.dims[d.index()].intern(rec.iter().skip(1).map(str::to_string).collect());
            }
        }
        let mut rdr = csv::Reader::from_path(dir.join("fact.csv"))?;
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(CubeError::Corrupt("fact row width".into()));
            }
            let mut dim_keys = [0u32; 3];
            for (i, k) in dim_keys.iter_mut().enumerate() {
                *k = rec[i].parse().map_err(|_| CubeError::Corrupt("dimension key".into()))?;
                if cube.dims[i].get(*k).is_none() {
                    return Err(CubeError::Corrupt(format!("dangling key {k} in dimension {}", i + 1)));
                }
            }
            let amount = rec[3].parse().map_err(|_| CubeError::Corrupt("amount".into()))?;
            cube.facts.push(FactRow { dim_keys, amount });
        }
        Ok(cube)
    }
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

pub fn parse_characteristics(names: &[impl AsRef<str>]) -> Result<Vec<Characteristic>, CubeError> {
    names.iter().map(|n| n.as_ref().parse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{apply_defaults, Field, SourceSchema};
    use crate::staging::DsoPayload;

    pub(crate) fn record(doc: &str, vendor: &str, gl: &str, date: &str, amount: &str) -> DsoRecord {
        let p = [
            (Field::Saknr, gl.to_string()),
            (Field::Budat, date.to_string()),
            (Field::Wrbtr, amount.to_string()),
            (Field::Belnr, doc.to_string()),
            (Field::Lifnr, vendor.to_string()),
            (Field::Kunnr, "#".to_string()),
        ]
        .into_iter()
        .collect();
        let t = apply_defaults(&p, &SourceSchema::cash_flow()).unwrap();
        let (key, payload) = DsoPayload::split(&t);
        DsoRecord { key, payload, version: 1 }
    }

    pub(crate) fn clustering_sample() -> Vec<DsoRecord> {
        vec![
            record("1226000224", "200031", "250602", "20120804", "121212"),
            record("1226000227", "200031", "250602", "20120804", "3000000"),
            record("1226000228", "200031", "250602", "20120804", "3000000"),
            record("1226000229", "200031", "250602", "20120804", "300000"),
            record("1226000237", "201402", "181030", "20120806", "2000"),
            record("1226000239", "201196", "250022", "20120807", "3191271"),
        ]
    }

    #[test]
    fn shared_vendor_interns_one_partner_row() {
        let recs = clustering_sample();
        let mut cube = Cube::default();
        let stats = cube.load(&recs[..4]);
        assert_eq!(stats.facts_added, 4);
        assert_eq!(stats.dim_rows_added[Dimension::Partner.index()], 1);
        assert_eq!(stats.dim_rows_added[Dimension::GlAccount.index()], 1);
        assert_eq!(stats.dim_rows_added[Dimension::BusinessHead.index()], 4);
    }

    #[test]
    fn empty_load_is_all_zero() {
        let mut cube = Cube::default();
        assert_eq!(cube.load(&[]), LoadStats::default());
        assert!(cube.facts().is_empty());
        assert_eq!(cube.grand_total(), Money::ZERO);
    }

    #[test]
    fn reload_is_byte_identical() {
        let recs = clustering_sample();
        let mut a = Cube::default();
        a.load(&recs);
        let mut b = Cube::default();
        b.load(&recs);
        assert_eq!(a.serialize(), b.serialize());
    }

    #[test]
    fn save_load_round_trip() {
        let mut cube = Cube::default();
        cube.load(&clustering_sample());
        let dir = tempfile::tempdir().unwrap();
        cube.save(dir.path()).unwrap();
        let back = Cube::load_from(dir.path(), ChartOfAccountsMap::default()).unwrap();
        assert_eq!(back, cube);
    }

    #[test]
    fn chart_of_accounts_derived_from_company() {
        let mut cube = Cube::default();
        cube.load(&clustering_sample());
        let f = cube.facts()[0];
        assert_eq!(cube.value(&f, Characteristic::ChartOfAccounts), "CAIN");
        assert_eq!(cube.value(&f, Characteristic::CompanyCode), "1000");
    }

    #[test]
    fn extract_result_columns() {
        let mut cube = Cube::default();
        cube.load(&clustering_sample());
        let t: Table<f64> = cube.extract_named(
            &["0CREDITOR", "0GL_ACCOUNT", "0PSTNG_DATE"],
            true,
        )
        .unwrap();
        let names: Vec<_> = t.column_names().collect();
        assert_eq!(names, ["0CREDITOR", "0GL_ACCOUNT", "0PSTNG_DATE", "ZAMOUNT1"]);
        assert_eq!(t.formatted_row(0), ["200031", "250602", "20120804", "121212"]);
    }

    #[test]
    fn extract_all_characteristics_has_nine_columns() {
        let mut cube = Cube::default();
        cube.load(&clustering_sample());
        let t: Table<f64> = cube.extract_dataset(&Characteristic::ALL, true);
        assert_eq!(t.columns().len(), 9);
        assert!(t.rows().iter().all(|r| r.len() == 9));
    }

    #[test]
    fn extract_from_empty_cube_keeps_header() {
        let t: Table<f64> = Cube::default().extract_dataset(&[Characteristic::Vendor], true);
        assert!(t.is_empty());
        assert_eq!(t.columns().len(), 2);
    }

    #[test]
    fn unknown_characteristic_rejected() {
        let err = Cube::default().extract_named::<f64>(&["0MATERIAL"], true).unwrap_err();
        assert!(matches!(err, CubeError::UnknownCharacteristic(_)));
    }

    #[test]
    fn characteristic_names_parse_both_ways() {
        for c in Characteristic::ALL {
            assert_eq!(c.technical_name().parse::<Characteristic>().unwrap(), c);
            assert_eq!(c.alias().parse::<Characteristic>().unwrap(), c);
        }
    }
}

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::money::Money;

/// Source fields of the cash-flow extract.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "BUKRS")]
    Bukrs,
    #[serde(rename = "SAKNR")]
    Saknr,
    #[serde(rename = "BUDAT")]
    Budat,
    #[serde(rename = "BIZ_HEAD")]
    BizHead,
    #[serde(rename = "WRBTR")]
    Wrbtr,
    #[serde(rename = "BELNR")]
    Belnr,
    #[serde(rename = "GJAHR")]
    Gjahr,
    #[serde(rename = "LIFNR")]
    Lifnr,
    #[serde(rename = "KUNNR")]
    Kunnr,
    #[serde(rename = "WAERS")]
    Waers,
}

impl Field {
    pub const ALL: [Field; 10] = [
        Field::Bukrs,
        Field::Saknr,
        Field::Budat,
        Field::BizHead,
        Field::Wrbtr,
        Field::Belnr,
        Field::Gjahr,
        Field::Lifnr,
        Field::Kunnr,
        Field::Waers,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Bukrs => "BUKRS",
            Field::Saknr => "SAKNR",
            Field::Budat => "BUDAT",
            Field::BizHead => "BIZ_HEAD",
            Field::Wrbtr => "WRBTR",
            Field::Belnr => "BELNR",
            Field::Gjahr => "GJAHR",
            Field::Lifnr => "LIFNR",
            Field::Kunnr => "KUNNR",
            Field::Waers => "WAERS",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Field::Bukrs => "Company Code",
            Field::Saknr => "G/L Account",
            Field::Budat => "Posting Date",
            Field::BizHead => "Business Head",
            Field::Wrbtr => "Amount in LC",
            Field::Belnr => "Document Number",
            Field::Gjahr => "Fiscal Year",
            Field::Lifnr => "Vendor",
            Field::Kunnr => "Customer",
            Field::Waers => "Currency",
        }
    }

    /// Vendor and customer may be absent from a line item.
    pub fn is_optional(self) -> bool {
        matches!(self, Field::Lifnr | Field::Kunnr)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Field::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| IngestError::UnknownField(t.to_string()))
    }
}

/// Data types of the source system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldType {
    /// Free text.
    Char,
    /// Calendar date, `YYYYMMDD`.
    Dats,
    /// Currency amount with two decimals.
    Curr,
    /// Digits only.
    Numc,
    /// Currency key.
    Cuky,
}

impl FromStr for FieldType {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CHAR" => Ok(FieldType::Char),
            "DATS" => Ok(FieldType::Dats),
            "CURR" => Ok(FieldType::Curr),
            "NUMC" => Ok(FieldType::Numc),
            "CUKY" => Ok(FieldType::Cuky),
            other => Err(IngestError::Schema(format!("unknown field type `{other}`"))),
        }
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FieldType::Char => "Char",
            FieldType::Dats => "Dats",
            FieldType::Curr => "Curr",
            FieldType::Numc => "Numc",
            FieldType::Cuky => "Cuky",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub field: Field,
    pub kind: FieldType,
    pub length: usize,
    pub default: Option<String>,
}

impl FieldDescriptor {
    pub fn new(field: Field, kind: FieldType, length: usize, default: Option<&str>) -> Self {
        FieldDescriptor { field, kind, length, default: default.map(str::to_string) }
    }

    /// Checks a single value against type and declared length. The value is
    /// trimmed first; the returned reason is suitable for a parse report.
    pub fn check(&self, raw: &str) -> Result<(), String> {
        let v = raw.trim();
        match self.kind {
            FieldType::Dats => {
                if v.len() != 8 || !v.bytes().all(|b| b.is_ascii_digit()) {
                    return Err("invalid date".into());
                }
                parse_date(v).map(|_| ())
            }
            FieldType::Curr => {
                let m: Money = v.parse().map_err(|e| format!("invalid amount: {e}"))?;
                if m.digit_count() > self.length {
                    return Err(format!("amount exceeds {} digits", self.length));
                }
                Ok(())
            }
            FieldType::Numc => {
                if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
                    return Err("expected digits only".into());
                }
                self.check_length(v)
            }
            FieldType::Char | FieldType::Cuky => self.check_length(v),
        }
    }

    fn check_length(&self, v: &str) -> Result<(), String> {
        let n = v.chars().count();
        if n > self.length {
            Err(format!("length {n} exceeds declared length {}", self.length))
        } else {
            Ok(())
        }
    }
}

pub(crate) fn parse_date(v: &str) -> Result<NaiveDate, String> {
    if v.len() != 8 || !v.bytes().all(|b| b.is_ascii_digit()) {
        return Err("invalid date".into());
    }
    let y: i32 = v[0..4].parse().map_err(|_| "invalid date")?;
    let m: u32 = v[4..6].parse().map_err(|_| "invalid date")?;
    let d: u32 = v[6..8].parse().map_err(|_| "invalid date")?;
    NaiveDate::from_ymd_opt(y, m, d).ok_or_else(|| "invalid date".to_string())
}

/// Ordered field descriptors of a source extract.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSchema {
    fields: Vec<FieldDescriptor>,
}

impl SourceSchema {
    /// Every [`Field`] must be described exactly once, with a positive length.
    pub fn new(fields: Vec<FieldDescriptor>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for d in &fields {
            if !seen.insert(d.field) {
                return Err(IngestError::Schema(format!("duplicate field {}", d.field)));
            }
            if d.length == 0 {
                return Err(IngestError::Schema(format!("field {} has zero length", d.field)));
            }
            if let Some(def) = &d.default {
                d.check(def).map_err(|r| {
                    IngestError::Schema(format!("default for {} is invalid: {r}", d.field))
                })?;
            }
        }
        if let Some(missing) = Field::ALL.into_iter().find(|f| !seen.contains(f)) {
            return Err(IngestError::Schema(format!("field {missing} is not described")));
        }
        Ok(SourceSchema { fields })
    }

    /// The cash-flow statement extract.
    pub fn cash_flow() -> Self {
        use Field::*;
        use FieldType::*;
        SourceSchema {
            fields: vec![
                FieldDescriptor::new(Bukrs, Char, 4, Some("1000")),
                FieldDescriptor::new(Saknr, Char, 10, None),
                FieldDescriptor::new(Budat, Dats, 8, None),
                FieldDescriptor::new(BizHead, Char, 10, Some("OPER")),
                FieldDescriptor::new(Wrbtr, Curr, 13, None),
                FieldDescriptor::new(Belnr, Char, 10, None),
                FieldDescriptor::new(Gjahr, Numc, 4, Some("2012")),
                FieldDescriptor::new(Lifnr, Char, 10, None),
                FieldDescriptor::new(Kunnr, Char, 10, None),
                FieldDescriptor::new(Waers, Cuky, 5, Some("INR")),
            ],
        }
    }

    pub fn fields(&self) -> &[FieldDescriptor] {
        &self.fields
    }

    pub fn descriptor(&self, field: Field) -> &FieldDescriptor {
        self.fields
            .iter()
            .find(|d| d.field == field)
            .expect("schema describes every field")
    }

    pub fn position(&self, field: Field) -> usize {
        self.fields
            .iter()
            .position(|d| d.field == field)
            .expect("schema describes every field")
    }

    /// Reads a schema file: a header `FIELD,TYPE,LENGTH,DEFAULT` followed by
    /// one line per field. An empty default means none.
    pub fn read<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["FIELD", "TYPE", "LENGTH", "DEFAULT"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| !h.eq_ignore_ascii_case(e)) {
            return Err(IngestError::Schema(format!(
                "schema header must be {}",
                expected.join(",")
            )));
        }
        let mut fields = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field: Field = rec[0].parse()?;
            let kind: FieldType = rec[1].parse()?;
            let length: usize = rec[2]
                .parse()
                .map_err(|_| IngestError::Schema(format!("bad length `{}`", &rec[2])))?;
            let default = Some(rec[3].to_string()).filter(|d| !d.is_empty());
            fields.push(FieldDescriptor { field, kind, length, default });
        }
        SourceSchema::new(fields)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("FIELD,TYPE,LENGTH,DEFAULT\n");
        for d in &self.fields {
            out.push_str(&format!(
                "{},{},{},{}\n",
                d.field,
                d.kind,
                d.length,
                d.default.as_deref().unwrap_or("")
            ));
        }
        out
    }
}

impl Default for SourceSchema {
    fn default() -> Self {
        SourceSchema::cash_flow()
    }
}

//! Flat-file extraction of cash-flow line items.
//!
//! Extracts are comma-separated UTF-8 with a header row naming source
//! fields. Rows that fail validation are reported, never dropped silently:
//! for every data row [`parse_source_file`] yields either one
//! [`RawTransaction`] or one [`ParseError`].

mod delta;
mod parse;
mod schema;

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use delta::{compute_delta, DeltaSet};
pub use parse::{
    parse_row, parse_source_file, read_error_report, read_source_rows, write_error_report,
    write_source_file, ParseError, ParseOutcome, SourceRow,
};
pub use schema::{Field, FieldDescriptor, FieldType, SourceSchema};

use crate::money::Money;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown source field `{0}`")]
    UnknownField(String),
    #[error("unknown header column `{0}`")]
    UnknownColumn(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate key {key} in {snapshot} snapshot")]
    KeyConflict { snapshot: &'static str, key: DocumentKey },
}

/// A record failed to resolve into a transaction.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("missing value for {0}, which has no default")]
    MissingField(Field),
    #[error("{field}: {reason}")]
    InvalidValue { field: Field, reason: String },
}

impl RecordError {
    pub fn field(&self) -> Field {
        match self {
            RecordError::MissingField(f) => *f,
            RecordError::InvalidValue { field, .. } => *field,
        }
    }

    pub fn reason(&self) -> String {
        match self {
            RecordError::MissingField(_) => "missing value, no default".to_string(),
            RecordError::InvalidValue { reason, .. } => reason.clone(),
        }
    }
}

/// Identity of an accounting document: company code, document number and
/// fiscal year.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocumentKey {
    pub company_code: String,
    pub document_no: String,
    pub fiscal_year: u16,
}

impl fmt::Display for DocumentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.company_code, self.document_no, self.fiscal_year)
    }
}

/// One cash-flow line item. Text fields are stored trimmed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawTransaction {
    pub company_code: String,
    pub gl_account: String,
    pub posting_date: NaiveDate,
    pub business_head: String,
    pub amount_lc: Money,
    pub document_no: String,
    pub fiscal_year: u16,
    pub vendor: Option<String>,
    pub customer: Option<String>,
    pub currency: String,
}

impl RawTransaction {
    pub fn key(&self) -> DocumentKey {
        DocumentKey {
            company_code: self.company_code.clone(),
            document_no: self.document_no.clone(),
            fiscal_year: self.fiscal_year,
        }
    }

    /// Text form of one field, as written to extracts. Absent optional
    /// fields are empty.
    pub fn value(&self, field: Field) -> String {
        match field {
            Field::Bukrs => self.company_code.clone(),
            Field::Saknr => self.gl_account.clone(),
            Field::Budat => self.posting_date.format("%Y%m%d").to_string(),
            Field::BizHead => self.business_head.clone(),
            Field::Wrbtr => self.amount_lc.to_string(),
            Field::Belnr => self.document_no.clone(),
            Field::Gjahr => format!("{:04}", self.fiscal_year),
            Field::Lifnr => self.vendor.clone().unwrap_or_default(),
            Field::Kunnr => self.customer.clone().unwrap_or_default(),
            Field::Waers => self.currency.clone(),
        }
    }

    pub fn to_partial(&self) -> PartialRecord {
        Field::ALL
            .into_iter()
            .map(|f| (f, self.value(f)))
            .filter(|(_, v)| !v.is_empty())
            .collect()
    }

    /// Field values in schema order.
    pub fn to_values(&self, schema: &SourceSchema) -> Vec<String> {
        schema.fields().iter().map(|d| self.value(d.field)).collect()
    }
}

/// Field values as extracted; absent or blank entries count as missing.
pub type PartialRecord = BTreeMap<Field, String>;

/// Fills schema defaults for missing fields and converts the result into a
/// typed transaction.
///
/// Missing vendor or customer stays `None`. Any other field without a value
/// and without a default yields [`RecordError::MissingField`]. Applying the
/// function to the partial form of its own output returns the same record.
pub fn apply_defaults(
    partial: &PartialRecord,
    schema: &SourceSchema,
) -> Result<RawTransaction, RecordError> {
    let mut resolved: BTreeMap<Field, String> = BTreeMap::new();
    for d in schema.fields() {
        let given = partial.get(&d.field).map(|s| s.trim()).filter(|s| !s.is_empty());
        let value = match (given, &d.default) {
            (Some(v), _) => Some(v.to_string()),
            (None, Some(def)) => Some(def.clone()),
            (None, None) if d.field.is_optional() => None,
            (None, None) => return Err(RecordError::MissingField(d.field)),
        };
        if let Some(v) = value {
            d.check(&v)
                .map_err(|reason| RecordError::InvalidValue { field: d.field, reason })?;
            resolved.insert(d.field, v);
        }
    }
    let text = |f: Field| resolved.get(&f).cloned().unwrap_or_default();
    let invalid = |field: Field, reason: &str| RecordError::InvalidValue {
        field,
        reason: reason.to_string(),
    };
    let posting_date = schema::parse_date(&text(Field::Budat))
        .map_err(|r| RecordError::InvalidValue { field: Field::Budat, reason: r })?;
    let amount_lc: Money = text(Field::Wrbtr)
        .parse()
        .map_err(|_| invalid(Field::Wrbtr, "invalid amount"))?;
    let fiscal_year: u16 = text(Field::Gjahr)
        .parse()
        .map_err(|_| invalid(Field::Gjahr, "invalid fiscal year"))?;
    Ok(RawTransaction {
        company_code: text(Field::Bukrs),
        gl_account: text(Field::Saknr),
        posting_date,
        business_head: text(Field::BizHead),
        amount_lc,
        document_no: text(Field::Belnr),
        fiscal_year,
        vendor: resolved.get(&Field::Lifnr).cloned(),
        customer: resolved.get(&Field::Kunnr).cloned(),
        currency: text(Field::Waers),
    })
}

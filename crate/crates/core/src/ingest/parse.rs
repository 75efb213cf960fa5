use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{apply_defaults, Field, IngestError, PartialRecord, RawTransaction, SourceSchema};

/// A data row as read, before typing. `row` is 1-based and excludes the header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceRow {
    pub row: usize,
    pub values: PartialRecord,
    /// Set when the row's shape is broken (wrong number of cells).
    pub malformed: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub row: usize,
    pub field: String,
    pub reason: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "row {}: {}: {}", self.row, self.field, self.reason)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseOutcome {
    pub records: Vec<RawTransaction>,
    pub errors: Vec<ParseError>,
}

/// Reads the header and every data row without typing them.
///
/// Unknown header columns are fatal; columns may be omitted from the header
/// (their values then come from schema defaults).
pub fn read_source_rows<R: Read>(
    reader: R,
    _schema: &SourceSchema,
) -> Result<Vec<SourceRow>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut columns = Vec::with_capacity(header.len());
    for h in header.iter() {
        let f: Field = h
            .parse()
            .map_err(|_| IngestError::UnknownColumn(h.trim().to_string()))?;
        if columns.contains(&f) {
            return Err(IngestError::Schema(format!("header names {f} twice")));
        }
        columns.push(f);
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let malformed = (rec.len() != columns.len()).then(|| {
            format!("expected {} cells, found {}", columns.len(), rec.len())
        });
        let values = columns
            .iter()
            .zip(rec.iter())
            .map(|(f, v)| (*f, v.to_string()))
            .collect();
        rows.push(SourceRow { row: i + 1, values, malformed });
    }
    Ok(rows)
}

pub fn parse_row(row: &SourceRow, schema: &SourceSchema) -> Result<RawTransaction, ParseError> {
    if let Some(reason) = &row.malformed {
        return Err(ParseError { row: row.row, field: "*".into(), reason: reason.clone() });
    }
    apply_defaults(&row.values, schema).map_err(|e| ParseError {
        row: row.row,
        field: e.field().name().to_string(),
        reason: e.reason(),
    })
}

/// Parses a whole extract. Only an unreadable stream or an unknown header
/// column aborts; every bad data row becomes a [`ParseError`].
pub fn parse_source_file<R: Read>(
    reader: R,
    schema: &SourceSchema,
) -> Result<ParseOutcome, IngestError> {
    let mut out = ParseOutcome::default();
    for row in read_source_rows(reader, schema)? {
        match parse_row(&row, schema) {
            Ok(t) => out.records.push(t),
            Err(e) => out.errors.push(e),
        }
    }
    Ok(out)
}

/// Writes transactions in schema field order with a header row.
pub fn write_source_file<W: Write>(
    records: &[RawTransaction],
    writer: W,
    schema: &SourceSchema,
) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(schema.fields().iter().map(|d| d.field.name()))?;
    for r in records {
        w.write_record(r.to_values(schema))?;
    }
    w.flush()?;
    Ok(())
}

/// Parse-error sidecar: header `row,field,reason`, one line per error.
pub fn write_error_report<W: Write>(errors: &[ParseError], writer: W) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["row", "field", "reason"])?;
    for e in errors {
        w.write_record([e.row.to_string(), e.field.clone(), e.reason.clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_error_report<R: Read>(reader: R) -> Result<Vec<ParseError>, IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "BUKRS,SAKNR,BUDAT,BIZ_HEAD,WRBTR,BELNR,GJAHR,LIFNR,KUNNR,WAERS\n";

    #[test]
    fn parses_result_table_row() {
        let data = "LIFNR,SAKNR,BUDAT,WRBTR,BELNR\n114033,259010,20120822,100000,1226000001\n";
        let out = parse_source_file(data.as_bytes(), &SourceSchema::cash_flow()).unwrap();
        assert!(out.errors.is_empty());
        let t = &out.records[0];
        assert_eq!(t.vendor.as_deref(), Some("114033"));
        assert_eq!(t.gl_account, "259010");
        assert_eq!(t.posting_date.to_string(), "2012-08-22");
        assert_eq!(t.amount_lc.to_string(), "100000");
    }

    #[test]
    fn header_only_file_is_empty() {
        let out = parse_source_file(HEADER.as_bytes(), &SourceSchema::cash_flow()).unwrap();
        assert_eq!(out, ParseOutcome::default());
    }

    #[test]
    fn invalid_date_reported_with_row_and_field() {
        let data = format!(
            "{HEADER}1000,259010,20120822,OPER,10,D1,2012,114033,,INR\n\
             1000,259010,20121332,OPER,10,D2,2012,114033,,INR\n"
        );
        let out = parse_source_file(data.as_bytes(), &SourceSchema::cash_flow()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(
            out.errors,
            vec![ParseError { row: 2, field: "BUDAT".into(), reason: "invalid date".into() }]
        );
    }

    #[test]
    fn unknown_header_is_fatal() {
        let data = "SAKNR,BOGUS\n1,2\n";
        let err = parse_source_file(data.as_bytes(), &SourceSchema::cash_flow()).unwrap_err();
        assert!(matches!(err, IngestError::UnknownColumn(c) if c == "BOGUS"));
    }

    #[test]
    fn short_rows_do_not_abort() {
        let data = format!(
            "{HEADER}1000,259010\n1000,259010,20120822,OPER,10,D1,2012,114033,,INR\n"
        );
        let out = parse_source_file(data.as_bytes(), &SourceSchema::cash_flow()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].field, "*");
    }

    #[test]
    fn error_report_round_trip() {
        let errs = vec![
            ParseError { row: 3, field: "BUDAT".into(), reason: "invalid date".into() },
            ParseError { row: 9, field: "WRBTR".into(), reason: "invalid amount: x, y".into() },
        ];
        let mut buf = Vec::new();
        write_error_report(&errs, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("row,field,reason\n"));
        assert_eq!(read_error_report(buf.as_slice()).unwrap(), errs);
    }

    fn code(max: usize) -> impl Strategy<Value = String> {
        proptest::string::string_regex(&format!("[A-Z0-9]{{1,{max}}}")).unwrap()
    }

    fn transaction() -> impl Strategy<Value = RawTransaction> {
        (
            code(4),
            code(10),
            (2000i32..2030, 1u32..13, 1u32..29),
            code(10),
            -1_000_000_000i64..1_000_000_000,
            code(10),
            1990u16..2100,
            proptest::option::of(code(10)),
            proptest::option::of(code(10)),
            code(5),
        )
            .prop_map(|(cc, gl, (y, m, d), bh, cents, doc, fy, v, c, cur)| RawTransaction {
                company_code: cc,
                gl_account: gl,
                posting_date: chrono::NaiveDate::from_ymd_opt(y, m, d).unwrap(),
                business_head: bh,
                amount_lc: crate::Money::from_minor(cents),
                document_no: doc,
                fiscal_year: fy,
                vendor: v,
                customer: c,
                currency: cur,
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(records in proptest::collection::vec(transaction(), 0..20)) {
            let schema = SourceSchema::cash_flow();
            let mut buf = Vec::new();
            write_source_file(&records, &mut buf, &schema).unwrap();
            let out = parse_source_file(buf.as_slice(), &schema).unwrap();
            prop_assert!(out.errors.is_empty());
            prop_assert_eq!(out.records, records);
        }

        #[test]
        fn every_data_row_accounted_for(rows in proptest::collection::vec(
            proptest::collection::vec("[0-9A-Z]{0,12}", 10), 0..30)) {
            let mut data = HEADER.to_string();
            for r in &rows {
                data.push_str(&r.join(","));
                data.push('\n');
            }
            let out = parse_source_file(data.as_bytes(), &SourceSchema::cash_flow()).unwrap();
            prop_assert_eq!(out.records.len() + out.errors.len(), rows.len());
        }
    }
}

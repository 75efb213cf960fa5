use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StagingError;
use crate::ingest::{
    apply_defaults, Field, ParseError, PartialRecord, RawTransaction, RecordError, SourceRow,
    SourceSchema,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Edited,
    Error,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Edited => "edited",
            RowStatus::Error => "error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(RowStatus::Ok),
            "edited" => Some(RowStatus::Edited),
            "error" => Some(RowStatus::Error),
            _ => None,
        }
    }
}

/// A staged row in source text form, one value per schema field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsaRow {
    pub values: Vec<String>,
    pub status: RowStatus,
    /// Why the row does not resolve into a transaction; only for `Error`.
    pub reason: Option<String>,
    /// Values as first staged, kept once the row has been edited.
    pub original: Option<Vec<String>>,
}

impl PsaRow {
    pub fn from_transaction(t: &RawTransaction, schema: &SourceSchema) -> Self {
        PsaRow { values: t.to_values(schema), status: RowStatus::Ok, reason: None, original: None }
    }

    pub fn from_error(row: &SourceRow, error: &ParseError, schema: &SourceSchema) -> Self {
        let values = schema
            .fields()
            .iter()
            .map(|d| row.values.get(&d.field).cloned().unwrap_or_default())
            .collect();
        PsaRow {
            values,
            status: RowStatus::Error,
            reason: Some(format!("{}: {}", error.field, error.reason)),
            original: None,
        }
    }

    pub fn value(&self, field: Field, schema: &SourceSchema) -> &str {
        &self.values[schema.position(field)]
    }

    pub fn to_partial(&self, schema: &SourceSchema) -> PartialRecord {
        schema
            .fields()
            .iter()
            .zip(&self.values)
            .map(|(d, v)| (d.field, v.clone()))
            .collect()
    }

    pub fn to_transaction(&self, schema: &SourceSchema) -> Result<RawTransaction, RecordError> {
        apply_defaults(&self.to_partial(schema), schema)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsaRequest {
    pub request_id: u64,
    pub rows: Vec<PsaRow>,
}

impl PsaRequest {
    pub fn error_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.status == RowStatus::Error)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Persistent staging area: append-only requests at source granularity.
/// Rows can be corrected in place; the row count of a request never changes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsaStore {
    schema: SourceSchema,
    requests: Vec<PsaRequest>,
}

impl PsaStore {
    pub fn new(schema: SourceSchema) -> Self {
        PsaStore { schema, requests: Vec::new() }
    }

    pub fn schema(&self) -> &SourceSchema {
        &self.schema
    }

    pub fn requests(&self) -> &[PsaRequest] {
        &self.requests
    }

    pub fn request(&self, request_id: u64) -> Option<&PsaRequest> {
        self.requests.iter().find(|r| r.request_id == request_id)
    }

    pub fn next_request_id(&self) -> u64 {
        self.requests.last().map_or(1, |r| r.request_id + 1)
    }

    /// Stores `rows` as a new request and returns its id.
    pub fn append(&mut self, rows: Vec<PsaRow>) -> u64 {
        let request_id = self.next_request_id();
        self.requests.push(PsaRequest { request_id, rows });
        request_id
    }

    /// Corrects one field of a staged row.
    ///
    /// The value must be valid for the field's type. The row's first-staged
    /// values are kept in `original`. The row becomes `Edited` when it now
    /// resolves into a transaction, and stays `Error` (with a fresh reason)
    /// otherwise.
    pub fn edit(
        &mut self,
        request_id: u64,
        row_index: usize,
        field: Field,
        new_value: &str,
    ) -> Result<&PsaRow, StagingError> {
        let schema = &self.schema;
        let request = self
            .requests
            .iter_mut()
            .find(|r| r.request_id == request_id)
            .ok_or(StagingError::RequestNotFound(request_id))?;
        let row = request
            .rows
            .get_mut(row_index)
            .ok_or(StagingError::RowNotFound { request_id, row: row_index })?;
        schema
            .descriptor(field)
            .check(new_value)
            .map_err(|reason| StagingError::Validation { field, reason })?;
        if row.original.is_none() {
            row.original = Some(row.values.clone());
        }
        row.values[schema.position(field)] = new_value.trim().to_string();
        match row.to_transaction(schema) {
            Ok(_) => {
                row.status = RowStatus::Edited;
                row.reason = None;
            }
            Err(e) => {
                row.status = RowStatus::Error;
                row.reason = Some(format!("{}: {}", e.field(), e.reason()));
            }
        }
        Ok(row)
    }

    /// One file per request, `request_NNNNNN.csv`, with columns
    /// `STATUS,REASON,<fields>,ORIG_<fields>`.
    pub fn save(&self, dir: &Path) -> Result<(), StagingError> {
        fs::create_dir_all(dir)?;
        for req in &self.requests {
            let path = dir.join(format!("request_{:06}.csv", req.request_id));
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_path(path)?;
            let mut header = vec!["STATUS".to_string(), "REASON".to_string()];
            header.extend(self.schema.fields().iter().map(|d| d.field.name().to_string()));
            header.extend(self.schema.fields().iter().map(|d| format!("ORIG_{}", d.field)));
            w.write_record(&header)?;
            let blank = vec![String::new(); self.schema.fields().len()];
            for row in &req.rows {
                let mut rec = vec![
                    row.status.as_str().to_string(),
                    row.reason.clone().unwrap_or_default(),
                ];
                rec.extend(row.values.iter().cloned());
                rec.extend(row.original.as_ref().unwrap_or(&blank).iter().cloned());
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, schema: SourceSchema) -> Result<Self, StagingError> {
        let mut store = PsaStore::new(schema);
        if !dir.exists() {
            return Ok(store);
        }
        let mut files: Vec<(u64, std::path::PathBuf)> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().to_string_lossy().to_string();
                let id = name.strip_prefix("request_")?.strip_suffix(".csv")?.parse().ok()?;
                Some((id, e.path()))
            })
            .collect();
        files.sort();
        let width = store.schema.fields().len();
        for (request_id, path) in files {
            let mut rdr = csv::Reader::from_path(&path)?;
            let mut rows = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                if rec.len() != 2 + 2 * width {
                    return Err(StagingError::Corrupt(format!("{}: bad row width", path.display())));
                }
                let status = RowStatus::parse(&rec[0])
                    .ok_or_else(|| StagingError::Corrupt(format!("bad status `{}`", &rec[0])))?;
                let reason = Some(rec[1].to_string()).filter(|s| !s.is_empty());
                let values: Vec<String> = rec.iter().skip(2).take(width).map(str::to_string).collect();
                let original = (status == RowStatus::Edited || status == RowStatus::Error)
                    .then(|| rec.iter().skip(2 + width).map(str::to_string).collect::<Vec<_>>())
                    .filter(|o: &Vec<String>| o.iter().any(|v| !v.is_empty()));
                rows.push(PsaRow { values, status, reason, original });
            }
            store.requests.push(PsaRequest { request_id, rows });
        }
        Ok(store)
    }
}

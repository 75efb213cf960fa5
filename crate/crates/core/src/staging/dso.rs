use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::psa::{PsaRequest, RowStatus};
use super::StagingError;
use crate::ingest::{DocumentKey, RawTransaction, SourceSchema};
use crate::money::Money;

/// Non-key fields of an activated record.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DsoPayload {
    pub gl_account: String,
    pub posting_date: NaiveDate,
    pub business_head: String,
    pub amount: Money,
    pub vendor: Option<String>,
    pub customer: Option<String>,
    pub currency: String,
}

impl DsoPayload {
    pub fn split(t: &RawTransaction) -> (DocumentKey, DsoPayload) {
        (
            t.key(),
            DsoPayload {
                gl_account: t.gl_account.clone(),
                posting_date: t.posting_date,
                business_head: t.business_head.clone(),
                amount: t.amount_lc,
                vendor: t.vendor.clone(),
                customer: t.customer.clone(),
                currency: t.currency.clone(),
            },
        )
    }

    const COLUMNS: [&'static str; 7] =
        ["SAKNR", "BUDAT", "BIZ_HEAD", "WRBTR", "LIFNR", "KUNNR", "WAERS"];

    fn to_fields(&self) -> [String; 7] {
        [
            self.gl_account.clone(),
            self.posting_date.format("%Y%m%d").to_string(),
            self.business_head.clone(),
            self.amount.to_string(),
            self.vendor.clone().unwrap_or_default(),
            self.customer.clone().unwrap_or_default(),
            self.currency.clone(),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self, StagingError> {
        let corrupt = |what: &str| StagingError::Corrupt(format!("bad {what} `{}`", f.join(",")));
        let opt = |s: &str| Some(s.to_string()).filter(|s| !s.is_empty());
        Ok(DsoPayload {
            gl_account: f[0].to_string(),
            posting_date: NaiveDate::parse_from_str(f[1], "%Y%m%d").map_err(|_| corrupt("date"))?,
            business_head: f[2].to_string(),
            amount: f[3].parse().map_err(|_| corrupt("amount"))?,
            vendor: opt(f[4]),
            customer: opt(f[5]),
            currency: f[6].to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsoRecord {
    pub key: DocumentKey,
    pub payload: DsoPayload,
    pub version: u32,
}

impl DsoRecord {
    pub fn to_transaction(&self) -> RawTransaction {
        RawTransaction {
            company_code: self.key.company_code.clone(),
            gl_account: self.payload.gl_account.clone(),
            posting_date: self.payload.posting_date,
            business_head: self.payload.business_head.clone(),
            amount_lc: self.payload.amount,
            document_no: self.key.document_no.clone(),
            fiscal_year: self.key.fiscal_year,
            vendor: self.payload.vendor.clone(),
            customer: self.payload.customer.clone(),
            currency: self.payload.currency.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeAction {
    Insert,
    Overwrite,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeLogEntry {
    pub key: DocumentKey,
    pub action: ChangeAction,
    pub before: Option<DsoPayload>,
    pub after: DsoPayload,
    pub request_id: u64,
}

/// Activated store: one record per document key, overwritten on reload,
/// with a change log of before/after images.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dso {
    active: BTreeMap<DocumentKey, DsoRecord>,
    log: Vec<ChangeLogEntry>,
}

impl Dso {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Active records in key order.
    pub fn records(&self) -> impl Iterator<Item = &DsoRecord> {
        self.active.values()
    }

    pub fn get(&self, key: &DocumentKey) -> Option<&DsoRecord> {
        self.active.get(key)
    }

    pub fn change_log(&self) -> &[ChangeLogEntry] {
        &self.log
    }

    /// Activates a staged request. Rows are applied in request order, so
    /// the last row for a key wins. A request holding any `error` row is
    /// refused as a whole and leaves the store untouched.
    pub fn activate(
        &mut self,
        request: &PsaRequest,
        schema: &SourceSchema,
    ) -> Result<Vec<ChangeLogEntry>, StagingError> {
        let bad = request.error_rows();
        if !bad.is_empty() {
            return Err(StagingError::ActivationRefused { request_id: request.request_id, rows: bad });
        }
        let mut txs = Vec::with_capacity(request.rows.len());
        let mut unresolved = Vec::new();
        for (i, row) in request.rows.iter().enumerate() {
            debug_assert!(row.status != RowStatus::Error);
            match row.to_transaction(schema) {
                Ok(t) => txs.push(t),
                Err(_) => unresolved.push(i),
            }
        }
        if !unresolved.is_empty() {
            return Err(StagingError::ActivationRefused {
                request_id: request.request_id,
                rows: unresolved,
            });
        }
        let mut entries = Vec::with_capacity(txs.len());
        for t in &txs {
            let (key, payload) = DsoPayload::split(t);
            entries.push(self.upsert(key, payload, request.request_id));
        }
        self.log.extend(entries.iter().cloned());
        Ok(entries)
    }

    fn upsert(&mut self, key: DocumentKey, payload: DsoPayload, request_id: u64) -> ChangeLogEntry {
        match self.active.get_mut(&key) {
            Some(rec) => {
                let before = std::mem::replace(&mut rec.payload, payload.clone());
                rec.version += 1;
                ChangeLogEntry {
                    key,
                    action: ChangeAction::Overwrite,
                    before: Some(before),
                    after: payload,
                    request_id,
                }
            }
            None => {
                self.active.insert(
                    key.clone(),
                    DsoRecord { key: key.clone(), payload: payload.clone(), version: 1 },
                );
                ChangeLogEntry { key, action: ChangeAction::Insert, before: None, after: payload, request_id }
            }
        }
    }

    /// Rebuilds a store by applying a change log from empty.
    pub fn replay(log: &[ChangeLogEntry]) -> Result<Self, StagingError> {
        let mut dso = Dso::new();
        for (i, e) in log.iter().enumerate() {
            let exists = dso.active.contains_key(&e.key);
            let consistent = match e.action {
                ChangeAction::Insert => !exists && e.before.is_none(),
                ChangeAction::Overwrite => {
                    exists && e.before.as_ref() == dso.active.get(&e.key).map(|r| &r.payload)
                }
            };
            if !consistent {
                return Err(StagingError::Corrupt(format!("change log entry {i} does not apply")));
            }
            let applied = dso.upsert(e.key.clone(), e.after.clone(), e.request_id);
            dso.log.push(applied);
        }
        Ok(dso)
    }

    /// Writes `active.csv` and `changelog.csv` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), StagingError> {
        fs::create_dir_all(dir)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(dir.join("active.csv"))?;
        let mut header = vec!["BUKRS", "BELNR", "GJAHR"];
        header.extend(DsoPayload::COLUMNS);
        header.push("VERSION");
        w.write_record(&header)?;
        for r in self.active.values() {
            let mut rec = key_fields(&r.key).to_vec();
            rec.extend(r.payload.to_fields());
            rec.push(r.version.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;

        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(dir.join("changelog.csv"))?;
        let mut header = vec![
            "REQUEST".to_string(),
            "ACTION".to_string(),
            "BUKRS".to_string(),
            "BELNR".to_string(),
            "GJAHR".to_string(),
        ];
        header.extend(DsoPayload::COLUMNS.iter().map(|c| format!("BEFORE_{c}")));
        header.extend(DsoPayload::COLUMNS.iter().map(|c| format!("AFTER_{c}")));
        w.write_record(&header)?;
        for e in &self.log {
            let mut rec = vec![
                e.request_id.to_string(),
                match e.action {
                    ChangeAction::Insert => "insert".to_string(),
                    ChangeAction::Overwrite => "overwrite".to_string(),
                },
            ];
            rec.extend(key_fields(&e.key));
            match &e.before {
                Some(b) => rec.extend(b.to_fields()),
                None => rec.extend(std::iter::repeat(String::new()).take(7)),
            }
            rec.extend(e.after.to_fields());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads the change log and rebuilds the active table from it, then
    /// checks the rebuilt table against `active.csv`.
    pub fn load(dir: &Path) -> Result<Self, StagingError> {
        let log_path = dir.join("changelog.csv");
        if !log_path.exists() {
            return Ok(Dso::new());
        }
        let mut rdr = csv::Reader::from_path(&log_path)?;
        let mut log = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let f: Vec<&str> = rec.iter().collect();
            if f.len() != 19 {
                return Err(StagingError::Corrupt("changelog row width".into()));
            }
            let request_id = f[0].parse().map_err(|_| StagingError::Corrupt("request id".into()))?;
            let action = match f[1] {
                "insert" => ChangeAction::Insert,
                "overwrite" => ChangeAction::Overwrite,
                other => return Err(StagingError::Corrupt(format!("action `{other}`"))),
            };
            let key = parse_key(&f[2..5])?;
            let before = match action {
                ChangeAction::Insert => None,
                ChangeAction::Overwrite => Some(DsoPayload::from_fields(&f[5..12])?),
            };
            let after = DsoPayload::from_fields(&f[12..19])?;
            log.push(ChangeLogEntry { key, action, before, after, request_id });
        }
        let dso = Dso::replay(&log)?;
        let active_path = dir.join("active.csv");
        if active_path.exists() {
            let mut rdr = csv::Reader::from_path(&active_path)?;
            let mut stored = BTreeMap::new();
            for rec in rdr.records() {
                let rec = rec?;
                let f: Vec<&str> = rec.iter().collect();
                if f.len() != 11 {
                    return Err(StagingError::Corrupt("active row width".into()));
                }
                let key = parse_key(&f[0..3])?;
                let payload = DsoPayload::from_fields(&f[3..10])?;
                let version = f[10].parse().map_err(|_| StagingError::Corrupt("version".into()))?;
                stored.insert(key.clone(), DsoRecord { key, payload, version });
            }
            if stored != dso.active {
                return Err(StagingError::Corrupt(
                    "active table disagrees with its change log".into(),
                ));
            }
        }
        Ok(dso)
    }
}

fn key_fields(k: &DocumentKey) -> [String; 3] {
    [k.company_code.clone(), k.document_no.clone(), format!("{:04}", k.fiscal_year)]
}

fn parse_key(f: &[&str]) -> Result<DocumentKey, StagingError> {
    Ok(DocumentKey {
        company_code: f[0].to_string(),
        document_no: f[1].to_string(),
        fiscal_year: f[2].parse().map_err(|_| StagingError::Corrupt("fiscal year".into()))?,
    })
}

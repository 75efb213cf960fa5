//! Staging layers between extraction and the cube.
//!
//! * [`PsaStore`]: persistent staging area. Append-only requests at source
//!   granularity; individual fields can be corrected in place.
//! * [`cleanse`]: duplicate removal, sentinel fill and outlier flagging.
//! * [`Dso`]: activated store with overwrite-by-key semantics and a change
//!   log from which the active table can be replayed.

mod cleanse;
mod dso;
mod psa;

use thiserror::Error;

pub use cleanse::{cleanse, CleansePolicy, CleanseReport, OutlierFlag};
pub use dso::{ChangeAction, ChangeLogEntry, Dso, DsoPayload, DsoRecord};
pub use psa::{PsaRequest, PsaRow, PsaStore, RowStatus};

use crate::ingest::Field;

#[derive(Debug, Error)]
pub enum StagingError {
    #[error("request {0} not found")]
    RequestNotFound(u64),
    #[error("row {row} not found in request {request_id}")]
    RowNotFound { request_id: u64, row: usize },
    #[error("invalid value for {field}: {reason}")]
    Validation { field: Field, reason: String },
    #[error("activation of request {request_id} refused: rows {rows:?} are in error")]
    ActivationRefused { request_id: u64, rows: Vec<usize> },
    #[error("corrupt staging data: {0}")]
    Corrupt(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("delimited file error: {0}")]
    Csv(#[from] csv::Error),
}

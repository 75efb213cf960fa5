//! Cash-flow data mining over an ERP-style warehouse.
//!
//! The crate covers the whole flow from flat-file extraction to deployed
//! model output:
//!
//! * [`ingest`] parses delimiter-separated source extracts into typed
//!   [`ingest::RawTransaction`]s and computes delta sets between snapshots.
//! * [`staging`] holds the persistent staging area (editable, append-only)
//!   and the activated data store with its change log.
//! * [`cube`] is the star-schema cube with three dimensions and one key figure.
//! * [`mining`] implements clustering, decision trees, through-origin
//!   regression and Apriori. The numeric code is generic over [`Scalar`].
//! * [`evaluate`] holds the train/test protocol and cluster diagnostics.
//! * [`apd`] runs analysis processes: validated DAGs of source, transform,
//!   model and sink nodes.
//! * [`deploy`] writes result tables, charts and report feeds.
//! * [`synthgen`] generates seeded synthetic cash-flow extracts.
//! * [`workspace`] ties the stages together on disk.
//!
//! The generic mining types are re-exported here as `f64` aliases, which is
//! what the pipeline uses end to end.

pub mod apd;
pub mod cube;
pub mod deploy;
pub mod evaluate;
pub mod ingest;
pub mod mining;
pub mod money;
pub mod scalar;
pub mod staging;
pub mod synthgen;
pub mod table;
pub mod workspace;

pub use money::Money;
pub use scalar::Scalar;

/// Analysis table with `f64` numeric cells.
pub type Table = table::Table<f64>;
/// Single-precision analysis table.
pub type Table32 = table::Table<f32>;
/// Name-keyed record with `f64` numeric cells.
pub type Record = table::Record<f64>;
pub type Cell = table::Cell<f64>;

pub type FeatureSpace = mining::FeatureSpace<f64>;
pub type BinningSpec = mining::BinningSpec<f64>;
pub type ClusterModel = mining::ClusterModel<f64>;
pub type Dendrogram = mining::Dendrogram<f64>;
pub type TreeModel = mining::TreeModel<f64>;
pub type TreeParams = mining::TreeParams<f64>;
pub type RegressionModel = mining::RegressionModel<f64>;
/// Regression with exact rational arithmetic.
pub type ExactRegressionModel = mining::RegressionModel<num_rational::Rational64>;
pub type MiningModel = mining::MiningModel<f64>;
pub type RuleSet = mining::RuleSet<String>;

pub type InfluenceChart = evaluate::InfluenceChart<f64>;
pub type DistanceReport = evaluate::DistanceReport<f64>;

//! Mining algorithms over analysis tables.
//!
//! Clustering (k-means, agglomerative with dendrogram cut, DBSCAN) works in
//! a [`FeatureSpace`] with a weighted mixed distance: numeric attributes are
//! min-max scaled and compared by squared difference, categorical ones by
//! 0/1 mismatch. Decision trees grow by information gain with multiway
//! categorical splits and binary splits at bin edges of numeric attributes.
//! Regression is the through-origin least-squares fit `w = Σxy / Σx²`.
//! Association rules come from level-wise Apriori.
//!
//! Everything numeric is generic over [`Scalar`](crate::Scalar); regression
//! only needs field arithmetic and also runs on exact rationals.

mod apriori;
mod binning;
mod cluster;
mod dbscan;
mod hierarchical;
mod kmeans;
mod model;
mod regression;
mod space;
mod tree;

use thiserror::Error;

pub use apriori::{apriori_frequent, association_rules, itemize, FrequentItemsets, Rule, RuleSet};
pub use binning::{fit_binning, BinningSpec, DEFAULT_BINS};
pub use cluster::{cluster_assign, ClusterMethod, ClusterModel, NOISE};
pub use dbscan::{dbscan_fit, dbscan_points};
pub use hierarchical::{agglomerative_fit, dendrogram_cut, Dendrogram, Linkage, Merge};
pub use kmeans::{kmeans_fit, kmeans_fit_points, KMeansParams};
pub use model::{MiningModel, ModelFile, MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use regression::{regression_fit, regression_fit_table, regression_score, sse, RegressionModel};
pub use space::{distance, Attribute, AttributeKind, FeatureSpace, Point, Scaling};
pub use tree::{tree_fit, tree_predict, Split, TreeModel, TreeNode, TreeParams, TreePrediction};

#[derive(Debug, Error, PartialEq)]
pub enum MiningError {
    #[error("cannot fit: {0}")]
    Fit(String),
    #[error("record has no attribute `{0}`")]
    MissingAttribute(String),
    #[error("attribute `{name}` expects a {expected} value")]
    AttributeKind { name: String, expected: &'static str },
    #[error("cut at k={k} is outside 1..={n}")]
    Cut { k: usize, n: usize },
    #[error("invalid feature space: {0}")]
    Space(String),
    #[error("model format: {0}")]
    Format(String),
}

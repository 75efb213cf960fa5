use serde::{Deserialize, Serialize};

use super::space::{FeatureSpace, Point};
use super::MiningError;
use crate::scalar::Scalar;
use crate::table::AttributeSource;

/// Label of DBSCAN points that belong to no cluster.
pub const NOISE: i64 = -1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum ClusterMethod<F> {
    Kmeans { seed: u64, max_iter: usize, restarts: usize },
    AgglomerativeCut { linkage: super::Linkage },
    Dbscan { eps: F, min_pts: usize },
}

impl<F> ClusterMethod<F> {
    pub fn name(&self) -> &'static str {
        match self {
            ClusterMethod::Kmeans { .. } => "kmeans",
            ClusterMethod::AgglomerativeCut { .. } => "agglomerative-cut",
            ClusterMethod::Dbscan { .. } => "dbscan",
        }
    }
}

/// A fitted clustering: one centroid (or medoid, for DBSCAN) per cluster,
/// cluster sizes, and the training labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel<F> {
    pub method: ClusterMethod<F>,
    pub space: FeatureSpace<F>,
    pub centroids: Vec<Point<F>>,
    pub sizes: Vec<usize>,
    /// Cluster id per training record, `NOISE` for DBSCAN noise.
    pub labels: Vec<i64>,
    /// Within-cluster sum of squared distances to the centroids.
    pub sse: F,
    /// SSE after each assignment step (k-means only).
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub sse_trace: Vec<F>,
}

impl<F: Scalar> ClusterModel<F> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == NOISE).count()
    }

    /// Nearest centroid, ties to the lowest id. `NOISE` when the model has
    /// no clusters.
    pub fn assign_point(&self, p: &[crate::table::Cell<F>]) -> i64 {
        nearest(&self.space, &self.centroids, p).map_or(NOISE, |(j, _)| j as i64)
    }
}

/// Index and squared distance of the nearest centroid; lowest index on ties.
pub(crate) fn nearest<F: Scalar>(
    space: &FeatureSpace<F>,
    centroids: &[Point<F>],
    p: &[crate::table::Cell<F>],
) -> Option<(usize, F)> {
    let mut best: Option<(usize, F)> = None;
    for (j, c) in centroids.iter().enumerate() {
        let d = space.sq_distance(p, c);
        if best.map_or(true, |(_, b)| d < b) {
            best = Some((j, d));
        }
    }
    best
}

/// Sum of squared distances of labelled points to their centroids.
pub(crate) fn labelled_sse<F: Scalar>(
    space: &FeatureSpace<F>,
    points: &[Point<F>],
    centroids: &[Point<F>],
    labels: &[i64],
) -> F {
    points
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l >= 0)
        .map(|(p, l)| space.sq_distance(p, &centroids[*l as usize]))
        .sum()
}

pub(crate) fn sizes_of(labels: &[i64], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for l in labels.iter().filter(|l| **l >= 0) {
        sizes[*l as usize] += 1;
    }
    sizes
}

/// Cluster id of `record` under `model`.
pub fn cluster_assign<F: Scalar>(
    model: &ClusterModel<F>,
    record: &impl AttributeSource<F>,
) -> Result<i64, MiningError> {
    let p = model.space.point(record)?;
    Ok(model.assign_point(&p))
}

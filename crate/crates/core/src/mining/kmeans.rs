use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cluster::{labelled_sse, nearest, sizes_of, ClusterMethod, ClusterModel};
use super::space::{FeatureSpace, Point};
use super::MiningError;
use crate::scalar::Scalar;
use crate::table::Table;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    /// Upper bound on assignment steps per restart.
    pub max_iter: usize,
    /// Independent initializations; the lowest final SSE wins.
    pub restarts: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams { k, seed, max_iter: 100, restarts: 10 }
    }
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams::new(10, 42)
    }
}

struct Run<F> {
    centroids: Vec<Point<F>>,
    labels: Vec<i64>,
    trace: Vec<F>,
}

/// Lloyd's k-means, best of `params.restarts` seeded initializations.
pub fn kmeans_fit<F: Scalar>(
    table: &Table<F>,
    space: &FeatureSpace<F>,
    params: &KMeansParams,
) -> Result<ClusterModel<F>, MiningError> {
    let points = space.points(table)?;
    kmeans_fit_points(&points, space, params)
}

pub fn kmeans_fit_points<F: Scalar>(
    points: &[Point<F>],
    space: &FeatureSpace<F>,
    params: &KMeansParams,
) -> Result<ClusterModel<F>, MiningError> {
    let n = points.len();
    if params.k == 0 || params.k > n {
        return Err(MiningError::Fit(format!("k={} needs 1 <= k <= n={n}", params.k)));
    }
    if params.max_iter == 0 || params.restarts == 0 {
        return Err(MiningError::Fit("max_iter and restarts must be positive".into()));
    }
    let mut seeder = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(F, Run<F>)> = None;
    for _ in 0..params.restarts {
        let run = lloyd(points, space, params.k, params.max_iter, seeder.next_u64());
        let sse = *run.trace.last().expect("at least one assignment step");
        if best.as_ref().map_or(true, |(b, _)| sse < *b) {
            best = Some((sse, run));
        }
    }
    let (sse, run) = best.expect("restarts > 0");
    Ok(ClusterModel {
        method: ClusterMethod::Kmeans {
            seed: params.seed,
            max_iter: params.max_iter,
            restarts: params.restarts,
        },
        space: space.clone(),
        sizes: sizes_of(&run.labels, params.k),
        centroids: run.centroids,
        labels: run.labels,
        sse,
        sse_trace: run.trace,
    })
}

fn lloyd<F: Scalar>(
    points: &[Point<F>],
    space: &FeatureSpace<F>,
    k: usize,
    max_iter: usize,
    seed: u64,
) -> Run<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init: Vec<usize> = sample(&mut rng, points.len(), k).into_vec();
    init.sort_unstable();
    let mut centroids: Vec<Point<F>> = init.iter().map(|&i| points[i].clone()).collect();
    let mut labels: Vec<i64> = Vec::new();
    let mut trace = Vec::new();
    for step in 0..max_iter {
        let mut next: Vec<i64> = points
            .iter()
            .map(|p| nearest(space, &centroids, p).expect("k >= 1").0 as i64)
            .collect();
        reseed_empty(points, space, &mut centroids, &mut next);
        trace.push(labelled_sse(space, points, &centroids, &next));
        let done = next == labels || step + 1 == max_iter;
        labels = next;
        if done {
            break;
        }
        centroids = (0..k)
            .map(|j| space.centroid(points.iter().zip(&labels).filter(|(_, l)| **l == j as i64).map(|(p, _)| p)))
            .collect();
    }
    Run { centroids, labels, trace }
}

/// Gives every empty cluster the point farthest from its own centroid,
/// taken from a cluster that keeps at least one member.
fn reseed_empty<F: Scalar>(
    points: &[Point<F>],
    space: &FeatureSpace<F>,
    centroids: &mut [Point<F>],
    labels: &mut [i64],
) {
    let k = centroids.len();
    let mut sizes = sizes_of(labels, k);
    for j in 0..k {
        if sizes[j] > 0 {
            continue;
        }
        let mut far: Option<(usize, F)> = None;
        for (i, p) in points.iter().enumerate() {
            let c = labels[i] as usize;
            if sizes[c] < 2 {
                continue;
            }
            let d = space.sq_distance(p, &centroids[c]);
            if far.map_or(true, |(_, b)| d > b) {
                far = Some((i, d));
            }
        }
        let (i, _) = far.expect("some cluster has two members when one is empty and n >= k");
        sizes[labels[i] as usize] -= 1;
        labels[i] = j as i64;
        sizes[j] = 1;
        centroids[j] = points[i].clone();
    }
}

use serde::{Deserialize, Serialize};

use super::cluster::{labelled_sse, sizes_of, ClusterMethod, ClusterModel};
use super::space::{FeatureSpace, Point};
use super::MiningError;
use crate::scalar::Scalar;
use crate::table::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

impl std::str::FromStr for Linkage {
    type Err = MiningError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            other => Err(MiningError::Fit(format!("unknown linkage `{other}`"))),
        }
    }
}

/// One agglomeration step. Leaves are nodes `0..n`; merge `i` creates node
/// `n + i`. `left < right`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge<F> {
    pub left: usize,
    pub right: usize,
    pub distance: F,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram<F> {
    pub n: usize,
    pub linkage: Linkage,
    pub merges: Vec<Merge<F>>,
    pub space: FeatureSpace<F>,
    pub points: Vec<Point<F>>,
}

pub fn agglomerative_fit<F: Scalar>(
    table: &Table<F>,
    space: &FeatureSpace<F>,
    linkage: Linkage,
) -> Result<Dendrogram<F>, MiningError> {
    let points = space.points(table)?;
    Ok(agglomerate(points, space, linkage))
}

/// Naive O(n^3) agglomeration with Lance-Williams distance updates.
pub fn agglomerate<F: Scalar>(
    points: Vec<Point<F>>,
    space: &FeatureSpace<F>,
    linkage: Linkage,
) -> Dendrogram<F> {
    let n = points.len();
    let mut dist = vec![vec![F::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = space.point_distance(&points[i], &points[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    // slot -> (node id, size); slots of absorbed clusters become None
    let mut slots: Vec<Option<(usize, usize)>> = (0..n).map(|i| Some((i, 1))).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(F, usize, usize, usize, usize)> = None;
        for a in 0..n {
            let Some((ia, _)) = slots[a] else { continue };
            for b in a + 1..n {
                let Some((ib, _)) = slots[b] else { continue };
                let (lo, hi) = (ia.min(ib), ia.max(ib));
                let d = dist[a][b];
                let better = match best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => d < bd || (d == bd && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((d, lo, hi, a, b));
                }
            }
        }
        let (d, lo, hi, a, b) = best.expect("two active clusters remain");
        let (na, nb) = (slots[a].unwrap().1, slots[b].unwrap().1);
        for c in 0..n {
            if c == a || c == b || slots[c].is_none() {
                continue;
            }
            let (da, db) = (dist[a][c], dist[b][c]);
            let merged = match linkage {
                Linkage::Single => da.min(db),
                Linkage::Complete => da.max(db),
                Linkage::Average => (F::of_usize(na) * da + F::of_usize(nb) * db) / F::of_usize(na + nb),
            };
            dist[a][c] = merged;
            dist[c][a] = merged;
        }
        slots[a] = Some((n + step, na + nb));
        slots[b] = None;
        merges.push(Merge { left: lo, right: hi, distance: d });
    }
    Dendrogram { n, linkage, merges, space: space.clone(), points }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Clusters after the first `n - k` merges. Cluster ids follow the first
/// appearance of a member in leaf order; centroids are attribute-wise
/// means / modes.
pub fn dendrogram_cut<F: Scalar>(dendrogram: &Dendrogram<F>, k: usize) -> Result<ClusterModel<F>, MiningError> {
    let n = dendrogram.n;
    if k == 0 || k > n {
        return Err(MiningError::Cut { k, n });
    }
    // union-find over leaves; node_leaf maps any node id to one of its leaves
    let mut parent: Vec<usize> = (0..n).collect();
    let mut node_leaf: Vec<usize> = (0..n).collect();
    for m in &dendrogram.merges[..n - k] {
        let (a, b) = (node_leaf[m.left], node_leaf[m.right]);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[rb] = ra;
        node_leaf.push(a);
    }
    let mut ids = vec![usize::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut next = 0;
    for i in 0..n {
        let r = find(&mut parent, i);
        if ids[r] == usize::MAX {
            ids[r] = next;
            next += 1;
        }
        labels.push(ids[r] as i64);
    }
    let space = &dendrogram.space;
    let points = &dendrogram.points;
    let centroids: Vec<Point<F>> = (0..k)
        .map(|j| space.centroid(points.iter().zip(&labels).filter(|(_, l)| **l == j as i64).map(|(p, _)| p)))
        .collect();
    Ok(ClusterModel {
        method: ClusterMethod::AgglomerativeCut { linkage: dendrogram.linkage },
        space: space.clone(),
        sse: labelled_sse(space, points, &centroids, &labels),
        sizes: sizes_of(&labels, k),
        centroids,
        labels,
        sse_trace: Vec::new(),
    })
}

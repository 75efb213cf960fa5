use super::cluster::{labelled_sse, sizes_of, ClusterMethod, ClusterModel, NOISE};
use super::space::{FeatureSpace, Point};
use super::MiningError;
use crate::scalar::Scalar;
use crate::table::Table;

pub fn dbscan_fit<F: Scalar>(
    table: &Table<F>,
    space: &FeatureSpace<F>,
    eps: F,
    min_pts: usize,
) -> Result<ClusterModel<F>, MiningError> {
    let points = space.points(table)?;
    dbscan_points(points, space, eps, min_pts)
}

/// Density clustering. A point is core when at least `min_pts` points
/// (itself included) lie within `eps`. Clusters are the connected
/// components of core points, numbered by their lowest core index; border
/// points join the lowest-numbered adjacent cluster; the rest is noise.
/// Each cluster is represented by its medoid.
pub fn dbscan_points<F: Scalar>(
    points: Vec<Point<F>>,
    space: &FeatureSpace<F>,
    eps: F,
    min_pts: usize,
) -> Result<ClusterModel<F>, MiningError> {
    if !(eps > F::zero()) || min_pts == 0 {
        return Err(MiningError::Fit("dbscan needs eps > 0 and min_pts >= 1".into()));
    }
    let n = points.len();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| space.point_distance(&points[i], &points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels = vec![NOISE; n];
    let mut k = 0i64;
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = k;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for &j in &neighbours[i] {
                if core[j] && labels[j] == NOISE {
                    labels[j] = k;
                    stack.push(j);
                }
            }
        }
        k += 1;
    }
    for i in 0..n {
        if !core[i] {
            labels[i] = neighbours[i]
                .iter()
                .filter(|&&j| core[j])
                .map(|&j| labels[j])
                .min()
                .unwrap_or(NOISE);
        }
    }

    let k = k as usize;
    let centroids: Vec<Point<F>> = (0..k).map(|c| medoid(&points, &labels, c as i64, space).clone()).collect();
    Ok(ClusterModel {
        method: ClusterMethod::Dbscan { eps, min_pts },
        space: space.clone(),
        sse: labelled_sse(space, &points, &centroids, &labels),
        sizes: sizes_of(&labels, k),
        centroids,
        labels,
        sse_trace: Vec::new(),
    })
}

/// Member with the least total distance to the other members; lowest index
/// on ties.
fn medoid<'a, F: Scalar>(points: &'a [Point<F>], labels: &[i64], c: i64, space: &FeatureSpace<F>) -> &'a Point<F> {
    let members: Vec<usize> = (0..points.len()).filter(|&i| labels[i] == c).collect();
    let mut best: Option<(usize, F)> = None;
    for &i in &members {
        let total: F = members.iter().map(|&j| space.point_distance(&points[i], &points[j])).sum();
        if best.map_or(true, |(_, b)| total < b) {
            best = Some((i, total));
        }
    }
    &points[best.expect("clusters are non-empty").0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::Attribute;
    use crate::table::Cell;
    use proptest::prelude::*;

    fn pts(xs: &[f64]) -> Vec<Point<f64>> {
        xs.iter().map(|x| vec![Cell::Num(*x)]).collect()
    }

    fn space() -> FeatureSpace<f64> {
        FeatureSpace::new(vec![Attribute::numeric("X")]).unwrap()
    }

    /// Independent oracle: closure of the core-to-core eps relation by
    /// repeated relaxation over a reachability matrix.
    fn oracle(xs: &[f64], eps: f64, min_pts: usize) -> Vec<i64> {
        let n = xs.len();
        let near = |i: usize, j: usize| (xs[i] - xs[j]).abs() <= eps;
        let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
        let mut reach = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                reach[i][j] = core[i] && core[j] && near(i, j);
            }
        }
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][m] && reach[m][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        // component id of a core point = rank of its lowest connected core index
        let roots: Vec<usize> = (0..n).filter(|&i| core[i] && (0..i).all(|j| !reach[j][i])).collect();
        let id_of = |i: usize| roots.iter().position(|&r| r == i || reach[r][i]).unwrap() as i64;
        (0..n)
            .map(|i| {
                if core[i] {
                    id_of(i)
                } else {
                    (0..n).filter(|&j| core[j] && near(i, j)).map(id_of).min().unwrap_or(NOISE)
                }
            })
            .collect()
    }

    #[test]
    fn chain_is_one_cluster() {
        let m = dbscan_points(pts(&[0.0, 1.0, 2.0]), &space(), 1.1, 2).unwrap();
        assert_eq!(m.labels, vec![0, 0, 0]);
        assert_eq!(m.centroids, vec![vec![Cell::Num(1.0)]]);
        assert_eq!(oracle(&[0.0, 1.0, 2.0], 1.1, 2), vec![0, 0, 0]);
    }

    #[test]
    fn isolated_point_is_noise() {
        let m = dbscan_points(pts(&[0.0, 0.2, 0.4, 0.1, 100.0]), &space(), 0.5, 3).unwrap();
        assert_eq!(m.labels, vec![0, 0, 0, 0, NOISE]);
        assert_eq!(m.sizes, vec![4]);
        assert_eq!(m.noise_count(), 1);
    }

    #[test]
    fn empty_input_has_no_clusters() {
        let m = dbscan_points(pts(&[]), &space(), 1.0, 1).unwrap();
        assert_eq!(m.k(), 0);
    }

    #[test]
    fn invalid_parameters_fail() {
        assert!(dbscan_points(pts(&[1.0]), &space(), 0.0, 1).is_err());
        assert!(dbscan_points(pts(&[1.0]), &space(), 1.0, 0).is_err());
    }

    #[test]
    fn border_point_joins_lowest_cluster() {
        // cores are 2 and 22; 12 is within eps of both
        let xs = [0.0, 1.0, 2.0, 12.0, 22.0, 23.0, 24.0];
        let m = dbscan_points(pts(&xs), &space(), 10.0, 4).unwrap();
        assert_eq!(m.labels, vec![0, 0, 0, 0, 1, 1, 1]);
        assert_eq!(m.labels, oracle(&xs, 10.0, 4));
    }

    proptest! {
        #[test]
        fn matches_brute_force_closure(
            xs in prop::collection::vec(0f64..20.0, 0..=12),
            eps in 0.1f64..4.0,
            min_pts in 1usize..5,
        ) {
            let m = dbscan_points(pts(&xs), &space(), eps, min_pts).unwrap();
            prop_assert_eq!(m.labels, oracle(&xs, eps, min_pts));
        }
    }
}

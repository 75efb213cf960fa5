//! Train/test protocol and model diagnostics: split, accuracy, cluster
//! influence, inter/intra cluster distances and what-if runs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mining::{
    fit_binning, regression_score, tree_predict, BinningSpec, ClusterModel, MiningError, MiningModel, TreeModel,
    TreePrediction, DEFAULT_BINS, NOISE,
};
use crate::scalar::Scalar;
use crate::table::{Cell, Column, ColumnKind, Record, Table};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("cannot split: {0}")]
    Split(String),
    #[error("evaluation set is empty")]
    Empty,
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error(transparent)]
    Mining(#[from] MiningError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.66, seed: 42 }
    }
}

/// Row indices of a seeded train/test partition, each in original order.
/// The train part has `floor(n * fraction + 0.5)` rows.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(EvalError::Split(format!("train fraction {} outside (0, 1)", spec.train_fraction)));
    }
    if n < 2 {
        return Err(EvalError::Split(format!("need at least 2 rows, have {n}")));
    }
    let n_train = (n as f64 * spec.train_fraction + 0.5).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split<F: Scalar>(table: &Table<F>, spec: &SplitSpec) -> Result<(Table<F>, Table<F>), EvalError> {
    let (train, test) = split_indices(table.len(), spec)?;
    Ok((table.take_rows(&train), table.take_rows(&test)))
}

/// Share of `test` rows whose predicted class equals the `target` cell.
pub fn accuracy<F: Scalar>(model: &TreeModel<F>, test: &Table<F>, target: &str) -> Result<F, EvalError> {
    if test.is_empty() {
        return Err(EvalError::Empty);
    }
    let ti = test.column_index(target).ok_or_else(|| EvalError::UnknownAttribute(target.to_string()))?;
    let mut hits = 0usize;
    for row in test.iter_rows() {
        let p = tree_predict(model, &row)?;
        if row.cells()[ti].as_text() == Some(p.value.as_str()) {
            hits += 1;
        }
    }
    Ok(F::of_usize(hits) / F::of_usize(test.len()))
}

/// Total-variation distance between two distributions over the same
/// categories.
pub fn tv_distance<F: Scalar>(p: &[F], q: &[F]) -> F {
    p.iter().zip(q).map(|(a, b)| (*a - *b).abs()).sum::<F>() / F::of(2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEntry<F> {
    pub attribute: String,
    /// Normalized so the top attribute scores 1.
    pub score: F,
    /// Size-weighted mean total-variation distance before normalization.
    pub raw: F,
}

/// Attributes by descending influence; equal scores keep column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceChart<F> {
    pub entries: Vec<InfluenceEntry<F>>,
}

impl<F: Scalar> InfluenceChart<F> {
    pub fn score(&self, attribute: &str) -> Option<F> {
        self.entries.iter().find(|e| e.attribute == attribute).map(|e| e.score)
    }

    pub fn to_table(&self) -> Table<F> {
        let mut t = Table::new(vec![
            Column::categorical("ATTRIBUTE"),
            Column::new("INFLUENCE", ColumnKind::Numeric),
            Column::new("RAW_TV", ColumnKind::Numeric),
        ])
        .expect("distinct columns");
        for e in &self.entries {
            t.push_row(vec![Cell::text(&e.attribute), Cell::Num(e.score), Cell::Num(e.raw)]).expect("row arity");
        }
        t
    }
}

/// Category label per row for one column: the formatted value for
/// categorical columns, a bin label for numeric ones.
fn categories<F: Scalar>(table: &Table<F>, col: usize) -> Vec<String> {
    let column = &table.columns()[col];
    let numeric: Option<Vec<F>> =
        if column.kind.is_numeric() { table.rows().iter().map(|r| r[col].as_num()).collect() } else { None };
    match numeric {
        Some(xs) if !xs.is_empty() => {
            let bins: BinningSpec<F> = fit_binning(&xs, DEFAULT_BINS).expect("non-empty finite column");
            xs.iter().map(|x| bins.label(bins.bin_of(*x))).collect()
        }
        _ => table.rows().iter().map(|r| r[col].format(column.kind)).collect(),
    }
}

/// Cluster label per row of `table` under `model`.
pub fn assign_rows<F: Scalar>(model: &ClusterModel<F>, table: &Table<F>) -> Result<Vec<i64>, EvalError> {
    table
        .iter_rows()
        .map(|r| Ok(model.assign_point(&model.space.point(&r)?)))
        .collect()
}

/// Per-column cluster influence over every column of `table`.
///
/// For each column the rows' value distribution inside each cluster is
/// compared with the distribution over all clustered rows by total
/// variation; the score is the cluster-size-weighted mean of those
/// distances. Numeric columns are grouped into equal-width bins first.
/// Scores are finally divided by the largest one.
pub fn influence_chart<F: Scalar>(model: &ClusterModel<F>, table: &Table<F>) -> Result<InfluenceChart<F>, EvalError> {
    let labels = assign_rows(model, table)?;
    influence_from_labels(table, &labels)
}

pub fn influence_from_labels<F: Scalar>(table: &Table<F>, labels: &[i64]) -> Result<InfluenceChart<F>, EvalError> {
    let kept: Vec<usize> = (0..table.len()).filter(|&i| labels[i] != NOISE).collect();
    let n = kept.len();
    let mut entries = Vec::with_capacity(table.columns().len());
    for (col, column) in table.columns().iter().enumerate() {
        let cats = categories(table, col);
        let mut index: BTreeMap<&str, usize> = kept.iter().map(|&i| (cats[i].as_str(), 0)).collect();
        for (j, slot) in index.values_mut().enumerate() {
            *slot = j;
        }
        let m = index.len();
        let mut global = vec![0usize; m];
        let mut per: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for &i in &kept {
            let c = index[cats[i].as_str()];
            global[c] += 1;
            per.entry(labels[i]).or_insert_with(|| vec![0; m])[c] += 1;
        }
        let norm = |counts: &[usize]| {
            let total = F::of_usize(counts.iter().sum());
            counts.iter().map(|c| F::of_usize(*c) / total).collect::<Vec<F>>()
        };
        let g = norm(&global);
        let raw: F = if n == 0 {
            F::zero()
        } else {
            per.values()
                .map(|counts| F::of_usize(counts.iter().sum()) / F::of_usize(n) * tv_distance(&norm(counts), &g))
                .sum()
        };
        entries.push(InfluenceEntry { attribute: column.name.clone(), score: raw, raw });
    }
    let max = entries.iter().map(|e| e.raw).fold(F::zero(), F::max);
    for e in &mut entries {
        e.score = if max > F::zero() { e.raw / max } else { F::zero() };
    }
    entries.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    Ok(InfluenceChart { entries })
}

/// Id of the biggest cluster, ties to the lowest id. `None` without
/// clusters.
pub fn largest_cluster<F: Scalar>(model: &ClusterModel<F>) -> Option<usize> {
    let best = *model.sizes.iter().max()?;
    model.sizes.iter().position(|s| *s == best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport<F> {
    /// Distances between centroids.
    pub inter: Vec<Vec<F>>,
    /// Mean member-to-centroid distance per cluster; 0 for empty clusters.
    pub intra: Vec<F>,
}

impl<F: Scalar> DistanceReport<F> {
    pub fn inter_table(&self) -> Table<F> {
        let mut cols = vec![Column::categorical("CLUSTER")];
        cols.extend((0..self.inter.len()).map(|j| Column::numeric(format!("C{j}"))));
        let mut t = Table::new(cols).expect("distinct columns");
        for (i, row) in self.inter.iter().enumerate() {
            let mut cells = vec![Cell::text(i.to_string())];
            cells.extend(row.iter().map(|d| Cell::Num(*d)));
            t.push_row(cells).expect("square matrix");
        }
        t
    }

    pub fn intra_table(&self) -> Table<F> {
        let mut t = Table::new(vec![Column::categorical("CLUSTER"), Column::numeric("INTRA_DISTANCE")])
            .expect("distinct columns");
        for (i, d) in self.intra.iter().enumerate() {
            t.push_row(vec![Cell::text(i.to_string()), Cell::Num(*d)]).expect("row arity");
        }
        t
    }
}

/// Centroid distances and mean member distances, with members found by
/// assigning each row of `table`. DBSCAN models use their medoids.
pub fn distance_report<F: Scalar>(model: &ClusterModel<F>, table: &Table<F>) -> Result<DistanceReport<F>, EvalError> {
    let space = &model.space;
    let k = model.k();
    let inter = (0..k)
        .map(|i| (0..k).map(|j| space.point_distance(&model.centroids[i], &model.centroids[j])).collect())
        .collect();
    let mut sum = vec![F::zero(); k];
    let mut count = vec![0usize; k];
    for r in table.iter_rows() {
        let p = space.point(&r)?;
        let c = model.assign_point(&p);
        if c >= 0 {
            let c = c as usize;
            sum[c] = sum[c] + space.point_distance(&p, &model.centroids[c]);
            count[c] += 1;
        }
    }
    let intra = sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| if c == 0 { F::zero() } else { s / F::of_usize(c) })
        .collect();
    Ok(DistanceReport { inter, intra })
}

/// Share of each category of one column, per cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeDistribution<F> {
    pub attribute: String,
    pub categories: Vec<String>,
    /// `shares[c][j]`: fraction of cluster `c` rows in category `j`.
    pub shares: Vec<Vec<F>>,
}

impl<F: Scalar> AttributeDistribution<F> {
    pub fn to_table(&self) -> Table<F> {
        let mut t = Table::new(vec![
            Column::categorical("CLUSTER"),
            Column::categorical(self.attribute.clone()),
            Column::new("SHARE", ColumnKind::Probability),
        ])
        .expect("distinct columns");
        for (c, row) in self.shares.iter().enumerate() {
            for (cat, s) in self.categories.iter().zip(row) {
                t.push_row(vec![Cell::text(c.to_string()), Cell::text(cat), Cell::Num(*s)]).expect("row arity");
            }
        }
        t
    }
}

pub fn attribute_distribution<F: Scalar>(
    model: &ClusterModel<F>,
    table: &Table<F>,
    attribute: &str,
) -> Result<AttributeDistribution<F>, EvalError> {
    let col = table.column_index(attribute).ok_or_else(|| EvalError::UnknownAttribute(attribute.to_string()))?;
    let labels = assign_rows(model, table)?;
    let cats = categories(table, col);
    let order: Vec<String> = {
        let mut seen: Vec<String> = cats.clone();
        seen.sort();
        seen.dedup();
        seen
    };
    let k = model.k();
    let mut counts = vec![vec![0usize; order.len()]; k];
    for (i, l) in labels.iter().enumerate() {
        if *l >= 0 {
            let j = order.binary_search(&cats[i]).expect("category seen");
            counts[*l as usize][j] += 1;
        }
    }
    let shares = counts
        .into_iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.into_iter()
                .map(|c| if total == 0 { F::zero() } else { F::of_usize(c) / F::of_usize(total) })
                .collect()
        })
        .collect();
    Ok(AttributeDistribution { attribute: attribute.to_string(), categories: order, shares })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prediction<F> {
    Tree(TreePrediction<F>),
    Cluster { cluster: i64 },
    Score { score: F },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIf<F> {
    pub baseline: Prediction<F>,
    pub modified: Prediction<F>,
}

fn predict<F: Scalar>(model: &MiningModel<F>, record: &Record<F>) -> Result<Prediction<F>, EvalError> {
    Ok(match model {
        MiningModel::Tree(m) => Prediction::Tree(tree_predict(m, record)?),
        MiningModel::Cluster(m) => Prediction::Cluster { cluster: crate::mining::cluster_assign(m, record)? },
        MiningModel::Regression(m) => {
            let name = m.input.as_deref().ok_or_else(|| EvalError::UnknownAttribute("regression input".into()))?;
            let x = record
                .get(name)
                .ok_or_else(|| MiningError::MissingAttribute(name.to_string()))?
                .coerce_num()
                .ok_or_else(|| MiningError::AttributeKind { name: name.to_string(), expected: "numeric" })?;
            Prediction::Score { score: regression_score(m, x) }
        }
        MiningModel::Rules(_) => return Err(EvalError::UnknownAttribute("rule sets do not predict".into())),
    })
}

fn model_inputs<F: Scalar>(model: &MiningModel<F>) -> Vec<String> {
    match model {
        MiningModel::Tree(m) => m.inputs.iter().map(|a| a.name.clone()).collect(),
        MiningModel::Cluster(m) => m.space.names().map(str::to_string).collect(),
        MiningModel::Regression(m) => m.input.iter().cloned().collect(),
        MiningModel::Rules(_) => Vec::new(),
    }
}

/// Predicts `record` as given and with `overrides` applied.
pub fn what_if<F: Scalar>(
    model: &MiningModel<F>,
    record: &Record<F>,
    overrides: &[(String, Cell<F>)],
) -> Result<WhatIf<F>, EvalError> {
    let inputs = model_inputs(model);
    let mut changed = record.clone();
    for (name, value) in overrides {
        if !inputs.iter().any(|i| i == name) {
            return Err(EvalError::UnknownAttribute(name.clone()));
        }
        changed.insert(name.clone(), value.clone());
    }
    Ok(WhatIf { baseline: predict(model, record)?, modified: predict(model, &changed)? })
}

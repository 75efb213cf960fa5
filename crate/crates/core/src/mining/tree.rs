use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::binning::{fit_binning, DEFAULT_BINS};
use super::space::{Attribute, AttributeKind};
use super::MiningError;
use crate::scalar::Scalar;
use crate::table::{AttributeSource, Cell, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams<F> {
    /// Upper bound on the number of leaves; `None` grows until no split helps.
    pub max_leaves: Option<usize>,
    /// Smallest number of training records in any child of a split.
    pub min_leaf_size: usize,
    /// A split must gain strictly more than this. `None` accepts any split
    /// that partitions the node.
    pub min_gain: Option<F>,
    /// Equal-width bins per numeric attribute, fitted at each node.
    pub n_bins: usize,
}

impl<F> Default for TreeParams<F> {
    fn default() -> Self {
        TreeParams { max_leaves: None, min_leaf_size: 1, min_gain: None, n_bins: DEFAULT_BINS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Split<F> {
    /// One child per value, `children[i]` taking `values[i]`.
    Categorical { attribute: String, values: Vec<String> },
    /// Child 0 takes `x < threshold`, child 1 the rest.
    Threshold { attribute: String, threshold: F },
}

impl<F> Split<F> {
    pub fn attribute(&self) -> &str {
        match self {
            Split::Categorical { attribute, .. } | Split::Threshold { attribute, .. } => attribute,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode<F> {
    pub id: usize,
    /// Training class frequencies at this node.
    pub counts: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<Split<F>>,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<usize>,
}

impl<F: Scalar> TreeNode<F> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn size(&self) -> usize {
        self.counts.values().sum()
    }

    /// Majority class (ties to the lexicographically smallest) and its share.
    pub fn majority(&self) -> (&str, F) {
        let best = self.counts.values().copied().max().unwrap_or(0);
        let (class, count) = self.counts.iter().find(|(_, c)| **c == best).expect("nodes hold records");
        (class.as_str(), F::of_usize(*count) / F::of_usize(self.size()))
    }

    /// Class probabilities in class order.
    pub fn distribution(&self) -> Vec<(String, F)> {
        let n = F::of_usize(self.size());
        self.counts.iter().map(|(c, k)| (c.clone(), F::of_usize(*k) / n)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel<F> {
    pub target: String,
    pub inputs: Vec<Attribute<F>>,
    pub params: TreeParams<F>,
    /// Indexed by node id; node 0 is the root.
    pub nodes: Vec<TreeNode<F>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreePrediction<F> {
    pub node_id: usize,
    pub probability: F,
    pub value: String,
}

impl<F: Scalar> TreeModel<F> {
    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode<F>> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Leaf reached by `record`.
    pub fn route(&self, record: &impl AttributeSource<F>) -> Result<&TreeNode<F>, MiningError> {
        let mut node = &self.nodes[0];
        while let Some(split) = &node.split {
            let name = split.attribute();
            let cell = record.attribute(name).ok_or_else(|| MiningError::MissingAttribute(name.to_string()))?;
            let child = match (split, cell) {
                (Split::Categorical { values, .. }, Cell::Text(v)) => match values.iter().position(|x| x == v) {
                    Some(i) => node.children[i],
                    None => self.largest_child(node),
                },
                (Split::Threshold { threshold, .. }, Cell::Num(x)) => node.children[usize::from(*x >= *threshold)],
                (Split::Categorical { .. }, Cell::Num(_)) => {
                    return Err(MiningError::AttributeKind { name: name.to_string(), expected: "categorical" })
                }
                (Split::Threshold { .. }, Cell::Text(_)) => {
                    return Err(MiningError::AttributeKind { name: name.to_string(), expected: "numeric" })
                }
            };
            node = &self.nodes[child];
        }
        Ok(node)
    }

    fn largest_child(&self, node: &TreeNode<F>) -> usize {
        let mut best = node.children[0];
        for &c in &node.children[1..] {
            if self.nodes[c].size() > self.nodes[best].size() {
                best = c;
            }
        }
        best
    }
}

pub fn tree_predict<F: Scalar>(
    model: &TreeModel<F>,
    record: &impl AttributeSource<F>,
) -> Result<TreePrediction<F>, MiningError> {
    let leaf = model.route(record)?;
    let (value, probability) = leaf.majority();
    Ok(TreePrediction { node_id: leaf.id, probability, value: value.to_string() })
}

fn entropy<F: Scalar>(counts: &BTreeMap<&str, usize>) -> F {
    let n: usize = counts.values().sum();
    if n == 0 {
        return F::zero();
    }
    let n = F::of_usize(n);
    counts
        .values()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = F::of_usize(*c) / n;
            -p * p.log2()
        })
        .sum()
}

struct Candidate<F> {
    gain: F,
    split: Split<F>,
    parts: Vec<Vec<usize>>,
}

/// Fits a classification tree on `train`, predicting the categorical column
/// `target` from `inputs`.
///
/// Growth is best-first: the open leaf whose best admissible split has the
/// highest information gain is split next (ties to the lower node id).
/// Categorical attributes split multiway on the values present at the node;
/// numeric attributes split in two at the inner edges of `params.n_bins`
/// equal-width bins fitted to the node's values.
pub fn tree_fit<F: Scalar>(
    train: &Table<F>,
    target: &str,
    inputs: &[impl AsRef<str>],
    params: &TreeParams<F>,
) -> Result<TreeModel<F>, MiningError> {
    if train.is_empty() {
        return Err(MiningError::Fit("training table is empty".into()));
    }
    if params.min_leaf_size == 0 || params.n_bins == 0 || params.max_leaves == Some(0) {
        return Err(MiningError::Fit("min_leaf_size, n_bins and max_leaves must be positive".into()));
    }
    let ti = train.column_index(target).ok_or_else(|| MiningError::MissingAttribute(target.to_string()))?;
    let classes: Vec<&str> = train
        .rows()
        .iter()
        .map(|r| {
            r[ti].as_text().ok_or_else(|| MiningError::AttributeKind {
                name: target.to_string(),
                expected: "categorical",
            })
        })
        .collect::<Result<_, _>>()?;
    let mut attrs = Vec::new();
    let mut cols = Vec::new();
    for name in inputs {
        let name = name.as_ref();
        if name == target {
            return Err(MiningError::Fit(format!("`{name}` is both target and input")));
        }
        let i = train.column_index(name).ok_or_else(|| MiningError::MissingAttribute(name.to_string()))?;
        let kind = if train.columns()[i].kind.is_numeric() { AttributeKind::Numeric } else { AttributeKind::Categorical };
        for r in train.rows() {
            let ok = matches!((kind, &r[i]), (AttributeKind::Numeric, Cell::Num(_)) | (AttributeKind::Categorical, Cell::Text(_)));
            if !ok {
                let expected = if kind == AttributeKind::Numeric { "numeric" } else { "categorical" };
                return Err(MiningError::AttributeKind { name: name.to_string(), expected });
            }
        }
        attrs.push(match kind {
            AttributeKind::Numeric => Attribute::numeric(name),
            AttributeKind::Categorical => Attribute::categorical(name),
        });
        cols.push(i);
    }

    let count = |rows: &[usize]| {
        let mut m: BTreeMap<&str, usize> = BTreeMap::new();
        for &r in rows {
            *m.entry(classes[r]).or_default() += 1;
        }
        m
    };
    let to_owned = |m: BTreeMap<&str, usize>| m.into_iter().map(|(k, v)| (k.to_string(), v)).collect();

    let candidates = |rows: &[usize]| -> Vec<Candidate<F>> {
        let parent = count(rows);
        if parent.len() < 2 {
            return Vec::new();
        }
        let h = entropy::<F>(&parent);
        let n = F::of_usize(rows.len());
        let mut out = Vec::new();
        let mut consider = |split: Split<F>, parts: Vec<Vec<usize>>| {
            if parts.len() < 2 || parts.iter().any(|p| p.len() < params.min_leaf_size) {
                return;
            }
            let rest: F = parts.iter().map(|p| F::of_usize(p.len()) / n * entropy(&count(p))).sum();
            let gain = h - rest;
            if params.min_gain.map_or(true, |g| gain > g) {
                out.push(Candidate { gain, split, parts });
            }
        };
        for (a, &ci) in attrs.iter().zip(&cols) {
            let rows_cells = rows.iter().map(|&r| (r, &train.rows()[r][ci]));
            match a.kind {
                AttributeKind::Categorical => {
                    let mut by_value: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
                    for (r, c) in rows_cells {
                        by_value.entry(c.as_text().expect("checked")).or_default().push(r);
                    }
                    let values = by_value.keys().map(|v| v.to_string()).collect();
                    consider(
                        Split::Categorical { attribute: a.name.clone(), values },
                        by_value.into_values().collect(),
                    );
                }
                AttributeKind::Numeric => {
                    let xs: Vec<(usize, F)> = rows_cells.map(|(r, c)| (r, c.as_num().expect("checked"))).collect();
                    let values: Vec<F> = xs.iter().map(|(_, x)| *x).collect();
                    let bins = fit_binning(&values, params.n_bins).expect("non-empty node");
                    for &t in bins.thresholds() {
                        let (lo, hi): (Vec<&(usize, F)>, Vec<&(usize, F)>) = xs.iter().partition(|(_, x)| *x < t);
                        if lo.is_empty() || hi.is_empty() {
                            continue;
                        }
                        consider(
                            Split::Threshold { attribute: a.name.clone(), threshold: t },
                            vec![lo.into_iter().map(|p| p.0).collect(), hi.into_iter().map(|p| p.0).collect()],
                        );
                    }
                }
            }
        }
        // stable: equal gains keep attribute / threshold order
        out.sort_by(|a, b| b.gain.partial_cmp(&a.gain).unwrap_or(std::cmp::Ordering::Equal));
        out
    };

    let all: Vec<usize> = (0..train.len()).collect();
    let mut nodes = vec![TreeNode { id: 0, counts: to_owned(count(&all)), split: None, children: Vec::new() }];
    // open leaves: (node id, ranked candidates)
    let mut open: Vec<(usize, Vec<Candidate<F>>)> = vec![(0, candidates(&all))];
    let mut leaves = 1usize;
    loop {
        let admissible = |c: &Candidate<F>| params.max_leaves.map_or(true, |m| leaves - 1 + c.parts.len() <= m);
        let mut pick: Option<(usize, usize, F)> = None;
        for (slot, (id, cands)) in open.iter().enumerate() {
            if let Some(ci) = cands.iter().position(admissible) {
                let g = cands[ci].gain;
                let better = match pick {
                    None => true,
                    Some((ps, _, pg)) => g > pg || (g == pg && *id < open[ps].0),
                };
                if better {
                    pick = Some((slot, ci, g));
                }
            }
        }
        let Some((slot, ci, _)) = pick else { break };
        let (id, mut cands) = open.swap_remove(slot);
        let cand = cands.swap_remove(ci);
        leaves += cand.parts.len() - 1;
        let mut children = Vec::with_capacity(cand.parts.len());
        for part in cand.parts {
            let cid = nodes.len();
            nodes.push(TreeNode { id: cid, counts: to_owned(count(&part)), split: None, children: Vec::new() });
            open.push((cid, candidates(&part)));
            children.push(cid);
        }
        nodes[id].split = Some(cand.split);
        nodes[id].children = children;
    }
    Ok(TreeModel { target: target.to_string(), inputs: attrs, params: params.clone(), nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Column, Record};
    use proptest::prelude::*;

    fn table(rows: &[(&str, &str, f64)]) -> Table<f64> {
        let mut t =
            Table::new(vec![Column::categorical("VENDOR"), Column::categorical("GL"), Column::numeric("AMT")]).unwrap();
        for (v, g, a) in rows {
            t.push_row(vec![Cell::text(*v), Cell::text(*g), Cell::Num(*a)]).unwrap();
        }
        t
    }

    fn rec(v: &str, a: f64) -> Record<f64> {
        [("VENDOR".to_string(), Cell::text(v)), ("AMT".to_string(), Cell::Num(a))].into_iter().collect()
    }

    #[test]
    fn pure_target_gives_root_only_tree() {
        let t = table(&[("a", "G", 1.0), ("b", "G", 2.0)]);
        let m = tree_fit(&t, "GL", &["VENDOR", "AMT"], &TreeParams::default()).unwrap();
        assert_eq!(m.nodes.len(), 1);
        let p = tree_predict(&m, &rec("zzz", 9.0)).unwrap();
        assert_eq!((p.node_id, p.value.as_str(), p.probability), (0, "G", 1.0));
    }

    #[test]
    fn vendor_rule_gives_pure_leaf() {
        let t = table(&[
            ("114033", "259010", 15000.0),
            ("114033", "259010", 3000.0),
            ("200031", "250602", 3000.0),
            ("200031", "250602", 121212.0),
            ("200032", "181030", 2000.0),
        ]);
        let m = tree_fit(&t, "GL", &["VENDOR", "AMT"], &TreeParams::default()).unwrap();
        let p = tree_predict(&m, &rec("114033", 1.0)).unwrap();
        assert_eq!(p.value, "259010");
        assert_eq!(p.probability, 1.0);
    }

    #[test]
    fn hand_computed_gain_picks_the_split() {
        // target Y: a a b b. X1 = p p q q separates perfectly (gain 1 bit);
        // X2 = r s r s carries nothing (gain 0).
        let mut t = Table::<f64>::new(vec![Column::categorical("X2"), Column::categorical("X1"), Column::categorical("Y")])
            .unwrap();
        for (x2, x1, y) in [("r", "p", "a"), ("s", "p", "a"), ("r", "q", "b"), ("s", "q", "b")] {
            t.push_row(vec![Cell::text(x2), Cell::text(x1), Cell::text(y)]).unwrap();
        }
        let params = TreeParams { max_leaves: Some(2), ..TreeParams::default() };
        let m = tree_fit(&t, "Y", &["X2", "X1"], &params).unwrap();
        assert_eq!(m.nodes[0].split.as_ref().unwrap().attribute(), "X1");
        let h = |ps: &[f64]| -ps.iter().filter(|p| **p > 0.0).map(|p| p * p.log2()).sum::<f64>();
        let gain_x1 = h(&[0.5, 0.5]) - (0.5 * h(&[1.0]) + 0.5 * h(&[1.0]));
        let gain_x2 = h(&[0.5, 0.5]) - (0.5 * h(&[0.5, 0.5]) + 0.5 * h(&[0.5, 0.5]));
        assert_eq!((gain_x1, gain_x2), (1.0, 0.0));
        assert_eq!(m.leaf_count(), 2);
    }

    #[test]
    fn leaf_probability_is_frequency_ratio() {
        let t = table(&[("v", "A", 1.0), ("v", "A", 1.0), ("v", "B", 1.0), ("v", "A", 1.0)]);
        let m = tree_fit(&t, "GL", &["VENDOR"], &TreeParams::default()).unwrap();
        let p = tree_predict(&m, &rec("v", 1.0)).unwrap();
        assert_eq!((p.value.as_str(), p.probability), ("A", 0.75));
    }

    #[test]
    fn majority_ties_pick_smallest_class() {
        let t = table(&[("v", "B", 1.0), ("v", "A", 1.0)]);
        let m = tree_fit(&t, "GL", &["VENDOR"], &TreeParams::default()).unwrap();
        assert_eq!(tree_predict(&m, &rec("v", 1.0)).unwrap().value, "A");
    }

    #[test]
    fn numeric_threshold_split() {
        let t = table(&[("v", "lo", 0.0), ("v", "lo", 10.0), ("v", "hi", 90.0), ("v", "hi", 100.0)]);
        let m = tree_fit(&t, "GL", &["AMT"], &TreeParams::default()).unwrap();
        assert_eq!(m.nodes[0].split, Some(Split::Threshold { attribute: "AMT".into(), threshold: 20.0 }));
        assert_eq!(tree_predict(&m, &rec("v", 19.9)).unwrap().value, "lo");
        assert_eq!(tree_predict(&m, &rec("v", 20.0)).unwrap().value, "hi");
    }

    #[test]
    fn unseen_category_routes_to_largest_child() {
        let t = table(&[("a", "X", 1.0), ("b", "Y", 1.0), ("b", "Y", 1.0), ("c", "Z", 1.0)]);
        let m = tree_fit(&t, "GL", &["VENDOR"], &TreeParams::default()).unwrap();
        assert_eq!(tree_predict(&m, &rec("never-seen", 1.0)).unwrap().value, "Y");
    }

    #[test]
    fn stopping_rules() {
        let t = table(&[("a", "X", 1.0), ("b", "Y", 1.0), ("c", "Z", 1.0)]);
        let capped = TreeParams { max_leaves: Some(2), ..TreeParams::default() };
        // the only split makes three leaves
        assert_eq!(tree_fit(&t, "GL", &["VENDOR"], &capped).unwrap().nodes.len(), 1);
        let big_leaves = TreeParams { min_leaf_size: 2, ..TreeParams::default() };
        assert_eq!(tree_fit(&t, "GL", &["VENDOR"], &big_leaves).unwrap().nodes.len(), 1);
        let greedy = TreeParams { min_gain: Some(10.0), ..TreeParams::default() };
        assert_eq!(tree_fit(&t, "GL", &["VENDOR"], &greedy).unwrap().nodes.len(), 1);
    }

    #[test]
    fn errors() {
        let t = table(&[] as &[(&str, &str, f64)]);
        assert!(tree_fit(&t, "GL", &["VENDOR"], &TreeParams::default()).is_err());
        let t = table(&[("a", "X", 1.0)]);
        assert!(tree_fit(&t, "AMT", &["VENDOR"], &TreeParams::default()).is_err());
        assert!(tree_fit(&t, "GL", &["NOPE"], &TreeParams::default()).is_err());
        let m = tree_fit(&t, "GL", &["VENDOR"], &TreeParams::default()).unwrap();
        let missing: Record<f64> = Record::new();
        // a root-only tree needs no attributes
        assert!(tree_predict(&m, &missing).is_ok());
    }

    proptest! {
        #[test]
        fn fully_grown_tree_fits_training_data(
            rows in prop::collection::vec((0u8..4, 0u8..3, 0u32..1000), 1..40),
        ) {
            // target is a function of the inputs, so there are no conflicting duplicates
            let data: Vec<(String, String, f64)> = rows
                .iter()
                .map(|(v, c, a)| (format!("v{v}"), format!("g{}", (*v as u32 * 7 + *c as u32 + a / 250) % 5), *a as f64))
                .collect();
            let mut t = Table::new(vec![
                Column::categorical("VENDOR"), Column::categorical("C"), Column::categorical("GL"), Column::numeric("AMT"),
            ]).unwrap();
            for ((v, g, a), (_, c, _)) in data.iter().zip(&rows) {
                t.push_row(vec![Cell::text(v), Cell::text(format!("c{c}")), Cell::text(g), Cell::Num(*a)]).unwrap();
            }
            let m = tree_fit(&t, "GL", &["VENDOR", "C", "AMT"], &TreeParams::default()).unwrap();
            for leaf in m.leaves() {
                let s: f64 = leaf.distribution().iter().map(|(_, p)| *p).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
            for i in 0..t.len() {
                let p = tree_predict(&m, &t.row(i)).unwrap();
                prop_assert_eq!(p.value.as_str(), data[i].1.as_str());
            }
        }
    }
}

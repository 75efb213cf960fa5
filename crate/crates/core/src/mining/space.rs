use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::binning::{fit_binning, BinningSpec};
use super::MiningError;
use crate::scalar::Scalar;
use crate::table::{AttributeSource, Cell, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical,
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling<F> {
    Identity,
    MinMax { min: F, max: F },
}

impl<F: Scalar> Scaling<F> {
    /// Scaled difference `a - b`.
    fn diff(&self, a: F, b: F) -> F {
        match self {
            Scaling::Identity => a - b,
            Scaling::MinMax { min, max } => {
                let range = *max - *min;
                if range > F::zero() {
                    (a - b) / range
                } else {
                    F::zero()
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribute<F> {
    pub name: String,
    pub kind: AttributeKind,
    pub weight: F,
    pub scaling: Scaling<F>,
    /// Groups numeric values for tree splits and value distributions.
    pub binning: Option<BinningSpec<F>>,
}

impl<F: Scalar> Attribute<F> {
    pub fn categorical(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Categorical,
            weight: F::one(),
            scaling: Scaling::Identity,
            binning: None,
        }
    }

    /// Unscaled numeric attribute.
    pub fn numeric(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Numeric,
            weight: F::one(),
            scaling: Scaling::Identity,
            binning: None,
        }
    }

    pub fn scaled(mut self, min: F, max: F) -> Self {
        self.scaling = Scaling::MinMax { min, max };
        self
    }

    pub fn weighted(mut self, weight: F) -> Self {
        self.weight = weight;
        self
    }

    pub fn binned(mut self, binning: BinningSpec<F>) -> Self {
        self.binning = Some(binning);
        self
    }
}

/// A record projected onto a feature space, one cell per attribute.
pub type Point<F> = Vec<Cell<F>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace<F> {
    attributes: Vec<Attribute<F>>,
}

impl<F: Scalar> FeatureSpace<F> {
    pub fn new(attributes: Vec<Attribute<F>>) -> Result<Self, MiningError> {
        if attributes.is_empty() {
            return Err(MiningError::Space("at least one attribute is required".into()));
        }
        let mut seen = HashSet::new();
        for a in &attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(MiningError::Space(format!("duplicate attribute `{}`", a.name)));
            }
            if !(a.weight >= F::zero()) || !a.weight.is_finite() {
                return Err(MiningError::Space(format!("weight of `{}` must be finite and >= 0", a.name)));
            }
        }
        Ok(FeatureSpace { attributes })
    }

    /// Space over the named table columns with weight 1, min-max scaling
    /// fitted on the table, and `n_bins` equal-width bins per numeric
    /// attribute.
    pub fn from_table(
        table: &Table<F>,
        names: &[impl AsRef<str>],
        n_bins: usize,
    ) -> Result<Self, MiningError> {
        let mut attrs = Vec::with_capacity(names.len());
        for n in names {
            let name = n.as_ref();
            let col = table
                .column(name)
                .ok_or_else(|| MiningError::MissingAttribute(name.to_string()))?;
            if col.kind.is_numeric() {
                let values = table
                    .numeric_column(name)
                    .map_err(|e| MiningError::Space(e.to_string()))?;
                let mut a = Attribute::numeric(name);
                if let Some((lo, hi)) = min_max(&values) {
                    a = a.scaled(lo, hi).binned(fit_binning(&values, n_bins)?);
                }
                attrs.push(a);
            } else {
                attrs.push(Attribute::categorical(name));
            }
        }
        Self::new(attrs)
    }

    pub fn with_weight(mut self, name: &str, weight: F) -> Result<Self, MiningError> {
        let a = self
            .attributes
            .iter_mut()
            .find(|a| a.name == name)
            .ok_or_else(|| MiningError::MissingAttribute(name.to_string()))?;
        a.weight = weight;
        Self::new(self.attributes)
    }

    pub fn attributes(&self) -> &[Attribute<F>] {
        &self.attributes
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn point(&self, src: &impl AttributeSource<F>) -> Result<Point<F>, MiningError> {
        self.attributes
            .iter()
            .map(|a| {
                let cell = src
                    .attribute(&a.name)
                    .ok_or_else(|| MiningError::MissingAttribute(a.name.clone()))?;
                match (a.kind, cell) {
                    (AttributeKind::Categorical, Cell::Text(_)) | (AttributeKind::Numeric, Cell::Num(_)) => {
                        Ok(cell.clone())
                    }
                    (AttributeKind::Categorical, Cell::Num(_)) => Err(MiningError::AttributeKind {
                        name: a.name.clone(),
                        expected: "categorical",
                    }),
                    (AttributeKind::Numeric, Cell::Text(_)) => Err(MiningError::AttributeKind {
                        name: a.name.clone(),
                        expected: "numeric",
                    }),
                }
            })
            .collect()
    }

    pub fn points(&self, table: &Table<F>) -> Result<Vec<Point<F>>, MiningError> {
        table.iter_rows().map(|r| self.point(&r)).collect()
    }

    /// Weighted squared distance between conforming points.
    pub fn sq_distance(&self, a: &[Cell<F>], b: &[Cell<F>]) -> F {
        let mut acc = F::zero();
        for ((attr, x), y) in self.attributes.iter().zip(a).zip(b) {
            let d = match (x, y) {
                (Cell::Num(x), Cell::Num(y)) => attr.scaling.diff(*x, *y),
                (Cell::Text(x), Cell::Text(y)) => {
                    if x == y {
                        F::zero()
                    } else {
                        F::one()
                    }
                }
                _ => F::one(),
            };
            acc = acc + attr.weight * d * d;
        }
        acc
    }

    pub fn point_distance(&self, a: &[Cell<F>], b: &[Cell<F>]) -> F {
        self.sq_distance(a, b).sqrt()
    }

    /// Attribute-wise mean (numeric) or mode (categorical, ties to the
    /// lexicographically smallest value). `members` must be non-empty.
    pub fn centroid<'a>(&self, members: impl IntoIterator<Item = &'a Point<F>>) -> Point<F>
    where
        F: 'a,
    {
        let members: Vec<&Point<F>> = members.into_iter().collect();
        assert!(!members.is_empty(), "centroid of an empty set");
        let n = F::of_usize(members.len());
        self.attributes
            .iter()
            .enumerate()
            .map(|(i, a)| match a.kind {
                AttributeKind::Numeric => {
                    let s: F = members.iter().map(|p| p[i].as_num().unwrap_or_else(F::zero)).sum();
                    Cell::Num(s / n)
                }
                AttributeKind::Categorical => {
                    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                    for p in &members {
                        if let Cell::Text(s) = &p[i] {
                            *counts.entry(s.as_str()).or_default() += 1;
                        }
                    }
                    let best = counts.values().copied().max().unwrap_or(0);
                    let mode = counts.iter().find(|(_, c)| **c == best).map(|(s, _)| *s).unwrap_or("");
                    Cell::text(mode)
                }
            })
            .collect()
    }
}

fn min_max<F: Scalar>(values: &[F]) -> Option<(F, F)> {
    let mut it = values.iter().copied();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

/// Weighted mixed distance between two records in `space`.
pub fn distance<F: Scalar>(
    a: &impl AttributeSource<F>,
    b: &impl AttributeSource<F>,
    space: &FeatureSpace<F>,
) -> Result<F, MiningError> {
    let pa = space.point(a)?;
    let pb = space.point(b)?;
    Ok(space.point_distance(&pa, &pb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Record;
    use proptest::prelude::*;

    fn rec(pairs: &[(&str, Cell<f64>)]) -> Record<f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn identical_records_are_at_zero() {
        let space = FeatureSpace::new(vec![Attribute::categorical("V"), Attribute::numeric("A")]).unwrap();
        let r = rec(&[("V", Cell::text("x")), ("A", Cell::Num(3.5))]);
        assert_eq!(distance(&r, &r, &space).unwrap(), 0.0);
    }

    #[test]
    fn categorical_mismatch_is_one() {
        let space = FeatureSpace::new(vec![Attribute::<f64>::categorical("V")]).unwrap();
        let a = rec(&[("V", Cell::text("x"))]);
        let b = rec(&[("V", Cell::text("y"))]);
        assert_eq!(distance(&a, &b, &space).unwrap(), 1.0);
    }

    #[test]
    fn two_scaled_numerics_give_sqrt_two() {
        let space = FeatureSpace::new(vec![
            Attribute::numeric("X").scaled(0.0, 1.0),
            Attribute::numeric("Y").scaled(0.0, 1.0),
        ])
        .unwrap();
        let a = rec(&[("X", Cell::Num(0.0)), ("Y", Cell::Num(0.0))]);
        let b = rec(&[("X", Cell::Num(1.0)), ("Y", Cell::Num(1.0))]);
        let d = distance(&a, &b, &space).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn weights_and_scaling_apply() {
        let space = FeatureSpace::new(vec![
            Attribute::numeric("X").scaled(0.0, 10.0).weighted(4.0),
            Attribute::categorical("C").weighted(0.0),
        ])
        .unwrap();
        let a = rec(&[("X", Cell::Num(0.0)), ("C", Cell::text("a"))]);
        let b = rec(&[("X", Cell::Num(5.0)), ("C", Cell::text("b"))]);
        // sqrt(4 * 0.5^2 + 0 * 1)
        assert!((distance(&a, &b, &space).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn missing_attribute_is_an_error() {
        let space = FeatureSpace::new(vec![Attribute::<f64>::categorical("V")]).unwrap();
        let a = rec(&[("W", Cell::text("x"))]);
        assert_eq!(distance(&a, &a, &space), Err(MiningError::MissingAttribute("V".into())));
    }

    #[test]
    fn space_validation() {
        assert!(FeatureSpace::<f64>::new(vec![]).is_err());
        assert!(FeatureSpace::new(vec![Attribute::<f64>::numeric("A").weighted(-1.0)]).is_err());
        assert!(FeatureSpace::new(vec![Attribute::<f64>::numeric("A"), Attribute::numeric("A")]).is_err());
    }

    #[test]
    fn centroid_mode_ties_to_smallest() {
        let space = FeatureSpace::new(vec![Attribute::categorical("C"), Attribute::numeric("N")]).unwrap();
        let pts: Vec<Point<f64>> = vec![
            vec![Cell::text("b"), Cell::Num(1.0)],
            vec![Cell::text("a"), Cell::Num(2.0)],
            vec![Cell::text("b"), Cell::Num(3.0)],
            vec![Cell::text("a"), Cell::Num(6.0)],
        ];
        assert_eq!(space.centroid(&pts), vec![Cell::text("a"), Cell::Num(3.0)]);
    }

    #[test]
    fn works_in_single_precision() {
        let space = FeatureSpace::new(vec![Attribute::<f32>::numeric("X"), Attribute::numeric("Y")]).unwrap();
        let d = space.point_distance(&[Cell::Num(0.0), Cell::Num(0.0)], &[Cell::Num(3.0), Cell::Num(4.0)]);
        assert_eq!(d, 5.0f32);
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(
            a in (-1e3f64..1e3, "[ab]"), b in (-1e3f64..1e3, "[ab]"), w in 0.0f64..5.0,
        ) {
            let space = FeatureSpace::new(vec![
                Attribute::numeric("N").scaled(-1e3, 1e3).weighted(w),
                Attribute::categorical("C"),
            ]).unwrap();
            let pa = vec![Cell::Num(a.0), Cell::text(a.1)];
            let pb = vec![Cell::Num(b.0), Cell::text(b.1)];
            let d = space.point_distance(&pa, &pb);
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, space.point_distance(&pb, &pa));
            prop_assert_eq!(space.point_distance(&pa, &pa), 0.0);
        }
    }
}

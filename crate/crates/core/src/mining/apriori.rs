use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MiningError;
use crate::scalar::Scalar;
use crate::table::Table;

/// Frequent itemsets with absolute support counts. Itemsets are sorted
/// item vectors, listed by size and then lexicographically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequentItemsets<I: Ord> {
    pub n_transactions: usize,
    pub min_support: f64,
    #[serde(
        with = "as_list",
        bound(serialize = "I: Serialize + Clone", deserialize = "I: Deserialize<'de> + Ord")
    )]
    pub itemsets: BTreeMap<Vec<I>, usize>,
}

/// Itemset maps serialize as `[{"items": [...], "count": n}, ...]`.
mod as_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry<I> {
        items: Vec<I>,
        count: usize,
    }

    pub fn serialize<I: Serialize + Clone, S: Serializer>(m: &BTreeMap<Vec<I>, usize>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Entry<I>> = m.iter().map(|(k, c)| Entry { items: k.clone(), count: *c }).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, I: Deserialize<'de> + Ord, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<Vec<I>, usize>, D::Error> {
        let v: Vec<Entry<I>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|e| (e.items, e.count)).collect())
    }
}

impl<I: Ord + Clone> FrequentItemsets<I> {
    pub fn support(&self, itemset: &[I]) -> Option<f64> {
        self.itemsets.get(itemset).map(|c| *c as f64 / self.n_transactions as f64)
    }

    /// Itemsets ordered by size, then items.
    pub fn by_level(&self) -> Vec<(&Vec<I>, usize)> {
        let mut v: Vec<_> = self.itemsets.iter().map(|(k, c)| (k, *c)).collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(b.0)));
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule<I> {
    pub antecedent: Vec<I>,
    pub consequent: Vec<I>,
    /// Support of antecedent ∪ consequent.
    pub support: f64,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "I: Serialize + Clone", deserialize = "I: Deserialize<'de> + Ord"))]
pub struct RuleSet<I: Ord> {
    pub frequent: FrequentItemsets<I>,
    pub min_confidence: f64,
    pub rules: Vec<Rule<I>>,
}

/// Level-wise Apriori: candidates of size `k + 1` join frequent `k`-sets
/// sharing a `k - 1` prefix and are pruned unless every `k`-subset is
/// frequent. An itemset is frequent when its count reaches
/// `ceil(min_support * n)`.
pub fn apriori_frequent<I: Ord + Clone>(
    transactions: &[BTreeSet<I>],
    min_support: f64,
) -> Result<FrequentItemsets<I>, MiningError> {
    if transactions.is_empty() {
        return Err(MiningError::Fit("no transactions".into()));
    }
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(MiningError::Fit("min_support must lie in (0, 1]".into()));
    }
    let n = transactions.len();
    let min_count = ((min_support * n as f64) - 1e-9).ceil().max(1.0) as usize;

    let mut singles: BTreeMap<Vec<I>, usize> = BTreeMap::new();
    for t in transactions {
        for i in t {
            *singles.entry(vec![i.clone()]).or_default() += 1;
        }
    }
    singles.retain(|_, c| *c >= min_count);

    let mut all = singles.clone();
    let mut level: Vec<Vec<I>> = singles.into_keys().collect();
    while !level.is_empty() {
        let prev: BTreeSet<&Vec<I>> = level.iter().collect();
        let mut candidates = Vec::new();
        for (a_i, a) in level.iter().enumerate() {
            for b in &level[a_i + 1..] {
                let k = a.len();
                if a[..k - 1] != b[..k - 1] {
                    // level is sorted, so later b share the prefix even less
                    break;
                }
                let mut c = a.clone();
                c.push(b[k - 1].clone());
                let pruned = (0..c.len()).any(|skip| {
                    let sub: Vec<I> = c.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, x)| x.clone()).collect();
                    !prev.contains(&sub)
                });
                if !pruned {
                    candidates.push(c);
                }
            }
        }
        let mut next = Vec::new();
        for c in candidates {
            let count = transactions.iter().filter(|t| c.iter().all(|i| t.contains(i))).count();
            if count >= min_count {
                all.insert(c.clone(), count);
                next.push(c);
            }
        }
        level = next;
    }
    Ok(FrequentItemsets { n_transactions: n, min_support, itemsets: all })
}

/// Every rule `X → Y` with `X ∪ Y` frequent, `X`, `Y` non-empty and
/// disjoint, and `count(X ∪ Y) / count(X) ≥ min_confidence`.
pub fn association_rules<I: Ord + Clone>(frequent: &FrequentItemsets<I>, min_confidence: f64) -> RuleSet<I> {
    let n = frequent.n_transactions as f64;
    let mut rules = Vec::new();
    for (itemset, count) in frequent.by_level() {
        let m = itemset.len();
        if m < 2 {
            continue;
        }
        for mask in 1u64..(1u64 << m) - 1 {
            let (ante, cons): (Vec<_>, Vec<_>) = (0..m).partition(|i| mask & (1 << i) != 0);
            let ante: Vec<I> = ante.into_iter().map(|i| itemset[i].clone()).collect();
            let cons: Vec<I> = cons.into_iter().map(|i| itemset[i].clone()).collect();
            let ante_count = frequent.itemsets[&ante];
            let confidence = count as f64 / ante_count as f64;
            if confidence >= min_confidence {
                rules.push(Rule { antecedent: ante, consequent: cons, support: count as f64 / n, confidence });
            }
        }
    }
    RuleSet { frequent: frequent.clone(), min_confidence, rules }
}

/// One transaction per row, holding `column=value` items for the given
/// columns.
pub fn itemize<F: Scalar>(table: &Table<F>, columns: &[impl AsRef<str>]) -> Result<Vec<BTreeSet<String>>, MiningError> {
    let idx: Vec<(usize, &str)> = columns
        .iter()
        .map(|c| {
            let c = c.as_ref();
            table.column_index(c).map(|i| (i, c)).ok_or_else(|| MiningError::MissingAttribute(c.to_string()))
        })
        .collect::<Result<_, _>>()?;
    Ok((0..table.len())
        .map(|r| {
            let cells = table.formatted_row(r);
            idx.iter().map(|(i, name)| format!("{name}={}", cells[*i])).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Cell, Column};
    use proptest::prelude::*;

    fn baskets(rows: &[&[&str]]) -> Vec<BTreeSet<String>> {
        rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn key(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    /// Independent oracle: count every subset of the item universe.
    fn brute_force(ts: &[BTreeSet<u8>], min_support: f64) -> BTreeMap<Vec<u8>, usize> {
        let universe: Vec<u8> = ts.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let mut out = BTreeMap::new();
        for mask in 1u32..(1 << universe.len()) {
            let set: Vec<u8> = (0..universe.len()).filter(|i| mask & (1 << i) != 0).map(|i| universe[i]).collect();
            let count = ts.iter().filter(|t| set.iter().all(|i| t.contains(i))).count();
            if count as f64 / ts.len() as f64 >= min_support - 1e-12 && count > 0 {
                out.insert(set, count);
            }
        }
        out
    }

    #[test]
    fn universal_item_at_full_support() {
        let f = apriori_frequent(&baskets(&[&["A"], &["A", "B"]]), 1.0).unwrap();
        assert_eq!(f.itemsets.len(), 1);
        assert_eq!(f.support(&key(&["A"])), Some(1.0));
    }

    #[test]
    fn three_basket_example() {
        let ts = baskets(&[&["A", "B"], &["A", "B"], &["A", "C"]]);
        let f = apriori_frequent(&ts, 2.0 / 3.0).unwrap();
        let got: Vec<(Vec<String>, usize)> = f.itemsets.clone().into_iter().collect();
        assert_eq!(got, vec![(key(&["A"]), 3), (key(&["A", "B"]), 2), (key(&["B"]), 2)]);
        let rules = association_rules(&f, 0.0);
        let ab = rules.rules.iter().find(|r| r.antecedent == key(&["A"])).unwrap();
        assert_eq!(ab.consequent, key(&["B"]));
        assert_eq!(ab.confidence, 2.0 / 3.0);
        assert_eq!(rules.rules.len(), 2);
        let strict = association_rules(&f, 0.9);
        assert_eq!(strict.rules.len(), 1);
        assert_eq!(strict.rules[0].antecedent, key(&["B"]));
    }

    #[test]
    fn support_above_every_item_is_empty() {
        let ts = baskets(&[&["A"], &["B"], &["A"]]);
        assert!(apriori_frequent(&ts, 0.67).unwrap().itemsets.is_empty());
    }

    #[test]
    fn rules_with_multi_item_consequent() {
        let ts = baskets(&[&["A", "B", "C"], &["A", "B", "C"]]);
        let rs = association_rules(&apriori_frequent(&ts, 1.0).unwrap(), 1.0);
        assert!(rs.rules.iter().any(|r| r.antecedent == key(&["A"]) && r.consequent == key(&["B", "C"])));
        // 3 pairs x 2 + 6 from the triple
        assert_eq!(rs.rules.len(), 12);
    }

    #[test]
    fn bad_input() {
        assert!(apriori_frequent::<u8>(&[], 0.5).is_err());
        assert!(apriori_frequent(&baskets(&[&["A"]]), 0.0).is_err());
        assert!(apriori_frequent(&baskets(&[&["A"]]), 1.5).is_err());
    }

    #[test]
    fn itemize_uses_attribute_value_pairs() {
        let mut t = Table::<f64>::new(vec![Column::categorical("V"), Column::categorical("G")]).unwrap();
        t.push_row(vec![Cell::text("1"), Cell::text("9")]).unwrap();
        let ts = itemize(&t, &["V", "G"]).unwrap();
        assert_eq!(ts[0], ["G=9", "V=1"].iter().map(|s| s.to_string()).collect());
    }

    proptest! {
        #[test]
        fn matches_powerset_brute_force(
            ts in prop::collection::vec(prop::collection::btree_set(0u8..5, 0..5), 1..=20),
            num in 1usize..=20,
        ) {
            let min_support = num as f64 / 20.0;
            let f = apriori_frequent(&ts, min_support).unwrap();
            prop_assert_eq!(&f.itemsets, &brute_force(&ts, min_support));
            for (set, count) in &f.itemsets {
                for skip in 0..set.len() {
                    let mut sub = set.clone();
                    sub.remove(skip);
                    if !sub.is_empty() {
                        prop_assert!(f.itemsets[&sub] >= *count);
                    }
                }
            }
            for r in association_rules(&f, 0.5).rules {
                prop_assert!(r.confidence >= 0.5 && r.confidence <= 1.0);
            }
        }
    }
}

use serde::{Deserialize, Serialize};

use super::{ClusterModel, MiningError, RegressionModel, RuleSet, TreeModel};
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "crispdm-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "kebab-case")]
pub enum MiningModel<F> {
    Tree(TreeModel<F>),
    Cluster(ClusterModel<F>),
    Regression(RegressionModel<F>),
    Rules(RuleSet<String>),
}

impl<F: Scalar> MiningModel<F> {
    pub fn kind(&self) -> &'static str {
        match self {
            MiningModel::Tree(_) => "tree",
            MiningModel::Cluster(_) => "cluster",
            MiningModel::Regression(_) => "regression",
            MiningModel::Rules(_) => "rules",
        }
    }

    /// Serializes to the versioned JSON model file.
    pub fn to_text(&self) -> String {
        let file = ModelFile { format: MODEL_FORMAT.to_string(), version: MODEL_FORMAT_VERSION, body: self.clone() };
        let mut s = serde_json::to_string_pretty(&file).expect("models serialize");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, MiningError> {
        let head: serde_json::Value = serde_json::from_str(text).map_err(|e| MiningError::Format(e.to_string()))?;
        match head.get("format").and_then(|v| v.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => return Err(MiningError::Format(format!("not a model file (format {other:?})"))),
        }
        match head.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
            other => return Err(MiningError::Format(format!("unsupported version {other:?}"))),
        }
        let file: ModelFile<F> = serde_json::from_value(head).map_err(|e| MiningError::Format(e.to_string()))?;
        Ok(file.body)
    }
}

/// On-disk envelope: format tag, version, then the tagged model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile<F> {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub body: MiningModel<F>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::{
        apriori_frequent, association_rules, kmeans_fit, tree_fit, Attribute, FeatureSpace, KMeansParams, TreeParams,
    };
    use crate::table::{Cell, Column, Table};

    fn table() -> Table<f64> {
        let mut t = Table::new(vec![Column::categorical("V"), Column::categorical("G"), Column::numeric("A")]).unwrap();
        for (v, g, a) in [("a", "x", 1.5), ("b", "y", 2.25), ("a", "x", 1e7 / 3.0), ("c", "y", 0.1)] {
            t.push_row(vec![Cell::text(v), Cell::text(g), Cell::Num(a)]).unwrap();
        }
        t
    }

    fn round_trip(m: MiningModel<f64>) {
        let text = m.to_text();
        assert!(text.contains("\"format\": \"crispdm-model\""));
        assert_eq!(MiningModel::from_text(&text).unwrap(), m);
    }

    #[test]
    fn all_kinds_round_trip() {
        let t = table();
        round_trip(MiningModel::Tree(tree_fit(&t, "G", &["V", "A"], &TreeParams::default()).unwrap()));
        let space = FeatureSpace::from_table(&t, &["V", "A"], 10).unwrap();
        round_trip(MiningModel::Cluster(kmeans_fit(&t, &space, &KMeansParams::new(2, 5)).unwrap()));
        round_trip(MiningModel::Regression(RegressionModel { w: 0.1 + 0.2, input: Some("A".into()), target: None }));
        let ts: Vec<_> = crate::mining::itemize(&t, &["V", "G"]).unwrap();
        round_trip(MiningModel::Rules(association_rules(&apriori_frequent(&ts, 0.25).unwrap(), 0.5)));
        let _ = FeatureSpace::new(vec![Attribute::<f64>::numeric("A")]).unwrap();
    }

    #[test]
    fn rejects_foreign_or_future_files() {
        assert!(MiningModel::<f64>::from_text("{}").is_err());
        let m = MiningModel::Regression(RegressionModel { w: 1.0, input: None, target: None });
        let future = m.to_text().replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(MiningModel::<f64>::from_text(&future), Err(MiningError::Format(_))));
        assert!(MiningModel::<f64>::from_text("not json").is_err());
    }
}

use super::{AnalysisProcess, ApdError};

/// Predicts likely G/L accounts from one cube extract with three branches:
/// a decision tree on vendor and amount, k-means over vendor, account and
/// amount (10 clusters, 10 bins, weight 1.0), and a through-origin
/// regression scoring the amount from the account. All models train on a
/// seeded 66/34 split.
const CASHFLOW_GL_PREDICTION: &str = r#"name = "cashflow-gl-prediction"

[[node]]
id = "extract"
kind = "source.cube"
attributes = ["0AC_DOC_NO", "0CREDITOR", "0GL_ACCOUNT", "0PSTNG_DATE"]
key_figure = true

[[node]]
id = "split"
kind = "transform.split"
train_fraction = 0.66

[[node]]
id = "tree_train"
kind = "model.train"
method = "tree"
target = "0GL_ACCOUNT"
inputs = ["0CREDITOR", "ZAMOUNT1"]
bins = 10

[[node]]
id = "tree_apply"
kind = "model.apply"

[[node]]
id = "tree_result"
kind = "transform.select"
columns = ["0CREDITOR", "0GL_ACCOUNT", "0PSTNG_DATE", "ZAMOUNT1", "DT_PRED_NODE002", "DT_PRED_PROB002", "DT_PRED_VAL002"]

[[node]]
id = "tree_file"
kind = "sink.file"
file = "decision_tree.csv"

[[node]]
id = "tree_feed"
kind = "sink.report"
file = "decision_tree.jsonl"

[[node]]
id = "cluster_train"
kind = "model.train"
method = "kmeans"
attributes = ["0CREDITOR", "0GL_ACCOUNT", "ZAMOUNT1"]
k = 10
bins = 10
weight = 1.0

[[node]]
id = "cluster_apply"
kind = "model.apply"

[[node]]
id = "cluster_result"
kind = "transform.select"
columns = ["0AC_DOC_NO", "0CREDITOR", "0GL_ACCOUNT", "0PSTNG_DATE", "ZAMOUNT1", "CL_PRED_CLUSTER004"]

[[node]]
id = "cluster_file"
kind = "sink.file"
file = "clustering.csv"

[[node]]
id = "influence_chart"
kind = "sink.chart"
chart = "overall-influence"
file = "charts/overall_influence"
attributes = ["0CREDITOR", "0GL_ACCOUNT", "0PSTNG_DATE", "ZAMOUNT1"]

[[node]]
id = "inter_chart"
kind = "sink.chart"
chart = "inter-cluster-distance"
file = "charts/inter_cluster_distance"

[[node]]
id = "intra_chart"
kind = "sink.chart"
chart = "intra-cluster-distance"
file = "charts/intra_cluster_distance"

[[node]]
id = "gl_chart"
kind = "sink.chart"
chart = "attribute-distribution"
file = "charts/gl_account_distribution"
attribute = "0GL_ACCOUNT"

[[node]]
id = "regression_train"
kind = "model.train"
method = "regression"
input = "0GL_ACCOUNT"
target = "ZAMOUNT1"

[[node]]
id = "regression_apply"
kind = "model.apply"

[[node]]
id = "regression_result"
kind = "transform.select"
columns = ["0AC_DOC_NO", "0CREDITOR", "0GL_ACCOUNT", "0PSTNG_DATE", "ZAMOUNT1", "SC_SCORE006"]

[[node]]
id = "regression_file"
kind = "sink.file"
file = "regression.csv"

[[node]]
id = "scoring_chart"
kind = "sink.chart"
chart = "regression-scoring"
file = "charts/regression_scoring"

[[edge]]
from = "extract"
to = "split"

[[edge]]
from = "split:train"
to = "tree_train"

[[edge]]
from = "split:test"
to = "tree_apply"

[[edge]]
from = "tree_train"
to = "tree_apply"

[[edge]]
from = "tree_apply"
to = "tree_result"

[[edge]]
from = "tree_result"
to = "tree_file"

[[edge]]
from = "tree_result"
to = "tree_feed"

[[edge]]
from = "split:train"
to = "cluster_train"

[[edge]]
from = "extract"
to = "cluster_apply"

[[edge]]
from = "cluster_train"
to = "cluster_apply"

[[edge]]
from = "cluster_apply"
to = "cluster_result"

[[edge]]
from = "cluster_result"
to = "cluster_file"

[[edge]]
from = "extract"
to = "influence_chart"

[[edge]]
from = "cluster_train"
to = "influence_chart"

[[edge]]
from = "extract"
to = "inter_chart"

[[edge]]
from = "cluster_train"
to = "inter_chart"

[[edge]]
from = "extract"
to = "intra_chart"

[[edge]]
from = "cluster_train"
to = "intra_chart"

[[edge]]
from = "extract"
to = "gl_chart"

[[edge]]
from = "cluster_train"
to = "gl_chart"

[[edge]]
from = "split:train"
to = "regression_train"

[[edge]]
from = "extract"
to = "regression_apply"

[[edge]]
from = "regression_train"
to = "regression_apply"

[[edge]]
from = "regression_apply"
to = "regression_result"

[[edge]]
from = "regression_result"
to = "regression_file"

[[edge]]
from = "split:test"
to = "scoring_chart"

[[edge]]
from = "regression_train"
to = "scoring_chart"
"#;

/// Built-in process templates as `(name, process file text)`.
pub const TEMPLATES: [(&str, &str); 1] = [("cashflow-gl-prediction", CASHFLOW_GL_PREDICTION)];

pub fn template(name: &str) -> Result<AnalysisProcess, ApdError> {
    let (_, text) =
        TEMPLATES.iter().find(|(n, _)| *n == name).ok_or_else(|| ApdError::UnknownTemplate(name.to_string()))?;
    AnalysisProcess::parse(text)
}

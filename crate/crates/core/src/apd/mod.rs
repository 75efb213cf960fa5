//! Analysis processes: directed acyclic graphs of source, transform, model
//! and sink nodes, read from a TOML process file, checked by propagating
//! column schemas from sources to sinks, and executed in topological order.
//!
//! ```toml
//! name = "example"
//!
//! [[node]]
//! id = "extract"
//! kind = "source.cube"
//! attributes = ["0CREDITOR", "0GL_ACCOUNT"]
//!
//! [[node]]
//! id = "out"
//! kind = "sink.file"
//! file = "extract.csv"
//!
//! [[edge]]
//! from = "extract"
//! to = "out"
//! ```
//!
//! Edge endpoints may name a port: `split:train` and `split:test` are the two
//! outputs of a split node; `join:left` and `join:right` are the two inputs
//! of a merge node.

mod run;
mod template;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cube::{Aggregate, Characteristic, KEY_FIGURE};
use crate::deploy::{ChartKind, ModelColumn};
use crate::ingest::Field;
use crate::table::ColumnKind;

pub use run::{merge_tables, node_seed, run_process, run_process_cached, Environment, RunCache, RunError, RunOutcome};
pub use template::{template, TEMPLATES};

#[derive(Debug, Error)]
pub enum ApdError {
    #[error("process file: {0}")]
    Parse(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("process is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationError>),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("node id `{0}` is used more than once")]
    DuplicateId(String),
    #[error("node `{node}`: unknown kind `{kind}`")]
    UnknownKind { node: String, kind: String },
    #[error("node `{node}`: {reason}")]
    Param { node: String, reason: String },
    #[error("edge {edge}: no node `{node}`")]
    UnknownEndpoint { edge: usize, node: String },
    #[error("edge {edge}: {reason}")]
    Port { edge: usize, reason: String },
    #[error("cycle through nodes {}", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("node `{node}`: {reason}")]
    Arity { node: String, reason: String },
    #[error("node `{node}`: {reason}")]
    Schema { node: String, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: String,
    #[serde(flatten)]
    pub params: toml::Table,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: impl Into<String>, params: toml::Table) -> Self {
        Node { id: id.into(), kind: kind.into(), params }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Endpoint {
    pub node: String,
    pub port: Option<String>,
}

impl Endpoint {
    fn parse(s: &str) -> Self {
        match s.split_once(':') {
            Some((n, p)) => Endpoint { node: n.to_string(), port: Some(p.to_string()) },
            None => Endpoint { node: s.to_string(), port: None },
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.port {
            Some(p) => write!(f, "{}:{p}", self.node),
            None => f.write_str(&self.node),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: Endpoint,
    pub to: Endpoint,
}

impl Edge {
    pub fn new(from: &str, to: &str) -> Self {
        Edge { from: Endpoint::parse(from), to: Endpoint::parse(to) }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcessText {
    name: String,
    #[serde(default, rename = "node")]
    nodes: Vec<Node>,
    #[serde(default, rename = "edge")]
    edges: Vec<EdgeText>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeText {
    from: String,
    to: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisProcess {
    pub name: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl AnalysisProcess {
    pub fn parse(text: &str) -> Result<Self, ApdError> {
        let raw: ProcessText = toml::from_str(text).map_err(|e| ApdError::Parse(e.to_string()))?;
        Ok(AnalysisProcess {
            name: raw.name,
            nodes: raw.nodes,
            edges: raw.edges.iter().map(|e| Edge::new(&e.from, &e.to)).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ApdError> {
        let text = fs::read_to_string(path).map_err(|e| ApdError::Io { path: path.to_path_buf(), source: e })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let raw = ProcessText {
            name: self.name.clone(),
            nodes: self.nodes.clone(),
            edges: self.edges.iter().map(|e| EdgeText { from: e.from.to_string(), to: e.to.to_string() }).collect(),
        };
        toml::to_string(&raw).expect("process serializes")
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

/// Ordered `(column, kind)` description of a node's output table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSchema {
    columns: Vec<(String, ColumnKind)>,
}

impl NodeSchema {
    pub fn new(columns: Vec<(String, ColumnKind)>) -> Result<Self, String> {
        let mut seen = BTreeSet::new();
        for (c, _) in &columns {
            if !seen.insert(c.as_str()) {
                return Err(format!("duplicate column `{c}`"));
            }
        }
        Ok(NodeSchema { columns })
    }

    pub fn columns(&self) -> &[(String, ColumnKind)] {
        &self.columns
    }

    pub fn kind(&self, name: &str) -> Option<ColumnKind> {
        self.columns.iter().find(|(c, _)| c == name).map(|(_, k)| *k)
    }

    fn require(&self, name: &str) -> Result<ColumnKind, String> {
        self.kind(name).ok_or_else(|| format!("column `{name}` is not in the upstream schema"))
    }

    fn extended(&self, extra: impl IntoIterator<Item = (String, ColumnKind)>) -> Result<Self, String> {
        let mut columns = self.columns.clone();
        columns.extend(extra);
        NodeSchema::new(columns)
    }
}

/// Columns of a DSO source, in extract order.
pub(crate) fn dso_fields() -> Vec<(Field, ColumnKind)> {
    Field::ALL
        .into_iter()
        .map(|f| (f, if f == Field::Wrbtr { ColumnKind::Money } else { ColumnKind::Categorical }))
        .collect()
}

fn default_true() -> bool {
    true
}
fn default_bins() -> usize {
    crate::mining::DEFAULT_BINS
}
fn default_one() -> usize {
    1
}
fn default_fraction() -> f64 {
    0.66
}
fn default_k() -> usize {
    10
}
fn default_weight() -> f64 {
    1.0
}
fn default_max_iter() -> usize {
    100
}
fn default_restarts() -> usize {
    10
}
fn default_linkage() -> String {
    "average".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct CubeSource {
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default = "default_true")]
    pub key_figure: bool,
    /// When set, the source is an aggregate query instead of a fact extract.
    pub group_by: Option<Vec<String>>,
    pub aggregate: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct DsoSource {
    pub fields: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct FileSource {
    pub path: String,
    /// Declared header; without it downstream schema checks are skipped.
    pub columns: Option<Vec<String>>,
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub money: Vec<String>,
}

impl FileSource {
    pub fn kind_of(&self, column: &str) -> ColumnKind {
        if self.money.iter().any(|c| c == column) {
            ColumnKind::Money
        } else if self.numeric.iter().any(|c| c == column) {
            ColumnKind::Numeric
        } else {
            ColumnKind::Categorical
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct SelectParams {
    pub columns: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub(crate) enum FilterOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct FilterParams {
    pub column: String,
    pub op: FilterOp,
    pub value: Option<String>,
    pub values: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct BinParams {
    pub column: String,
    #[serde(default = "default_bins")]
    pub bins: usize,
    pub output: Option<String>,
}

impl BinParams {
    pub fn output_name(&self) -> String {
        self.output.clone().unwrap_or_else(|| format!("{}_BIN", self.column))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct MergeParams {
    pub keys: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct SplitParams {
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub(crate) enum TrainSpec {
    Tree {
        target: String,
        inputs: Vec<String>,
        max_leaves: Option<usize>,
        #[serde(default = "default_one")]
        min_leaf_size: usize,
        min_gain: Option<f64>,
        #[serde(default = "default_bins")]
        bins: usize,
    },
    Kmeans {
        attributes: Vec<String>,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_bins")]
        bins: usize,
        #[serde(default = "default_weight")]
        weight: f64,
        #[serde(default)]
        weights: BTreeMap<String, f64>,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    Dbscan {
        attributes: Vec<String>,
        eps: f64,
        min_pts: usize,
        #[serde(default = "default_bins")]
        bins: usize,
        #[serde(default = "default_weight")]
        weight: f64,
        #[serde(default)]
        weights: BTreeMap<String, f64>,
    },
    Agglomerative {
        attributes: Vec<String>,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_linkage")]
        linkage: String,
        #[serde(default = "default_bins")]
        bins: usize,
        #[serde(default = "default_weight")]
        weight: f64,
        #[serde(default)]
        weights: BTreeMap<String, f64>,
    },
    Regression {
        input: String,
        target: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ModelKind {
    Tree,
    Cluster,
    Regression,
}

impl ModelKind {
    fn of_file_kind(kind: &str) -> Option<Self> {
        match kind {
            "tree" => Some(ModelKind::Tree),
            "cluster" => Some(ModelKind::Cluster),
            "regression" => Some(ModelKind::Regression),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModelKind::Tree => "tree",
            ModelKind::Cluster => "cluster",
            ModelKind::Regression => "regression",
        }
    }

    /// Columns an apply step adds, for the model at position `ordinal`.
    pub fn output_columns(self, ordinal: usize) -> Vec<(String, ColumnKind)> {
        match self {
            ModelKind::Tree => vec![
                (ModelColumn::TreeNode.name(ordinal), ColumnKind::Integer),
                (ModelColumn::TreeProbability.name(ordinal), ColumnKind::Probability),
                (ModelColumn::TreeValue.name(ordinal), ColumnKind::Categorical),
            ],
            ModelKind::Cluster => vec![(ModelColumn::Cluster.name(ordinal), ColumnKind::Integer)],
            ModelKind::Regression => vec![(ModelColumn::Score.name(ordinal), ColumnKind::Numeric)],
        }
    }
}

impl TrainSpec {
    fn model_kind(&self) -> ModelKind {
        match self {
            TrainSpec::Tree { .. } => ModelKind::Tree,
            TrainSpec::Regression { .. } => ModelKind::Regression,
            _ => ModelKind::Cluster,
        }
    }

    /// Columns the model reads when applied.
    fn inputs(&self) -> Vec<String> {
        match self {
            TrainSpec::Tree { inputs, .. } => inputs.clone(),
            TrainSpec::Kmeans { attributes, .. }
            | TrainSpec::Dbscan { attributes, .. }
            | TrainSpec::Agglomerative { attributes, .. } => attributes.clone(),
            TrainSpec::Regression { input, .. } => vec![input.clone()],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ApplyParams {
    /// Saved model to apply instead of one fed by a train node.
    pub model_file: Option<String>,
    /// Kind of the saved model (`tree`, `cluster`, `regression`), needed to
    /// type the output columns before the file is read.
    pub model_kind: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct FileSink {
    pub file: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ChartSink {
    pub chart: ChartKind,
    pub file: String,
    pub title: Option<String>,
    pub attribute: Option<String>,
    /// Columns considered by the influence chart; all columns by default.
    pub attributes: Option<Vec<String>>,
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Cube(CubeSource),
    Dso(DsoSource),
    File(FileSource),
    Select(SelectParams),
    Filter(FilterParams),
    Bin(BinParams),
    Merge(MergeParams),
    Split(SplitParams),
    Train(TrainSpec),
    Apply(ApplyParams),
    SinkFile(FileSink),
    SinkChart(ChartSink),
    SinkReport(FileSink),
}

pub const NODE_KINDS: [&str; 13] = [
    "source.cube",
    "source.dso",
    "source.file",
    "transform.select",
    "transform.filter",
    "transform.bin",
    "transform.merge",
    "transform.split",
    "model.train",
    "model.apply",
    "sink.file",
    "sink.chart",
    "sink.report",
];

fn typed<T: DeserializeOwned>(params: &toml::Table) -> Result<T, String> {
    toml::Value::Table(params.clone()).try_into().map_err(|e: toml::de::Error| e.message().to_string())
}

impl Op {
    fn parse(kind: &str, params: &toml::Table) -> Option<Result<Op, String>> {
        let op = match kind {
            "source.cube" => typed(params).map(Op::Cube),
            "source.dso" => typed(params).map(Op::Dso),
            "source.file" => typed(params).map(Op::File),
            "transform.select" => typed(params).map(Op::Select),
            "transform.filter" => typed(params).map(Op::Filter),
            "transform.bin" => typed(params).map(Op::Bin),
            "transform.merge" => typed(params).map(Op::Merge),
            "transform.split" => typed(params).map(Op::Split),
            "model.train" => typed(params).map(Op::Train),
            "model.apply" => typed(params).map(Op::Apply),
            "sink.file" => typed(params).map(Op::SinkFile),
            "sink.chart" => typed(params).map(Op::SinkChart),
            "sink.report" => typed(params).map(Op::SinkReport),
            _ => return None,
        };
        Some(op.and_then(|op| op.check_params().map(|()| op)))
    }

    fn check_params(&self) -> Result<(), String> {
        match self {
            Op::Cube(c) => {
                if c.group_by.is_some() != c.aggregate.is_some() {
                    return Err("group_by and aggregate go together".into());
                }
                if let Some(a) = &c.aggregate {
                    a.parse::<Aggregate>().map_err(|e| e.to_string())?;
                }
                if c.group_by.is_none() && c.attributes.is_empty() && !c.key_figure {
                    return Err("source selects no columns".into());
                }
            }
            Op::Filter(f) => match (f.op, &f.value, &f.values) {
                (FilterOp::In, _, Some(_)) => {}
                (FilterOp::In, _, None) => return Err("op `in` needs `values`".into()),
                (_, Some(_), _) => {}
                (_, None, _) => return Err("filter needs `value`".into()),
            },
            Op::Bin(b) if b.bins == 0 => return Err("bins must be positive".into()),
            Op::Merge(m) if m.keys.is_empty() => return Err("merge needs at least one key".into()),
            Op::Split(s) if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) => {
                return Err("train_fraction must lie in (0, 1)".into())
            }
            Op::Train(t) => {
                if t.inputs().is_empty() {
                    return Err("model has no input attributes".into());
                }
                if let TrainSpec::Agglomerative { linkage, .. } = t {
                    linkage.parse::<crate::mining::Linkage>().map_err(|e| e.to_string())?;
                }
            }
            Op::Apply(a) => {
                if a.model_file.is_some() != a.model_kind.is_some() {
                    return Err("model_file and model_kind go together".into());
                }
                if let Some(k) = &a.model_kind {
                    if ModelKind::of_file_kind(k).is_none() {
                        return Err(format!("cannot apply a `{k}` model"));
                    }
                }
            }
            Op::SinkChart(c) if c.chart == ChartKind::AttributeDistribution && c.attribute.is_none() => {
                return Err("attribute-distribution charts need `attribute`".into())
            }
            _ => {}
        }
        Ok(())
    }

    fn is_source(&self) -> bool {
        matches!(self, Op::Cube(_) | Op::Dso(_) | Op::File(_))
    }

    fn is_model(&self) -> bool {
        matches!(self, Op::Train(_) | Op::Apply(_))
    }
}

/// Static type of a node output.
#[derive(Clone, Debug)]
enum Out {
    /// `None` when the schema is only known at run time.
    Table(Option<NodeSchema>),
    Model { kind: ModelKind, inputs: Option<Vec<String>> },
}

/// A process that passed validation, ready to run.
#[derive(Clone, Debug)]
pub struct Plan {
    pub(crate) order: Vec<String>,
    pub(crate) ops: HashMap<String, Op>,
    /// Incoming edges per node, in file order.
    pub(crate) inputs: HashMap<String, Vec<Edge>>,
    /// 1-based position among model nodes, in declaration order.
    pub(crate) ordinals: HashMap<String, usize>,
}

impl Plan {
    /// Node ids in execution order.
    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn is_sink(&self, id: &str) -> bool {
        matches!(self.ops.get(id), Some(Op::SinkFile(_) | Op::SinkChart(_) | Op::SinkReport(_)))
    }
}

/// Kahn's algorithm, always taking the smallest ready id. Returns the order
/// and the ids left on a cycle.
fn topological(ids: &[&str], edges: &[(String, String)]) -> (Vec<String>, Vec<String>) {
    let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|i| (*i, 0)).collect();
    let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (f, t) in edges {
        *indegree.get_mut(t.as_str()).expect("endpoint checked") += 1;
        out.entry(f.as_str()).or_default().push(t.as_str());
    }
    let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(i, _)| *i).collect();
    let mut order = Vec::new();
    while let Some(n) = ready.pop_first() {
        order.push(n.to_string());
        for m in out.get(n).into_iter().flatten() {
            let d = indegree.get_mut(m).expect("endpoint checked");
            *d -= 1;
            if *d == 0 {
                ready.insert(m);
            }
        }
    }
    let done: BTreeSet<&str> = order.iter().map(String::as_str).collect();
    let rest = indegree.keys().filter(|i| !done.contains(*i)).map(|i| i.to_string()).collect();
    (order, rest)
}

fn cube_schema(c: &CubeSource) -> Result<NodeSchema, String> {
    let names = |v: &[String]| -> Result<Vec<(String, ColumnKind)>, String> {
        v.iter()
            .map(|n| {
                n.parse::<Characteristic>()
                    .map(|c| (c.technical_name().to_string(), ColumnKind::Categorical))
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    match (&c.group_by, &c.aggregate) {
        (Some(g), Some(a)) => {
            let agg: Aggregate = a.parse().map_err(|e: crate::cube::CubeError| e.to_string())?;
            let kind = if agg == Aggregate::Count { ColumnKind::Integer } else { ColumnKind::Money };
            let mut cols = names(g)?;
            cols.push((agg.column_name(), kind));
            NodeSchema::new(cols)
        }
        _ => {
            let mut cols = names(&c.attributes)?;
            if c.key_figure {
                cols.push((KEY_FIGURE.to_string(), ColumnKind::Money));
            }
            NodeSchema::new(cols)
        }
    }
}

fn dso_schema(d: &DsoSource) -> Result<NodeSchema, String> {
    let all = dso_fields();
    let cols = match &d.fields {
        None => all.iter().map(|(f, k)| (f.name().to_string(), *k)).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                all.iter()
                    .find(|(f, _)| f.name() == n)
                    .map(|(f, k)| (f.name().to_string(), *k))
                    .ok_or_else(|| format!("unknown DSO field `{n}`"))
            })
            .collect::<Result<_, _>>()?,
    };
    NodeSchema::new(cols)
}

/// Checks a process and, when it is valid, returns its execution plan.
/// Every problem found is reported; nothing is executed.
pub fn validate_process(process: &AnalysisProcess) -> Result<Plan, Vec<ValidationError>> {
    let mut errors = Vec::new();

    let mut seen = BTreeSet::new();
    for n in &process.nodes {
        if !seen.insert(n.id.as_str()) {
            errors.push(ValidationError::DuplicateId(n.id.clone()));
        }
    }

    let mut ops: HashMap<String, Op> = HashMap::new();
    for n in &process.nodes {
        match Op::parse(&n.kind, &n.params) {
            None => errors.push(ValidationError::UnknownKind { node: n.id.clone(), kind: n.kind.clone() }),
            Some(Err(reason)) => errors.push(ValidationError::Param { node: n.id.clone(), reason }),
            Some(Ok(op)) => {
                ops.entry(n.id.clone()).or_insert(op);
            }
        }
    }

    let mut graph_edges = Vec::new();
    let mut inputs: HashMap<String, Vec<Edge>> = HashMap::new();
    for (i, e) in process.edges.iter().enumerate() {
        let mut ok = true;
        for end in [&e.from, &e.to] {
            if !seen.contains(end.node.as_str()) {
                errors.push(ValidationError::UnknownEndpoint { edge: i + 1, node: end.node.clone() });
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        if let Some(op) = ops.get(&e.from.node) {
            match (op, e.from.port.as_deref()) {
                (Op::Split(_), Some("train" | "test")) | (Op::Train(_), None) => {}
                (Op::Split(_), _) => errors.push(ValidationError::Port {
                    edge: i + 1,
                    reason: format!("split output must be `{0}:train` or `{0}:test`", e.from.node),
                }),
                (_, Some(p)) => errors
                    .push(ValidationError::Port { edge: i + 1, reason: format!("`{}` has no output port `{p}`", e.from.node) }),
                _ => {}
            }
        }
        if let Some(op) = ops.get(&e.to.node) {
            match (op, e.to.port.as_deref()) {
                (Op::Merge(_), Some("left" | "right")) => {}
                (Op::Merge(_), _) => errors.push(ValidationError::Port {
                    edge: i + 1,
                    reason: format!("merge input must be `{0}:left` or `{0}:right`", e.to.node),
                }),
                (_, Some(p)) => errors
                    .push(ValidationError::Port { edge: i + 1, reason: format!("`{}` has no input port `{p}`", e.to.node) }),
                _ => {}
            }
        }
        graph_edges.push((e.from.node.clone(), e.to.node.clone()));
        inputs.entry(e.to.node.clone()).or_default().push(e.clone());
    }

    let ids: Vec<&str> = seen.iter().copied().collect();
    let (order, cyclic) = topological(&ids, &graph_edges);
    if !cyclic.is_empty() {
        errors.push(ValidationError::Cycle(cyclic));
    }

    let mut ordinals = HashMap::new();
    let mut next = 0;
    for n in &process.nodes {
        if ops.get(&n.id).is_some_and(Op::is_model) && !ordinals.contains_key(&n.id) {
            next += 1;
            ordinals.insert(n.id.clone(), next);
        }
    }

    if errors.is_empty() {
        let mut outs: HashMap<String, Out> = HashMap::new();
        for id in &order {
            let op = &ops[id];
            let incoming = inputs.get(id).map(Vec::as_slice).unwrap_or(&[]);
            match check_node(id, op, incoming, &outs, ordinals.get(id).copied()) {
                Ok(out) => {
                    outs.insert(id.clone(), out);
                }
                Err(e) => {
                    errors.push(e);
                    // keep checking the rest against an unknown schema
                    let fallback = match op {
                        Op::Train(t) => Out::Model { kind: t.model_kind(), inputs: None },
                        _ => Out::Table(None),
                    };
                    outs.insert(id.clone(), fallback);
                }
            }
        }
    }

    if errors.is_empty() {
        Ok(Plan { order, ops, inputs, ordinals })
    } else {
        Err(errors)
    }
}

fn check_node(
    id: &str,
    op: &Op,
    incoming: &[Edge],
    outs: &HashMap<String, Out>,
    ordinal: Option<usize>,
) -> Result<Out, ValidationError> {
    let arity = |reason: String| ValidationError::Arity { node: id.to_string(), reason };
    let schema_err = |reason: String| ValidationError::Schema { node: id.to_string(), reason };

    let mut tables: Vec<(&Edge, Option<&NodeSchema>)> = Vec::new();
    let mut models: Vec<(ModelKind, Option<&Vec<String>>)> = Vec::new();
    for e in incoming {
        match &outs[&e.from.node] {
            Out::Table(s) => tables.push((e, s.as_ref())),
            Out::Model { kind, inputs } => models.push((*kind, inputs.as_ref())),
        }
    }

    if op.is_source() {
        if !incoming.is_empty() {
            return Err(arity("a source takes no inputs".into()));
        }
        let schema = match op {
            Op::Cube(c) => Some(cube_schema(c).map_err(schema_err)?),
            Op::Dso(d) => Some(dso_schema(d).map_err(schema_err)?),
            Op::File(f) => match &f.columns {
                Some(cols) => Some(
                    NodeSchema::new(cols.iter().map(|c| (c.clone(), f.kind_of(c))).collect()).map_err(schema_err)?,
                ),
                None => None,
            },
            _ => unreachable!(),
        };
        return Ok(Out::Table(schema));
    }

    let wants_model = matches!(op, Op::Apply(_) | Op::SinkChart(_));
    if !wants_model && !models.is_empty() {
        return Err(arity("takes no model input".into()));
    }
    let expected_tables = if matches!(op, Op::Merge(_)) { 2 } else { 1 };
    if tables.len() != expected_tables {
        return Err(arity(format!("needs {expected_tables} table input(s), has {}", tables.len())));
    }
    let input = tables[0].1;

    let out = match op {
        Op::Select(s) => match input {
            Some(sc) => {
                let cols = s
                    .columns
                    .iter()
                    .map(|c| sc.require(c).map(|k| (c.clone(), k)))
                    .collect::<Result<_, _>>()
                    .map_err(schema_err)?;
                Out::Table(Some(NodeSchema::new(cols).map_err(schema_err)?))
            }
            None => Out::Table(None),
        },
        Op::Filter(f) => {
            if let Some(sc) = input {
                sc.require(&f.column).map_err(schema_err)?;
            }
            Out::Table(input.cloned())
        }
        Op::Bin(b) => match input {
            Some(sc) => {
                if !sc.require(&b.column).map_err(schema_err)?.is_numeric() {
                    return Err(schema_err(format!("column `{}` is not numeric", b.column)));
                }
                Out::Table(Some(sc.extended([(b.output_name(), ColumnKind::Categorical)]).map_err(schema_err)?))
            }
            None => Out::Table(None),
        },
        Op::Merge(m) => {
            let side = |p: &str| tables.iter().find(|(e, _)| e.to.port.as_deref() == Some(p)).map(|(_, s)| *s);
            let (Some(left), Some(right)) = (side("left"), side("right")) else {
                return Err(arity("merge needs one `left` and one `right` input".into()));
            };
            match (left, right) {
                (Some(l), Some(r)) => {
                    for k in &m.keys {
                        l.require(k).map_err(|e| schema_err(format!("left: {e}")))?;
                        r.require(k).map_err(|e| schema_err(format!("right: {e}")))?;
                    }
                    let extra = r.columns().iter().filter(|(c, _)| !m.keys.contains(c)).cloned();
                    Out::Table(Some(l.extended(extra).map_err(schema_err)?))
                }
                _ => Out::Table(None),
            }
        }
        Op::Split(_) => Out::Table(input.cloned()),
        Op::Train(t) => {
            if let Some(sc) = input {
                check_train_columns(t, sc).map_err(schema_err)?;
            }
            Out::Model { kind: t.model_kind(), inputs: Some(t.inputs()) }
        }
        Op::Apply(a) => {
            let model = match (models.as_slice(), &a.model_file) {
                ([m], None) => (m.0, m.1.cloned()),
                ([], Some(_)) => (
                    ModelKind::of_file_kind(a.model_kind.as_deref().unwrap_or_default()).expect("checked with params"),
                    None,
                ),
                ([], None) => return Err(arity("needs a model input or a `model_file`".into())),
                _ => return Err(arity("needs exactly one model, from an edge or `model_file`".into())),
            };
            match input {
                Some(sc) => {
                    for c in model.1.iter().flatten() {
                        sc.require(c).map_err(schema_err)?;
                    }
                    let ord = ordinal.expect("model nodes have ordinals");
                    Out::Table(Some(sc.extended(model.0.output_columns(ord)).map_err(schema_err)?))
                }
                None => Out::Table(None),
            }
        }
        Op::SinkFile(_) | Op::SinkReport(_) => Out::Table(None),
        Op::SinkChart(c) => {
            let wanted = if c.chart == ChartKind::RegressionScoring { ModelKind::Regression } else { ModelKind::Cluster };
            match models.as_slice() {
                [(k, inputs)] if *k == wanted => {
                    if let Some(sc) = input {
                        for col in inputs.iter().copied().flatten() {
                            sc.require(col).map_err(schema_err)?;
                        }
                        for col in c.attribute.iter().chain(c.attributes.iter().flatten()) {
                            sc.require(col).map_err(schema_err)?;
                        }
                    }
                }
                [(k, _)] => {
                    return Err(schema_err(format!(
                        "{} chart needs a {} model, got {}",
                        c.chart.name(),
                        wanted.name(),
                        k.name()
                    )))
                }
                _ => return Err(arity(format!("{} chart needs exactly one {} model input", c.chart.name(), wanted.name()))),
            }
            Out::Table(None)
        }
        Op::Cube(_) | Op::Dso(_) | Op::File(_) => unreachable!(),
    };
    Ok(out)
}

fn check_train_columns(t: &TrainSpec, sc: &NodeSchema) -> Result<(), String> {
    match t {
        TrainSpec::Tree { target, inputs, .. } => {
            if sc.require(target)?.is_numeric() {
                return Err(format!("target `{target}` must be categorical"));
            }
            if inputs.contains(target) {
                return Err(format!("target `{target}` is also an input"));
            }
            for i in inputs {
                sc.require(i)?;
            }
        }
        TrainSpec::Regression { input, target } => {
            sc.require(input)?;
            if !sc.require(target)?.is_numeric() {
                return Err(format!("target `{target}` must be numeric"));
            }
        }
        _ => {
            for a in t.inputs() {
                sc.require(&a)?;
            }
        }
    }
    Ok(())
}

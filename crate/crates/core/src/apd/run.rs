use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Component, Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{
    dso_fields, validate_process, AnalysisProcess, ApdError, ApplyParams, BinParams, ChartSink, CubeSource, FileSource,
    FilterOp, FilterParams, Op, Plan, TrainSpec,
};
use crate::cube::{Cube, QuerySpec};
use crate::deploy::{self, ChartData, ChartKind, ChartSpec, ModelColumn};
use crate::evaluate::{
    assign_rows, attribute_distribution, distance_report, influence_from_labels, train_test_split, SplitSpec,
};
use crate::mining::{
    agglomerative_fit, cluster_assign, dbscan_fit, dendrogram_cut, fit_binning, kmeans_fit, regression_fit_table,
    tree_fit, tree_predict, FeatureSpace, KMeansParams, Linkage, TreeParams,
};
use crate::staging::Dso;
use crate::table::{Column, ColumnKind, TableError};
use crate::{Cell, ClusterModel, MiningModel, Table};

/// What a run reads and where it writes.
#[derive(Clone, Debug)]
pub struct Environment<'a> {
    pub cube: Option<&'a Cube>,
    pub dso: Option<&'a Dso>,
    /// Base for relative `source.file` paths and saved model files.
    pub file_root: PathBuf,
    /// Run directory; sink files and trained models land here.
    pub out_dir: PathBuf,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("node `{node}` failed: {cause}")]
pub struct RunError {
    pub node: String,
    pub cause: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOutcome {
    /// Sink id to the artifact it produced.
    pub artifacts: BTreeMap<String, PathBuf>,
    pub failures: Vec<RunError>,
    /// Nodes not run because an upstream node failed.
    pub skipped: Vec<String>,
}

impl RunOutcome {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug)]
enum Value {
    Table(Table),
    Split(Table, Table),
    Model(MiningModel),
}

/// Node outputs keyed by a digest of the node definition, its seed, its
/// inputs and the data it reads. Sinks always run.
#[derive(Debug, Default)]
pub struct RunCache {
    entries: HashMap<String, Value>,
    pub hits: usize,
    pub misses: usize,
}

impl RunCache {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Seed for one node, derived from the run seed and the node id alone.
pub fn node_seed(seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Validates `process` and runs it with a fresh cache. An invalid process
/// is never executed.
pub fn run_process(process: &AnalysisProcess, env: &Environment<'_>) -> Result<RunOutcome, ApdError> {
    run_process_cached(process, env, &mut RunCache::new())
}

pub fn run_process_cached(
    process: &AnalysisProcess,
    env: &Environment<'_>,
    cache: &mut RunCache,
) -> Result<RunOutcome, ApdError> {
    let plan = validate_process(process).map_err(ApdError::Invalid)?;
    fs::create_dir_all(&env.out_dir).map_err(|e| ApdError::Io { path: env.out_dir.clone(), source: e })?;
    let mut runner = Runner { plan: &plan, env, cache, digests: HashMap::new(), data_digests: HashMap::new() };
    let mut outcome = RunOutcome::default();
    let mut values: HashMap<String, Value> = HashMap::new();
    let mut dead: HashSet<String> = HashSet::new();
    for id in &plan.order {
        let upstream = plan.inputs.get(id).map(Vec::as_slice).unwrap_or(&[]);
        if upstream.iter().any(|e| dead.contains(&e.from.node)) {
            dead.insert(id.clone());
            outcome.skipped.push(id.clone());
            continue;
        }
        match runner.node(id, &values) {
            Ok(Step::Value(v)) => {
                values.insert(id.clone(), v);
            }
            Ok(Step::Artifact(path)) => {
                outcome.artifacts.insert(id.clone(), path);
            }
            Err(cause) => {
                dead.insert(id.clone());
                outcome.failures.push(RunError { node: id.clone(), cause });
            }
        }
    }
    Ok(outcome)
}

enum Step {
    Value(Value),
    Artifact(PathBuf),
}

struct Runner<'r, 'e> {
    plan: &'r Plan,
    env: &'r Environment<'e>,
    cache: &'r mut RunCache,
    digests: HashMap<String, String>,
    data_digests: HashMap<&'static str, String>,
}

fn relative(file: &str) -> Result<&Path, String> {
    let p = Path::new(file);
    if file.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(format!("`{file}` must be a relative path inside the run directory"));
    }
    Ok(p)
}

impl Runner<'_, '_> {
    fn table_input<'v>(&self, id: &str, values: &'v HashMap<String, Value>, port: Option<&str>) -> &'v Table {
        let edges = &self.plan.inputs[id];
        let e = edges
            .iter()
            .filter(|e| !matches!(values.get(&e.from.node), Some(Value::Model(_))))
            .find(|e| port.is_none() || e.to.port.as_deref() == port)
            .expect("validated table input");
        match (&values[&e.from.node], e.from.port.as_deref()) {
            (Value::Table(t), _) => t,
            (Value::Split(train, _), Some("train")) => train,
            (Value::Split(_, test), _) => test,
            (Value::Model(_), _) => unreachable!("filtered above"),
        }
    }

    fn model_input<'v>(&self, id: &str, values: &'v HashMap<String, Value>) -> Option<&'v MiningModel> {
        self.plan.inputs.get(id)?.iter().find_map(|e| match values.get(&e.from.node) {
            Some(Value::Model(m)) => Some(m),
            _ => None,
        })
    }

    fn data_digest(&mut self, source: &'static str) -> Result<String, String> {
        if let Some(d) = self.data_digests.get(source) {
            return Ok(d.clone());
        }
        let mut h = Sha256::new();
        match source {
            "cube" => {
                let cube = self.env.cube.ok_or("no cube is loaded")?;
                for (name, bytes) in cube.serialize() {
                    h.update(name.as_bytes());
                    h.update(&bytes);
                }
            }
            _ => {
                let dso = self.env.dso.ok_or("no DSO is available")?;
                for r in dso.records() {
                    h.update(serde_json::to_vec(r).map_err(|e| e.to_string())?);
                }
            }
        }
        let d = hex(&h.finalize());
        self.data_digests.insert(source, d.clone());
        Ok(d)
    }

    fn digest(&mut self, id: &str, op: &Op, node_seed: u64) -> Result<String, String> {
        let mut h = Sha256::new();
        h.update(format!("{op:?}").as_bytes());
        h.update(node_seed.to_le_bytes());
        h.update(self.plan.ordinals.get(id).copied().unwrap_or(0).to_le_bytes());
        for e in self.plan.inputs.get(id).into_iter().flatten() {
            h.update(e.from.to_string().as_bytes());
            h.update(e.to.port.as_deref().unwrap_or("").as_bytes());
            h.update(self.digests[&e.from.node].as_bytes());
        }
        match op {
            Op::Cube(_) => h.update(self.data_digest("cube")?.as_bytes()),
            Op::Dso(_) => h.update(self.data_digest("dso")?.as_bytes()),
            Op::File(FileSource { path, .. }) | Op::Apply(ApplyParams { model_file: Some(path), .. }) => {
                let p = self.env.file_root.join(path);
                h.update(fs::read(&p).map_err(|e| format!("cannot read {}: {e}", p.display()))?)
            }
            _ => {}
        }
        Ok(hex(&h.finalize()))
    }

    fn node(&mut self, id: &str, values: &HashMap<String, Value>) -> Result<Step, String> {
        let plan = self.plan;
        let op = &plan.ops[id];
        let seed = node_seed(self.env.seed, id);
        let digest = self.digest(id, op, seed)?;
        self.digests.insert(id.to_string(), digest.clone());

        let sink_path = |file: &str| -> Result<PathBuf, String> { Ok(self.env.out_dir.join(relative(file)?)) };
        match op {
            Op::SinkFile(s) => {
                let t = self.table_input(id, values, None);
                return deploy::write_flat_file(t, &sink_path(&s.file)?).map(Step::Artifact).map_err(|e| e.to_string());
            }
            Op::SinkReport(s) => {
                let t = self.table_input(id, values, None);
                let path = sink_path(&s.file)?;
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
                }
                fs::write(&path, deploy::report_feed_string(t)).map_err(|e| format!("{}: {e}", path.display()))?;
                return Ok(Step::Artifact(path));
            }
            Op::SinkChart(c) => {
                let t = self.table_input(id, values, None);
                let model = self.model_input(id, values).expect("validated model input");
                let spec = chart_spec(c, model, t)?;
                let files = deploy::render_chart(&spec, &sink_path(&c.file)?).map_err(|e| e.to_string())?;
                return Ok(Step::Artifact(files.svg));
            }
            _ => {}
        }

        let value = match self.cache.entries.get(&digest) {
            Some(v) => {
                self.cache.hits += 1;
                v.clone()
            }
            None => {
                self.cache.misses += 1;
                let v = self.compute(id, op, seed, values)?;
                self.cache.entries.insert(digest, v.clone());
                v
            }
        };
        if let Value::Model(m) = &value {
            let path = self.env.out_dir.join("models").join(format!("{id}.json"));
            fs::create_dir_all(path.parent().expect("has parent")).map_err(|e| e.to_string())?;
            fs::write(&path, m.to_text()).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        Ok(Step::Value(value))
    }

    fn compute(&self, id: &str, op: &Op, seed: u64, values: &HashMap<String, Value>) -> Result<Value, String> {
        let err = |e: &dyn std::fmt::Display| e.to_string();
        Ok(match op {
            Op::Cube(c) => Value::Table(cube_source(self.env.cube.ok_or("no cube is loaded")?, c)?),
            Op::Dso(d) => Value::Table(dso_source(self.env.dso.ok_or("no DSO is available")?, d.fields.as_deref())?),
            Op::File(f) => Value::Table(file_source(&self.env.file_root, f)?),
            Op::Select(s) => Value::Table(self.table_input(id, values, None).select(&s.columns).map_err(|e| err(&e))?),
            Op::Filter(f) => Value::Table(filter(self.table_input(id, values, None), f)?),
            Op::Bin(b) => Value::Table(bin(self.table_input(id, values, None), b)?),
            Op::Merge(m) => {
                let left = self.table_input(id, values, Some("left"));
                let right = self.table_input(id, values, Some("right"));
                Value::Table(merge_tables(left, right, &m.keys).map_err(|e| err(&e))?)
            }
            Op::Split(s) => {
                let spec = SplitSpec { train_fraction: s.train_fraction, seed };
                let (train, test) = train_test_split(self.table_input(id, values, None), &spec).map_err(|e| err(&e))?;
                Value::Split(train, test)
            }
            Op::Train(t) => Value::Model(train(t, self.table_input(id, values, None), seed)?),
            Op::Apply(a) => {
                let loaded;
                let model = match (&a.model_file, self.model_input(id, values)) {
                    (Some(path), _) => {
                        let p = self.env.file_root.join(path);
                        let text = fs::read_to_string(&p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
                        loaded = MiningModel::from_text(&text).map_err(|e| err(&e))?;
                        if Some(loaded.kind()) != a.model_kind.as_deref() {
                            return Err(format!("{} holds a {} model", p.display(), loaded.kind()));
                        }
                        &loaded
                    }
                    (None, Some(m)) => m,
                    (None, None) => unreachable!("validated model input"),
                };
                let ordinal = self.plan.ordinals[id];
                Value::Table(apply(model, self.table_input(id, values, None), ordinal)?)
            }
            Op::SinkFile(_) | Op::SinkChart(_) | Op::SinkReport(_) => unreachable!("sinks handled by caller"),
        })
    }
}

fn cube_source(cube: &Cube, c: &CubeSource) -> Result<Table, String> {
    match (&c.group_by, &c.aggregate) {
        (Some(g), Some(a)) => {
            let spec = QuerySpec::parse(g, a).map_err(|e| e.to_string())?;
            Ok(cube.query(&spec).map_err(|e| e.to_string())?.to_table())
        }
        _ => cube.extract_named(&c.attributes, c.key_figure).map_err(|e| e.to_string()),
    }
}

fn dso_source(dso: &Dso, fields: Option<&[String]>) -> Result<Table, String> {
    let all = dso_fields();
    let chosen: Vec<_> = match fields {
        None => all,
        Some(names) => names
            .iter()
            .map(|n| all.iter().find(|(f, _)| f.name() == n).copied().ok_or_else(|| format!("unknown DSO field `{n}`")))
            .collect::<Result<_, _>>()?,
    };
    let mut t = Table::new(chosen.iter().map(|(f, k)| Column::new(f.name(), *k)).collect()).map_err(|e| e.to_string())?;
    for r in dso.records() {
        let tx = r.to_transaction();
        let row = chosen
            .iter()
            .map(|(f, k)| match k {
                ColumnKind::Money => Cell::Num(tx.amount_lc.to_f64()),
                _ => Cell::text(tx.value(*f)),
            })
            .collect();
        t.push_row(row).map_err(|e| e.to_string())?;
    }
    Ok(t)
}

fn file_source(root: &Path, f: &FileSource) -> Result<Table, String> {
    let path = root.join(&f.path);
    let mut r = csv::Reader::from_path(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if let Some(declared) = &f.columns {
        if declared != &header {
            return Err(format!("{} header {header:?} differs from declared columns {declared:?}", path.display()));
        }
    }
    let kinds: Vec<ColumnKind> = header.iter().map(|c| f.kind_of(c)).collect();
    let mut t = Table::new(header.iter().zip(&kinds).map(|(c, k)| Column::new(c.clone(), *k)).collect())
        .map_err(|e| e.to_string())?;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = rec
            .iter()
            .zip(&kinds)
            .zip(&header)
            .map(|((v, k), c)| {
                if k.is_numeric() {
                    v.trim()
                        .parse::<f64>()
                        .map(Cell::Num)
                        .map_err(|_| format!("row {}: `{v}` in `{c}` is not a number", line + 1))
                } else {
                    Ok(Cell::text(v))
                }
            })
            .collect::<Result<_, _>>()?;
        t.push_row(row).map_err(|e| e.to_string())?;
    }
    Ok(t)
}

fn filter(t: &Table, f: &FilterParams) -> Result<Table, String> {
    let col = t.require_column(&f.column).map_err(|e| e.to_string())?;
    let kind = t.columns()[col].kind;
    let numeric = kind.is_numeric() && f.op != FilterOp::In;
    let threshold = match (&f.value, numeric) {
        (Some(v), true) => Some(v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number"))?),
        _ => None,
    };
    let values = f.values.clone().unwrap_or_default();
    Ok(t.filter_rows(|r| {
        let cell = &r.cells()[col];
        let ord = match (threshold, cell.coerce_num()) {
            (Some(th), Some(x)) => x.partial_cmp(&th),
            (Some(_), None) => None,
            (None, _) => Some(cell.format(kind).as_str().cmp(f.value.as_deref().unwrap_or_default())),
        };
        use std::cmp::Ordering::*;
        match f.op {
            FilterOp::In => values.contains(&cell.format(kind)),
            FilterOp::Eq => ord == Some(Equal),
            FilterOp::Ne => ord != Some(Equal),
            FilterOp::Lt => ord == Some(Less),
            FilterOp::Le => matches!(ord, Some(Less | Equal)),
            FilterOp::Gt => ord == Some(Greater),
            FilterOp::Ge => matches!(ord, Some(Greater | Equal)),
        }
    }))
}

fn bin(t: &Table, b: &BinParams) -> Result<Table, String> {
    let values = t.numeric_column(&b.column).map_err(|e| e.to_string())?;
    let cells = if values.is_empty() {
        Vec::new()
    } else {
        let spec = fit_binning(&values, b.bins).map_err(|e| e.to_string())?;
        values.iter().map(|v| Cell::text(spec.label(spec.bin_of(*v)))).collect()
    };
    t.with_column(Column::categorical(b.output_name()), cells).map_err(|e| e.to_string())
}

/// Inner equi-join. Output columns are the left columns followed by the
/// right non-key columns; rows follow left order, then right match order.
/// Keys compare by their formatted text.
pub fn merge_tables(left: &Table, right: &Table, keys: &[impl AsRef<str>]) -> Result<Table, TableError> {
    let lk: Vec<usize> = keys.iter().map(|k| left.require_column(k.as_ref())).collect::<Result<_, _>>()?;
    let rk: Vec<usize> = keys.iter().map(|k| right.require_column(k.as_ref())).collect::<Result<_, _>>()?;
    let rest: Vec<usize> = (0..right.columns().len()).filter(|i| !rk.contains(i)).collect();
    let mut columns = left.columns().to_vec();
    columns.extend(rest.iter().map(|&i| right.columns()[i].clone()));
    let mut out = Table::new(columns)?;

    let key_of = |t: &Table, idx: &[usize], row: usize| -> Vec<String> {
        let cells = t.formatted_row(row);
        idx.iter().map(|&i| cells[i].clone()).collect()
    };
    let mut index: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
    for r in 0..right.len() {
        index.entry(key_of(right, &rk, r)).or_default().push(r);
    }
    for l in 0..left.len() {
        for &r in index.get(&key_of(left, &lk, l)).into_iter().flatten() {
            let mut row = left.rows()[l].clone();
            row.extend(rest.iter().map(|&i| right.rows()[r][i].clone()));
            out.push_row(row)?;
        }
    }
    Ok(out)
}

fn cluster_space(
    t: &Table,
    attributes: &[String],
    bins: usize,
    weight: f64,
    weights: &BTreeMap<String, f64>,
) -> Result<FeatureSpace<f64>, String> {
    let mut space = FeatureSpace::from_table(t, attributes, bins).map_err(|e| e.to_string())?;
    for a in attributes {
        let w = weights.get(a).copied().unwrap_or(weight);
        space = space.with_weight(a, w).map_err(|e| e.to_string())?;
    }
    if let Some(extra) = weights.keys().find(|k| !attributes.contains(k)) {
        return Err(format!("weight given for `{extra}`, which is not an attribute"));
    }
    Ok(space)
}

fn train(spec: &TrainSpec, t: &Table, seed: u64) -> Result<MiningModel, String> {
    let e = |e: crate::mining::MiningError| e.to_string();
    Ok(match spec {
        TrainSpec::Tree { target, inputs, max_leaves, min_leaf_size, min_gain, bins } => {
            let params = TreeParams { max_leaves: *max_leaves, min_leaf_size: *min_leaf_size, min_gain: *min_gain, n_bins: *bins };
            MiningModel::Tree(tree_fit(t, target, inputs, &params).map_err(e)?)
        }
        TrainSpec::Kmeans { attributes, k, bins, weight, weights, max_iter, restarts } => {
            let space = cluster_space(t, attributes, *bins, *weight, weights)?;
            let params = KMeansParams { k: *k, seed, max_iter: *max_iter, restarts: *restarts };
            MiningModel::Cluster(kmeans_fit(t, &space, &params).map_err(e)?)
        }
        TrainSpec::Dbscan { attributes, eps, min_pts, bins, weight, weights } => {
            let space = cluster_space(t, attributes, *bins, *weight, weights)?;
            MiningModel::Cluster(dbscan_fit(t, &space, *eps, *min_pts).map_err(e)?)
        }
        TrainSpec::Agglomerative { attributes, k, linkage, bins, weight, weights } => {
            let space = cluster_space(t, attributes, *bins, *weight, weights)?;
            let linkage: Linkage = linkage.parse().map_err(e)?;
            let d = agglomerative_fit(t, &space, linkage).map_err(e)?;
            MiningModel::Cluster(dendrogram_cut(&d, *k).map_err(e)?)
        }
        TrainSpec::Regression { input, target } => MiningModel::Regression(regression_fit_table(t, input, target).map_err(e)?),
    })
}

fn apply(model: &MiningModel, t: &Table, ordinal: usize) -> Result<Table, String> {
    let e = |e: crate::mining::MiningError| e.to_string();
    let mut out = t.clone();
    let mut push = |col: ModelColumn, kind: ColumnKind, cells: Vec<Cell>| -> Result<(), String> {
        out = out.with_column(Column::new(col.name(ordinal), kind), cells).map_err(|e| e.to_string())?;
        Ok(())
    };
    match model {
        MiningModel::Tree(m) => {
            let preds = t.iter_rows().map(|r| tree_predict(m, &r)).collect::<Result<Vec<_>, _>>().map_err(e)?;
            push(ModelColumn::TreeNode, ColumnKind::Integer, preds.iter().map(|p| Cell::Num(p.node_id as f64)).collect())?;
            push(ModelColumn::TreeProbability, ColumnKind::Probability, preds.iter().map(|p| Cell::Num(p.probability)).collect())?;
            push(ModelColumn::TreeValue, ColumnKind::Categorical, preds.into_iter().map(|p| Cell::Text(p.value)).collect())?;
        }
        MiningModel::Cluster(m) => {
            let labels = t.iter_rows().map(|r| cluster_assign(m, &r)).collect::<Result<Vec<_>, _>>().map_err(e)?;
            push(ModelColumn::Cluster, ColumnKind::Integer, labels.into_iter().map(|l| Cell::Num(l as f64)).collect())?;
        }
        MiningModel::Regression(m) => {
            let input = m.input.as_deref().ok_or("regression model has no input column")?;
            let col = t.require_column(input).map_err(|e| e.to_string())?;
            let scores = t
                .rows()
                .iter()
                .map(|r| r[col].coerce_num().map(|x| Cell::Num(m.w * x)).ok_or_else(|| format!("`{input}` is not numeric")))
                .collect::<Result<_, _>>()?;
            push(ModelColumn::Score, ColumnKind::Numeric, scores)?;
        }
        MiningModel::Rules(_) => return Err("rule sets cannot be applied to rows".into()),
    }
    Ok(out)
}

fn default_title(kind: ChartKind) -> &'static str {
    match kind {
        ChartKind::AttributeDistribution => "Attribute distribution by cluster",
        ChartKind::OverallInfluence => "Overall influence",
        ChartKind::InterClusterDistance => "Inter cluster distance",
        ChartKind::IntraClusterDistance => "Intra cluster distance",
        ChartKind::RegressionScoring => "Regression scoring",
    }
}

fn as_cluster(m: &MiningModel) -> Result<&ClusterModel, String> {
    match m {
        MiningModel::Cluster(c) => Ok(c),
        other => Err(format!("expected a cluster model, got {}", other.kind())),
    }
}

fn chart_spec(c: &ChartSink, model: &MiningModel, t: &Table) -> Result<ChartSpec<f64>, String> {
    let e = |e: crate::evaluate::EvalError| e.to_string();
    let cluster_labels = |k: usize| (0..k).map(|i| i.to_string()).collect::<Vec<_>>();
    let data = match c.chart {
        ChartKind::OverallInfluence => {
            let m = as_cluster(model)?;
            let labels = assign_rows(m, t).map_err(e)?;
            let scope = match &c.attributes {
                Some(cols) => t.select(cols).map_err(|e| e.to_string())?,
                None => t.clone(),
            };
            let chart = influence_from_labels(&scope, &labels).map_err(e)?;
            ChartData::Bars {
                labels: chart.entries.iter().map(|x| x.attribute.clone()).collect(),
                values: chart.entries.iter().map(|x| x.score).collect(),
            }
        }
        ChartKind::InterClusterDistance => {
            let m = as_cluster(model)?;
            let r = distance_report(m, t).map_err(e)?;
            ChartData::Matrix { labels: cluster_labels(r.inter.len()), values: r.inter }
        }
        ChartKind::IntraClusterDistance => {
            let m = as_cluster(model)?;
            let r = distance_report(m, t).map_err(e)?;
            ChartData::Bars { labels: cluster_labels(r.intra.len()), values: r.intra }
        }
        ChartKind::AttributeDistribution => {
            let m = as_cluster(model)?;
            let attr = c.attribute.as_deref().expect("validated");
            let d = attribute_distribution(m, t, attr).map_err(e)?;
            ChartData::Shares {
                categories: d.categories,
                series: d.shares.into_iter().enumerate().map(|(i, s)| (i.to_string(), s)).collect(),
            }
        }
        ChartKind::RegressionScoring => {
            let MiningModel::Regression(m) = model else {
                return Err(format!("expected a regression model, got {}", model.kind()));
            };
            let (Some(x), Some(y)) = (m.input.as_deref(), m.target.as_deref()) else {
                return Err("regression model does not name its columns".into());
            };
            let xs = t.numeric_column(x).map_err(|e| e.to_string())?;
            let ys = t.numeric_column(y).map_err(|e| e.to_string())?;
            ChartData::Scatter { points: xs.into_iter().zip(ys).collect(), slope: m.w }
        }
    };
    let title = c.title.clone().unwrap_or_else(|| default_title(c.chart).to_string());
    Ok(ChartSpec { kind: c.chart, title, data })
}

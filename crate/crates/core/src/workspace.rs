//! The pipeline on disk.
//!
//! A workspace directory holds every stage's state:
//!
//! ```text
//! workspace.toml   seed, cube chart map, cleansing policy, stage state
//! schema.csv       source schema used for ingestion
//! psa/             staged requests and per-request error reports
//! dso/             active table and change log
//! cube/            fact and dimension tables
//! runs/<run id>/   one directory per analysis run
//! .lock            held while a command runs
//! ```
//!
//! Each stage checks its prerequisite and fails with [`WorkspaceError::Stage`]
//! naming the step to run first.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apd::{run_process_cached, validate_process, AnalysisProcess, ApdError, Environment, RunCache};
use crate::cube::{ChartOfAccountsMap, Cube, CubeError, LoadStats, QueryResult, QuerySpec};
use crate::ingest::{parse_row, read_source_rows, write_error_report, Field, IngestError, ParseError, SourceSchema};
use crate::staging::{cleanse, ChangeAction, CleansePolicy, CleanseReport, Dso, PsaRow, PsaStore, StagingError};

pub const DEFAULT_SEED: u64 = 42;
const MANIFEST: &str = "workspace.toml";
const SCHEMA: &str = "schema.csv";
const LOCK: &str = ".lock";
const RUN_MANIFEST: &str = "run.toml";
const RUN_PROCESS: &str = "process.toml";

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("{stage} needs {missing} first")]
    Stage { stage: &'static str, missing: String },
    #[error("workspace is locked by another command; remove {} if no command is running", .0.display())]
    Locked(PathBuf),
    #[error("run `{0}` already exists; pass --force to overwrite it")]
    RunExists(String),
    #[error("no run named `{0}`")]
    UnknownRun(String),
    #[error("invalid run id `{0}`")]
    RunId(String),
    #[error("workspace manifest: {0}")]
    Manifest(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Staging(#[from] StagingError),
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error(transparent)]
    Apd(#[from] ApdError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Io { path: path.to_path_buf(), source }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Request ids in activation order; a re-activated request appears again.
    #[serde(default = "Vec::new")]
    pub activated: Vec<u64>,
    /// Length of the change log when the cube was last built.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube_log_len: Option<usize>,
    #[serde(default)]
    pub charts: ChartOfAccountsMap,
    #[serde(default)]
    pub cleanse: CleansePolicy,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            seed: DEFAULT_SEED,
            activated: Vec::new(),
            cube_log_len: None,
            charts: ChartOfAccountsMap::default(),
            cleanse: CleansePolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestSummary {
    pub request_id: u64,
    /// Rows staged, error rows included.
    pub staged: usize,
    pub errors: Vec<ParseError>,
    pub cleanse: CleanseReport,
    pub error_report: PathBuf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ActivationSummary {
    pub request_id: u64,
    pub inserted: usize,
    pub overwritten: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeFailure {
    pub node: String,
    pub cause: String,
}

/// What a run left behind, stored as `run.toml` in the run directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub process: String,
    pub seed: u64,
    #[serde(default = "Vec::new")]
    pub skipped: Vec<String>,
    #[serde(default = "Vec::new")]
    pub failures: Vec<NodeFailure>,
    /// Sink id to artifact path, relative to the run directory.
    #[serde(default)]
    pub artifacts: BTreeMap<String, String>,
}

impl RunReport {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Defaults to the process name.
    pub run_id: Option<String>,
    /// Defaults to the workspace seed.
    pub seed: Option<u64>,
    pub force: bool,
    /// Base for relative `source.file` paths; defaults to the workspace root.
    pub file_root: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Status {
    pub requests: usize,
    pub error_rows: usize,
    pub activated: Vec<u64>,
    pub dso_records: usize,
    pub cube_facts: Option<usize>,
    /// The DSO changed after the cube was built.
    pub cube_stale: bool,
    pub runs: Vec<String>,
}

struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(path: PathBuf) -> Result<Self, WorkspaceError> {
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard(path)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(WorkspaceError::Locked(path)),
            Err(e) => Err(WorkspaceError::Io { path, source: e }),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// An open workspace. Holds the lock until dropped.
pub struct Workspace {
    root: PathBuf,
    manifest: Manifest,
    schema: SourceSchema,
    cache: RunCache,
    _lock: LockGuard,
}

impl Workspace {
    /// Opens the workspace at `root`, creating it when absent.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, WorkspaceError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let lock = LockGuard::acquire(root.join(LOCK))?;
        for d in ["psa", "dso", "cube", "runs"] {
            let p = root.join(d);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        let manifest_path = root.join(MANIFEST);
        let manifest = if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
            toml::from_str(&text).map_err(|e| WorkspaceError::Manifest(e.to_string()))?
        } else {
            Manifest::default()
        };
        let schema_path = root.join(SCHEMA);
        let schema = if schema_path.exists() {
            SourceSchema::read(fs::File::open(&schema_path).map_err(io_err(&schema_path))?)?
        } else {
            let s = SourceSchema::cash_flow();
            fs::write(&schema_path, s.to_csv()).map_err(io_err(&schema_path))?;
            s
        };
        let ws = Workspace { root, manifest, schema, cache: RunCache::new(), _lock: lock };
        if !manifest_path.exists() {
            ws.save_manifest()?;
        }
        Ok(ws)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn schema(&self) -> &SourceSchema {
        &self.schema
    }

    pub fn set_seed(&mut self, seed: u64) -> Result<(), WorkspaceError> {
        self.manifest.seed = seed;
        self.save_manifest()
    }

    pub fn cache(&self) -> &RunCache {
        &self.cache
    }

    fn save_manifest(&self) -> Result<(), WorkspaceError> {
        let path = self.root.join(MANIFEST);
        let text = toml::to_string(&self.manifest).map_err(|e| WorkspaceError::Manifest(e.to_string()))?;
        fs::write(&path, text).map_err(io_err(&path))
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn psa(&self) -> Result<PsaStore, WorkspaceError> {
        Ok(PsaStore::load(&self.dir("psa"), self.schema.clone())?)
    }

    pub fn dso(&self) -> Result<Dso, WorkspaceError> {
        Ok(Dso::load(&self.dir("dso"))?)
    }

    pub fn cube(&self) -> Result<Cube, WorkspaceError> {
        if self.manifest.cube_log_len.is_none() {
            return Err(WorkspaceError::Stage { stage: "reading the cube", missing: "load-cube".into() });
        }
        Ok(Cube::load_from(&self.dir("cube"), self.manifest.charts.clone())?)
    }

    /// Parses an extract, fills defaults, cleanses the good rows and stages
    /// them as a new request. Rows that fail to parse are staged too, in
    /// `error` status, after the good rows. Their errors are also written to
    /// `psa/errors_NNNNNN.csv`.
    pub fn ingest(&mut self, extract: &Path) -> Result<IngestSummary, WorkspaceError> {
        let file = fs::File::open(extract).map_err(io_err(extract))?;
        let rows = read_source_rows(file, &self.schema)?;
        let mut good = Vec::new();
        let mut bad = Vec::new();
        for row in &rows {
            match parse_row(row, &self.schema) {
                Ok(t) => good.push(t),
                Err(e) => bad.push((row, e)),
            }
        }
        let (good, report) = cleanse(good, &self.manifest.cleanse);
        let mut staged: Vec<PsaRow> = good.iter().map(|t| PsaRow::from_transaction(t, &self.schema)).collect();
        staged.extend(bad.iter().map(|(row, e)| PsaRow::from_error(row, e, &self.schema)));
        let count = staged.len();

        let mut psa = self.psa()?;
        let request_id = psa.append(staged);
        psa.save(&self.dir("psa"))?;

        let errors: Vec<ParseError> = bad.into_iter().map(|(_, e)| e).collect();
        let error_report = self.dir("psa").join(format!("errors_{request_id:06}.csv"));
        let out = fs::File::create(&error_report).map_err(io_err(&error_report))?;
        write_error_report(&errors, out)?;
        Ok(IngestSummary { request_id, staged: count, errors, cleanse: report, error_report })
    }

    pub fn edit(&mut self, request_id: u64, row: usize, field: Field, value: &str) -> Result<PsaRow, WorkspaceError> {
        let mut psa = self.psa()?;
        if psa.requests().is_empty() {
            return Err(WorkspaceError::Stage { stage: "edit", missing: "ingest".into() });
        }
        let edited = psa.edit(request_id, row, field, value)?.clone();
        psa.save(&self.dir("psa"))?;
        Ok(edited)
    }

    /// Moves a staged request into the DSO. Activating a request again
    /// reapplies its rows, bumping record versions.
    pub fn activate(&mut self, request_id: u64) -> Result<ActivationSummary, WorkspaceError> {
        let psa = self.psa()?;
        if psa.requests().is_empty() {
            return Err(WorkspaceError::Stage { stage: "activate", missing: "ingest".into() });
        }
        let request = psa.request(request_id).ok_or(StagingError::RequestNotFound(request_id))?;
        let mut dso = self.dso()?;
        let entries = dso.activate(request, &self.schema)?;
        dso.save(&self.dir("dso"))?;
        self.manifest.activated.push(request_id);
        self.save_manifest()?;
        let inserted = entries.iter().filter(|e| e.action == ChangeAction::Insert).count();
        Ok(ActivationSummary { request_id, inserted, overwritten: entries.len() - inserted })
    }

    /// Rebuilds the cube from the whole DSO into a fresh cube, so reloading
    /// unchanged data yields the same surrogate keys.
    pub fn load_cube(&mut self) -> Result<LoadStats, WorkspaceError> {
        if self.manifest.activated.is_empty() {
            return Err(WorkspaceError::Stage { stage: "load-cube", missing: "activate".into() });
        }
        let dso = self.dso()?;
        let mut cube = Cube::new(self.manifest.charts.clone());
        let stats = cube.load(dso.records());
        let dir = self.dir("cube");
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        cube.save(&dir)?;
        self.manifest.cube_log_len = Some(dso.change_log().len());
        self.save_manifest()?;
        Ok(stats)
    }

    pub fn query(&self, spec: &QuerySpec) -> Result<QueryResult, WorkspaceError> {
        if self.manifest.cube_log_len.is_none() {
            return Err(WorkspaceError::Stage { stage: "query", missing: "load-cube".into() });
        }
        Ok(self.cube()?.query(spec)?)
    }

    /// Validates and runs a process into `runs/<run id>`. An existing run
    /// directory is replaced only with `force`.
    pub fn run(&mut self, process: &AnalysisProcess, opts: &RunOptions) -> Result<RunReport, WorkspaceError> {
        validate_process(process).map_err(ApdError::Invalid)?;
        let run_id = opts.run_id.clone().unwrap_or_else(|| process.name.clone());
        check_run_id(&run_id)?;
        let kinds: Vec<&str> = process.nodes.iter().map(|n| n.kind.as_str()).collect();
        let cube = if kinds.contains(&"source.cube") {
            if self.manifest.cube_log_len.is_none() {
                return Err(WorkspaceError::Stage { stage: "run", missing: "load-cube".into() });
            }
            Some(self.cube()?)
        } else {
            None
        };
        let dso = if kinds.contains(&"source.dso") {
            if self.manifest.activated.is_empty() {
                return Err(WorkspaceError::Stage { stage: "run", missing: "activate".into() });
            }
            Some(self.dso()?)
        } else {
            None
        };

        let out_dir = self.dir("runs").join(&run_id);
        if out_dir.exists() {
            if !opts.force {
                return Err(WorkspaceError::RunExists(run_id));
            }
            fs::remove_dir_all(&out_dir).map_err(io_err(&out_dir))?;
        }
        let seed = opts.seed.unwrap_or(self.manifest.seed);
        let env = Environment {
            cube: cube.as_ref(),
            dso: dso.as_ref(),
            file_root: opts.file_root.clone().unwrap_or_else(|| self.root.clone()),
            out_dir: out_dir.clone(),
            seed,
        };
        let outcome = run_process_cached(process, &env, &mut self.cache)?;

        let process_path = out_dir.join(RUN_PROCESS);
        fs::write(&process_path, process.to_text()).map_err(io_err(&process_path))?;
        let report = RunReport {
            run_id: run_id.clone(),
            process: process.name.clone(),
            seed,
            skipped: outcome.skipped,
            failures: outcome
                .failures
                .into_iter()
                .map(|f| NodeFailure { node: f.node, cause: f.cause })
                .collect(),
            artifacts: outcome
                .artifacts
                .into_iter()
                .map(|(sink, path)| {
                    let rel = path.strip_prefix(&out_dir).unwrap_or(&path);
                    (sink, rel.to_string_lossy().replace('\\', "/"))
                })
                .collect(),
        };
        let manifest_path = out_dir.join(RUN_MANIFEST);
        let text = toml::to_string(&report).map_err(|e| WorkspaceError::Manifest(e.to_string()))?;
        fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
        Ok(report)
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.dir("runs").join(run_id)
    }

    pub fn report(&self, run_id: &str) -> Result<RunReport, WorkspaceError> {
        check_run_id(run_id)?;
        let path = self.run_dir(run_id).join(RUN_MANIFEST);
        if !path.exists() {
            return Err(WorkspaceError::UnknownRun(run_id.to_string()));
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        toml::from_str(&text).map_err(|e| WorkspaceError::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn runs(&self) -> Result<Vec<String>, WorkspaceError> {
        let dir = self.dir("runs");
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            if entry.path().join(RUN_MANIFEST).exists() {
                out.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn status(&self) -> Result<Status, WorkspaceError> {
        let psa = self.psa()?;
        let dso = self.dso()?;
        let cube_facts = match self.manifest.cube_log_len {
            Some(_) => Some(self.cube()?.facts().len()),
            None => None,
        };
        Ok(Status {
            requests: psa.requests().len(),
            error_rows: psa.requests().iter().map(|r| r.error_rows().len()).sum(),
            activated: self.manifest.activated.clone(),
            dso_records: dso.len(),
            cube_facts,
            cube_stale: self.manifest.cube_log_len.is_some_and(|n| n != dso.change_log().len()),
            runs: self.runs()?,
        })
    }
}

fn check_run_id(id: &str) -> Result<(), WorkspaceError> {
    let mut parts = Path::new(id).components();
    match (parts.next(), parts.next()) {
        (Some(Component::Normal(_)), None) if !id.starts_with('.') => Ok(()),
        _ => Err(WorkspaceError::RunId(id.to_string())),
    }
}

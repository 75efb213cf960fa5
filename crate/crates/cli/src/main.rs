use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use crispdm::apd::{self, validate_process, AnalysisProcess, ApdError, TEMPLATES};
use crispdm::cube::{Characteristic, Filter, QuerySpec};
use crispdm::ingest::Field;
use crispdm::synthgen::{generate_text, GenSpec};
use crispdm::workspace::{RunOptions, RunReport, Workspace};

#[derive(Parser)]
#[command(name = "crispdm", version, about = "Cash-flow warehouse and data-mining pipeline")]
struct Cli {
    /// Workspace directory; created on first use.
    #[arg(long, global = true, default_value = "workspace")]
    workspace: PathBuf,
    /// Seed for runs and generation. Defaults to the workspace seed (42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Delimited,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic source extract.
    Generate {
        /// Generator spec file (TOML). Flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        records: Option<usize>,
        #[arg(long)]
        vendors: Option<usize>,
        #[arg(long)]
        accounts: Option<usize>,
        #[arg(long)]
        flip: Option<f64>,
        /// Output file; standard output when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Stage a source extract as a new request.
    Ingest { file: PathBuf },
    /// Correct one field of a staged row (rows count from 0).
    Edit { request: u64, row: usize, field: String, value: String },
    /// Move a staged request into the active data store.
    Activate { request: u64 },
    /// Rebuild the cube from the active data store.
    LoadCube,
    /// Aggregate the cube.
    Query {
        /// Characteristics to group by, comma separated.
        #[arg(long, value_delimiter = ',')]
        group_by: Vec<String>,
        /// sum, count or mean.
        #[arg(long, default_value = "sum")]
        agg: String,
        /// Keep only `CHAR=V1|V2|...`.
        #[arg(long = "where")]
        filters: Vec<String>,
        /// Keep only `CHAR=FROM..TO`.
        #[arg(long)]
        range: Vec<String>,
    },
    /// Check a process without running it.
    Validate {
        process: Option<PathBuf>,
        #[arg(long, conflicts_with = "process")]
        template: Option<String>,
    },
    /// Run a process into runs/<run id>.
    Run {
        process: Option<PathBuf>,
        #[arg(long, conflicts_with = "process")]
        template: Option<String>,
        /// Defaults to the process name.
        #[arg(long)]
        run_id: Option<String>,
        /// Replace an existing run directory.
        #[arg(long)]
        force: bool,
    },
    /// Show what a run produced.
    Report {
        run_id: String,
        /// Print one sink's artifact instead of the summary.
        #[arg(long)]
        sink: Option<String>,
    },
    /// List built-in process templates, or print one.
    Template { name: Option<String> },
    /// Show the state of every stage.
    Status,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_process(file: &Option<PathBuf>, template: &Option<String>) -> Result<(AnalysisProcess, Option<PathBuf>)> {
    match (file, template) {
        (Some(f), None) => {
            let root = f.parent().map(Path::to_path_buf).filter(|p| !p.as_os_str().is_empty());
            Ok((AnalysisProcess::load(f)?, root))
        }
        (None, Some(t)) => Ok((apd::template(t)?, None)),
        _ => bail!("give a process file or --template <name>"),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let mut out = io::stdout().lock();
    match &cli.command {
        Command::Generate { spec, records, vendors, accounts, flip, out: file } => {
            let mut s = match spec {
                Some(p) => GenSpec::parse(&fs::read_to_string(p).with_context(|| p.display().to_string())?)?,
                None => GenSpec::default(),
            };
            s.seed = cli.seed.unwrap_or(s.seed);
            s.n_records = records.unwrap_or(s.n_records);
            s.n_vendors = vendors.unwrap_or(s.n_vendors);
            s.n_gl_accounts = accounts.unwrap_or(s.n_gl_accounts);
            s.flip_probability = flip.unwrap_or(s.flip_probability);
            let text = generate_text(&s)?;
            match file {
                Some(p) => {
                    fs::write(p, text).with_context(|| p.display().to_string())?;
                    eprintln!("wrote {} records to {}", s.n_records, p.display());
                }
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::Template { name: None } => {
            for (name, _) in TEMPLATES {
                writeln!(out, "{name}")?;
            }
        }
        Command::Template { name: Some(n) } => {
            write!(out, "{}", apd::template(n)?.to_text())?;
        }
        Command::Validate { process, template } => {
            let (p, _) = load_process(process, template)?;
            match validate_process(&p) {
                Ok(plan) => writeln!(out, "process `{}` is valid: {} nodes, {} edges, order {}", p.name, p.nodes.len(), p.edges.len(), plan.order().join(" "))?,
                Err(errors) => {
                    for e in &errors {
                        writeln!(out, "{e}")?;
                    }
                    return Err(ApdError::Invalid(errors).into());
                }
            }
        }
        _ => with_workspace(cli, &mut out)?,
    }
    Ok(())
}

fn with_workspace(cli: &Cli, out: &mut impl Write) -> Result<()> {
    let mut ws = Workspace::open(&cli.workspace)?;
    let delimited = cli.format == Format::Delimited;
    match &cli.command {
        Command::Ingest { file } => {
            let s = ws.ingest(file)?;
            writeln!(out, "request {}: staged {} rows, {} in error", s.request_id, s.staged, s.errors.len())?;
            writeln!(
                out,
                "cleansing: {} duplicates removed, {} missing codes filled, {} outliers flagged",
                s.cleanse.duplicates_removed,
                s.cleanse.missing_filled,
                s.cleanse.outliers_flagged.len()
            )?;
            for e in &s.errors {
                writeln!(out, "  {e}")?;
            }
            if !s.errors.is_empty() {
                writeln!(out, "error report: {}", s.error_report.display())?;
            }
        }
        Command::Edit { request, row, field, value } => {
            let field: Field = field.parse()?;
            let r = ws.edit(*request, *row, field, value)?;
            writeln!(out, "request {request} row {row}: {}", r.status.as_str())?;
            if let Some(reason) = &r.reason {
                writeln!(out, "  {reason}")?;
            }
        }
        Command::Activate { request } => {
            let a = ws.activate(*request)?;
            writeln!(out, "request {}: {} inserted, {} overwritten", a.request_id, a.inserted, a.overwritten)?;
        }
        Command::LoadCube => {
            let s = ws.load_cube()?;
            let [d1, d2, d3] = s.dim_rows_added;
            writeln!(out, "{} facts; dimension rows {d1}, {d2}, {d3}", s.facts_added)?;
        }
        Command::Query { group_by, agg, filters, range } => {
            let mut spec = QuerySpec::parse(group_by, agg)?;
            for f in filters {
                let (c, vals) = split_pair(f, '=')?;
                spec = spec.filter(Filter::In(c, vals.split('|').map(str::to_string).collect::<BTreeSet<_>>()));
            }
            for r in range {
                let (c, span) = split_pair(r, '=')?;
                let (from, to) = span.split_once("..").ok_or_else(|| anyhow!("range `{r}` needs FROM..TO"))?;
                spec = spec.filter(Filter::Range(c, from.to_string(), to.to_string()));
            }
            let result = ws.query(&spec)?;
            let text = if delimited { result.to_delimited() } else { result.to_text() };
            write!(out, "{text}")?;
        }
        Command::Run { process, template, run_id, force } => {
            let (p, file_root) = load_process(process, template)?;
            let opts = RunOptions { run_id: run_id.clone(), seed: cli.seed, force: *force, file_root };
            let report = ws.run(&p, &opts)?;
            print_report(out, &report, delimited)?;
            if !report.is_success() {
                bail!("{} node(s) failed", report.failures.len());
            }
        }
        Command::Report { run_id, sink } => {
            let report = ws.report(run_id)?;
            match sink {
                None => print_report(out, &report, delimited)?,
                Some(s) => {
                    let rel = report.artifacts.get(s).ok_or_else(|| anyhow!("run `{run_id}` has no sink `{s}`"))?;
                    let mut path = ws.run_dir(run_id).join(rel);
                    if path.extension().is_some_and(|e| e == "svg") && !delimited {
                        path.set_extension("txt");
                    }
                    out.write_all(&fs::read(&path).with_context(|| path.display().to_string())?)?;
                }
            }
        }
        Command::Status => {
            let s = ws.status()?;
            writeln!(out, "workspace   {}", ws.root().display())?;
            writeln!(out, "seed        {}", ws.manifest().seed)?;
            writeln!(out, "requests    {} ({} rows in error)", s.requests, s.error_rows)?;
            let act: Vec<String> = s.activated.iter().map(u64::to_string).collect();
            writeln!(out, "activated   {}", if act.is_empty() { "-".into() } else { act.join(" ") })?;
            writeln!(out, "dso records {}", s.dso_records)?;
            let cube = match s.cube_facts {
                None => "not loaded".to_string(),
                Some(n) if s.cube_stale => format!("{n} facts (stale, run load-cube)"),
                Some(n) => format!("{n} facts"),
            };
            writeln!(out, "cube        {cube}")?;
            writeln!(out, "runs        {}", if s.runs.is_empty() { "-".into() } else { s.runs.join(" ") })?;
        }
        Command::Generate { .. } | Command::Template { .. } | Command::Validate { .. } => unreachable!(),
    }
    Ok(())
}

fn split_pair(s: &str, sep: char) -> Result<(Characteristic, &str)> {
    let (c, v) = s.split_once(sep).ok_or_else(|| anyhow!("`{s}` needs CHAR{sep}VALUE"))?;
    Ok((c.trim().parse()?, v))
}

fn print_report(out: &mut impl Write, r: &RunReport, delimited: bool) -> io::Result<()> {
    if delimited {
        writeln!(out, "SINK,ARTIFACT")?;
        for (sink, path) in &r.artifacts {
            writeln!(out, "{sink},{path}")?;
        }
        return Ok(());
    }
    writeln!(out, "run {} (process {}, seed {})", r.run_id, r.process, r.seed)?;
    let width = r.artifacts.keys().map(String::len).max().unwrap_or(0);
    for (sink, path) in &r.artifacts {
        writeln!(out, "  {sink:width$}  {path}")?;
    }
    for f in &r.failures {
        writeln!(out, "  failed: {} ({})", f.node, f.cause)?;
    }
    if !r.skipped.is_empty() {
        writeln!(out, "  skipped: {}", r.skipped.join(" "))?;
    }
    Ok(())
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn crispdm(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crispdm"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn err(o: &Output) -> String {
    assert!(!o.status.success(), "unexpected success: {}", String::from_utf8_lossy(&o.stdout));
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let extract = dir.path().join("extract.csv");
    ok(&crispdm(&ws, &["generate", "--records", "200", "--out", extract.to_str().unwrap()]));

    let msg = err(&crispdm(&ws, &["run", "--template", "cashflow-gl-prediction"]));
    assert!(msg.contains("load-cube"), "{msg}");

    assert!(ok(&crispdm(&ws, &["ingest", extract.to_str().unwrap()])).contains("request 1: staged 200 rows, 0 in error"));
    assert!(ok(&crispdm(&ws, &["activate", "1"])).contains("200 inserted"));
    assert!(ok(&crispdm(&ws, &["load-cube"])).starts_with("200 facts"));

    let q = ok(&crispdm(&ws, &["--format", "delimited", "query", "--group-by", "0GL_ACCOUNT", "--agg", "count"]));
    let total: u64 = q.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 200);

    let run = ok(&crispdm(&ws, &["run", "--template", "cashflow-gl-prediction", "--run-id", "r1"]));
    assert!(run.contains("clustering.csv"), "{run}");
    err(&crispdm(&ws, &["run", "--template", "cashflow-gl-prediction", "--run-id", "r1"]));
    ok(&crispdm(&ws, &["run", "--template", "cashflow-gl-prediction", "--run-id", "r1", "--force"]));

    let report = ok(&crispdm(&ws, &["--format", "delimited", "report", "r1"]));
    assert!(report.starts_with("SINK,ARTIFACT\n"));
    assert!(report.contains("tree_feed,decision_tree.jsonl"));
    let chart = ok(&crispdm(&ws, &["report", "r1", "--sink", "influence_chart"]));
    assert!(chart.contains('#'), "{chart}");
    assert!(err(&crispdm(&ws, &["report", "missing"])).contains("no run named"));
    assert!(ok(&crispdm(&ws, &["status"])).contains("200 facts"));
}

#[test]
fn validate_reports_every_error_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(
        &p,
        "name = \"bad\"\n[[node]]\nid = \"a\"\nkind = \"transform.select\"\ncolumns = [\"X\"]\n\
         [[node]]\nid = \"b\"\nkind = \"transform.select\"\ncolumns = [\"X\"]\n\
         [[edge]]\nfrom = \"a\"\nto = \"b\"\n[[edge]]\nfrom = \"b\"\nto = \"a\"\n",
    )
    .unwrap();
    let o = crispdm(dir.path(), &["validate", p.to_str().unwrap()]);
    err(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("cycle"));
    assert!(ok(&crispdm(dir.path(), &["validate", "--template", "cashflow-gl-prediction"])).contains("is valid"));
}

#[test]
fn generate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(&crispdm(dir.path(), &["--seed", "7", "generate", "--records", "20"]));
    let b = ok(&crispdm(dir.path(), &["--seed", "7", "generate", "--records", "20"]));
    let c = ok(&crispdm(dir.path(), &["--seed", "8", "generate", "--records", "20"]));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.lines().count(), 21);
}

#[test]
fn templates_are_listed_and_printable() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ok(&crispdm(dir.path(), &["template"])).trim(), "cashflow-gl-prediction");
    assert!(ok(&crispdm(dir.path(), &["template", "cashflow-gl-prediction"])).contains("[[node]]"));
    err(&crispdm(dir.path(), &["template", "nope"]));
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DeployError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartKind {
    AttributeDistribution,
    OverallInfluence,
    InterClusterDistance,
    IntraClusterDistance,
    RegressionScoring,
}

impl ChartKind {
    pub const ALL: [ChartKind; 5] = [
        ChartKind::AttributeDistribution,
        ChartKind::OverallInfluence,
        ChartKind::InterClusterDistance,
        ChartKind::IntraClusterDistance,
        ChartKind::RegressionScoring,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChartKind::AttributeDistribution => "attribute-distribution",
            ChartKind::OverallInfluence => "overall-influence",
            ChartKind::InterClusterDistance => "inter-cluster-distance",
            ChartKind::IntraClusterDistance => "intra-cluster-distance",
            ChartKind::RegressionScoring => "regression-scoring",
        }
    }
}

impl std::str::FromStr for ChartKind {
    type Err = DeployError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChartKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DeployError::Render(format!("unknown chart kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum ChartData<F> {
    /// One bar per label.
    Bars { labels: Vec<String>, values: Vec<F> },
    /// Square matrix with the same labels on both axes.
    Matrix { labels: Vec<String>, values: Vec<Vec<F>> },
    /// Per series (cluster), the share of each category.
    Shares { categories: Vec<String>, series: Vec<(String, Vec<F>)> },
    /// Observed `(x, y)` points and the fitted line `y = slope * x`.
    Scatter { points: Vec<(F, F)>, slope: F },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec<F> {
    pub kind: ChartKind,
    pub title: String,
    pub data: ChartData<F>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartFiles {
    pub svg: PathBuf,
    pub text: PathBuf,
}

impl<F: Scalar> ChartSpec<F> {
    pub fn validate(&self) -> Result<(), DeployError> {
        let err = |m: &str| Err(DeployError::Render(format!("{}: {m}", self.kind.name())));
        let finite = |v: &F| v.is_finite();
        match (&self.kind, &self.data) {
            (ChartKind::OverallInfluence | ChartKind::IntraClusterDistance, ChartData::Bars { labels, values }) => {
                if values.is_empty() {
                    return err("empty payload");
                }
                if labels.len() != values.len() {
                    return err("label and value counts differ");
                }
                if !values.iter().all(finite) {
                    return err("non-finite value");
                }
            }
            (ChartKind::InterClusterDistance, ChartData::Matrix { labels, values }) => {
                if values.is_empty() {
                    return err("empty payload");
                }
                if labels.len() != values.len() || values.iter().any(|r| r.len() != values.len()) {
                    return err("matrix is not square over its labels");
                }
                if !values.iter().flatten().all(finite) {
                    return err("non-finite value");
                }
            }
            (ChartKind::AttributeDistribution, ChartData::Shares { categories, series }) => {
                if categories.is_empty() || series.is_empty() {
                    return err("empty payload");
                }
                if series.iter().any(|(_, v)| v.len() != categories.len()) {
                    return err("series length differs from category count");
                }
                if !series.iter().flat_map(|(_, v)| v).all(finite) {
                    return err("non-finite value");
                }
            }
            (ChartKind::RegressionScoring, ChartData::Scatter { points, slope }) => {
                if points.is_empty() {
                    return err("empty payload");
                }
                if !slope.is_finite() || !points.iter().all(|(x, y)| x.is_finite() && y.is_finite()) {
                    return err("non-finite value");
                }
            }
            _ => return err("payload shape does not fit the chart kind"),
        }
        Ok(())
    }
}

/// Writes `<destination>.svg` and `<destination>.txt`.
pub fn render_chart<F: Scalar>(spec: &ChartSpec<F>, destination: &Path) -> Result<ChartFiles, DeployError> {
    spec.validate()?;
    if let Some(dir) = destination.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DeployError::io(dir, e))?;
    }
    let svg = destination.with_extension("svg");
    let text = destination.with_extension("txt");
    fs::write(&svg, render_svg(spec)?).map_err(|e| DeployError::io(&svg, e))?;
    fs::write(&text, render_text(spec)?).map_err(|e| DeployError::io(&text, e))?;
    Ok(ChartFiles { svg, text })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Compact number for labels: plain up to four decimals, `d.ddE+xx` for
/// very large or very small magnitudes.
pub(crate) fn compact<F: Scalar>(v: F) -> String {
    let x = v.as_f64();
    if x == 0.0 {
        return "0".to_string();
    }
    if x.abs() >= 1e5 || x.abs() < 1e-3 {
        let s = format!("{x:.2E}");
        let (mantissa, exp) = s.split_once('E').expect("exponent form");
        let exp: i32 = exp.parse().expect("integer exponent");
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}E{sign}{:02}", exp.abs());
    }
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

const PALETTE: [&str; 10] =
    ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

const WIDTH: f64 = 640.0;
const LEFT: f64 = 160.0;
const ROW: f64 = 22.0;
const TOP: f64 = 40.0;

fn header(out: &mut String, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height:.0}" viewBox="0 0 {WIDTH} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn bars_svg<F: Scalar>(out: &mut String, labels: &[String], values: &[F]) {
    let max = values.iter().map(|v| v.as_f64().abs()).fold(0.0, f64::max);
    let span = WIDTH - LEFT - 80.0;
    for (i, (l, v)) in labels.iter().zip(values).enumerate() {
        let y = TOP + i as f64 * ROW;
        let w = if max > 0.0 { v.as_f64().abs() / max * span } else { 0.0 };
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 14.0, escape(l));
        let _ = writeln!(out, r#"<rect x="{LEFT}" y="{y:.1}" width="{w:.2}" height="{:.1}" fill="{}"/>"#, ROW - 6.0, PALETTE[0]);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.1}">{}</text>"#, LEFT + w + 4.0, y + 14.0, compact(*v));
    }
}

pub fn render_svg<F: Scalar>(spec: &ChartSpec<F>) -> Result<String, DeployError> {
    spec.validate()?;
    let mut out = String::new();
    match &spec.data {
        ChartData::Bars { labels, values } => {
            header(&mut out, TOP + labels.len() as f64 * ROW + 20.0, &spec.title);
            bars_svg(&mut out, labels, values);
        }
        ChartData::Matrix { labels, values } => {
            let n = labels.len() as f64;
            let cell = ((WIDTH - LEFT - 20.0) / n).min(60.0);
            header(&mut out, TOP + 20.0 + (n + 1.0) * cell, &spec.title);
            let max = values.iter().flatten().map(|v| v.as_f64()).fold(0.0, f64::max);
            for (j, l) in labels.iter().enumerate() {
                let x = LEFT + j as f64 * cell + cell / 2.0;
                let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, TOP + 12.0, escape(l));
            }
            for (i, row) in values.iter().enumerate() {
                let y = TOP + 20.0 + i as f64 * cell;
                let _ = writeln!(
                    out,
                    r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
                    LEFT - 6.0,
                    y + cell / 2.0 + 4.0,
                    escape(&labels[i])
                );
                for (j, v) in row.iter().enumerate() {
                    let x = LEFT + j as f64 * cell;
                    let shade = if max > 0.0 { 1.0 - 0.8 * v.as_f64() / max } else { 1.0 };
                    let g = (shade * 255.0).round() as u8;
                    let _ = writeln!(
                        out,
                        r##"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="#{g:02x}{g:02x}ff" stroke="white"/>"##
                    );
                    let _ = writeln!(
                        out,
                        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
                        x + cell / 2.0,
                        y + cell / 2.0 + 4.0,
                        compact(*v)
                    );
                }
            }
        }
        ChartData::Shares { categories, series } => {
            header(&mut out, TOP + series.len() as f64 * ROW + 30.0 + categories.len() as f64 * 16.0, &spec.title);
            let span = WIDTH - LEFT - 20.0;
            for (i, (name, shares)) in series.iter().enumerate() {
                let y = TOP + i as f64 * ROW;
                let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 14.0, escape(name));
                let mut x = LEFT;
                for (j, s) in shares.iter().enumerate() {
                    let w = s.as_f64() * span;
                    if w > 0.0 {
                        let _ = writeln!(
                            out,
                            r#"<rect x="{x:.2}" y="{y:.1}" width="{w:.2}" height="{:.1}" fill="{}"/>"#,
                            ROW - 6.0,
                            PALETTE[j % PALETTE.len()]
                        );
                    }
                    x += w;
                }
            }
            let base = TOP + series.len() as f64 * ROW + 16.0;
            for (j, c) in categories.iter().enumerate() {
                let y = base + j as f64 * 16.0;
                let _ = writeln!(out, r#"<rect x="{LEFT}" y="{:.1}" width="10" height="10" fill="{}"/>"#, y - 9.0, PALETTE[j % PALETTE.len()]);
                let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, LEFT + 16.0, escape(c));
            }
        }
        ChartData::Scatter { points, slope } => {
            let h = 400.0;
            header(&mut out, h, &spec.title);
            let (x0, x1) = bounds(points.iter().map(|p| p.0.as_f64()));
            let (y0, y1) = bounds(points.iter().map(|p| p.1.as_f64()).chain(
                [x0, x1].iter().map(|x| slope.as_f64() * x),
            ));
            let (px0, px1, py0, py1) = (60.0, WIDTH - 20.0, h - 40.0, TOP);
            let sx = |x: f64| px0 + (x - x0) / (x1 - x0) * (px1 - px0);
            let sy = |y: f64| py0 + (y - y0) / (y1 - y0) * (py1 - py0);
            let _ = writeln!(out, r#"<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}" stroke="black"/>"#);
            let _ = writeln!(out, r#"<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}" stroke="black"/>"#);
            for (x, y) in points {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                    sx(x.as_f64()),
                    sy(y.as_f64()),
                    PALETTE[0]
                );
            }
            let w = slope.as_f64();
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
                sx(x0),
                sy(w * x0),
                sx(x1),
                sy(w * x1),
                PALETTE[2]
            );
            let _ = writeln!(out, r#"<text x="{px1}" y="{:.1}" text-anchor="end">w = {}</text>"#, TOP + 14.0, compact(*slope));
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Range of the values, widened to a unit interval when degenerate.
fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
}

fn aligned(out: &mut String, rows: &[Vec<String>]) {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0)).collect();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, c)| if j == 0 { format!("{c:<w$}", w = widths[j]) } else { format!("{c:>w$}", w = widths[j]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
}

const BAR: usize = 40;

pub fn render_text<F: Scalar>(spec: &ChartSpec<F>) -> Result<String, DeployError> {
    spec.validate()?;
    let mut out = format!("{}\n{}\n", spec.title, "=".repeat(spec.title.chars().count()));
    match &spec.data {
        ChartData::Bars { labels, values } => {
            let max = values.iter().map(|v| v.as_f64().abs()).fold(0.0, f64::max);
            let rows: Vec<Vec<String>> = labels
                .iter()
                .zip(values)
                .map(|(l, v)| {
                    let n = if max > 0.0 { (v.as_f64().abs() / max * BAR as f64).round() as usize } else { 0 };
                    vec![l.clone(), compact(*v), format!("{:<BAR$}", "#".repeat(n))]
                })
                .collect();
            aligned(&mut out, &rows);
        }
        ChartData::Matrix { labels, values } => {
            let mut rows = vec![std::iter::once(String::new()).chain(labels.iter().cloned()).collect::<Vec<_>>()];
            for (l, r) in labels.iter().zip(values) {
                rows.push(std::iter::once(l.clone()).chain(r.iter().map(|v| compact(*v))).collect());
            }
            aligned(&mut out, &rows);
        }
        ChartData::Shares { categories, series } => {
            let mut rows = vec![std::iter::once(String::new()).chain(categories.iter().cloned()).collect::<Vec<_>>()];
            for (name, shares) in series {
                rows.push(std::iter::once(name.clone()).chain(shares.iter().map(|v| compact(*v))).collect());
            }
            aligned(&mut out, &rows);
        }
        ChartData::Scatter { points, slope } => {
            let _ = writeln!(out, "w = {}", compact(*slope));
            let mut rows = vec![vec!["x".to_string(), "y".to_string(), "w*x".to_string()]];
            for (x, y) in points {
                rows.push(vec![compact(*x), compact(*y), compact(*slope * *x)]);
            }
            aligned(&mut out, &rows);
        }
    }
    Ok(out)
}

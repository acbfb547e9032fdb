//! Writing reports: canonical `report.json`, one CSV per section and
//! optional SVG plots.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::*;
use super::svg::{LinePlot, Series};
use crate::error::{Error, Result};
use crate::inference::CiMethod;
use crate::stats::TailSide;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Svg,
}

pub fn report_json(report: &ExperimentReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// Writes the report into `dir` and returns the paths written, in order.
pub fn write_report(
    report: &ExperimentReport,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };
    if formats.contains(&ReportFormat::Json) {
        put("report.json", report_json(report)?)?;
    }
    if formats.contains(&ReportFormat::Csv) {
        for (name, table) in csv_tables(report) {
            put(&format!("{name}.csv"), table.render()?)?;
        }
    }
    if formats.contains(&ReportFormat::Svg) {
        for (name, plot) in plots(report) {
            put(&format!("{name}.svg"), plot.render())?;
        }
    }
    Ok(written)
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(to_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(to_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn s<T: ToString>(v: T) -> String {
    v.to_string()
}

fn side_name(side: TailSide) -> &'static str {
    match side {
        TailSide::Upper => "upper",
        TailSide::Lower => "lower",
    }
}

fn method_name(method: CiMethod) -> &'static str {
    match method {
        CiMethod::NormalQuantile => "normal_quantile",
        CiMethod::MdpWidth => "mdp_width",
    }
}

fn tag_cols(tag: &CellTag) -> [String; 3] {
    [s(tag.m), s(tag.seed), tag.model_id.clone()]
}

fn csv_tables(report: &ExperimentReport) -> Vec<(&'static str, Table)> {
    let mut be = Table::new(&[
        "n0",
        "n",
        "m",
        "seed",
        "model_id",
        "ks",
        "envelope",
        "within_envelope",
    ]);
    for c in report.berry_esseen.iter().flat_map(|s| &s.cells) {
        let mut row = vec![s(c.n0), s(c.n)];
        row.extend(tag_cols(&c.tag));
        row.extend([s(c.ks), s(c.envelope), s(c.within_envelope)]);
        be.push(row);
    }
    let mut tail = Table::new(&[
        "n0", "n", "x", "side", "m", "seed", "model_id", "hits", "ratio", "se",
    ]);
    for c in report.tail_ratio.iter().flat_map(|s| &s.cells) {
        let mut row = vec![s(c.n0), s(c.n), s(c.x), s(side_name(c.side))];
        row.extend(tag_cols(&c.tag));
        row.extend([s(c.hits), s(c.ratio), s(c.se)]);
        tail.push(row);
    }
    let mut mdp = Table::new(&[
        "n0",
        "n",
        "t",
        "a_n",
        "m",
        "seed",
        "model_id",
        "hits",
        "probability",
        "y",
        "target",
        "gap",
    ]);
    for c in report.mdp.iter().flat_map(|s| &s.cells) {
        let mut row = vec![s(c.n0), s(c.n), s(c.t), s(c.a_n)];
        row.extend(tag_cols(&c.tag));
        row.extend([s(c.hits), s(c.probability), s(c.y), s(c.target), s(c.gap)]);
        mdp.push(row);
    }
    let mut cov = Table::new(&[
        "n0", "n", "kappa", "method", "m", "seed", "model_id", "nominal", "delta_n", "coverage",
        "se", "pass",
    ]);
    for c in report.coverage.iter().flat_map(|s| &s.cells) {
        let mut row = vec![s(c.n0), s(c.n), s(c.kappa), s(method_name(c.method))];
        row.extend(tag_cols(&c.tag));
        row.extend([
            s(c.nominal),
            s(c.delta_n),
            s(c.coverage),
            s(c.se),
            s(c.pass),
        ]);
        cov.push(row);
    }
    let mut probes = Table::new(&[
        "probe",
        "order",
        "burn_in",
        "m",
        "seed",
        "model_id",
        "estimate",
        "se",
        "top_share",
        "stable",
    ]);
    for c in report.probes.iter().flat_map(|s| &s.cells) {
        let (kind, order) = match c.probe {
            ProbeKind::Harmonic { a } => ("harmonic", a),
            ProbeKind::LogAbs { p } => ("log_abs", p),
        };
        let mut row = vec![s(kind), s(order), s(c.burn_in)];
        row.extend(tag_cols(&c.tag));
        row.extend([s(c.estimate), s(c.se), s(c.top_share), s(c.stable)]);
        probes.push(row);
    }
    let mut skipped = Table::new(&["section", "n0", "n", "detail", "reason"]);
    for c in report.skipped() {
        skipped.push(vec![
            c.section.clone(),
            s(c.n0),
            s(c.n),
            c.detail.clone(),
            c.reason.clone(),
        ]);
    }
    vec![
        ("berry_esseen", be),
        ("tail_ratio", tail),
        ("mdp", mdp),
        ("coverage", cov),
        ("probes", probes),
        ("skipped", skipped),
    ]
}

fn distinct<T: PartialEq + Copy>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

fn plots(report: &ExperimentReport) -> Vec<(&'static str, LinePlot)> {
    let mut plots = Vec::new();
    if let Some(be) = &report.berry_esseen {
        let series = distinct(be.cells.iter().map(|c| c.n0))
            .into_iter()
            .map(|n0| Series {
                name: format!("n0={n0}"),
                points: be
                    .cells
                    .iter()
                    .filter(|c| c.n0 == n0)
                    .map(|c| (c.n as f64, c.ks))
                    .collect(),
            })
            .collect();
        plots.push((
            "ks_vs_n",
            LinePlot {
                title: "KS distance to N(0,1)".into(),
                x_label: "n".into(),
                y_label: "KS".into(),
                log_x: true,
                log_y: true,
                series,
            },
        ));
    }
    if let Some(tail) = &report.tail_ratio {
        let n0 = tail.cells.first().map(|c| c.n0);
        let mut series = Vec::new();
        for n in distinct(tail.cells.iter().map(|c| c.n)) {
            for side in [TailSide::Upper, TailSide::Lower] {
                series.push(Series {
                    name: format!("n={n} {}", side_name(side)),
                    points: tail
                        .cells
                        .iter()
                        .filter(|c| Some(c.n0) == n0 && c.n == n && c.side == side)
                        .map(|c| (c.x, c.ratio))
                        .collect(),
                });
            }
        }
        plots.push((
            "tail_ratio_vs_x",
            LinePlot {
                title: format!("tail ratio, n0={}", n0.unwrap_or(0)),
                x_label: "x".into(),
                y_label: "P(Z >= x) / (1 - Phi(x))".into(),
                log_x: false,
                log_y: false,
                series,
            },
        ));
    }
    if let Some(cov) = &report.coverage {
        let n0 = cov.cells.first().map(|c| c.n0);
        let mut series = Vec::new();
        for method in [CiMethod::NormalQuantile, CiMethod::MdpWidth] {
            for kappa in distinct(cov.cells.iter().map(|c| c.kappa)) {
                series.push(Series {
                    name: format!("{} k={kappa}", method_name(method)),
                    points: cov
                        .cells
                        .iter()
                        .filter(|c| Some(c.n0) == n0 && c.method == method && c.kappa == kappa)
                        .map(|c| (c.n as f64, c.coverage))
                        .collect(),
                });
            }
        }
        plots.push((
            "coverage_vs_n",
            LinePlot {
                title: format!("interval coverage, n0={}", n0.unwrap_or(0)),
                x_label: "n".into(),
                y_label: "coverage".into(),
                log_x: true,
                log_y: false,
                series,
            },
        ));
    }
    plots
}

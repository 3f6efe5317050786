//! Summary tables and SVG plots from result records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use sigre_core::metrics::bootstrap_ci;
use sigre_core::rng::rng_for;

use crate::experiment::ResultRecord;

pub const CI_LEVEL: f64 = 0.95;
pub const BOOTSTRAP_REPLICATES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Wasserstein,
    MeanDistance,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Wasserstein, Metric::MeanDistance];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Wasserstein => "wasserstein",
            Metric::MeanDistance => "mean_distance",
        }
    }

    fn of(self, r: &ResultRecord) -> Option<f64> {
        match self {
            Metric::Wasserstein => r.wasserstein,
            Metric::MeanDistance => r.mean_distance,
        }
    }
}

/// Bootstrap summary of one metric for one (method, budget) group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub budget: usize,
    pub metric: Metric,
    pub n: usize,
    pub low: f64,
    pub mean: f64,
    pub high: f64,
    pub median: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Methods in first-appearance order.
fn methods(records: &[ResultRecord]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in records {
        if !out.contains(&r.method) {
            out.push(r.method.clone());
        }
    }
    out
}

fn budgets(records: &[ResultRecord]) -> Vec<usize> {
    let mut b: Vec<usize> = records.iter().map(|r| r.budget).collect();
    b.sort_unstable();
    b.dedup();
    b
}

/// Groups successful records; failed cells are left out.
pub fn summarize(records: &[ResultRecord]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(usize, usize, Metric), Vec<f64>> = BTreeMap::new();
    let order = methods(records);
    for r in records {
        let mi = order.iter().position(|m| *m == r.method).expect("method listed");
        for metric in Metric::ALL {
            if let Some(v) = metric.of(r).filter(|v| v.is_finite()) {
                groups.entry((mi, r.budget, metric)).or_default().push(v);
            }
        }
    }
    let mut rng = rng_for(0, 0);
    groups
        .into_iter()
        .map(|((mi, budget, metric), values)| {
            let (low, mean, high) = if values.len() == 1 {
                (values[0], values[0], values[0])
            } else {
                bootstrap_ci(&values, CI_LEVEL, BOOTSTRAP_REPLICATES, &mut rng)?
            };
            Ok(SummaryRow {
                method: order[mi].clone(),
                budget,
                metric,
                n: values.len(),
                low,
                mean,
                high,
                median: median(&values),
            })
        })
        .collect()
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("method,budget,metric,n,ci_low,mean,ci_high,median\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:?},{:?},{:?},{:?}",
            r.method,
            r.budget,
            r.metric.name(),
            r.n,
            r.low,
            r.mean,
            r.high,
            r.median
        );
    }
    s
}

/// Median table for one metric: methods as rows, budgets as columns.
fn median_table(rows: &[SummaryRow], metric: Metric, methods: &[String], budgets: &[usize]) -> Vec<Vec<Option<f64>>> {
    methods
        .iter()
        .map(|m| {
            budgets
                .iter()
                .map(|b| {
                    rows.iter()
                        .find(|r| r.metric == metric && &r.method == m && r.budget == *b)
                        .map(|r| r.median)
                })
                .collect()
        })
        .collect()
}

fn cell_text(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn median_markdown(table: &[Vec<Option<f64>>], methods: &[String], budgets: &[usize]) -> String {
    let mut s = String::from("| method |");
    for b in budgets {
        let _ = write!(s, " {b} |");
    }
    s.push_str("\n|---|");
    s.push_str(&"---:|".repeat(budgets.len()));
    s.push('\n');
    for (m, row) in methods.iter().zip(table) {
        let _ = write!(s, "| {m} |");
        for v in row {
            let _ = write!(s, " {} |", cell_text(*v));
        }
        s.push('\n');
    }
    s
}

fn median_csv(table: &[Vec<Option<f64>>], methods: &[String], budgets: &[usize]) -> String {
    let mut s = String::from("method");
    for b in budgets {
        let _ = write!(s, ",{b}");
    }
    s.push('\n');
    for (m, row) in methods.iter().zip(table) {
        s.push_str(m);
        for v in row {
            s.push(',');
            if let Some(x) = v {
                let _ = write!(s, "{x:?}");
            }
        }
        s.push('\n');
    }
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Line plot of the bootstrap mean with CI band per method; budgets on a
/// log x axis.
pub fn line_plot_svg(rows: &[SummaryRow], metric: Metric, methods: &[String], title: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 50.0);
    let pts: Vec<&SummaryRow> = rows.iter().filter(|r| r.metric == metric).collect();
    let bmin = pts.iter().map(|r| r.budget).min().unwrap_or(1).max(1) as f64;
    let bmax = pts.iter().map(|r| r.budget).max().unwrap_or(1).max(1) as f64;
    let ymax = pts.iter().map(|r| r.high).fold(0.0f64, f64::max);
    let ymax = if ymax > 0.0 { ymax * 1.05 } else { 1.0 };
    let x = |b: usize| {
        if bmax > bmin {
            left + ((b as f64).ln() - bmin.ln()) / (bmax.ln() - bmin.ln()) * (w - left - right)
        } else {
            left + 0.5 * (w - left - right)
        }
    };
    let y = |v: f64| top + (1.0 - v / ymax) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        (w - right + left) / 2.0,
        xml_escape(title)
    );
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M {left} {top} L {left} {} L {} {}" stroke="black" fill="none"/>"#,
        h - bottom,
        w - right,
        h - bottom
    );
    let mut budgets: Vec<usize> = pts.iter().map(|r| r.budget).collect();
    budgets.sort_unstable();
    budgets.dedup();
    for b in &budgets {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{b}</text>"#,
            x(*b),
            h - bottom + 16.0
        );
    }
    for i in 0..=4 {
        let v = ymax * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.3}</text>"#,
            left - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">simulation budget</text>"#,
        (w - right + left) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        metric.name()
    );

    for (i, m) in methods.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut series: Vec<&&SummaryRow> = pts.iter().filter(|r| &r.method == m).collect();
        series.sort_by_key(|r| r.budget);
        if !series.is_empty() {
            let mut band = String::new();
            for r in &series {
                let _ = write!(band, "{:.2},{:.2} ", x(r.budget), y(r.high));
            }
            for r in series.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", x(r.budget), y(r.low));
            }
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.trim_end()
            );
            let line: Vec<String> = series
                .iter()
                .map(|r| format!("{:.2},{:.2}", x(r.budget), y(r.mean)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                line.join(" ")
            );
            for r in &series {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    x(r.budget),
                    y(r.mean)
                );
            }
        }
        let ly = top + 10.0 + 20.0 * i as f64;
        let lx = w - right + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            xml_escape(m)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `summary.csv`, `median_<metric>.{md,csv}` and `<metric>.svg`
/// into `dir`; returns the paths written.
pub fn emit_report(records: &[ResultRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        bail!("no records to report");
    }
    std::fs::create_dir_all(dir)?;
    let rows = summarize(records)?;
    let methods = methods(records);
    let budgets = budgets(records);
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("summary.csv".into(), summary_csv(&rows))?;
    for metric in Metric::ALL {
        let table = median_table(&rows, metric, &methods, &budgets);
        put(format!("median_{}.md", metric.name()), median_markdown(&table, &methods, &budgets))?;
        put(format!("median_{}.csv", metric.name()), median_csv(&table, &methods, &budgets))?;
        let title = format!("{} (mean, {:.0}% CI)", metric.name(), CI_LEVEL * 100.0);
        put(format!("{}.svg", metric.name()), line_plot_svg(&rows, metric, &methods, &title))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::KernelChoice;

    fn rec(method: &str, budget: usize, seed: u64, w: f64) -> ResultRecord {
        ResultRecord {
            method: method.into(),
            kernel: KernelChoice::Signature,
            k: 1.0,
            budget,
            seed,
            wasserstein: Some(w),
            mean_distance: Some(w / 2.0),
            wall_time: 0.0,
            config_hash: String::new(),
            error: None,
        }
    }

    #[test]
    fn single_seed_collapses_ci() {
        let rows = summarize(&[rec("a", 10, 0, 0.3)]).unwrap();
        let w = rows.iter().find(|r| r.metric == Metric::Wasserstein).unwrap();
        assert_eq!((w.low, w.mean, w.high, w.median), (0.3, 0.3, 0.3, 0.3));
    }

    #[test]
    fn median_cell() {
        let recs = [rec("a", 10, 0, 0.1), rec("a", 10, 1, 0.2), rec("a", 10, 2, 0.9)];
        let rows = summarize(&recs).unwrap();
        let table = median_table(&rows, Metric::Wasserstein, &["a".into()], &[10]);
        assert_eq!(table[0][0], Some(0.2));
        assert!(median_markdown(&table, &["a".into()], &[10]).contains("| a | 0.2000 |"));
    }

    #[test]
    fn failed_records_are_skipped() {
        let mut bad = rec("a", 10, 1, 0.0);
        bad.wasserstein = None;
        bad.mean_distance = None;
        bad.error = Some("boom".into());
        let rows = summarize(&[rec("a", 10, 0, 0.4), bad]).unwrap();
        assert!(rows.iter().all(|r| r.n == 1));
    }

    #[test]
    fn legend_escapes_labels() {
        let rows = summarize(&[rec("a<b", 10, 0, 0.4)]).unwrap();
        let svg = line_plot_svg(&rows, Metric::Wasserstein, &["a<b".into()], "t");
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("a<b"));
    }
}

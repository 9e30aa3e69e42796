//! Comparison tables: weighted P / R / F1 in percent, one decimal, one row
//! per experiment tag, rows sorted by tag.

use std::fs;
use std::path::Path;

use gatefuse_core::MetricsReport;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ReportFormat {
    #[default]
    Md,
    Csv,
}

pub fn percent(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

/// `P R F1` cells for one report.
pub fn percent_row(r: &MetricsReport) -> [String; 3] {
    [percent(r.precision), percent(r.recall), percent(r.f1)]
}

pub fn render(results: &[(String, MetricsReport)], format: ReportFormat) -> String {
    let mut rows: Vec<&(String, MetricsReport)> = results.iter().collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    match format {
        ReportFormat::Md => {
            let mut out = String::from("| experiment | P | R | F1 |\n|---|---:|---:|---:|\n");
            for (tag, r) in rows {
                let [p, rc, f] = percent_row(r);
                out.push_str(&format!("| {} | {p} | {rc} | {f} |\n", tag.replace('|', "\\|")));
            }
            out
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["experiment", "P", "R", "F1"]).unwrap();
            for (tag, r) in rows {
                let [p, rc, f] = percent_row(r);
                w.write_record([tag.as_str(), &p, &rc, &f]).unwrap();
            }
            String::from_utf8(w.into_inner().unwrap()).unwrap()
        }
    }
}

pub fn emit_report(results: &[(String, MetricsReport)], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render(results, format)).map_err(Error::io(path))
}

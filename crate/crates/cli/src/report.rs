use std::fmt::Write as _;

use groundcheck_core::evaluation::{EvalReport, Metrics, SubsetReport, Sweep};
use serde::{Deserialize, Serialize};

/// Machine-readable report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub manifest: String,
    pub report: EvalReport,
    /// Instances whose trace records an error instead of a decision.
    pub errored: Vec<String>,
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn row(out: &mut String, name: &str, r: &SubsetReport) {
    let c = &r.counts;
    let Metrics {
        precision,
        recall,
        f1,
    } = r.metrics;
    let _ = writeln!(
        out,
        "{name:<8} {:>6} {:>12} {:>13} {:>8} {:>9} {:>7} {:>7}",
        c.total,
        c.predicted_single,
        c.actual_single,
        c.correct_single,
        pct(precision),
        pct(recall),
        pct(f1)
    );
}

/// Table-style summary, percentages rounded to two decimals. Subsets with
/// no scored instance are omitted.
pub fn render_table(file: &ReportFile) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:>6} {:>12} {:>13} {:>8} {:>9} {:>7} {:>7}",
        "scope", "n", "pred_single", "actual_single", "correct", "precision", "recall", "f1"
    );
    row(&mut out, "overall", &file.report.overall);
    for (subset, r) in &file.report.subsets {
        row(&mut out, subset.as_str(), r);
    }
    let _ = writeln!(
        out,
        "unlabeled: {}  missing: {}  errored: {}",
        file.report.unlabeled,
        file.report.missing,
        file.errored.len()
    );
    out
}

pub const SWEEP_HEADER: &str =
    "tau_iou,tau_sem,precision,recall,f1,predicted_single,actual_single,correct_single";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with full-precision metrics; absent metrics are empty fields.
pub fn sweep_csv(sweep: &Sweep) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in &sweep.rows {
        let o = &r.report.overall;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.tau_iou,
            r.tau_sem,
            opt(o.metrics.precision),
            opt(o.metrics.recall),
            opt(o.metrics.f1),
            o.counts.predicted_single,
            o.counts.actual_single,
            o.counts.correct_single
        );
    }
    out
}

pub fn best_line(sweep: &Sweep) -> String {
    match sweep.best() {
        Some(b) => format!(
            "best: tau_iou={} tau_sem={} f1={}",
            b.tau_iou,
            b.tau_sem,
            pct(b.report.overall.metrics.f1)
        ),
        None => "best: none (no cell has a defined f1)".to_string(),
    }
}

//! Run summaries: rounds to a target accuracy, traffic, simulated time and
//! final accuracy, printed as a plain-text table.

use std::fmt::Write;

use crate::metrics::RoundMetrics;

pub const NOT_REACHED: &str = "not reached";
pub const BYTES_PER_MB: f64 = 1_000_000.0;

/// First round (1-based) whose global test accuracy is at least `target`.
pub fn rounds_to_target(metrics: &[RoundMetrics], target: f64) -> Option<usize> {
    metrics.iter().find(|m| m.test_accuracy >= target).map(|m| m.round)
}

/// Total bytes moved by the end of the first round that reached `target`.
pub fn bytes_to_target(metrics: &[RoundMetrics], target: f64) -> Option<u64> {
    metrics.iter().find(|m| m.test_accuracy >= target).map(RoundMetrics::cumulative_bytes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub target: Option<f64>,
    pub rounds_to_target: Option<usize>,
    pub total_mb: f64,
    pub simulated_s: f64,
    pub final_accuracy: f64,
    pub final_client_accuracy: Option<f64>,
}

impl RunSummary {
    pub fn new(label: impl Into<String>, metrics: &[RoundMetrics], target: Option<f64>) -> Self {
        let last = metrics.last();
        Self {
            label: label.into(),
            target,
            rounds_to_target: target.and_then(|t| rounds_to_target(metrics, t)),
            total_mb: last.map_or(0.0, |m| m.cumulative_bytes() as f64 / BYTES_PER_MB),
            simulated_s: last.map_or(0.0, |m| m.simulated_time_s),
            final_accuracy: last.map_or(0.0, |m| m.test_accuracy),
            final_client_accuracy: last.and_then(|m| m.client_accuracy),
        }
    }
}

pub fn render_table(rows: &[RunSummary]) -> String {
    let header = ["run", "target", "rounds to target", "total MB", "sim. seconds", "final acc", "client acc"];
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.label.clone(),
                r.target.map_or("-".into(), |t| format!("{t:.4}")),
                match (r.target, r.rounds_to_target) {
                    (None, _) => "-".into(),
                    (Some(_), None) => NOT_REACHED.into(),
                    (Some(_), Some(n)) => n.to_string(),
                },
                format!("{:.3}", r.total_mb),
                format!("{:.2}", r.simulated_s),
                format!("{:.4}", r.final_accuracy),
                r.final_client_accuracy.map_or("-".into(), |a| format!("{a:.4}")),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::from("# MB = 1,000,000 bytes\n");
    let line = |out: &mut String, row: &[&str]| {
        let parts: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        writeln!(out, "{}", parts.join("  ").trim_end()).unwrap();
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
    for row in &cells {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

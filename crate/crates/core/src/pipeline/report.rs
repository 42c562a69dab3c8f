use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::kernel::AlignmentReport;
use crate::ocsvm::{EvalMetrics, SweepCell};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub preprocess_ms: f64,
    pub kernel_ms: f64,
    pub fit_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub dataset_hash: String,
    pub kernel_label: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub test_anomalies: usize,
    pub best: SweepCell,
    pub metrics: EvalMetrics,
    pub sweep: Vec<SweepCell>,
    pub alignment: AlignmentReport,
    pub timing: Timing,
    /// File names written to the output directory.
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub kta: Option<f64>,
}

/// Change of report `a` relative to report `b`, in percent `100·(a−b)/b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseChange {
    pub a: String,
    pub b: String,
    pub precision_pct: Option<f64>,
    pub recall_pct: Option<f64>,
    pub f1_pct: Option<f64>,
    pub kta_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset_hash: String,
    pub rows: Vec<ComparisonRow>,
    pub pairs: Vec<PairwiseChange>,
}

fn pct(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| 100.0 * (a - b) / b)
}

/// Tabulates reports that share a dataset hash; pairs cover every `i < j`
/// with `a` the later report.
pub fn compare(reports: &[RunReport]) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::InvalidParameter("compare needs at least two reports".into()));
    }
    let hash = &reports[0].dataset_hash;
    for r in &reports[1..] {
        if &r.dataset_hash != hash {
            return Err(Error::DatasetHashMismatch(hash.clone(), r.dataset_hash.clone()));
        }
    }
    let label = |i: usize| format!("#{i} {}", reports[i].kernel_label);
    let rows = reports
        .iter()
        .enumerate()
        .map(|(i, r)| ComparisonRow {
            label: label(i),
            precision: r.metrics.precision,
            recall: r.metrics.recall,
            f1: r.metrics.f1,
            kta: r.alignment.kta,
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let (a, b) = (&reports[j], &reports[i]);
            pairs.push(PairwiseChange {
                a: label(j),
                b: label(i),
                precision_pct: pct(a.metrics.precision, b.metrics.precision),
                recall_pct: pct(a.metrics.recall, b.metrics.recall),
                f1_pct: pct(a.metrics.f1, b.metrics.f1),
                kta_delta: a.alignment.kta.zip(b.alignment.kta).map(|(x, y)| x - y),
            });
        }
    }
    Ok(Comparison {
        dataset_hash: hash.clone(),
        rows,
        pairs,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .chain(self.pairs.iter().map(|p| p.a.len() + p.b.len() + 4))
            .max()
            .unwrap_or(0)
            .max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "config", "precision", "recall", "f1", "kta"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}",
                r.label,
                r.precision,
                r.recall,
                r.f1,
                opt(r.kta)
            );
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "pair (a vs b)", "dP %", "dR %", "dF1 %", "dKTA"
        );
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}",
                format!("{} vs {}", p.a, p.b),
                opt(p.precision_pct),
                opt(p.recall_pct),
                opt(p.f1_pct),
                opt(p.kta_delta)
            );
        }
        out
    }

    /// One CSV row per pair.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["a", "b", "precision_pct", "recall_pct", "f1_pct", "kta_delta"])?;
        let cell = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for p in &self.pairs {
            w.write_record([
                p.a.clone(),
                p.b.clone(),
                cell(p.precision_pct),
                cell(p.recall_pct),
                cell(p.f1_pct),
                cell(p.kta_delta),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

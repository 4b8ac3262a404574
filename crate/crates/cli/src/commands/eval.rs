//! `mosaic eval` — score a predictions file with ANLS or exact match.

use std::io::BufRead;
use std::path::Path;

use clap::ValueEnum;
use mosaic_core::metrics::{evaluate, EvalRecord, Metric};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Anls,
    Exact,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Anls => Metric::Anls,
            MetricArg::Exact => Metric::Exact,
        }
    }
}

#[derive(Debug, Deserialize)]
struct PredictionRecord {
    id: serde_json::Value,
    prediction: String,
    golds: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ReportRecord<'a> {
    id: &'a serde_json::Value,
    #[serde(flatten)]
    scores: &'a EvalRecord,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    metric: Metric,
    tau: f64,
    mean: f64,
    count: usize,
    records: Vec<ReportRecord<'a>>,
}

pub fn run(predictions: &Path, metric: MetricArg, tau: f64, out: &Path) -> Result<(), CliError> {
    let file = std::fs::File::open(predictions)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", predictions.display())))?;
    let mut records = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<PredictionRecord>(&line)?);
    }

    let pairs: Vec<(String, Vec<String>)> = records
        .iter()
        .map(|r| (r.prediction.clone(), r.golds.clone()))
        .collect();
    let report = evaluate(&pairs, metric.into(), tau)?;

    let full = Report {
        metric: report.metric,
        tau: report.tau,
        mean: report.mean,
        count: report.count,
        records: records
            .iter()
            .zip(report.per_record.iter())
            .map(|(input, scores)| ReportRecord {
                id: &input.id,
                scores,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&full)?;
    text.push('\n');
    std::fs::write(out, text)?;

    println!(
        "evaluated {} records: mean {} = {:.6} (tau {}) -> {}",
        report.count,
        match report.metric {
            Metric::Anls => "ANLS",
            Metric::Exact => "exact-match accuracy",
        },
        report.mean,
        report.tau,
        out.display(),
    );
    Ok(())
}

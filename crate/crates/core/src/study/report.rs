use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::judgment::{Confidence, Judgment};
use crate::summary::Summary;

/// Judgments in one stratum (all, detected, or undetected) for a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub count: usize,
    pub confidence: BTreeMap<Confidence, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decisive_utterance: Option<Summary>,
}

impl Stratum {
    fn of<'a>(judgments: impl Iterator<Item = &'a Judgment>) -> Stratum {
        let judgments: Vec<&Judgment> = judgments.collect();
        let mut confidence: BTreeMap<Confidence, usize> = Confidence::ALL.iter().map(|&c| (c, 0)).collect();
        for j in &judgments {
            *confidence.entry(j.confidence).or_default() += 1;
        }
        let durations: Vec<f64> = judgments.iter().map(|j| j.duration_seconds).collect();
        let utterances: Vec<f64> = judgments.iter().map(|j| j.decisive_utterance as f64).collect();
        Stratum {
            count: judgments.len(),
            confidence,
            duration_seconds: Summary::of(&durations),
            decisive_utterance: Summary::of(&utterances),
        }
    }
}

/// One model's row block. Rates are percentages of all its judgments;
/// "Not sure" answers count as undetected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelUndetectability {
    pub model_id: String,
    pub undetectability_rate: f64,
    pub detection_rate: f64,
    /// Undetected share after dropping ties; absent when every answer is a tie.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_excluded_rate: Option<f64>,
    pub ties: usize,
    pub total: Stratum,
    pub detected: Stratum,
    pub undetected: Stratum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndetectabilityReport {
    pub models: Vec<ModelUndetectability>,
    pub overall: ModelUndetectability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no judgments to report")]
pub struct EmptyReport;

pub const OVERALL: &str = "all models";

fn block(model_id: String, judgments: &[&Judgment]) -> ModelUndetectability {
    let n = judgments.len() as f64;
    let detected = Stratum::of(judgments.iter().copied().filter(|j| j.detected));
    let undetected = Stratum::of(judgments.iter().copied().filter(|j| !j.detected));
    let ties = judgments.iter().filter(|j| j.tie).count();
    let decided = judgments.len() - ties;
    let tie_excluded_rate =
        (decided > 0).then(|| 100.0 * (undetected.count - ties) as f64 / decided as f64);
    ModelUndetectability {
        model_id,
        undetectability_rate: 100.0 * undetected.count as f64 / n,
        detection_rate: 100.0 * detected.count as f64 / n,
        tie_excluded_rate,
        ties,
        total: Stratum::of(judgments.iter().copied()),
        detected,
        undetected,
    }
}

/// Per-model undetectability with confidence histograms per stratum, plus an
/// all-models block.
pub fn undetectability_report<'a>(
    judgments: impl IntoIterator<Item = &'a Judgment>,
) -> Result<UndetectabilityReport, EmptyReport> {
    let all: Vec<&Judgment> = judgments.into_iter().collect();
    if all.is_empty() {
        return Err(EmptyReport);
    }
    let mut by_model: BTreeMap<&str, Vec<&Judgment>> = BTreeMap::new();
    for j in &all {
        by_model.entry(j.model_id.as_str()).or_default().push(j);
    }
    let models = by_model.into_iter().map(|(m, js)| block(m.to_string(), &js)).collect();
    Ok(UndetectabilityReport { models, overall: block(OVERALL.to_string(), &all) })
}

fn summary_cell(s: Option<Summary>) -> String {
    match s {
        Some(Summary { mean, std: Some(std) }) => format!("{mean:.2} ({std:.2})"),
        Some(Summary { mean, std: None }) => format!("{mean:.2}"),
        None => "-".to_string(),
    }
}

/// Text rendering: total, detected and undetected blocks, one column per
/// model, confidence counts with their share of the model's judgments.
pub fn render_undetectability_table(report: &UndetectabilityReport) -> String {
    let columns: Vec<&ModelUndetectability> = report.models.iter().chain([&report.overall]).collect();
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    let confidence_rows = |rows: &mut Vec<(String, Vec<String>)>, prefix: &str, pick: &dyn Fn(&ModelUndetectability) -> &Stratum| {
        for c in Confidence::ALL.iter().rev() {
            let cells = columns
                .iter()
                .map(|m| {
                    let n = pick(m).confidence[c];
                    format!("{n} ({:.2}%)", 100.0 * n as f64 / m.total.count as f64)
                })
                .collect();
            rows.push((format!("{prefix} Confidence: \"{}\"", c.label().to_lowercase()), cells));
        }
    };
    rows.push(("total      Undetectability Rate".into(), columns.iter().map(|m| format!("{:.1}%", m.undetectability_rate)).collect()));
    rows.push((
        "total      Rate excluding ties".into(),
        columns.iter().map(|m| m.tie_excluded_rate.map_or("-".into(), |r| format!("{r:.1}%"))).collect(),
    ));
    rows.push(("total      Judgments".into(), columns.iter().map(|m| m.total.count.to_string()).collect()));
    confidence_rows(&mut rows, "total     ", &|m| &m.total);
    rows.push(("detected   Duration".into(), columns.iter().map(|m| summary_cell(m.detected.duration_seconds)).collect()));
    rows.push(("detected   Utterance Number".into(), columns.iter().map(|m| summary_cell(m.detected.decisive_utterance)).collect()));
    confidence_rows(&mut rows, "detected  ", &|m| &m.detected);
    rows.push(("undetected Duration".into(), columns.iter().map(|m| summary_cell(m.undetected.duration_seconds)).collect()));
    confidence_rows(&mut rows, "undetected", &|m| &m.undetected);

    let label_width = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..columns.len())
        .map(|c| rows.iter().map(|(_, v)| v[c].chars().count()).chain([columns[c].model_id.chars().count()]).max().unwrap_or(0))
        .collect();
    let mut out = String::from("Undetected = evaluator chose the natural dialogue or answered \"Not sure\" (a tie).\n");
    let _ = write!(out, "{:label_width$}", "");
    for (m, w) in columns.iter().zip(&widths) {
        let _ = write!(out, "  {:>w$}", m.model_id);
    }
    out.push('\n');
    for (label, cells) in &rows {
        let _ = write!(out, "{label:label_width$}");
        for (cell, w) in cells.iter().zip(&widths) {
            let _ = write!(out, "  {cell:>w$}");
        }
        out.push('\n');
    }
    out
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::tokens::{TokenizerRegistry, UnknownTokenizer, WHITESPACE};
use crate::domain::{Dialogue, FailureKind};
use crate::guards::has_embedded_stop;
use crate::summary::Summary;
use crate::templates::StopToken;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    /// One report per inquirer model, aggregated over its seeds.
    #[default]
    Model,
    /// One report per seed across all models.
    Seed,
}

impl std::str::FromStr for GroupBy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "model" => Ok(GroupBy::Model),
            "seed" => Ok(GroupBy::Seed),
            other => Err(format!("unknown grouping '{other}' (expected model or seed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsConfig {
    pub tokenizer_id: String,
    pub group_by: GroupBy,
    pub stop: StopToken,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { tokenizer_id: WHITESPACE.into(), group_by: GroupBy::Model, stop: StopToken::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("no dialogues to summarize")]
    Empty,
    #[error(transparent)]
    Tokenizer(#[from] UnknownTokenizer),
}

/// Figures for the dialogues of one seed within a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedStats {
    pub seed: u64,
    pub n_dialogues: usize,
    pub avg_turns: f64,
    pub avg_utterances: f64,
    pub avg_tokens_per_prompt: f64,
    pub avg_tokens_per_response: f64,
    pub prompts: usize,
    pub responses: usize,
    pub inquirer_outputs: usize,
    pub responder_outputs: usize,
    pub failure_counts: BTreeMap<FailureKind, usize>,
    /// Percentage of relevant outputs per failure kind.
    pub failure_rates: BTreeMap<FailureKind, f64>,
    pub embedded_stop: usize,
}

/// Flagged-output count against the number of outputs it is a share of,
/// each summarized across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureCount {
    pub flagged: Summary,
    pub outputs: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub group: String,
    pub tokenizer_id: String,
    pub n_dialogues: usize,
    pub n_seeds: usize,
    pub avg_turns: Summary,
    pub avg_utterances: Summary,
    pub avg_tokens_per_prompt: Summary,
    pub avg_tokens_per_response: Summary,
    pub failure_rates: BTreeMap<FailureKind, Summary>,
    pub failure_counts: BTreeMap<FailureKind, FailureCount>,
    /// Inquirer outputs that mention the stop literal mid-text.
    pub embedded_stop: usize,
    pub per_seed: Vec<SeedStats>,
}

fn mean_or_zero(total: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

fn seed_stats(
    seed: u64,
    dialogues: &[&Dialogue],
    count: &dyn Fn(&str) -> usize,
    stop: &StopToken,
) -> SeedStats {
    let mut prompt_tokens = 0;
    let mut prompts = 0;
    let mut response_tokens = 0;
    let mut responses = 0;
    let mut turns = 0;
    let mut utterances = 0;
    let mut inquirer_outputs = 0;
    let mut responder_outputs = 0;
    let mut embedded_stop = 0;
    let mut failure_counts: BTreeMap<FailureKind, usize> = FailureKind::ALL.iter().map(|&k| (k, 0)).collect();
    for d in dialogues {
        turns += d.complete_turns();
        utterances += d.utterance_count();
        inquirer_outputs += d.inquirer_outputs();
        responder_outputs += d.responder_outputs();
        for flag in &d.failures {
            *failure_counts.entry(flag.kind).or_default() += 1;
        }
        for turn in &d.turns {
            if let Some(p) = turn.inquirer.prompt() {
                prompt_tokens += count(p);
                prompts += 1;
            }
            if has_embedded_stop(&turn.inquirer.raw_text, stop) {
                embedded_stop += 1;
            }
            if let Some(r) = &turn.responder {
                response_tokens += count(&r.raw_text);
                responses += 1;
            }
        }
    }
    let failure_rates = failure_counts
        .iter()
        .map(|(&kind, &n)| {
            let outputs = if kind.is_responder_side() { responder_outputs } else { inquirer_outputs };
            (kind, 100.0 * mean_or_zero(n, outputs))
        })
        .collect();
    SeedStats {
        seed,
        n_dialogues: dialogues.len(),
        avg_turns: mean_or_zero(turns, dialogues.len()),
        avg_utterances: mean_or_zero(utterances, dialogues.len()),
        avg_tokens_per_prompt: mean_or_zero(prompt_tokens, prompts),
        avg_tokens_per_response: mean_or_zero(response_tokens, responses),
        prompts,
        responses,
        inquirer_outputs,
        responder_outputs,
        failure_counts,
        failure_rates,
        embedded_stop,
    }
}

fn across(per_seed: &[SeedStats], f: impl Fn(&SeedStats) -> f64) -> Summary {
    let values: Vec<f64> = per_seed.iter().map(f).collect();
    Summary::of(&values).expect("groups are non-empty")
}

fn group_report(group: String, tokenizer_id: &str, per_seed: Vec<SeedStats>) -> StatsReport {
    let failure_rates = FailureKind::ALL.iter().map(|&k| (k, across(&per_seed, |s| s.failure_rates[&k]))).collect();
    let failure_counts = FailureKind::ALL
        .iter()
        .map(|&k| {
            let outputs = if k.is_responder_side() {
                across(&per_seed, |s| s.responder_outputs as f64)
            } else {
                across(&per_seed, |s| s.inquirer_outputs as f64)
            };
            (k, FailureCount { flagged: across(&per_seed, |s| s.failure_counts[&k] as f64), outputs })
        })
        .collect();
    StatsReport {
        group,
        tokenizer_id: tokenizer_id.to_string(),
        n_dialogues: per_seed.iter().map(|s| s.n_dialogues).sum(),
        n_seeds: per_seed.len(),
        avg_turns: across(&per_seed, |s| s.avg_turns),
        avg_utterances: across(&per_seed, |s| s.avg_utterances),
        avg_tokens_per_prompt: across(&per_seed, |s| s.avg_tokens_per_prompt),
        avg_tokens_per_response: across(&per_seed, |s| s.avg_tokens_per_response),
        failure_rates,
        failure_counts,
        embedded_stop: per_seed.iter().map(|s| s.embedded_stop).sum(),
        per_seed,
    }
}

/// Table-1 style statistics with the built-in tokenizers.
pub fn compute_stats(dialogues: &[Dialogue], cfg: &StatsConfig) -> Result<Vec<StatsReport>, StatsError> {
    compute_stats_with(dialogues, cfg, &TokenizerRegistry::default())
}

/// Computes one report per group. Within a group every figure is first
/// computed per seed, then summarized as mean and standard deviation across
/// seeds. Groups come back sorted by key.
pub fn compute_stats_with(
    dialogues: &[Dialogue],
    cfg: &StatsConfig,
    registry: &TokenizerRegistry,
) -> Result<Vec<StatsReport>, StatsError> {
    let tokenizer = registry.get(&cfg.tokenizer_id)?;
    if dialogues.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut groups: BTreeMap<String, BTreeMap<u64, Vec<&Dialogue>>> = BTreeMap::new();
    for d in dialogues {
        let key = match cfg.group_by {
            GroupBy::Model => d.inquirer_model_id.clone(),
            GroupBy::Seed => d.seed.to_string(),
        };
        groups.entry(key).or_default().entry(d.seed).or_default().push(d);
    }
    let count = |text: &str| tokenizer.count(text);
    Ok(groups
        .into_iter()
        .map(|(group, seeds)| {
            let per_seed = seeds.into_iter().map(|(seed, ds)| seed_stats(seed, &ds, &count, &cfg.stop)).collect();
            group_report(group, &cfg.tokenizer_id, per_seed)
        })
        .collect())
}

pub fn failure_label(kind: FailureKind) -> &'static str {
    match kind {
        FailureKind::NoPrompt => "No-prompt",
        FailureKind::MultiplePrompts => "Multiple Prompts",
        FailureKind::IncoherentInquirer => "Incoherent Response",
        FailureKind::SelfReply => "Number of Self-Replies",
        FailureKind::IncoherentResponder => "Incoherent Response (Responder)",
        FailureKind::StopCriterionMiss => "Stop Criterion Miss",
    }
}

fn render_rows(rows: &[(String, Vec<String>)], header: &[String]) -> String {
    let label_width = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|(_, v)| v[c].chars().count()).chain([header[c].chars().count()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:label_width$}", "");
    for (h, w) in header.iter().zip(&widths) {
        let _ = write!(out, "  {h:>w$}");
    }
    out.push('\n');
    for (label, values) in rows {
        let _ = write!(out, "{label:label_width$}");
        for (v, w) in values.iter().zip(&widths) {
            let _ = write!(out, "  {v:>w$}");
        }
        out.push('\n');
    }
    out
}

/// Text table with one column per report: turn and token averages on top,
/// failure rates as percentages below, standard deviations in parentheses.
pub fn render_stats_table(reports: &[StatsReport]) -> String {
    let header: Vec<String> = reports.iter().map(|r| r.group.clone()).collect();
    let column = |f: &dyn Fn(&StatsReport) -> String| reports.iter().map(f).collect::<Vec<_>>();
    let pct = |s: Summary| match s.std {
        Some(std) => format!("{:.2}% ({:.2}%)", s.mean, std),
        None => format!("{:.2}%", s.mean),
    };
    let plain = |s: Summary| match s.std {
        Some(std) => format!("{:.2} ({:.2})", s.mean, std),
        None => format!("{:.2}", s.mean),
    };
    let mut rows = vec![
        ("Avg. # Turns per Dialogue".to_string(), column(&|r| plain(r.avg_turns))),
        ("Avg. # Tokens per Prompt".to_string(), column(&|r| plain(r.avg_tokens_per_prompt))),
        ("Avg. # Tokens per Response".to_string(), column(&|r| plain(r.avg_tokens_per_response))),
    ];
    let mut failure_rows: Vec<(String, Vec<String>)> = FailureKind::ALL
        .iter()
        .filter(|&&k| k != FailureKind::StopCriterionMiss || reports.iter().any(|r| r.failure_counts[&k].flagged.mean > 0.0))
        .map(|&k| (failure_label(k).to_string(), column(&|r| pct(r.failure_rates[&k]))))
        .collect();
    rows.append(&mut failure_rows);
    let mut out = render_rows(&rows, &header);
    let dialogues: Vec<String> = reports.iter().map(|r| format!("{}={}x{} seed(s)", r.group, r.n_dialogues, r.n_seeds)).collect();
    let tokenizer = reports.first().map_or(WHITESPACE, |r| r.tokenizer_id.as_str());
    let _ = writeln!(out, "\ndialogues: {}", dialogues.join(", "));
    let _ = writeln!(out, "tokenizer: {tokenizer}; token counts are comparable only under the same tokenizer");
    let embedded: usize = reports.iter().map(|r| r.embedded_stop).sum();
    if embedded > 0 {
        let _ = writeln!(out, "inquirer outputs with a mid-text stop token (not honoured): {embedded}");
    }
    out
}

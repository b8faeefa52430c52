use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roleplay_core::analytics::{compute_stats, read_records, write_records, GroupBy, StatsConfig, StatsReport};
use roleplay_core::domain::{load_goal_set, load_persona_set, FixtureSource};
use roleplay_core::{
    DialogueRecord, Dialogue, FailureFlag, FailureKind, Provenance, Summary, TerminationReason, Turn, Utterance,
};

use crate::{ensure, CriterionResult, Outcome};

const TOL: f64 = 1e-9;

use FailureKind::*;
use TerminationReason as T;

/// (seed, complete turns, termination, flags). Dialogue `g` (its position
/// here) has prompts of `3 + g % 5` words and responses of `20 + g` words.
/// Aborted dialogues carry one extra inquirer-only turn.
#[allow(clippy::type_complexity)]
const FIXTURE: [(u64, usize, TerminationReason, &[(FailureKind, usize)]); 20] = [
    (1, 10, T::MaxTurns, &[]),
    (1, 10, T::MaxTurns, &[]),
    (1, 5, T::StopToken, &[]),
    (1, 8, T::StopToken, &[(MultiplePrompts, 2)]),
    (1, 6, T::NoPrompt, &[(NoPrompt, 6)]),
    (1, 4, T::IncoherentInquirer, &[(IncoherentInquirer, 4)]),
    (1, 6, T::IncoherentResponder, &[(IncoherentResponder, 5)]),
    (2, 10, T::MaxTurns, &[]),
    (2, 9, T::StopToken, &[(SelfReply, 0), (MultiplePrompts, 0), (MultiplePrompts, 3)]),
    (2, 7, T::StopToken, &[]),
    (2, 6, T::NoPrompt, &[(NoPrompt, 6)]),
    (2, 7, T::StopToken, &[]),
    (3, 10, T::MaxTurns, &[]),
    (3, 10, T::MaxTurns, &[(SelfReply, 9)]),
    (3, 8, T::StopToken, &[]),
    (3, 8, T::StopToken, &[]),
    (3, 7, T::IncoherentResponder, &[(IncoherentResponder, 6)]),
    (3, 7, T::NoPrompt, &[(NoPrompt, 7)]),
    (3, 7, T::StopToken, &[(MultiplePrompts, 1)]),
    (3, 7, T::StopToken, &[]),
];

fn words(n: usize) -> String {
    vec!["w"; n].join(" ")
}

pub fn fixture() -> Vec<Dialogue> {
    let persona = load_persona_set(&FixtureSource::Bundled).unwrap().remove(0);
    let goal = load_goal_set(&FixtureSource::Bundled).unwrap().remove(0);
    FIXTURE
        .iter()
        .enumerate()
        .map(|(g, &(seed, complete, termination, flags))| {
            let prompt = words(3 + g % 5);
            let mut turns: Vec<Turn> = (0..complete)
                .map(|_| Turn {
                    inquirer: Utterance::inquirer(format!("Here you go: \"{prompt}\""), Some(prompt.clone())),
                    responder: Some(Utterance::responder(words(20 + g))),
                })
                .collect();
            if matches!(termination, T::NoPrompt | T::IncoherentInquirer) {
                turns.push(Turn { inquirer: Utterance::inquirer("no quotes here", None), responder: None });
            }
            Dialogue {
                persona: persona.clone(),
                goal: goal.clone(),
                turns,
                termination,
                failures: flags.iter().map(|&(kind, turn_index)| FailureFlag { kind, turn_index }).collect(),
                provenance: Provenance::Simulated,
                inquirer_model_id: "gpt4".into(),
                responder_model_id: "llama-2".into(),
                seed,
                backend_error: None,
            }
        })
        .collect()
}

fn population(values: [f64; 3]) -> Summary {
    let mean = values.iter().sum::<f64>() / 3.0;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0;
    Summary { mean, std: Some(var.sqrt()) }
}

fn close(a: Summary, b: Summary, what: &str) -> Result<(), String> {
    let std_ok = match (a.std, b.std) {
        (Some(x), Some(y)) => (x - y).abs() < TOL,
        (None, None) => true,
        _ => false,
    };
    ensure!((a.mean - b.mean).abs() < TOL && std_ok, "{what}: got {a:?}, expected {b:?}");
    Ok(())
}

/// Hand-computed per-seed figures for the fixture.
struct Expected {
    turns: [f64; 3],
    prompt_tokens: [f64; 3],
    response_tokens: [f64; 3],
    inquirer_outputs: [usize; 3],
    responder_outputs: [usize; 3],
    flagged: [(FailureKind, [usize; 3]); 6],
}

fn expected() -> Expected {
    Expected {
        // 49/7, 39/5, 64/8
        turns: [7.0, 7.8, 8.0],
        // sum of turns x (3 + g % 5) per seed over prompts
        prompt_tokens: [221.0 / 49.0, 199.0 / 39.0, 344.0 / 64.0],
        // sum of turns x (20 + g) per seed over responses
        response_tokens: [1104.0 / 49.0, 1122.0 / 39.0, 2252.0 / 64.0],
        // turns + aborted partial turns + one stop output per StopToken dialogue
        inquirer_outputs: [49 + 2 + 2, 39 + 1 + 3, 64 + 1 + 4],
        responder_outputs: [49, 39, 64],
        flagged: [
            (NoPrompt, [1, 1, 1]),
            (MultiplePrompts, [1, 2, 1]),
            (IncoherentInquirer, [1, 0, 0]),
            (SelfReply, [0, 1, 1]),
            (IncoherentResponder, [1, 0, 1]),
            (StopCriterionMiss, [0, 0, 0]),
        ],
    }
}

fn check_report(report: &StatsReport, want: &Expected) -> Result<(), String> {
    ensure!(report.n_dialogues == 20 && report.n_seeds == 3, "expected 20 dialogues over 3 seeds");
    close(report.avg_turns, population(want.turns), "avg turns")?;
    ensure!(format!("{:.2}", report.avg_turns.mean) == "7.60", "avg turns prints as {:.2}", report.avg_turns.mean);
    close(report.avg_tokens_per_prompt, population(want.prompt_tokens), "tokens per prompt")?;
    close(report.avg_tokens_per_response, population(want.response_tokens), "tokens per response")?;
    for (i, s) in report.per_seed.iter().enumerate() {
        ensure!(s.inquirer_outputs == want.inquirer_outputs[i], "seed {}: {} inquirer outputs", s.seed, s.inquirer_outputs);
        ensure!(s.responder_outputs == want.responder_outputs[i], "seed {}: {} responder outputs", s.seed, s.responder_outputs);
    }
    for (kind, counts) in want.flagged {
        for (i, s) in report.per_seed.iter().enumerate() {
            ensure!(s.failure_counts[&kind] == counts[i], "seed {} {kind}: {} flagged", s.seed, s.failure_counts[&kind]);
        }
        let denominators = if kind == IncoherentResponder { want.responder_outputs } else { want.inquirer_outputs };
        let rates = [0, 1, 2].map(|i| 100.0 * counts[i] as f64 / denominators[i] as f64);
        close(report.failure_rates[&kind], population(rates), &format!("{kind} rate"))?;
    }
    Ok(())
}

pub fn run() -> CriterionResult {
    let dialogues = fixture();
    let want = expected();

    // persist and reload so the check covers the record format as well
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("fixture.jsonl");
    let records: Vec<DialogueRecord> = dialogues.iter().cloned().map(|d| DialogueRecord::new("fixture", d)).collect();
    write_records(&records, &path).map_err(|e| e.to_string())?;
    let loaded: Vec<Dialogue> = read_records(&path).map_err(|e| e.to_string())?.into_iter().map(|r| r.dialogue).collect();
    ensure!(loaded == dialogues, "records did not round-trip");

    let cfg = StatsConfig::default();
    let reports = compute_stats(&loaded, &cfg).map_err(|e| e.to_string())?;
    ensure!(reports.len() == 1 && reports[0].group == "gpt4", "expected one gpt4 group");
    check_report(&reports[0], &want)?;

    // per-seed sub-reports recombined by brute force
    let by_seed = compute_stats(&loaded, &StatsConfig { group_by: GroupBy::Seed, ..cfg.clone() }).map_err(|e| e.to_string())?;
    ensure!(by_seed.len() == 3 && by_seed.iter().all(|r| r.avg_turns.std.is_none()), "seed grouping must give 3 single-seed reports");
    let recombined = population([0, 1, 2].map(|i| by_seed[i].avg_tokens_per_response.mean));
    close(reports[0].avg_tokens_per_response, recombined, "recombined tokens per response")?;
    for kind in FailureKind::ALL {
        close(reports[0].failure_rates[&kind], population([0, 1, 2].map(|i| by_seed[i].failure_rates[&kind].mean)), "recombined rate")?;
    }

    // record order does not matter
    let mut shuffled = loaded.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    ensure!(compute_stats(&shuffled, &cfg).map_err(|e| e.to_string())? == reports, "report depends on record order");

    // a clean dialogue never raises a rate
    let mut extra = loaded.clone();
    let mut clean = loaded[0].clone();
    clean.failures.clear();
    extra.push(clean);
    let more = compute_stats(&extra, &cfg).map_err(|e| e.to_string())?;
    for kind in FailureKind::ALL {
        ensure!(
            more[0].failure_rates[&kind].mean <= reports[0].failure_rates[&kind].mean + TOL,
            "clean dialogue raised the {kind} rate"
        );
    }

    // a single seed reports no deviation
    let single = compute_stats(&loaded[..7], &cfg).map_err(|e| e.to_string())?;
    ensure!(single[0].avg_turns == Summary::single(7.0), "single seed: {:?}", single[0].avg_turns);
    ensure!(single[0].failure_rates[&NoPrompt] == Summary::single(100.0 / 53.0), "single seed no-prompt rate");

    Ok(Outcome::Pass(format!(
        "20 dialogues / 3 seeds: turns {}, tokens/prompt {:.4}, no-prompt {:.4}%, all within {TOL:e}",
        reports[0].avg_turns, reports[0].avg_tokens_per_prompt.mean, reports[0].failure_rates[&NoPrompt].mean
    )))
}

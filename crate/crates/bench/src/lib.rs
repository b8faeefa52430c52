//! Seeded input generators shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roleplay_core::domain::{load_goal_set, load_persona_set, FixtureSource};
use roleplay_core::{Dialogue, FailureFlag, FailureKind, Provenance, TerminationReason, Turn, Utterance};

const VOCAB: [&str; 12] = ["the", "speed", "race", "time", "how", "many", "calories", "meter", "is", "a", "run", "fast"];

/// `words` random words from a small vocabulary.
pub fn text(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

/// Inquirer-style output: chatter around `quotes` quoted spans.
pub fn inquirer_output(rng: &mut ChaCha8Rng, quotes: usize) -> String {
    let mut out = text(rng, 12);
    for _ in 0..quotes {
        out.push_str(&format!(" \"{}\" {}", text(rng, 8), text(rng, 6)));
    }
    out
}

/// A simulated corpus of `n` dialogues spread over three seeds and two models.
pub fn corpus(n: usize, seed: u64) -> Vec<Dialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let persona = load_persona_set(&FixtureSource::Bundled).expect("bundled personas").remove(0);
    let goal = load_goal_set(&FixtureSource::Bundled).expect("bundled goals").remove(0);
    (0..n)
        .map(|i| {
            let turns = rng.random_range(1..=10);
            let failures = if rng.random_bool(0.1) {
                vec![FailureFlag { kind: FailureKind::MultiplePrompts, turn_index: 0 }]
            } else {
                vec![]
            };
            Dialogue {
                persona: persona.clone(),
                goal: goal.clone(),
                turns: (0..turns)
                    .map(|_| {
                        let prompt = text(&mut rng, 10);
                        Turn {
                            inquirer: Utterance::inquirer(format!("\"{prompt}\""), Some(prompt)),
                            responder: Some(Utterance::responder(text(&mut rng, 120))),
                        }
                    })
                    .collect(),
                termination: if turns == 10 { TerminationReason::MaxTurns } else { TerminationReason::StopToken },
                failures,
                provenance: Provenance::Simulated,
                inquirer_model_id: ["mixtral", "gpt4"][i % 2].into(),
                responder_model_id: "llama-2".into(),
                seed: (i % 3) as u64,
                backend_error: None,
            }
        })
        .collect()
}

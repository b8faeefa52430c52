use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roleplay_core::extract_prompt;

use crate::{ensure, CriterionResult, Outcome};

const CASES: usize = 10_000;
const ALPHABET: &[char] = &['a', 'b', 'Z', ' ', ' ', '\n', '.', '?', '!', '\'', ',', 'é', '9', ':', '[', ']'];

fn text(rng: &mut ChaCha8Rng, max: usize) -> String {
    let len = rng.random_range(0..=max);
    (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

fn non_blank(rng: &mut ChaCha8Rng) -> String {
    loop {
        let s = text(rng, 40);
        if !s.trim().is_empty() {
            return s;
        }
    }
}

fn quotes(rng: &mut ChaCha8Rng) -> (&'static str, &'static str) {
    if rng.random_bool(0.2) {
        ("\u{201C}", "\u{201D}")
    } else {
        ("\"", "\"")
    }
}

pub fn run() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe47);
    let mut by_k = [0usize; 5];
    for case in 0..CASES {
        let k = rng.random_range(0..=4);
        let mut input = text(&mut rng, 60);
        let mut spans = Vec::new();
        for _ in 0..k {
            let span = non_blank(&mut rng);
            let (open, close) = quotes(&mut rng);
            input.push_str(open);
            input.push_str(&span);
            input.push_str(close);
            input.push_str(&text(&mut rng, 30));
            spans.push(span);
        }
        let result = extract_prompt(&input);
        ensure!(result.count() == k, "case {case}: {input:?} gave {} spans, injected {k}", result.count());
        ensure!(result.prompts == spans, "case {case}: spans {:?}, injected {spans:?}", result.prompts);
        ensure!(result.selected() == spans.first().map(String::as_str), "case {case}: wrong selection");
        by_k[k] += 1;

        // a quote-free prompt survives a second pass unchanged
        let prompt = non_blank(&mut rng);
        let again = extract_prompt(&format!("\"{prompt}\""));
        ensure!(again.selected() == Some(prompt.as_str()) && again.count() == 1, "case {case}: not idempotent on {prompt:?}");
        ensure!(extract_prompt(&prompt).count() == 0, "case {case}: quote-free text yielded a span");
    }
    Ok(Outcome::Pass(format!("{CASES} strings, 0 failures (k=0..4 counts {by_k:?})")))
}

use roleplay_core::study::{
    judge, render_undetectability_table, undetectability_report, Choice, Confidence, EvaluationPair, Judgment,
    JudgmentInput, JudgmentStore, PresentationOrder, ShownLengths,
};

use crate::{ensure, CriterionResult, Outcome};

const TOL: f64 = 0.1;

/// Judgment counts for one model: confidence histograms of the detected and
/// undetected strata (somewhat, confident, very), and how many undetected
/// answers were "Not sure".
struct Composition {
    model: &'static str,
    detected: [usize; 3],
    undetected: [usize; 3],
    ties: usize,
}

/// Per-model evaluation results with 200 judgments each.
const TABLE: [Composition; 4] = [
    Composition { model: "llama-2", detected: [29, 80, 24], undetected: [30, 28, 9], ties: 20 },
    Composition { model: "mixtral", detected: [42, 51, 19], undetected: [43, 32, 13], ties: 25 },
    Composition { model: "vicuna", detected: [31, 59, 65], undetected: [19, 16, 10], ties: 9 },
    Composition { model: "gpt4", detected: [32, 66, 32], undetected: [28, 31, 11], ties: 14 },
];

/// Builds judgments through the submission path: alternating presentation
/// order, the chosen side set to produce the wanted outcome.
fn judgments(c: &Composition, store: &mut JudgmentStore) -> Result<Vec<Judgment>, String> {
    let mut out = Vec::new();
    let mut index = 0usize;
    let mut add = |detected: bool, tie: bool, confidence: Confidence, store: &mut JudgmentStore| -> Result<(), String> {
        let order = if index % 2 == 0 { PresentationOrder::NaturalLeft } else { PresentationOrder::SimulatedLeft };
        let pair = EvaluationPair {
            pair_id: format!("{}-{index:03}", c.model),
            participant: format!("evaluator-{}", index % 20),
            natural_id: format!("n{index}"),
            simulated_id: format!("s{index}"),
            collection_user: "u".into(),
            persona_id: "u".into(),
            goal_id: "g".into(),
            model_id: c.model.into(),
            order,
        };
        let simulated_side = if order == PresentationOrder::SimulatedLeft { Choice::First } else { Choice::Second };
        let natural_side = if simulated_side == Choice::First { Choice::Second } else { Choice::First };
        let choice = match (detected, tie) {
            (true, _) => simulated_side,
            (false, true) => Choice::NotSure,
            (false, false) => natural_side,
        };
        let input = JudgmentInput {
            participant: pair.participant.clone(),
            pair_id: pair.pair_id.clone(),
            choice,
            confidence,
            decisive_utterance: 1 + index % 6,
        };
        let j = judge(&pair, ShownLengths { left: 8, right: 8 }, &input, 30.0 + (index % 7) as f64)
            .map_err(|e| e.to_string())?;
        ensure!(j.detected == detected && j.tie == tie, "submission path derived the wrong outcome");
        store.insert(j.clone()).map_err(|e| e.to_string())?;
        out.push(j);
        index += 1;
        Ok(())
    };
    for (i, &conf) in Confidence::ALL.iter().enumerate() {
        for _ in 0..c.detected[i] {
            add(true, false, conf, store)?;
        }
    }
    let mut ties_left = c.ties;
    for (i, &conf) in Confidence::ALL.iter().enumerate() {
        for _ in 0..c.undetected[i] {
            let tie = ties_left > 0;
            ties_left = ties_left.saturating_sub(1);
            add(false, tie, conf, store)?;
        }
    }
    Ok(out)
}

fn near(a: f64, b: f64, what: &str) -> Result<(), String> {
    ensure!((a - b).abs() <= TOL, "{what}: {a:.3}% vs {b:.3}%");
    Ok(())
}

pub fn run() -> CriterionResult {
    let mut store = JudgmentStore::default();
    let mut all = Vec::new();
    for c in &TABLE {
        all.extend(judgments(c, &mut store)?);
    }
    ensure!(store.len() == 800, "store holds {}", store.len());
    let report = undetectability_report(store.all()).map_err(|e| e.to_string())?;

    for (c, m) in TABLE.iter().zip(sorted(&report.models)) {
        ensure!(m.model_id == c.model, "model order {} vs {}", m.model_id, c.model);
        let total = (c.detected.iter().sum::<usize>() + c.undetected.iter().sum::<usize>()) as f64;
        let undetected = c.undetected.iter().sum::<usize>() as f64;
        near(m.undetectability_rate, 100.0 * undetected / total, c.model)?;
        near(m.undetectability_rate + m.detection_rate, 100.0, "detected + undetected")?;
        ensure!(m.ties == c.ties, "{}: {} ties", c.model, m.ties);
        near(
            m.tie_excluded_rate.unwrap_or(f64::NAN),
            100.0 * (undetected - c.ties as f64) / (total - c.ties as f64),
            "tie-excluded rate",
        )?;
        // recount the strata from raw judgments
        for (stratum, want, is_detected) in [(&m.detected, c.detected, true), (&m.undetected, c.undetected, false)] {
            for (i, conf) in Confidence::ALL.iter().enumerate() {
                let raw = all.iter().filter(|j| j.model_id == c.model && j.detected == is_detected && j.confidence == *conf).count();
                ensure!(stratum.confidence[conf] == want[i] && raw == want[i], "{} {conf}: {} vs {}", c.model, stratum.confidence[conf], want[i]);
                ensure!(m.total.confidence[conf] == c.detected[i] + c.undetected[i], "{} total {conf}", c.model);
            }
            ensure!(stratum.confidence.values().sum::<usize>() == stratum.count, "{}: stratum histogram does not sum", c.model);
        }
        ensure!(m.detected.count + m.undetected.count == m.total.count, "{}: strata do not partition", c.model);
    }
    let mixtral = report.models.iter().find(|m| m.model_id == "mixtral").ok_or("mixtral missing")?;
    ensure!(format!("{:.1}%", mixtral.undetectability_rate) == "44.0%", "mixtral rate {}", mixtral.undetectability_rate);
    near(report.overall.undetectability_rate, 33.75, "overall")?;

    // a 100-judgment set with 44 undetected
    let hundred = Composition { model: "m", detected: [20, 20, 16], undetected: [20, 14, 10], ties: 14 };
    let small = undetectability_report(&judgments(&hundred, &mut JudgmentStore::default())?).map_err(|e| e.to_string())?;
    near(small.models[0].undetectability_rate, 44.0, "100-judgment set")?;

    // all "Not sure" is fully undetected
    let ties = Composition { model: "t", detected: [0, 0, 0], undetected: [3, 4, 5], ties: 12 };
    let tied = undetectability_report(&judgments(&ties, &mut JudgmentStore::default())?).map_err(|e| e.to_string())?;
    near(tied.models[0].undetectability_rate, 100.0, "all ties")?;
    ensure!(tied.models[0].ties == 12, "all answers should be ties");

    let table = render_undetectability_table(&report);
    for label in ["Undetectability Rate", "\"very confident\"", "\"confident\"", "\"somewhat confident\"", "Utterance Number", "44.0%"] {
        ensure!(table.contains(label), "table lacks {label}");
    }
    let rates: Vec<String> = sorted(&report.models).iter().map(|m| format!("{} {:.1}%", m.model_id, m.undetectability_rate)).collect();
    Ok(Outcome::Pass(format!("{}; overall {:.2}%", rates.join(", "), report.overall.undetectability_rate)))
}

fn sorted(models: &[roleplay_core::study::ModelUndetectability]) -> Vec<&roleplay_core::study::ModelUndetectability> {
    let order = |id: &str| TABLE.iter().position(|c| c.model == id).unwrap_or(usize::MAX);
    let mut v: Vec<_> = models.iter().collect();
    v.sort_by_key(|m| order(&m.model_id));
    v
}

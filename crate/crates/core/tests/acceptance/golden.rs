use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use roleplay_core::domain::{load_goal_set, load_persona_set, FailureFlag, FailureKind, FixtureSource};
use roleplay_core::engine::{run_dialogue_with, DialogueSetup};
use roleplay_core::subjects::{ChatFormat, ChatMessage, ScriptedSubject, SubjectRole, Transcript};
use roleplay_core::{Dialogue, EngineConfig, FamilyId, SubjectSpec, TerminationReason};
use serde::{Deserialize, Serialize};

use crate::{ensure, CriterionResult, Outcome};

const BUDGET: Duration = Duration::from_secs(5);

#[derive(Deserialize)]
struct CaseFile {
    case: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    name: String,
    #[serde(default = "llama2")]
    inquirer_family: String,
    #[serde(default = "llama2")]
    responder_family: String,
    #[serde(default)]
    max_turns: Option<usize>,
    #[serde(default)]
    raw: bool,
    inquirer: Vec<String>,
    responder: Vec<String>,
    expect: TerminationReason,
    #[serde(default)]
    flags: Vec<(FailureKind, usize)>,
}

fn llama2() -> String {
    "llama2".into()
}

#[derive(Serialize)]
struct Requests<'a> {
    inquirer: &'a [Vec<ChatMessage>],
    responder: &'a [Vec<ChatMessage>],
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

struct Replay {
    dialogue: Dialogue,
    requests: String,
}

fn replay(case: &Case, rt: &tokio::runtime::Runtime) -> Replay {
    let persona = load_persona_set(&FixtureSource::Bundled).unwrap().remove(0);
    let goal = load_goal_set(&FixtureSource::Bundled).unwrap().remove(0);
    let format = if case.raw { ChatFormat::Raw } else { ChatFormat::Messages };
    let transcript = |replies: &[String], family: &str, role: &str| {
        Transcript::new(replies.iter().cloned()).with_model_id(format!("{family}-{role}"))
    };
    let inq_t = transcript(&case.inquirer, &case.inquirer_family, "inquirer");
    let res_t = transcript(&case.responder, &case.responder_family, "responder");
    let mut inq_spec = SubjectSpec::scripted(SubjectRole::Inquirer, FamilyId::new(&case.inquirer_family), inq_t.clone());
    let mut res_spec = SubjectSpec::scripted(SubjectRole::Responder, FamilyId::new(&case.responder_family), res_t.clone());
    inq_spec.format = format;
    res_spec.format = format;
    let mut cfg = EngineConfig::for_specs(&inq_spec, &res_spec);
    if let Some(cap) = case.max_turns {
        cfg.max_turns = cap;
    }
    let setup = DialogueSetup { inquirer: &inq_spec, responder: &res_spec, persona: &persona, goal: &goal, seed: 7 };
    let mut inquirer = ScriptedSubject::new(inq_t);
    let mut responder = ScriptedSubject::new(res_t);
    let dialogue = rt
        .block_on(run_dialogue_with(&mut inquirer, &mut responder, &setup, &cfg))
        .unwrap_or_else(|e| panic!("{}: {e}", case.name));
    let requests = pretty(&Requests { inquirer: inquirer.received(), responder: responder.received() });
    Replay { dialogue, requests }
}

fn compare(path: &Path, actual: &str, update: bool) -> Result<(), String> {
    if update {
        std::fs::write(path, actual).map_err(|e| format!("{}: {e}", path.display()))?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e} (run with UPDATE_GOLDEN=1 to create)", path.display()))?;
    ensure!(expected == actual, "{} differs from the replay", path.display());
    Ok(())
}

pub fn run() -> CriterionResult {
    let started = Instant::now();
    let dir = golden_dir();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let text = std::fs::read_to_string(dir.join("cases.toml")).map_err(|e| e.to_string())?;
    let cases: CaseFile = toml::from_str(&text).map_err(|e| e.to_string())?;
    ensure!(cases.case.len() >= 12, "only {} cases", cases.case.len());
    let rt = crate::runtime();
    let mut covered = std::collections::BTreeSet::new();
    for case in &cases.case {
        let first = replay(case, &rt);
        let second = replay(case, &rt);
        let serialized = pretty(&first.dialogue);
        ensure!(serialized == pretty(&second.dialogue), "{}: replay is not deterministic", case.name);
        ensure!(first.requests == second.requests, "{}: requests are not deterministic", case.name);
        let d = &first.dialogue;
        ensure!(d.termination == case.expect, "{}: ended {:?}, expected {:?}", case.name, d.termination, case.expect);
        let want: Vec<FailureFlag> = case.flags.iter().map(|&(kind, turn_index)| FailureFlag { kind, turn_index }).collect();
        ensure!(d.failures == want, "{}: flags {:?}, expected {want:?}", case.name, d.failures);
        let cap = case.max_turns.unwrap_or(roleplay_core::engine::DEFAULT_MAX_TURNS);
        d.validate(Some(cap)).map_err(|e| format!("{}: {e}", case.name))?;
        covered.insert(format!("{:?}", d.termination));
        covered.extend(d.failures.iter().map(|f| format!("{:?}", f.kind)));
        compare(&dir.join(format!("{}.dialogue.json", case.name)), &serialized, update)?;
        compare(&dir.join(format!("{}.requests.json", case.name)), &first.requests, update)?;
    }
    for needed in
        ["StopToken", "NoPrompt", "MultiplePrompts", "SelfReply", "IncoherentInquirer", "IncoherentResponder", "MaxTurns", "BackendError"]
    {
        ensure!(covered.contains(needed), "no case covers {needed}");
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    let verb = if update { "written" } else { "byte-identical" };
    Ok(Outcome::Pass(format!("{} cases {verb}, determinism re-checked", cases.case.len())))
}

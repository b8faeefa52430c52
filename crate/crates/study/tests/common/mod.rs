#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use roleplay_core::domain::{load_goal_set, load_persona_set, FixtureSource};
use roleplay_core::study::CollectionConfig;
use roleplay_core::subjects::{SubjectRole, Transcript};
use roleplay_core::{Dialogue, DialogueRecord, FamilyId, Provenance, SubjectSpec, TerminationReason, Turn, Utterance};
use roleplay_study::{Study, StudyConfig};
use serde_json::{json, Value};

pub const INCOHERENT: &str = "recursion is recursion is recursion is recursion is recursion is";

/// A hand-advanced clock shared with the study.
#[derive(Clone)]
pub struct FakeClock(pub Arc<Mutex<DateTime<Utc>>>);

impl FakeClock {
    pub fn new() -> Self {
        FakeClock(Arc::new(Mutex::new(DateTime::UNIX_EPOCH + Duration::days(20_000))))
    }

    pub fn advance(&self, d: Duration) {
        *self.0.lock().unwrap() += d;
    }
}

pub fn config(log: &Path, replies: &[&str], clock: Option<FakeClock>) -> StudyConfig {
    let responder = SubjectSpec::scripted(
        SubjectRole::Responder,
        FamilyId::llama2(),
        Transcript::new(replies.iter().copied()).with_model_id("llama-2-scripted"),
    );
    let mut cfg = StudyConfig::new(CollectionConfig::new(responder), load_goal_set(&FixtureSource::Bundled).unwrap(), log.to_path_buf());
    cfg.sync = false;
    cfg.allocation_seed = 11;
    if let Some(clock) = clock {
        cfg.clock = Arc::new(move || *clock.0.lock().unwrap());
    }
    cfg
}

pub struct Server {
    pub base: String,
    pub study: Arc<Study>,
    pub client: reqwest::Client,
    task: tokio::task::JoinHandle<()>,
}

impl Drop for Server {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn spawn(cfg: StudyConfig) -> Server {
    let study = Arc::new(Study::open(cfg).unwrap());
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = roleplay_study::router(study.clone());
    let task = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Server { base: format!("http://{addr}"), study, client: reqwest::Client::new(), task }
}

impl Server {
    pub async fn get(&self, path: &str) -> (u16, Value) {
        let resp = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn get_text(&self, path: &str) -> (u16, String) {
        let resp = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (resp.status().as_u16(), resp.text().await.unwrap())
    }

    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let resp = self.client.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn post_text(&self, path: &str, body: String) -> (u16, Value) {
        let resp = self.client.post(format!("{}{path}", self.base)).body(body).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }
}

pub fn form(participant: &str) -> Value {
    json!({
        "participant_id": participant,
        "age_group": "25 to 34",
        "gender": "Female",
        "race": "White",
        "education": "Doctoral",
        "native_english": true,
    })
}

/// Natural dialogues from `users` collection users over `goals` goals, and
/// one simulated dialogue per natural one per model, as JSONL.
pub fn pool_jsonl(users: usize, goals: usize, models: &[&str]) -> String {
    let persona = load_persona_set(&FixtureSource::Bundled).unwrap().remove(0);
    let goal_set = load_goal_set(&FixtureSource::Bundled).unwrap();
    let mut lines = String::new();
    for u in 0..users {
        for goal in goal_set.iter().take(goals) {
            let mut p = persona.clone();
            p.id = format!("user{u}");
            let natural = Dialogue {
                persona: p.clone(),
                goal: goal.clone(),
                turns: (0..2 + u % 3)
                    .map(|t| Turn { inquirer: Utterance::human(format!("question {t}")), responder: Some(Utterance::responder(format!("answer {t}"))) })
                    .collect(),
                termination: TerminationReason::HumanEnded,
                failures: vec![],
                provenance: Provenance::HumanCollected,
                inquirer_model_id: "human".into(),
                responder_model_id: "llama-2".into(),
                seed: 0,
                backend_error: None,
            };
            lines += &DialogueRecord::new("pool", natural).to_line();
            lines.push('\n');
            for model in models {
                let simulated = Dialogue {
                    persona: p.clone(),
                    goal: goal.clone(),
                    turns: (0..4)
                        .map(|t| Turn {
                            inquirer: Utterance::inquirer(format!("Prompt: \"sim {t}\""), Some(format!("sim {t}"))),
                            responder: Some(Utterance::responder(format!("sim answer {t}"))),
                        })
                        .collect(),
                    termination: TerminationReason::MaxTurns,
                    failures: vec![],
                    provenance: Provenance::Simulated,
                    inquirer_model_id: model.to_string(),
                    responder_model_id: "llama-2".into(),
                    seed: 1,
                    backend_error: None,
                };
                lines += &DialogueRecord::new("pool", simulated).to_line();
                lines.push('\n');
            }
        }
    }
    lines
}

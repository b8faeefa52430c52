//! Study state: collection sessions, the dialogue pools, evaluator
//! allocations and judgments. Every mutation is logged before it is applied.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use roleplay_core::study::{
    allocate_pairs, judge, undetectability_report, AllocationError, CollectionConfig, CollectionSession,
    EvaluationPair, HumanTurnOutcome, Judgment, JudgmentError, JudgmentInput, JudgmentStore, NaturalRef,
    PersonaForm, SessionError, ShownLengths, SimulatedRef, UndetectabilityReport,
};
use roleplay_core::subjects::Subject;
use roleplay_core::{Dialogue, Goal, Provenance};
use serde::{Deserialize, Serialize};

use crate::wal::{Event, Wal, WalError};

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub const DEFAULT_PAIRS: usize = 40;

pub struct StudyConfig {
    pub collection: CollectionConfig,
    /// Goal queue given to every collection participant, in order.
    pub goals: Vec<Goal>,
    pub allocation_seed: u64,
    pub default_pairs: usize,
    pub log_path: PathBuf,
    /// Sync the log to disk after every event.
    pub sync: bool,
    pub clock: Clock,
}

impl StudyConfig {
    pub fn new(collection: CollectionConfig, goals: Vec<Goal>, log_path: PathBuf) -> Self {
        StudyConfig {
            collection,
            goals,
            allocation_seed: 0,
            default_pairs: DEFAULT_PAIRS,
            log_path,
            sync: true,
            clock: Arc::new(Utc::now),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("invalid participant id {0:?}: use 1-64 letters, digits, '-', '_' or '.'")]
    BadParticipant(String),
    #[error("no session for participant {0}")]
    NoSession(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("participant {participant} already holds {existing} pairs; requested {requested}")]
    AllocationMismatch { participant: String, existing: usize, requested: usize },
    #[error("pair {pair_id} is not allocated to {participant}")]
    UnknownPair { participant: String, pair_id: String },
    #[error("pair {0} has not been served yet")]
    NotServed(String),
    #[error(transparent)]
    Judgment(#[from] JudgmentError),
    #[error("line {line}: {message}")]
    Import { line: usize, message: String },
    #[error("no judgments recorded")]
    NoJudgments,
    #[error("dialogue {0} is missing from the store")]
    MissingDialogue(String),
    #[error(transparent)]
    Log(#[from] WalError),
}

/// What a participant sees of their session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub participant_id: String,
    pub status: roleplay_core::study::SessionStatus,
    /// 1-based position of the active goal in the queue.
    pub goal_number: Option<usize>,
    pub total_goals: usize,
    pub goal: Option<Goal>,
    pub active: Option<Dialogue>,
    pub completed: usize,
}

impl SessionView {
    fn of(s: &CollectionSession) -> Self {
        SessionView {
            participant_id: s.participant_id.clone(),
            status: s.status,
            goal_number: s.active.as_ref().map(|_| s.goal_index + 1),
            total_goals: s.goals.len(),
            goal: s.active_goal().cloned(),
            active: s.active.clone(),
            completed: s.completed.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextGoalOutcome {
    /// The dialogue just closed, if it had any turns.
    pub closed: Option<Dialogue>,
    pub session: SessionView,
}

/// A pair as listed to its evaluator; which side is simulated stays hidden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub pair_id: String,
    pub goal_id: String,
    pub answered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShownUtterance {
    /// 1-based number used when naming the decisive utterance.
    pub number: usize,
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Speaker {
    User,
    Chatbot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairView {
    pub pair_id: String,
    pub persona: String,
    pub goal: String,
    pub left: Vec<ShownUtterance>,
    pub right: Vec<ShownUtterance>,
    /// Decisive-utterance options run from 1 to this number.
    pub utterance_options: usize,
    pub served_at: DateTime<Utc>,
}

/// Which dialogues an export includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFilter {
    #[default]
    All,
    Human,
    Simulated,
}

struct SessionSlot {
    session: CollectionSession,
    responder: Option<Box<dyn Subject>>,
}

#[derive(Default)]
struct Inner {
    sessions: BTreeMap<String, CollectionSession>,
    imported: Vec<Dialogue>,
    allocations: BTreeMap<String, Vec<EvaluationPair>>,
    served: BTreeMap<(String, String), DateTime<Utc>>,
    judgments: JudgmentStore,
}

impl Inner {
    fn apply(&mut self, event: Event) {
        match event {
            Event::SessionSaved { session } => {
                self.sessions.insert(session.participant_id.clone(), *session);
            }
            Event::DialoguesImported { dialogues } => self.imported.extend(dialogues),
            Event::PairsAllocated { participant, pairs } => {
                self.allocations.insert(participant, pairs);
            }
            Event::PairServed { participant, pair_id, at } => {
                self.served.entry((participant, pair_id)).or_insert(at);
            }
            Event::JudgmentRecorded { judgment } => {
                // replayed judgments were unique when first logged
                let _ = self.judgments.insert(judgment);
            }
        }
    }

    fn dialogue(&self, id: &str) -> Option<&Dialogue> {
        if let Some(n) = id.strip_prefix(IMPORT_PREFIX) {
            return self.imported.get(n.parse::<usize>().ok()?);
        }
        let (participant, goal) = id.split_once('/')?;
        self.sessions.get(participant)?.completed.iter().find(|d| d.goal.id == goal)
    }

    fn pools(&self) -> (Vec<NaturalRef>, Vec<SimulatedRef>) {
        let mut natural = Vec::new();
        let mut simulated = Vec::new();
        for s in self.sessions.values() {
            for d in &s.completed {
                natural.push(natural_ref(collected_id(&s.participant_id, &d.goal.id), d));
            }
        }
        for (i, d) in self.imported.iter().enumerate() {
            let id = imported_id(i);
            match d.provenance {
                Provenance::HumanCollected => natural.push(natural_ref(id, d)),
                Provenance::Simulated => simulated.push(SimulatedRef {
                    id,
                    model_id: d.inquirer_model_id.clone(),
                    persona_id: d.persona.id.clone(),
                    goal_id: d.goal.id.clone(),
                }),
            }
        }
        (natural, simulated)
    }

    fn pair(&self, participant: &str, pair_id: &str) -> Result<&EvaluationPair, StudyError> {
        self.allocations
            .get(participant)
            .and_then(|pairs| pairs.iter().find(|p| p.pair_id == pair_id))
            .ok_or_else(|| StudyError::UnknownPair { participant: participant.into(), pair_id: pair_id.into() })
    }

    fn sides(&self, pair: &EvaluationPair) -> Result<(&Dialogue, &Dialogue), StudyError> {
        let get = |id: &str| self.dialogue(id).ok_or_else(|| StudyError::MissingDialogue(id.into()));
        let natural = get(&pair.natural_id)?;
        let simulated = get(&pair.simulated_id)?;
        Ok(match pair.order {
            roleplay_core::study::PresentationOrder::NaturalLeft => (natural, simulated),
            roleplay_core::study::PresentationOrder::SimulatedLeft => (simulated, natural),
        })
    }
}

const IMPORT_PREFIX: &str = "import-";

fn imported_id(index: usize) -> String {
    format!("{IMPORT_PREFIX}{index:06}")
}

fn collected_id(participant: &str, goal_id: &str) -> String {
    format!("{participant}/{goal_id}")
}

/// Naturals from collection sessions carry the participant as persona id,
/// so the persona id doubles as the collection user.
fn natural_ref(id: String, d: &Dialogue) -> NaturalRef {
    NaturalRef { id, collection_user: d.persona.id.clone(), persona_id: d.persona.id.clone(), goal_id: d.goal.id.clone() }
}

/// The text an evaluator sees: what the responder was actually asked, and
/// the responder's answers.
fn shown(d: &Dialogue) -> Vec<ShownUtterance> {
    d.utterances()
        .enumerate()
        .map(|(i, u)| ShownUtterance {
            number: i + 1,
            speaker: if u.author == roleplay_core::domain::Author::Responder { Speaker::Chatbot } else { Speaker::User },
            text: u.prompt().unwrap_or(&u.raw_text).to_string(),
        })
        .collect()
}

fn valid_participant(id: &str) -> Result<(), StudyError> {
    let ok = (1..=64).contains(&id.len()) && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(StudyError::BadParticipant(id.into()))
    }
}

pub struct Study {
    cfg: StudyConfig,
    inner: Mutex<(Wal, Inner)>,
    slots: Mutex<HashMap<String, Arc<tokio::sync::Mutex<SessionSlot>>>>,
}

impl Study {
    /// Opens the study, replaying any existing event log.
    pub fn open(cfg: StudyConfig) -> Result<Self, StudyError> {
        let (wal, events) = Wal::open(&cfg.log_path, cfg.sync)?;
        let mut inner = Inner::default();
        let replayed = events.len();
        for event in events {
            inner.apply(event);
        }
        tracing::info!(path = %wal.path().display(), replayed, "study log opened");
        let slots = inner
            .sessions
            .values()
            .map(|s| (s.participant_id.clone(), Arc::new(tokio::sync::Mutex::new(SessionSlot { session: s.clone(), responder: None }))))
            .collect();
        Ok(Study { cfg, inner: Mutex::new((wal, inner)), slots: Mutex::new(slots) })
    }

    fn lock(&self) -> MutexGuard<'_, (Wal, Inner)> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Logs then applies one event, under the store lock.
    fn commit(guard: &mut (Wal, Inner), event: Event) -> Result<(), StudyError> {
        guard.0.append(&event)?;
        guard.1.apply(event);
        Ok(())
    }

    fn slot(&self, participant: &str) -> Result<Arc<tokio::sync::Mutex<SessionSlot>>, StudyError> {
        let slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
        slots.get(participant).cloned().ok_or_else(|| StudyError::NoSession(participant.into()))
    }

    /// Opens a collection session, or returns the existing one for this
    /// participant. The flag says whether a new session was created.
    pub fn open_session(&self, participant: &str, form: PersonaForm) -> Result<(SessionView, bool), StudyError> {
        valid_participant(participant)?;
        let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
        if slots.contains_key(participant) {
            let g = self.lock();
            let session = g.1.sessions.get(participant).expect("every slot has a logged session");
            return Ok((SessionView::of(session), false));
        }
        let responder_model = self.cfg.collection.responder.model_id();
        let session = CollectionSession::open(participant, form, self.cfg.goals.clone(), &responder_model)?;
        Self::commit(&mut self.lock(), Event::SessionSaved { session: Box::new(session.clone()) })?;
        let view = SessionView::of(&session);
        slots.insert(participant.into(), Arc::new(tokio::sync::Mutex::new(SessionSlot { session, responder: None })));
        Ok((view, true))
    }

    pub fn session(&self, participant: &str) -> Result<SessionView, StudyError> {
        let g = self.lock();
        g.1.sessions.get(participant).map(SessionView::of).ok_or_else(|| StudyError::NoSession(participant.into()))
    }

    /// Sends the participant's message to the responder. Messages for one
    /// session are handled one at a time; a failed responder call records
    /// nothing.
    pub async fn post_message(&self, participant: &str, text: &str) -> Result<HumanTurnOutcome, StudyError> {
        let slot = self.slot(participant)?;
        let mut slot = slot.lock().await;
        let SessionSlot { session, responder } = &mut *slot;
        if responder.is_none() {
            let subject = self.cfg.collection.responder.instantiate(0).map_err(SessionError::from)?;
            *responder = Some(subject);
        }
        let mut next = session.clone();
        let outcome = next
            .post_human_message(text, responder.as_deref_mut().expect("responder bound"), &self.cfg.collection)
            .await?;
        Self::commit(&mut self.lock(), Event::SessionSaved { session: Box::new(next.clone()) })?;
        *session = next;
        Ok(outcome)
    }

    pub async fn next_goal(&self, participant: &str) -> Result<NextGoalOutcome, StudyError> {
        let slot = self.slot(participant)?;
        let mut slot = slot.lock().await;
        let mut next = slot.session.clone();
        let closed = next.next_goal()?.cloned();
        Self::commit(&mut self.lock(), Event::SessionSaved { session: Box::new(next.clone()) })?;
        // a fresh responder for the next dialogue
        slot.responder = None;
        slot.session = next;
        Ok(NextGoalOutcome { closed, session: SessionView::of(&slot.session) })
    }

    /// Imports JSONL dialogue records into the pools. Nothing is imported
    /// unless every line parses and validates.
    pub fn import(&self, jsonl: &str) -> Result<Vec<String>, StudyError> {
        let mut dialogues = Vec::new();
        for (i, line) in jsonl.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| StudyError::Import { line: i + 1, message };
            let record = roleplay_core::DialogueRecord::from_line(line).map_err(err)?;
            record.dialogue.validate(None).map_err(|e| err(e.to_string()))?;
            dialogues.push(record.dialogue);
        }
        let mut g = self.lock();
        let start = g.1.imported.len();
        let ids = (start..start + dialogues.len()).map(imported_id).collect();
        if !dialogues.is_empty() {
            Self::commit(&mut g, Event::DialoguesImported { dialogues })?;
        }
        Ok(ids)
    }

    /// Dialogue records in export order: completed collection dialogues by
    /// participant, then imported ones.
    pub fn export(&self, filter: ExportFilter) -> Vec<roleplay_core::DialogueRecord> {
        let g = self.lock();
        let collected = g.1.sessions.values().flat_map(|s| s.completed.iter());
        collected
            .chain(g.1.imported.iter())
            .filter(|d| match filter {
                ExportFilter::All => true,
                ExportFilter::Human => d.provenance == Provenance::HumanCollected,
                ExportFilter::Simulated => d.provenance == Provenance::Simulated,
            })
            .map(|d| roleplay_core::DialogueRecord::new("study-export", d.clone()))
            .collect()
    }

    /// The participant's pairs, allocating them on first request. The
    /// allocation is fixed once made; asking again with a different size
    /// is an error.
    pub fn pairs(&self, participant: &str, k: Option<usize>) -> Result<Vec<PairSummary>, StudyError> {
        valid_participant(participant)?;
        let mut g = self.lock();
        if !g.1.allocations.contains_key(participant) {
            let (natural, simulated) = g.1.pools();
            let k = k.unwrap_or(self.cfg.default_pairs);
            let pairs = allocate_pairs(participant, &natural, &simulated, k, self.cfg.allocation_seed)?;
            Self::commit(&mut g, Event::PairsAllocated { participant: participant.into(), pairs })?;
        }
        let pairs = &g.1.allocations[participant];
        if let Some(k) = k.filter(|&k| k != pairs.len()) {
            return Err(StudyError::AllocationMismatch { participant: participant.into(), existing: pairs.len(), requested: k });
        }
        Ok(pairs
            .iter()
            .map(|p| PairSummary {
                pair_id: p.pair_id.clone(),
                goal_id: p.goal_id.clone(),
                answered: g.1.judgments.contains(participant, &p.pair_id),
            })
            .collect())
    }

    /// Shows one pair. The first view starts the pair's judgment clock.
    pub fn serve_pair(&self, participant: &str, pair_id: &str) -> Result<PairView, StudyError> {
        let mut g = self.lock();
        let pair = g.1.pair(participant, pair_id)?.clone();
        let (left, right) = g.1.sides(&pair)?;
        let (left, right) = (shown(left), shown(right));
        let natural = g.1.dialogue(&pair.natural_id).expect("checked by sides");
        let persona = natural.persona.render();
        let goal = natural.goal.text.clone();
        let key = (participant.to_string(), pair_id.to_string());
        let served_at = match g.1.served.get(&key) {
            Some(&at) => at,
            None => {
                let at = (self.cfg.clock)();
                Self::commit(&mut g, Event::PairServed { participant: key.0, pair_id: key.1, at })?;
                at
            }
        };
        let utterance_options = ShownLengths { left: left.len(), right: right.len() }.options();
        Ok(PairView { pair_id: pair.pair_id, persona, goal, left, right, utterance_options, served_at })
    }

    /// Records a judgment; its duration runs from the pair's first view to now.
    pub fn submit(&self, input: &JudgmentInput) -> Result<Judgment, StudyError> {
        let mut g = self.lock();
        let pair = g.1.pair(&input.participant, &input.pair_id)?.clone();
        if g.1.judgments.contains(&input.participant, &input.pair_id) {
            return Err(JudgmentError::AlreadySubmitted { participant: input.participant.clone(), pair_id: input.pair_id.clone() }.into());
        }
        let served_at = *g
            .1
            .served
            .get(&(input.participant.clone(), input.pair_id.clone()))
            .ok_or_else(|| StudyError::NotServed(input.pair_id.clone()))?;
        let (left, right) = g.1.sides(&pair)?;
        let lengths = ShownLengths { left: left.utterance_count(), right: right.utterance_count() };
        let elapsed = (self.cfg.clock)() - served_at;
        let duration = elapsed.num_milliseconds().max(0) as f64 / 1000.0;
        let judgment = judge(&pair, lengths, input, duration)?;
        Self::commit(&mut g, Event::JudgmentRecorded { judgment: judgment.clone() })?;
        Ok(judgment)
    }

    pub fn judgments(&self) -> Vec<Judgment> {
        self.lock().1.judgments.all().cloned().collect()
    }

    pub fn report(&self) -> Result<UndetectabilityReport, StudyError> {
        let g = self.lock();
        undetectability_report(g.1.judgments.all()).map_err(|_| StudyError::NoJudgments)
    }
}

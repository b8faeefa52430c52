use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::{run_dialogue, DialogueSetup, EngineConfig, EngineError};
use crate::domain::{Dialogue, Goal, Persona, TerminationReason};
use crate::subjects::SubjectSpec;

/// Receives finished dialogues in grid order.
pub trait DialogueSink: Send {
    /// Called once before the first dialogue with the run's id.
    fn begin(&mut self, _run_id: &str) {}
    fn accept(&mut self, dialogue: &Dialogue) -> std::io::Result<()>;
}

/// Collects dialogues in memory.
#[derive(Debug, Default)]
pub struct VecSink(pub Vec<Dialogue>);

impl DialogueSink for VecSink {
    fn accept(&mut self, dialogue: &Dialogue) -> std::io::Result<()> {
        self.0.push(dialogue.clone());
        Ok(())
    }
}

/// One point of the persona × goal × seed grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub persona_index: usize,
    pub goal_index: usize,
    pub seed: u64,
}

/// Record of a batch run, written next to its dialogues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub inquirer: SubjectSpec,
    pub responder: SubjectSpec,
    pub config: EngineConfig,
    pub persona_ids: Vec<String>,
    pub goal_ids: Vec<String>,
    pub seeds: Vec<u64>,
    /// Grid cells in the order they are run.
    pub attempted: usize,
    /// Dialogues handed to the sink.
    pub produced: usize,
    pub outcomes: BTreeMap<TerminationReason, usize>,
}

impl RunManifest {
    pub fn grid_size(&self) -> usize {
        self.persona_ids.len() * self.goal_ids.len() * self.seeds.len()
    }

    pub fn is_complete(&self) -> bool {
        self.produced == self.grid_size()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("failed to write dialogue {index}: {source}")]
    Sink {
        index: usize,
        #[source]
        source: std::io::Error,
        manifest: Box<RunManifest>,
    },
}

/// Grid cells in persona, goal, seed order.
pub fn grid(personas: usize, goals: usize, seeds: &[u64]) -> Vec<GridCell> {
    let mut cells = Vec::with_capacity(personas * goals * seeds.len());
    for persona_index in 0..personas {
        for goal_index in 0..goals {
            for &seed in seeds {
                cells.push(GridCell { persona_index, goal_index, seed });
            }
        }
    }
    cells
}

/// Runs every grid cell with up to `concurrency` dialogues in flight and
/// hands results to `sink` in grid order. Backend failures become
/// `BackendError` dialogues; only configuration and sink failures stop the
/// run.
#[allow(clippy::too_many_arguments)]
pub async fn run_batch(
    inquirer: &SubjectSpec,
    responder: &SubjectSpec,
    personas: &[Persona],
    goals: &[Goal],
    seeds: &[u64],
    cfg: &EngineConfig,
    concurrency: usize,
    sink: &mut dyn DialogueSink,
) -> Result<RunManifest, BatchError> {
    cfg.validate()?;
    cfg.templates.family(&inquirer.family).map_err(EngineError::from)?;
    cfg.templates.family(&responder.family).map_err(EngineError::from)?;

    let mut manifest = RunManifest {
        run_id: uuid::Uuid::new_v4().to_string(),
        started_at: Utc::now(),
        finished_at: None,
        inquirer: inquirer.clone(),
        responder: responder.clone(),
        config: cfg.clone(),
        persona_ids: personas.iter().map(|p| p.id.clone()).collect(),
        goal_ids: goals.iter().map(|g| g.id.clone()).collect(),
        seeds: seeds.to_vec(),
        attempted: 0,
        produced: 0,
        outcomes: BTreeMap::new(),
    };

    sink.begin(&manifest.run_id);
    let cells = grid(personas.len(), goals.len(), seeds);
    let mut results = stream::iter(cells)
        .map(|cell| async move {
            let setup = DialogueSetup {
                inquirer,
                responder,
                persona: &personas[cell.persona_index],
                goal: &goals[cell.goal_index],
                seed: cell.seed,
            };
            run_dialogue(&setup, cfg).await
        })
        .buffered(concurrency.max(1));

    while let Some(result) = results.next().await {
        manifest.attempted += 1;
        let dialogue = result?;
        if let Err(source) = sink.accept(&dialogue) {
            manifest.finished_at = Some(Utc::now());
            let index = manifest.attempted - 1;
            return Err(BatchError::Sink { index, source, manifest: Box::new(manifest) });
        }
        manifest.produced += 1;
        *manifest.outcomes.entry(dialogue.termination).or_default() += 1;
        tracing::debug!(produced = manifest.produced, termination = %dialogue.termination, "dialogue finished");
    }
    manifest.finished_at = Some(Utc::now());
    Ok(manifest)
}

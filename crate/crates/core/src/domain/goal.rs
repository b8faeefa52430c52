use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::persona::Persona;
use super::DomainError;

const BUNDLED_GOALS: &str = include_str!("../../fixtures/goals.toml");
const BUNDLED_PERSONAS: &str = include_str!("../../fixtures/personas.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GoalDomain {
    Math,
    Coding,
    GeneralKnowledge,
    /// User-supplied goals outside the bundled categories.
    Other,
}

impl fmt::Display for GoalDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GoalDomain::Math => "Math",
            GoalDomain::Coding => "Coding",
            GoalDomain::GeneralKnowledge => "General Knowledge",
            GoalDomain::Other => "Other",
        };
        f.write_str(s)
    }
}

/// A multi-hop conversational objective.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Goal {
    pub id: String,
    pub domain: GoalDomain,
    pub text: String,
}

/// Where to load goals or personas from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixtureSource {
    Bundled,
    File(PathBuf),
}

impl FixtureSource {
    /// `"bundled"` selects the shipped fixture, anything else is a path.
    pub fn from_arg(arg: &str) -> Self {
        if arg == "bundled" {
            FixtureSource::Bundled
        } else {
            FixtureSource::File(PathBuf::from(arg))
        }
    }

    fn read(&self, bundled: &'static str) -> Result<(String, String), DomainError> {
        match self {
            FixtureSource::Bundled => Ok((bundled.to_string(), "<bundled>".to_string())),
            FixtureSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| DomainError::FixtureIo {
                    path: path.display().to_string(),
                    source,
                })?;
                Ok((text, path.display().to_string()))
            }
        }
    }
}

#[derive(Deserialize)]
struct GoalFile {
    #[serde(default)]
    goal: Vec<Goal>,
}

#[derive(Deserialize)]
struct PersonaFile {
    #[serde(default)]
    persona: Vec<Persona>,
}

/// Loads a goal set. An empty file yields an empty list.
pub fn load_goal_set(source: &FixtureSource) -> Result<Vec<Goal>, DomainError> {
    let (text, origin) = source.read(BUNDLED_GOALS)?;
    parse_goal_set(&text, &origin)
}

pub fn parse_goal_set(text: &str, origin: &str) -> Result<Vec<Goal>, DomainError> {
    let file: GoalFile = toml::from_str(text)
        .map_err(|e| DomainError::FixtureParse { origin: origin.to_string(), message: e.to_string() })?;
    let mut seen = HashSet::new();
    for g in &file.goal {
        if g.text.trim().is_empty() {
            return Err(DomainError::EmptyGoalText(g.id.clone()));
        }
        if !seen.insert(g.id.as_str()) {
            return Err(DomainError::DuplicateId(g.id.clone()));
        }
    }
    Ok(file.goal)
}

/// Loads a persona set; ids must be unique.
pub fn load_persona_set(source: &FixtureSource) -> Result<Vec<Persona>, DomainError> {
    let (text, origin) = source.read(BUNDLED_PERSONAS)?;
    parse_persona_set(&text, &origin)
}

pub fn parse_persona_set(text: &str, origin: &str) -> Result<Vec<Persona>, DomainError> {
    let file: PersonaFile = toml::from_str(text)
        .map_err(|e| DomainError::FixtureParse { origin: origin.to_string(), message: e.to_string() })?;
    let mut seen = HashSet::new();
    for p in &file.persona {
        if !seen.insert(p.id.as_str()) {
            return Err(DomainError::DuplicateId(p.id.clone()));
        }
    }
    Ok(file.persona)
}

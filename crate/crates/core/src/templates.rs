//! Prompt templates for the inquirer system prompt, the response forwarder,
//! and the responder system prompt.
//!
//! Templates are data: the bundled set lives in `fixtures/templates.toml` and
//! any family can be overridden or added from a file of the same shape.
//! Substituted text is inserted verbatim with no escaping, so a responder
//! output containing quotes or template-like markup reaches the inquirer
//! unchanged.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

const BUNDLED_TEMPLATES: &str = include_str!("../fixtures/templates.toml");

pub const PERSONA: &str = "<PERSONA>";
pub const GOAL: &str = "<GOAL>";
/// Alternate spelling of [`GOAL`] used by the GPT4 inquirer template.
pub const OBJECTIVE: &str = "<OBJECTIVE>";
pub const CONV_STOP: &str = "<CONV_STOP>";
pub const RESPONSE: &str = "<RESPONSE>";
pub const QUESTION: &str = "<QUESTION>";

const KNOWN_PLACEHOLDERS: [&str; 6] = [PERSONA, GOAL, OBJECTIVE, CONV_STOP, RESPONSE, QUESTION];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown template family {0:?}")]
    UnknownFamily(String),
    #[error("{family}.{slot}: unknown placeholder {placeholder}")]
    UnknownPlaceholder { family: String, slot: Slot, placeholder: String },
    #[error("{family}.{slot}: placeholder {placeholder} is not substitutable in this slot")]
    MisplacedPlaceholder { family: String, slot: Slot, placeholder: String },
    #[error("{family}.{slot}: placeholder {placeholder} must appear {expected}")]
    PlaceholderCount { family: String, slot: Slot, placeholder: &'static str, expected: &'static str },
    #[error("empty {0}")]
    EmptyInput(&'static str),
    #[error("invalid stop token {0:?}: must be non-empty without whitespace")]
    InvalidStopToken(String),
    #[error("failed to parse templates from {origin}: {message}")]
    Parse { origin: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    SysI,
    InterI,
    SysR,
}

impl Slot {
    fn allowed(self) -> &'static [&'static str] {
        match self {
            Slot::SysI => &[PERSONA, GOAL, OBJECTIVE, CONV_STOP],
            Slot::InterI => &[RESPONSE, CONV_STOP],
            Slot::SysR => &[QUESTION],
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slot::SysI => "sys_i",
            Slot::InterI => "inter_i",
            Slot::SysR => "sys_r",
        })
    }
}

/// Template family identifier, e.g. `llama2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FamilyId(String);

impl FamilyId {
    pub fn new(id: impl Into<String>) -> Self {
        FamilyId(id.into())
    }
    pub fn llama2() -> Self {
        FamilyId::new("llama2")
    }
    pub fn mixtral() -> Self {
        FamilyId::new("mixtral")
    }
    pub fn vicuna() -> Self {
        FamilyId::new("vicuna")
    }
    pub fn gpt4() -> Self {
        FamilyId::new("gpt4")
    }
    pub fn generic() -> Self {
        FamilyId::new("generic")
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The literal an inquirer emits to end a dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StopToken(String);

impl StopToken {
    pub fn new(literal: impl Into<String>) -> Result<Self, TemplateError> {
        let literal = literal.into();
        if literal.is_empty() || literal.chars().any(char::is_whitespace) {
            return Err(TemplateError::InvalidStopToken(literal));
        }
        Ok(StopToken(literal))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for StopToken {
    fn default() -> Self {
        StopToken("FINISH".to_string())
    }
}

impl TryFrom<String> for StopToken {
    type Error = TemplateError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        StopToken::new(s)
    }
}

impl From<StopToken> for String {
    fn from(s: StopToken) -> String {
        s.0
    }
}

impl fmt::Display for StopToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct FamilyDef {
    sys_i: String,
    inter_i: String,
    sys_r: String,
    #[serde(default)]
    wrapper_tokens: Vec<String>,
    #[serde(default)]
    self_reply_markers: Vec<String>,
}

/// One model family's prompts and chat markup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateFamily {
    pub id: FamilyId,
    pub sys_i: String,
    pub inter_i: String,
    pub sys_r: String,
    /// Markup removed by [`TemplateFamily::unwrapped`].
    pub wrapper_tokens: Vec<String>,
    /// Tokens that reveal an inquirer imitating this family as responder.
    pub self_reply_markers: Vec<String>,
}

impl TemplateFamily {
    fn from_def(id: FamilyId, def: FamilyDef) -> Result<Self, TemplateError> {
        let family = TemplateFamily {
            id,
            sys_i: def.sys_i,
            inter_i: def.inter_i,
            sys_r: def.sys_r,
            wrapper_tokens: def.wrapper_tokens,
            self_reply_markers: def.self_reply_markers,
        };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        for (slot, text) in [(Slot::SysI, &self.sys_i), (Slot::InterI, &self.inter_i), (Slot::SysR, &self.sys_r)] {
            for placeholder in placeholders(text) {
                if !KNOWN_PLACEHOLDERS.contains(&placeholder) {
                    return Err(TemplateError::UnknownPlaceholder {
                        family: self.id.to_string(),
                        slot,
                        placeholder: placeholder.to_string(),
                    });
                }
                if !slot.allowed().contains(&placeholder) {
                    return Err(TemplateError::MisplacedPlaceholder {
                        family: self.id.to_string(),
                        slot,
                        placeholder: placeholder.to_string(),
                    });
                }
            }
        }
        let count = |text: &str, p: &str| placeholders(text).filter(|found| *found == p).count();
        let check = |ok: bool, slot, placeholder, expected| {
            if ok {
                Ok(())
            } else {
                Err(TemplateError::PlaceholderCount { family: self.id.to_string(), slot, placeholder, expected })
            }
        };
        check(count(&self.sys_i, PERSONA) >= 1, Slot::SysI, PERSONA, "at least once")?;
        let goals = count(&self.sys_i, GOAL) + count(&self.sys_i, OBJECTIVE);
        check(goals >= 1, Slot::SysI, GOAL, "at least once")?;
        check(count(&self.inter_i, RESPONSE) >= 1, Slot::InterI, RESPONSE, "at least once")?;
        check(count(&self.sys_r, QUESTION) == 1, Slot::SysR, QUESTION, "exactly once")?;
        Ok(())
    }

    /// Inquirer system prompt with persona, goal, and stop token filled in.
    pub fn render_sys_i(&self, persona_text: &str, goal_text: &str, stop: &StopToken) -> Result<String, TemplateError> {
        if persona_text.trim().is_empty() {
            return Err(TemplateError::EmptyInput("persona text"));
        }
        if goal_text.trim().is_empty() {
            return Err(TemplateError::EmptyInput("goal text"));
        }
        Ok(substitute(
            &self.sys_i,
            &[(PERSONA, persona_text), (GOAL, goal_text), (OBJECTIVE, goal_text), (CONV_STOP, stop.as_str())],
        ))
    }

    /// Forwarder prompt carrying a responder output back to the inquirer.
    /// An empty responder output is allowed and rendered as `""`.
    pub fn render_inter_i(&self, responder_output: &str, stop: &StopToken) -> String {
        substitute(&self.inter_i, &[(RESPONSE, responder_output), (CONV_STOP, stop.as_str())])
    }

    pub fn render_sys_r(&self, question: &str) -> Result<String, TemplateError> {
        if question.trim().is_empty() {
            return Err(TemplateError::EmptyInput("question"));
        }
        Ok(substitute(&self.sys_r, &[(QUESTION, question)]))
    }

    /// Copy of this family with chat markup removed from every slot, for
    /// endpoints that apply their own chat formatting.
    pub fn unwrapped(&self) -> TemplateFamily {
        let strip = |text: &str| strip_tokens(text, &self.wrapper_tokens);
        TemplateFamily {
            id: self.id.clone(),
            sys_i: strip(&self.sys_i),
            inter_i: strip(&self.inter_i),
            sys_r: strip(&self.sys_r),
            wrapper_tokens: Vec::new(),
            self_reply_markers: self.self_reply_markers.clone(),
        }
    }

    /// The responder system text without the question, markup stripped.
    pub fn responder_preamble(&self) -> String {
        let unwrapped = self.unwrapped();
        tidy(&unwrapped.sys_r.replacen(QUESTION, "", 1))
    }
}

/// Registry of template families keyed by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    families: BTreeMap<FamilyId, TemplateFamily>,
}

impl TemplateSet {
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_TEMPLATES, "<bundled>").expect("bundled templates are valid")
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self, TemplateError> {
        let defs: BTreeMap<String, FamilyDef> =
            toml::from_str(text).map_err(|e| TemplateError::Parse { origin: origin.to_string(), message: e.to_string() })?;
        let families = defs
            .into_iter()
            .map(|(id, def)| {
                let id = FamilyId::new(id);
                TemplateFamily::from_def(id.clone(), def).map(|f| (id, f))
            })
            .collect::<Result<_, _>>()?;
        Ok(TemplateSet { families })
    }

    /// Bundled families with any families in `path` added or replaced.
    pub fn bundled_with_overrides(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TemplateError::Parse { origin: path.display().to_string(), message: e.to_string() })?;
        let overrides = Self::from_toml(&text, &path.display().to_string())?;
        let mut set = Self::bundled();
        set.families.extend(overrides.families);
        Ok(set)
    }

    pub fn family(&self, id: &FamilyId) -> Result<&TemplateFamily, TemplateError> {
        self.families.get(id).ok_or_else(|| TemplateError::UnknownFamily(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &FamilyId> {
        self.families.keys()
    }

    pub fn render_sys_i(
        &self,
        family: &FamilyId,
        persona_text: &str,
        goal_text: &str,
        stop: &StopToken,
    ) -> Result<String, TemplateError> {
        self.family(family)?.render_sys_i(persona_text, goal_text, stop)
    }

    pub fn render_inter_i(
        &self,
        family: &FamilyId,
        responder_output: &str,
        stop: &StopToken,
    ) -> Result<String, TemplateError> {
        Ok(self.family(family)?.render_inter_i(responder_output, stop))
    }

    pub fn render_sys_r(&self, family: &FamilyId, question: &str) -> Result<String, TemplateError> {
        self.family(family)?.render_sys_r(question)
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::bundled()
    }
}

/// Placeholder names (`<NAME>`) in `text`. `<<SYS>>`-style markup is skipped.
fn placeholders(text: &str) -> impl Iterator<Item = &str> {
    let bytes = text.as_bytes();
    (0..bytes.len()).filter_map(move |start| {
        if bytes[start] != b'<' || (start > 0 && bytes[start - 1] == b'<') {
            return None;
        }
        let name_len = bytes[start + 1..].iter().take_while(|b| b.is_ascii_uppercase() || **b == b'_').count();
        let end = start + 1 + name_len;
        if name_len == 0 || bytes.get(end) != Some(&b'>') || bytes.get(end + 1) == Some(&b'>') {
            return None;
        }
        Some(&text[start..=end])
    })
}

/// Single left-to-right pass, so substituted values are never rescanned.
fn substitute(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(pos) = rest.find('<') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        match values.iter().find(|(p, _)| tail.starts_with(p)) {
            Some((p, v)) => {
                out.push_str(v);
                rest = &tail[p.len()..];
            }
            None => {
                out.push('<');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn strip_tokens(text: &str, tokens: &[String]) -> String {
    let mut out = text.to_string();
    for token in tokens.iter().filter(|t| !t.is_empty()) {
        while let Some(pos) = out.find(token.as_str()) {
            let end = pos + token.len();
            if out[end..].starts_with(' ') {
                out.replace_range(pos..end + 1, "");
            } else if pos > 0 && out[..pos].ends_with(' ') {
                out.replace_range(pos - 1..end, "");
            } else {
                out.replace_range(pos..end, "");
            }
        }
    }
    tidy(&out)
}

fn tidy(text: &str) -> String {
    let mut out = text.trim().to_string();
    while out.contains("\n\n\n") {
        out = out.replace("\n\n\n", "\n\n");
    }
    out
}

use crate::domain::{Goal, Persona, Turn};
use crate::templates::{StopToken, TemplateError, TemplateFamily};

use super::{ChatFormat, ChatMessage};

/// Messages for the inquirer's next generation.
///
/// The system prompt carries persona and goal; every completed turn then
/// contributes the inquirer's own raw output (as assistant) and the
/// responder's answer wrapped in the forwarder template (as user).
pub fn build_inquirer_context(
    persona: &Persona,
    goal: &Goal,
    history: &[Turn],
    family: &TemplateFamily,
    stop: &StopToken,
    format: ChatFormat,
) -> Result<Vec<ChatMessage>, TemplateError> {
    let persona_text = persona.render();
    let completed = history.iter().filter_map(|t| t.responder.as_ref().map(|r| (&t.inquirer, r)));
    match format {
        ChatFormat::Messages => {
            let family = family.unwrapped();
            let mut messages = vec![ChatMessage::system(family.render_sys_i(&persona_text, &goal.text, stop)?)];
            for (inq, res) in completed {
                messages.push(ChatMessage::assistant(inq.raw_text.clone()));
                messages.push(ChatMessage::user(family.render_inter_i(&res.raw_text, stop)));
            }
            Ok(messages)
        }
        ChatFormat::Raw => {
            let mut parts = vec![family.render_sys_i(&persona_text, &goal.text, stop)?];
            for (inq, res) in completed {
                parts.push(inq.raw_text.clone());
                parts.push(family.render_inter_i(&res.raw_text, stop));
            }
            Ok(vec![ChatMessage::user(parts.join("\n"))])
        }
    }
}

/// Messages for the responder's next generation: the responder system text,
/// prior extracted prompts and answers, then the new prompt. The responder
/// never sees raw inquirer output.
pub fn build_responder_context(
    history: &[Turn],
    family: &TemplateFamily,
    new_prompt: &str,
    format: ChatFormat,
) -> Result<Vec<ChatMessage>, TemplateError> {
    if new_prompt.trim().is_empty() {
        return Err(TemplateError::EmptyInput("prompt"));
    }
    let completed: Vec<(&str, &str)> = history
        .iter()
        .filter_map(|t| Some((t.inquirer.prompt()?, t.responder.as_ref()?.raw_text.as_str())))
        .collect();
    match format {
        ChatFormat::Messages => {
            let mut messages = vec![ChatMessage::system(family.responder_preamble())];
            for (prompt, answer) in completed {
                messages.push(ChatMessage::user(prompt));
                messages.push(ChatMessage::assistant(answer));
            }
            messages.push(ChatMessage::user(new_prompt));
            Ok(messages)
        }
        ChatFormat::Raw => {
            let first = completed.first().map_or(new_prompt, |(p, _)| *p);
            let mut parts = vec![family.render_sys_r(first)?];
            for (i, (prompt, answer)) in completed.iter().enumerate() {
                if i > 0 {
                    parts.push((*prompt).to_string());
                }
                parts.push((*answer).to_string());
            }
            if !completed.is_empty() {
                parts.push(new_prompt.to_string());
            }
            Ok(vec![ChatMessage::user(parts.join("\n"))])
        }
    }
}

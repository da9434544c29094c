//! Prompt templates rendered once per agent per inquiry.

use alloc::format;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::model::CaseInquiry;

pub const CASE_TEXT: &str = "case_text";
pub const MAX_HYPOTHESES: &str = "max_hypotheses";
pub const DEFAULT_MAX_HYPOTHESES: usize = 5;
pub const DEFAULT_TEMPLATE_ID: &str = "default";

const DEFAULT_BODY: &str = "You are a second-opinion diagnostic assistant for an emergency physician.\n\
Read the case description below and list up to {{max_hypotheses}} possible diagnoses, \
most probable first, each with its probability and the urgency of intervention.\n\n\
Case description:\n{{case_text}}";

const DEFAULT_INSTRUCTIONS: &str = "Respond with a JSON array and nothing else. Each element must be an object \
with the fields \"diagnosis\" (string), \"probability\" (number between 0 and 1) and \"urgency\" \
(one of \"routine\", \"urgent\", \"emergent\", \"critical\"). Return at most {{max_hypotheses}} elements.";

#[derive(Deserialize)]
struct RawTemplate {
    template_id: String,
    body: String,
    #[serde(default)]
    output_instructions: Option<String>,
}

/// A prompt body with `{{case_text}}` and `{{max_hypotheses}}` placeholders
/// plus the output-format instructions appended to every rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate")]
pub struct PromptTemplate {
    template_id: String,
    body: String,
    output_instructions: String,
}

impl TryFrom<RawTemplate> for PromptTemplate {
    type Error = CoreError;

    fn try_from(raw: RawTemplate) -> Result<Self, Self::Error> {
        PromptTemplate::new(
            raw.template_id,
            raw.body,
            raw.output_instructions.unwrap_or_else(|| DEFAULT_INSTRUCTIONS.to_string()),
        )
    }
}

enum Piece<'a> {
    Text(&'a str),
    Placeholder(&'a str),
}

/// Splits a template into literal text and `{{name}}` placeholders.
fn pieces(template: &str) -> impl Iterator<Item = Result<Piece<'_>, CoreError>> {
    let mut rest = template;
    core::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        match rest.find("{{") {
            Some(0) => match rest[2..].find("}}") {
                Some(end) => {
                    let name = rest[2..2 + end].trim();
                    rest = &rest[2 + end + 2..];
                    Some(Ok(Piece::Placeholder(name)))
                }
                None => {
                    rest = "";
                    Some(Err(CoreError::Template("unterminated placeholder".into())))
                }
            },
            Some(start) => {
                let text = &rest[..start];
                rest = &rest[start..];
                Some(Ok(Piece::Text(text)))
            }
            None => {
                let text = rest;
                rest = "";
                Some(Ok(Piece::Text(text)))
            }
        }
    })
}

fn check_placeholders(text: &str, what: &str) -> Result<usize, CoreError> {
    let mut case_text = 0;
    for piece in pieces(text) {
        if let Piece::Placeholder(name) = piece? {
            match name {
                CASE_TEXT => case_text += 1,
                MAX_HYPOTHESES => {}
                other => return Err(CoreError::Template(format!("unknown placeholder {{{{{other}}}}} in {what}"))),
            }
        }
    }
    Ok(case_text)
}

impl PromptTemplate {
    pub fn new(
        template_id: impl Into<String>,
        body: impl Into<String>,
        output_instructions: impl Into<String>,
    ) -> Result<Self, CoreError> {
        let body = body.into();
        let output_instructions = output_instructions.into();
        let occurrences = check_placeholders(&body, "body")?;
        if occurrences != 1 {
            return Err(CoreError::Template(format!(
                "body must contain {{{{case_text}}}} exactly once, found {occurrences}"
            )));
        }
        if check_placeholders(&output_instructions, "output instructions")? != 0 {
            return Err(CoreError::Template("output instructions may not contain {{case_text}}".into()));
        }
        Ok(Self { template_id: template_id.into(), body, output_instructions })
    }

    /// The built-in template asking for a JSON array of
    /// `{diagnosis, probability, urgency}` objects.
    pub fn default_template() -> Self {
        Self::new(DEFAULT_TEMPLATE_ID, DEFAULT_BODY, DEFAULT_INSTRUCTIONS).expect("built-in template is valid")
    }

    pub fn template_id(&self) -> &str {
        &self.template_id
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn output_instructions(&self) -> &str {
        &self.output_instructions
    }

    /// Substitutes the placeholders and appends the output instructions.
    /// Substitution is a single pass, so placeholder-like text inside the
    /// case description is left alone.
    pub fn render(&self, case: &CaseInquiry, max_hypotheses: usize) -> Result<String, CoreError> {
        if max_hypotheses == 0 {
            return Err(CoreError::Template("max_hypotheses must be at least 1".into()));
        }
        let max = max_hypotheses.to_string();
        let mut out = String::with_capacity(self.body.len() + case.text.len() + self.output_instructions.len() + 2);
        substitute(&self.body, &case.text, &max, &mut out)?;
        out.push_str("\n\n");
        substitute(&self.output_instructions, &case.text, &max, &mut out)?;
        Ok(out)
    }
}

fn substitute(template: &str, case_text: &str, max: &str, out: &mut String) -> Result<(), CoreError> {
    for piece in pieces(template) {
        match piece? {
            Piece::Text(text) => out.push_str(text),
            Piece::Placeholder(CASE_TEXT) => out.push_str(case_text),
            Piece::Placeholder(MAX_HYPOTHESES) => out.push_str(max),
            Piece::Placeholder(other) => {
                return Err(CoreError::Template(format!("unresolved placeholder {{{{{other}}}}}")))
            }
        }
    }
    Ok(())
}

//! Prompt assembly. Every prompt sent to a generative model is built here.
//!
//! A template is an ordered list of literal segments and named slots.
//! Rendering joins the filled components with a single space; slot payloads
//! are inserted as-is, with no quoting or escaping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    ArtCreation,
    Critique,
    Reflection,
    KeywordExtraction,
    Grading,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::ArtCreation,
        TemplateId::Critique,
        TemplateId::Reflection,
        TemplateId::KeywordExtraction,
        TemplateId::Grading,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::ArtCreation => "art-creation",
            TemplateId::Critique => "critique",
            TemplateId::Reflection => "reflection",
            TemplateId::KeywordExtraction => "keyword-extraction",
            TemplateId::Grading => "grading",
        }
    }

    pub fn template(self) -> PromptTemplate {
        use Segment::{Literal as L, Slot as S};
        let segments = match self {
            TemplateId::ArtCreation => vec![S("domain"), S("artist"), L(ART_CREATION_CLOSING)],
            TemplateId::Critique => vec![
                S("domain"),
                S("critic"),
                L(CRITIQUE_LEAD),
                S("art_prompt"),
                L(CRITIQUE_CLOSING),
            ],
            TemplateId::Reflection => vec![
                S("domain"),
                L(REFLECTION_ARTWORK_LEAD),
                S("art_prompt"),
                L(REFLECTION_CRITIQUE_LEAD),
                S("critique"),
                S("artist"),
                L(REFLECTION_CLOSING),
            ],
            TemplateId::KeywordExtraction => vec![L(KEYWORD_INSTRUCTION), S("description")],
            TemplateId::Grading => vec![
                L(GRADING_COUNT_LEAD),
                S("count"),
                L(GRADING_LEAD),
                S("art_prompts"),
                L(GRADING_CLOSING),
            ],
        };
        PromptTemplate { id: self, segments }
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const ART_CREATION_CLOSING: &str = "This young art student just finished his latest painting. Provide a brief but detailed description of what is depicted in the canvas.";
pub const CRITIQUE_LEAD: &str = "The student made this painting. This is how the student described his artwork:";
pub const CRITIQUE_CLOSING: &str =
    "Was the student able to convey his intentions? Do you think this painting is creative? Briefly explain why.";
pub const REFLECTION_ARTWORK_LEAD: &str = "The art student made a piece of art that was described as:";
pub const REFLECTION_CRITIQUE_LEAD: &str = "The art teacher made the following comment about this artwork:";
pub const REFLECTION_CLOSING: &str =
    "How do you react to this feedback? Briefly describe what actions you will take next.";
pub const KEYWORD_INSTRUCTION: &str = "Provide exactly three keywords that describe the painting below. Do not reference the names of famous artists or paintings. Answer only with the three keywords separated by commas. Painting description:";
pub const GRADING_COUNT_LEAD: &str = "These are";
pub const GRADING_LEAD: &str = "paintings created by a young male art student. These are the descriptions of the paintings provided by the art student:";
pub const GRADING_CLOSING: &str = "Provide criticism and a score from 0 to 10 to each painting presented above like an art critic would, where the images are ordered from left to right.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(&'static str),
    Slot(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("{template} template: slot `{slot}` is empty")]
    EmptySlot { template: TemplateId, slot: &'static str },
    #[error("{template} template: slot `{slot}` was not supplied")]
    MissingSlot { template: TemplateId, slot: &'static str },
    #[error("grading template expects {expected} art prompts, got {found}")]
    WrongCount { expected: usize, found: usize },
}

impl PromptTemplate {
    /// Fill every slot from `values` (slot name, payload) and join.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut parts = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            match *seg {
                Segment::Literal(text) => parts.push(text),
                Segment::Slot(name) => {
                    let value =
                        values
                            .iter()
                            .find(|(k, _)| *k == name)
                            .map(|(_, v)| *v)
                            .ok_or(TemplateError::MissingSlot {
                                template: self.id,
                                slot: name,
                            })?;
                    if value.trim().is_empty() {
                        return Err(TemplateError::EmptySlot {
                            template: self.id,
                            slot: name,
                        });
                    }
                    parts.push(value);
                }
            }
        }
        Ok(parts.join(" "))
    }
}

pub fn render_art_prompt_request(domain_desc: &str, artist_desc: &str) -> Result<String, TemplateError> {
    TemplateId::ArtCreation
        .template()
        .render(&[("domain", domain_desc), ("artist", artist_desc)])
}

pub fn render_critique_request(
    domain_desc: &str,
    critic_desc: &str,
    art_prompt: &str,
) -> Result<String, TemplateError> {
    TemplateId::Critique.template().render(&[
        ("domain", domain_desc),
        ("critic", critic_desc),
        ("art_prompt", art_prompt),
    ])
}

pub fn render_reflection_request(
    domain_desc: &str,
    art_prompt: &str,
    critique: &str,
    artist_desc: &str,
) -> Result<String, TemplateError> {
    TemplateId::Reflection.template().render(&[
        ("domain", domain_desc),
        ("art_prompt", art_prompt),
        ("critique", critique),
        ("artist", artist_desc),
    ])
}

pub fn render_keyword_request(artwork_description: &str) -> Result<String, TemplateError> {
    TemplateId::KeywordExtraction
        .template()
        .render(&[("description", artwork_description)])
}

/// Enumerate `art_prompts` (one per line, `1. ...`) inside the grading
/// prompt. `expected` is the run's iteration count.
pub fn render_grading_request(art_prompts: &[String], expected: usize) -> Result<String, TemplateError> {
    if art_prompts.len() != expected {
        return Err(TemplateError::WrongCount {
            expected,
            found: art_prompts.len(),
        });
    }
    if art_prompts.iter().any(|p| p.trim().is_empty()) {
        return Err(TemplateError::EmptySlot {
            template: TemplateId::Grading,
            slot: "art_prompts",
        });
    }
    let count = expected.to_string();
    let listing = enumerate_prompts(art_prompts);
    TemplateId::Grading
        .template()
        .render(&[("count", &count), ("art_prompts", &listing)])
}

pub fn enumerate_prompts(art_prompts: &[String]) -> String {
    art_prompts
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{}. {}", i + 1, p))
        .collect::<Vec<_>>()
        .join("\n")
}

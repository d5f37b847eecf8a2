//! View prompts: templates that wrap a question with a description of the
//! viewpoints shown in the image.
//!
//! Template bodies may use these placeholders:
//!
//! | placeholder     | expands to                                         |
//! |-----------------|----------------------------------------------------|
//! | `{question}`    | the question, verbatim (required, exactly once)    |
//! | `{view name}`   | name of the first panel, e.g. `left view`          |
//! | `{n}`           | number of panels                                   |
//! | `{panel names}` | comma-separated panel names, left to right         |
//!
//! Substitution is a single pass over the template, so placeholder-looking
//! text inside a question is inserted literally.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::stitch::ViewConfiguration;

pub const NO_TEMPLATE_ID: &str = "none";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PromptError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("no enabled template covers {0}")]
    NoTemplate(ViewConfiguration),
    #[error("template {id}: {message}")]
    Template { id: String, message: String },
    #[error("template file: {0}")]
    Parse(String),
    #[error("template set coverage: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Coverage(Vec<CoverageViolation>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverageViolation {
    Uncovered(ViewConfiguration),
    Overlap(ViewConfiguration, Vec<String>),
}

impl std::fmt::Display for CoverageViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoverageViolation::Uncovered(c) => write!(f, "{c} is not covered by any template"),
            CoverageViolation::Overlap(c, ids) => write!(f, "{c} is covered by {}", ids.join(", ")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Placeholder {
    Question,
    ViewName,
    PanelCount,
    PanelNames,
}

impl Placeholder {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "question" => Some(Placeholder::Question),
            "view name" => Some(Placeholder::ViewName),
            "n" => Some(Placeholder::PanelCount),
            "panel names" => Some(Placeholder::PanelNames),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(Placeholder),
}

fn looks_like_placeholder(inner: &str) -> bool {
    !inner.is_empty() && inner.chars().all(|c| c.is_ascii_lowercase() || c == ' ' || c == '_')
}

fn tokenize(id: &str, body: &str) -> Result<Vec<Segment>, PromptError> {
    let mut segments = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let inner = &after[..close];
                if let Some(p) = Placeholder::parse(inner) {
                    if !text.is_empty() {
                        segments.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    segments.push(Segment::Slot(p));
                    rest = &after[close + 1..];
                } else if looks_like_placeholder(inner) {
                    return Err(PromptError::Template {
                        id: id.to_string(),
                        message: format!("unknown placeholder {{{inner}}}"),
                    });
                } else {
                    text.push('{');
                    rest = after;
                }
            }
            None => {
                text.push('{');
                rest = after;
            }
        }
    }
    text.push_str(rest);
    if !text.is_empty() {
        segments.push(Segment::Text(text));
    }
    let questions = segments.iter().filter(|s| **s == Segment::Slot(Placeholder::Question)).count();
    if questions != 1 {
        return Err(PromptError::Template {
            id: id.to_string(),
            message: format!("body must contain {{question}} exactly once, found {questions}"),
        });
    }
    Ok(segments)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    id: String,
    applies_to: BTreeSet<ViewConfiguration>,
    body: String,
    enabled: bool,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn new(
        id: impl Into<String>,
        applies_to: impl IntoIterator<Item = ViewConfiguration>,
        body: impl Into<String>,
    ) -> Result<Self, PromptError> {
        let id = id.into();
        let body = body.into();
        if id.trim().is_empty() {
            return Err(PromptError::Template { id, message: "empty template id".into() });
        }
        let segments = tokenize(&id, &body)?;
        Ok(PromptTemplate { id, applies_to: applies_to.into_iter().collect(), body, enabled: true, segments })
    }

    pub fn disabled(mut self) -> Self {
        self.enabled = false;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn applies_to(&self) -> &BTreeSet<ViewConfiguration> {
        &self.applies_to
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    fn expand(&self, question: &str, configuration: ViewConfiguration) -> String {
        let members = configuration.members();
        let names: Vec<&str> = members.iter().map(|l| l.display_name()).collect();
        let mut out = String::with_capacity(self.body.len() + question.len());
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(Placeholder::Question) => out.push_str(question),
                Segment::Slot(Placeholder::ViewName) => out.push_str(names[0]),
                Segment::Slot(Placeholder::PanelCount) => out.push_str(&members.len().to_string()),
                Segment::Slot(Placeholder::PanelNames) => out.push_str(&names.join(", ")),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub text: String,
    pub question: String,
    pub configuration: ViewConfiguration,
    pub template_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    templates: BTreeMap<String, TemplateEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateEntry {
    applies_to: Vec<String>,
    body: String,
    #[serde(default = "default_true")]
    enabled: bool,
}

fn default_true() -> bool {
    true
}

/// A set of templates; see [`TemplateSet::validate`] for the coverage rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: Vec<PromptTemplate>,
}

const ORIGINAL_BODY: &str = "The image shows the scene from its original camera viewpoint ({view name}).";
const SINGLE_BODY: &str = "The image shows the scene rendered from a different camera viewpoint ({view name}).";
const MULTI_BODY: &str =
    "The image contains {n} panels left-to-right: {panel names}. Each panel shows the same scene from a different viewpoint.";

impl TemplateSet {
    pub fn new(templates: Vec<PromptTemplate>) -> Self {
        let mut templates = templates;
        templates.sort_by(|a, b| a.id.cmp(&b.id));
        TemplateSet { templates }
    }

    /// Built-in templates: one for the original image, one for single
    /// synthesized views and one for multi-panel composites.
    /// `answer_instruction` appends a Yes/No instruction before the question.
    pub fn defaults(answer_instruction: bool) -> Self {
        use ViewConfiguration::*;
        let with = |preamble: &str, instruction: &str| {
            if answer_instruction {
                format!("{preamble} {instruction} {{question}}")
            } else {
                format!("{preamble} {{question}}")
            }
        };
        let templates = vec![
            PromptTemplate::new(
                "original",
                [Origin],
                with(ORIGINAL_BODY, "Answer the question about spatial relations in the scene with Yes or No."),
            ),
            PromptTemplate::new(
                "single_view",
                [LeftView, RightView, RandomView],
                with(
                    SINGLE_BODY,
                    "Answer the question about spatial relations in the original scene with Yes or No.",
                ),
            ),
            PromptTemplate::new(
                "multi_view",
                [MultiView, OriginLeft, OriginLeftRight, OriginMulti],
                with(MULTI_BODY, "Answer with Yes or No."),
            ),
        ];
        TemplateSet::new(templates.into_iter().map(|t| t.expect("built-in template")).collect())
    }

    /// Parses a TOML template file:
    ///
    /// ```toml
    /// [templates.single_view]
    /// applies_to = ["L_V", "R_V", "RA_V"]
    /// body = "... {question}"
    /// enabled = true   # optional
    /// ```
    ///
    /// Coverage is not checked here; call [`TemplateSet::validate`].
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let file: TemplateFile = toml::from_str(text).map_err(|e| PromptError::Parse(e.to_string()))?;
        let mut templates = Vec::with_capacity(file.templates.len());
        for (id, entry) in file.templates {
            let mut applies = Vec::with_capacity(entry.applies_to.len());
            for name in &entry.applies_to {
                let c = name.parse::<ViewConfiguration>().map_err(|e| PromptError::Template {
                    id: id.clone(),
                    message: e.to_string(),
                })?;
                if applies.contains(&c) {
                    return Err(PromptError::Template { id: id.clone(), message: format!("{c} listed twice") });
                }
                applies.push(c);
            }
            let mut t = PromptTemplate::new(id, applies, entry.body)?;
            t.enabled = entry.enabled;
            templates.push(t);
        }
        Ok(TemplateSet::new(templates))
    }

    /// Parses and rejects sets with incomplete or overlapping coverage.
    pub fn parse_validated(text: &str) -> Result<Self, PromptError> {
        let set = TemplateSet::parse(text)?;
        let violations = set.validate();
        if !violations.is_empty() {
            return Err(PromptError::Coverage(violations));
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Parse(format!("{}: {e}", path.display())))?;
        TemplateSet::parse_validated(&text)
    }

    pub fn to_toml(&self) -> String {
        let file = TemplateFile {
            templates: self
                .templates
                .iter()
                .map(|t| {
                    (
                        t.id.clone(),
                        TemplateEntry {
                            applies_to: t.applies_to.iter().map(|c| c.name().to_string()).collect(),
                            body: t.body.clone(),
                            enabled: t.enabled,
                        },
                    )
                })
                .collect(),
        };
        toml::to_string(&file).expect("template set serializes")
    }

    pub fn templates(&self) -> &[PromptTemplate] {
        &self.templates
    }

    /// Every configuration must be covered by exactly one enabled template.
    pub fn validate(&self) -> Vec<CoverageViolation> {
        let mut violations = Vec::new();
        for c in ViewConfiguration::ALL {
            let ids: Vec<String> = self
                .templates
                .iter()
                .filter(|t| t.enabled && t.applies_to.contains(&c))
                .map(|t| t.id.clone())
                .collect();
            match ids.len() {
                0 => violations.push(CoverageViolation::Uncovered(c)),
                1 => {}
                _ => violations.push(CoverageViolation::Overlap(c, ids)),
            }
        }
        violations
    }

    pub fn template_for(&self, configuration: ViewConfiguration) -> Option<&PromptTemplate> {
        self.templates.iter().find(|t| t.enabled && t.applies_to.contains(&configuration))
    }

    /// SHA-256 over the canonical form of every template, in id order.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.templates {
            for part in [t.id.as_str(), if t.enabled { "1" } else { "0" }, t.body.as_str()] {
                h.update((part.len() as u64).to_le_bytes());
                h.update(part.as_bytes());
            }
            for c in &t.applies_to {
                h.update(c.name().as_bytes());
                h.update([0]);
            }
        }
        hex::encode(h.finalize())
    }
}

/// Renders `question` for `configuration`. With `prompt_on = false` the
/// text is the bare question.
pub fn render(
    question: &str,
    configuration: ViewConfiguration,
    templates: &TemplateSet,
    prompt_on: bool,
) -> Result<PromptInstance, PromptError> {
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    if !prompt_on {
        return Ok(PromptInstance {
            text: question.to_string(),
            question: question.to_string(),
            configuration,
            template_id: NO_TEMPLATE_ID.to_string(),
        });
    }
    let template = templates.template_for(configuration).ok_or(PromptError::NoTemplate(configuration))?;
    Ok(PromptInstance {
        text: template.expand(question, configuration),
        question: question.to_string(),
        configuration,
        template_id: template.id.clone(),
    })
}

//! Coder and feedback prompts, and the per-episode conversation history.
//!
//! Templates are plain text with `{name}` placeholders (`{{` and `}}` for
//! literal braces). The default set lives under `data/templates/` and is
//! compiled in; [`TemplateSet::from_dir`] overrides it file by file from a
//! directory with the same layout:
//!
//! ```text
//! templates/<family descriptor>/coder.txt
//! templates/feedback.txt
//! templates/informed_feedback.txt
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::registry::{Family, ParamValue, ProblemInstance};

/// Longest run output embedded in a feedback prompt, in characters.
pub const FEEDBACK_OUTPUT_LIMIT: usize = 8000;

/// Software-stack statement used when the campaign does not set one.
pub const DEFAULT_STACK: &str = "Python 3 with numpy, scipy and qiskit 1.x (qiskit-aer available). \
Do not install packages, access the network, or read files; the script must run offline in a fresh directory.";

/// The machine-parseable output line every generated script must print.
pub const OUTPUT_CONTRACT: &str = "print the final answer as the last line of standard output, \
in the exact form `RESULT: <number>` (a single floating-point number, no units or other text on that line).";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("template {template:?}: unresolved placeholder {{{name}}}")]
    UnresolvedPlaceholder { template: String, name: String },
    #[error("template {template:?}: required placeholder {{{name}}} is missing")]
    MissingPlaceholder { template: String, name: String },
    #[error("template {template:?}: unterminated placeholder")]
    Unterminated { template: String },
    #[error("no coder template for family {0:?}")]
    NoTemplate(String),
    #[error("informed feedback requires an expected value")]
    MissingExpected,
    #[error("standard feedback must not carry an expected value")]
    UnexpectedExpected,
    #[error("feedback requires a conversation with at least one completed turn")]
    EmptyConversation,
    #[error("role alternation violated: {0}")]
    Alternation(String),
    #[error("failed to read template {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Coder,
    Feedback,
    InformedFeedback,
}

impl TemplateKind {
    fn required(self) -> &'static [&'static str] {
        match self {
            TemplateKind::Coder => &["convention", "params", "stack", "output_contract"],
            TemplateKind::Feedback => &["previous_output"],
            TemplateKind::InformedFeedback => &["previous_output", "expected"],
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            TemplateKind::Coder => &[
                "title",
                "convention",
                "params",
                "stack",
                "output_contract",
                "expected_output_label",
                "descriptor",
                "instance_id",
            ],
            TemplateKind::Feedback => &["previous_output"],
            TemplateKind::InformedFeedback => &["previous_output", "expected"],
        }
    }
}

/// Feedback flavour for turns after the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    Informed,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Informed => "informed",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Variant::Standard),
            "informed" => Ok(Variant::Informed),
            other => Err(format!("unknown variant {other:?} (expected standard or informed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    id: String,
    kind: TemplateKind,
    body: String,
    pieces: Vec<Piece>,
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_pieces(id: &str, body: &str) -> Result<Vec<Piece>, PromptError> {
    let mut pieces = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    while let Some(i) = rest.find(['{', '}']) {
        text.push_str(&rest[..i]);
        let tail = &rest[i..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            text.push_str(&tail[..1]);
            rest = &tail[2..];
        } else if let Some(after) = tail.strip_prefix('}') {
            text.push('}');
            rest = after;
        } else {
            let close = tail.find('}').ok_or_else(|| PromptError::Unterminated { template: id.to_string() })?;
            let name = &tail[1..close];
            if is_ident(name) {
                if !text.is_empty() {
                    pieces.push(Piece::Text(std::mem::take(&mut text)));
                }
                pieces.push(Piece::Slot(name.to_string()));
                rest = &tail[close + 1..];
            } else {
                text.push('{');
                rest = &tail[1..];
            }
        }
    }
    text.push_str(rest);
    if !text.is_empty() {
        pieces.push(Piece::Text(text));
    }
    Ok(pieces)
}

impl PromptTemplate {
    /// Parses `body` and checks its placeholders against `kind`.
    pub fn new(id: impl Into<String>, kind: TemplateKind, body: impl Into<String>) -> Result<Self, PromptError> {
        let (id, body) = (id.into(), body.into());
        let pieces = parse_pieces(&id, &body)?;
        let slots: BTreeSet<&str> = pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s.as_str()),
                Piece::Text(_) => None,
            })
            .collect();
        if let Some(bad) = slots.iter().find(|s| !kind.allowed().contains(s)) {
            return Err(PromptError::UnresolvedPlaceholder { template: id, name: bad.to_string() });
        }
        if let Some(missing) = kind.required().iter().find(|r| !slots.contains(*r)) {
            return Err(PromptError::MissingPlaceholder { template: id, name: missing.to_string() });
        }
        Ok(Self { id, kind, body, pieces })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s.as_str()),
                Piece::Text(_) => None,
            })
            .collect()
    }

    /// Substitutes every placeholder from `values`.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.body.len());
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => out.push_str(values.get(name.as_str()).ok_or_else(|| {
                    PromptError::UnresolvedPlaceholder { template: self.id.clone(), name: name.clone() }
                })?),
            }
        }
        Ok(out)
    }
}

const BUNDLED_CODER: [(&str, &str); 5] = [
    ("condensedmatter/hubbard", include_str!("../data/templates/condensedmatter/hubbard/coder.txt")),
    ("condensedmatter/tfim", include_str!("../data/templates/condensedmatter/tfim/coder.txt")),
    ("optimization/maxcut", include_str!("../data/templates/optimization/maxcut/coder.txt")),
    ("gauge/schwinger", include_str!("../data/templates/gauge/schwinger/coder.txt")),
    ("chem/h2", include_str!("../data/templates/chem/h2/coder.txt")),
];
const BUNDLED_FEEDBACK: &str = include_str!("../data/templates/feedback.txt");
const BUNDLED_INFORMED: &str = include_str!("../data/templates/informed_feedback.txt");

/// Coder templates keyed by template id, plus the two feedback templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    coder: BTreeMap<String, PromptTemplate>,
    feedback: PromptTemplate,
    informed: PromptTemplate,
}

impl TemplateSet {
    pub fn bundled() -> Self {
        Self::build(|_| Ok(None)).expect("bundled templates are valid")
    }

    /// Bundled templates, each replaced by `dir/<relative path>` when that file exists.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        Self::build(|rel| {
            let path = dir.join(rel);
            if path.is_file() {
                std::fs::read_to_string(&path)
                    .map(Some)
                    .map_err(|e| PromptError::Io { path: path.display().to_string(), reason: e.to_string() })
            } else {
                Ok(None)
            }
        })
    }

    fn build(read: impl Fn(&str) -> Result<Option<String>, PromptError>) -> Result<Self, PromptError> {
        let mut coder = BTreeMap::new();
        for (id, default) in BUNDLED_CODER {
            let body = read(&format!("{id}/coder.txt"))?.unwrap_or_else(|| default.to_string());
            coder.insert(id.to_string(), PromptTemplate::new(id, TemplateKind::Coder, body)?);
        }
        let feedback = read("feedback.txt")?.unwrap_or_else(|| BUNDLED_FEEDBACK.to_string());
        let informed = read("informed_feedback.txt")?.unwrap_or_else(|| BUNDLED_INFORMED.to_string());
        Ok(Self {
            coder,
            feedback: PromptTemplate::new("feedback", TemplateKind::Feedback, feedback)?,
            informed: PromptTemplate::new("informed_feedback", TemplateKind::InformedFeedback, informed)?,
        })
    }

    pub fn coder(&self, id: &str) -> Result<&PromptTemplate, PromptError> {
        self.coder.get(id).ok_or_else(|| PromptError::NoTemplate(id.to_string()))
    }

    pub fn insert_coder(&mut self, template: PromptTemplate) {
        self.coder.insert(template.id.clone(), template);
    }

    pub fn feedback(&self, variant: Variant) -> &PromptTemplate {
        match variant {
            Variant::Standard => &self.feedback,
            Variant::Informed => &self.informed,
        }
    }

    /// SHA-256 over every template id and body.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for t in self.coder.values().chain([&self.feedback, &self.informed]) {
            h.update(t.id.as_bytes());
            h.update([0]);
            h.update(t.body.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::bundled()
    }
}

fn format_number(x: f64) -> String {
    format!("{x}")
}

/// One `name = value` line per parameter, defaults included.
pub fn parameter_block(instance: &ProblemInstance) -> String {
    let family = instance.family();
    instance
        .resolved_params()
        .into_iter()
        .map(|(name, value)| {
            let rendered = match &value {
                ParamValue::Number(x) => format_number(*x),
                ParamValue::Edges(_) => value.to_string(),
            };
            let description = family
                .and_then(|f| f.schema().params.iter().find(|p| p.name == name))
                .map(|p| format!("  ({})", p.description))
                .unwrap_or_default();
            format!("{name} = {rendered}{description}")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders the turn-1 prompt for `instance`.
pub fn render_coder(instance: &ProblemInstance, template: &PromptTemplate, stack: &str) -> Result<String, PromptError> {
    if template.kind != TemplateKind::Coder {
        return Err(PromptError::MissingPlaceholder { template: template.id.clone(), name: "params".into() });
    }
    let family: Option<Family> = instance.family();
    let schema = family.map(|f| f.schema());
    let mut values = BTreeMap::new();
    values.insert("params", parameter_block(instance));
    values.insert("stack", stack.to_string());
    values.insert("output_contract", format!("{}{}", OUTPUT_CONTRACT[..1].to_uppercase(), &OUTPUT_CONTRACT[1..]));
    values.insert("expected_output_label", instance.expected_output_label.clone());
    values.insert("descriptor", instance.descriptor.clone());
    values.insert("instance_id", instance.id.clone());
    if let Some(s) = schema {
        values.insert("title", s.title.to_string());
        values.insert("convention", s.convention.to_string());
    }
    template.render(&values)
}

/// Keeps at most [`FEEDBACK_OUTPUT_LIMIT`] characters, dropping from the front.
pub fn truncate_output(output: &str) -> String {
    let n = output.chars().count();
    if n <= FEEDBACK_OUTPUT_LIMIT {
        return output.to_string();
    }
    let skip = n - FEEDBACK_OUTPUT_LIMIT;
    let start = output.char_indices().nth(skip).map(|(i, _)| i).unwrap_or(output.len());
    format!("[... {skip} earlier characters omitted ...]\n{}", &output[start..])
}

/// Renders the prompt for a turn after the first.
pub fn render_feedback(
    templates: &TemplateSet,
    conv: &Conversation,
    run_output: &str,
    variant: Variant,
    expected: Option<f64>,
) -> Result<String, PromptError> {
    if conv.turns() == 0 {
        return Err(PromptError::EmptyConversation);
    }
    let mut values = BTreeMap::new();
    values.insert("previous_output", truncate_output(run_output));
    match (variant, expected) {
        (Variant::Informed, Some(x)) => {
            values.insert("expected", format_number(x));
        }
        (Variant::Informed, None) => return Err(PromptError::MissingExpected),
        (Variant::Standard, Some(_)) => return Err(PromptError::UnexpectedExpected),
        (Variant::Standard, None) => {}
    }
    templates.feedback(variant).render(&values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// Ordered chat history: an optional system message, then strictly
/// alternating user and assistant messages starting with the coder prompt.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    messages: Vec<Message>,
}

impl Conversation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_system(text: impl Into<String>) -> Self {
        Self { messages: vec![Message { role: Role::System, content: text.into() }] }
    }

    /// Validates alternation of an arbitrary message list.
    pub fn from_messages(messages: Vec<Message>) -> Result<Self, PromptError> {
        let mut conv = Conversation::new();
        for (i, m) in messages.into_iter().enumerate() {
            let expected = match conv.messages.last().map(|m| m.role) {
                None if m.role == Role::System => Role::System,
                None | Some(Role::System) | Some(Role::Assistant) => Role::User,
                Some(Role::User) => Role::Assistant,
            };
            if m.role != expected {
                return Err(PromptError::Alternation(format!("message {i} is {:?}, expected {:?}", m.role, expected)));
            }
            conv.messages.push(m);
        }
        Ok(conv)
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Completed user/assistant exchanges.
    pub fn turns(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::Assistant).count()
    }

    pub fn non_system_len(&self) -> usize {
        self.messages.iter().filter(|m| m.role != Role::System).count()
    }

    fn awaiting_user(&self) -> bool {
        !matches!(self.messages.last(), Some(Message { role: Role::User, .. }))
    }

    /// A copy with `text` appended as the pending user message.
    pub fn with_user(&self, text: impl Into<String>) -> Result<Conversation, PromptError> {
        if !self.awaiting_user() {
            return Err(PromptError::Alternation("user message after user message".into()));
        }
        let mut next = self.clone();
        next.messages.push(Message { role: Role::User, content: text.into() });
        Ok(next)
    }

    /// A copy extended by one complete exchange.
    pub fn append_turn(&self, user: impl Into<String>, assistant: impl Into<String>) -> Result<Conversation, PromptError> {
        let mut next = self.with_user(user)?;
        next.messages.push(Message { role: Role::Assistant, content: assistant.into() });
        Ok(next)
    }
}

//! The deliberation oracle: prompt templates, reply parsing, and the
//! backends that answer queries (HTTP chat endpoint, scripted heuristics,
//! replayed transcripts).

mod backends;
mod deliberator;
mod holdem;
mod http;
mod negotiation;
pub mod parse;
mod template;

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Game;

pub use backends::{query_hash, RecordingBackend, ReplayBackend, ReplayRecord, ScriptedBackend};
pub use deliberator::{Deliberator, DeliberatorConfig, Exchange, PromptStyle, Transcript};
pub use holdem::{HoldemScripted, Rating};
pub use http::{HttpBackend, HttpConfig};
pub use negotiation::{InferredValues, NegotiationScripted};
pub use template::{placeholders, TemplateSet, TEMPLATE_NAMES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle transport error: {0}")]
    Transport(String),
    #[error("could not parse oracle reply: {0}")]
    Parse(String),
    #[error("no recorded reply for query {0}")]
    ReplayMiss(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("oracle configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// Prompting strategy of an LLM baseline agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Direct,
    Cot,
    Reflexion,
    TotLite,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Direct, Variant::Cot, Variant::Reflexion, Variant::TotLite];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Direct => "direct",
            Variant::Cot => "cot",
            Variant::Reflexion => "reflexion",
            Variant::TotLite => "tot_lite",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| OracleError::Config(format!("unknown prompt variant {s:?}")))
    }
}

/// What a query asks for. Variant queries carry the turn within the variant's
/// exchange (reflexion and tot_lite take two turns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "turn")]
pub enum QueryKind {
    Hidden,
    Model,
    Reward,
    Decide,
    Variant(VariantTurn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantTurn {
    Direct,
    Cot,
    ReflexionRefine,
    TotPropose,
    TotEvaluate,
}

/// Shape of a reward reply: a value for every listed action, or a short list
/// of candidate actions (unnamed actions score 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardSchema {
    Dense,
    Candidates,
}

/// Structured inputs of one query. Backends that read text only look at the
/// rendered messages; the scripted backend answers from these fields.
#[derive(Debug, Clone)]
pub struct QueryContext<G: OracleGame> {
    pub kind: QueryKind,
    /// The deliberating seat's view of the state the query is about.
    pub view: G::View,
    /// Actions the answer must come from: the opponent's for `Model`, the
    /// deliberating seat's otherwise.
    pub legal: Vec<G::Action>,
    pub hidden: Option<G::Hidden>,
    pub space: Vec<G::Hidden>,
    pub returns: Vec<(G::Action, f64)>,
    /// Replies of earlier turns of the same exchange.
    pub prior: Vec<String>,
}

impl<G: OracleGame> QueryContext<G> {
    pub fn new(kind: QueryKind, view: G::View, legal: Vec<G::Action>) -> Self {
        QueryContext { kind, view, legal, hidden: None, space: Vec::new(), returns: Vec::new(), prior: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Query<G: OracleGame> {
    pub context: QueryContext<G>,
    pub messages: Vec<ChatMessage>,
    /// 0 for the first ask, 1 for the repair re-ask.
    pub attempt: u8,
}

/// A source of raw reply text.
pub trait Backend<G: OracleGame>: Send + Sync {
    fn complete(&self, query: &Query<G>) -> Result<String, OracleError>;
}

/// Environment hooks the oracle needs: the hidden-state type, prompt
/// rendering, reply parsing and the scripted heuristics.
pub trait OracleGame: Game {
    type Hidden: Clone + fmt::Debug + fmt::Display + PartialEq + Serialize + DeserializeOwned + Send + Sync;

    const REWARD_SCHEMA: RewardSchema;

    /// Discretized space of opponent hidden states.
    fn hidden_space() -> Vec<Self::Hidden>;

    /// Used when inference fails and by variant baselines that never infer.
    fn neutral_hidden() -> Self::Hidden;

    fn render(
        templates: &TemplateSet,
        style: PromptStyle,
        ctx: &QueryContext<Self>,
    ) -> Result<Vec<ChatMessage>, OracleError>;

    /// Instruction appended on the repair re-ask.
    fn schema_hint(kind: QueryKind) -> &'static str;

    fn parse_hidden(reply: &str, ctx: &QueryContext<Self>) -> Option<Self::Hidden>;

    /// Rewards named in the reply, in any order; unknown actions dropped.
    fn parse_rewards(reply: &str, ctx: &QueryContext<Self>) -> Vec<(Self::Action, f64)>;

    /// Turns an extracted action field (and optional extra fields) into an
    /// action; `None` when it names nothing recognisable.
    fn parse_action(fields: &parse::ActionFields) -> Option<Self::Action>;

    /// Whether a parsed action may be returned for this query.
    fn admissible(ctx: &QueryContext<Self>, action: &Self::Action) -> bool {
        ctx.legal.contains(action)
    }

    fn scripted_reply(ctx: &QueryContext<Self>) -> String;
}

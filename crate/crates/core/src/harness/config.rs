use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::baselines::MctsConfig;
use crate::bidder::ExplorationConfig;
use crate::holdem::StrengthBoostConfig;
use crate::negotiation::InstanceConfig;
use crate::oracle::{
    Backend, Deliberator, DeliberatorConfig, HttpBackend, HttpConfig, OracleGame, PromptStyle, RecordingBackend,
    ReplayBackend, ScriptedBackend, TemplateSet, Variant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    #[default]
    Holdem,
    Negotiation,
}

impl Environment {
    pub fn name(self) -> &'static str {
        match self {
            Environment::Holdem => "holdem",
            Environment::Negotiation => "negotiation",
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Environment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "holdem" => Ok(Environment::Holdem),
            "negotiation" => Ok(Environment::Negotiation),
            other => Err(HarnessError::Config(format!("unknown environment {other:?}"))),
        }
    }
}

/// Which agent sits in a seat. Written as a plain name in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AgentSpec {
    Random,
    Rule,
    Mcts,
    Bidder,
    Llm(VariantName),
}

/// Orderable wrapper so agent specs can key sorted maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariantName(u8);

impl VariantName {
    pub fn variant(self) -> Variant {
        Variant::ALL[self.0 as usize]
    }
}

impl From<Variant> for VariantName {
    fn from(v: Variant) -> Self {
        VariantName(Variant::ALL.iter().position(|x| *x == v).expect("listed variant") as u8)
    }
}

impl AgentSpec {
    pub fn name(self) -> String {
        match self {
            AgentSpec::Random => "random".into(),
            AgentSpec::Rule => "rule".into(),
            AgentSpec::Mcts => "mcts".into(),
            AgentSpec::Bidder => "bidder".into(),
            AgentSpec::Llm(v) => v.variant().name().into(),
        }
    }

    pub fn uses_oracle(self) -> bool {
        matches!(self, AgentSpec::Bidder | AgentSpec::Llm(_))
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for AgentSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "random" => AgentSpec::Random,
            "rule" => AgentSpec::Rule,
            "mcts" => AgentSpec::Mcts,
            "bidder" => AgentSpec::Bidder,
            other => AgentSpec::Llm(
                other.parse::<Variant>().map_err(|_| HarnessError::Config(format!("unknown agent {other:?}")))?.into(),
            ),
        })
    }
}

impl TryFrom<String> for AgentSpec {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AgentSpec> for String {
    fn from(a: AgentSpec) -> String {
        a.name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    #[default]
    Scripted,
    Http,
    Replay,
}

impl FromStr for OracleKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scripted" => Ok(OracleKind::Scripted),
            "http" => Ok(OracleKind::Http),
            "replay" => Ok(OracleKind::Replay),
            other => Err(HarnessError::Config(format!("unknown oracle {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub http: HttpConfig,
    /// Transcript read by the replay oracle.
    pub replay: Option<PathBuf>,
    /// Where to save every (query hash, reply) pair seen during the run.
    pub record: Option<PathBuf>,
    pub style: PromptStyle,
    /// Directory of `<template>.txt` overrides.
    pub templates: Option<PathBuf>,
    pub log_prompts: bool,
    pub tot_candidates: Option<usize>,
}

/// A deliberator plus the recorder wrapped around its backend, if any.
pub struct OracleHandle<G: OracleGame> {
    pub deliberator: Arc<Deliberator<G>>,
    pub recorder: Option<Arc<RecordingBackend<G>>>,
}

impl<G: OracleGame> OracleHandle<G> {
    pub fn save_recording(&self, path: &Path) -> Result<(), HarnessError> {
        if let Some(r) = &self.recorder {
            r.save(path)?;
        }
        Ok(())
    }
}

impl OracleConfig {
    pub fn build<G: OracleGame>(&self) -> Result<OracleHandle<G>, HarnessError> {
        let templates = match &self.templates {
            Some(dir) => TemplateSet::with_overrides(dir)?,
            None => TemplateSet::shipped(),
        };
        let backend: Arc<dyn Backend<G>> = match self.kind {
            OracleKind::Scripted => Arc::new(ScriptedBackend),
            OracleKind::Http => Arc::new(HttpBackend::new(self.http.clone())?),
            OracleKind::Replay => {
                let path = self
                    .replay
                    .as_ref()
                    .ok_or_else(|| HarnessError::Config("the replay oracle needs a transcript path".into()))?;
                Arc::new(ReplayBackend::load(path)?)
            }
        };
        let (backend, recorder) = if self.record.is_some() {
            let r = Arc::new(RecordingBackend::new(backend));
            (r.clone() as Arc<dyn Backend<G>>, Some(r))
        } else {
            (backend, None)
        };
        let mut cfg = DeliberatorConfig { style: self.style, log_prompts: self.log_prompts, ..Default::default() };
        if let Some(k) = self.tot_candidates {
            cfg.tot_candidates = k;
        }
        Ok(OracleHandle { deliberator: Arc::new(Deliberator::new(backend, Arc::new(templates), cfg)), recorder })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoldemConfig {
    pub boost: StrengthBoostConfig,
    /// Reference agent for the rational-degree metric.
    pub reference: AgentSpec,
}

impl Default for HoldemConfig {
    fn default() -> Self {
        HoldemConfig { boost: StrengthBoostConfig::default(), reference: AgentSpec::Rule }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    /// JSONL game logs.
    pub logs: Option<PathBuf>,
    /// Report path; the extension picks CSV or JSON.
    pub report: Option<PathBuf>,
    /// Store every oracle exchange (kind, attempt, hash) in the logs.
    pub log_exchanges: bool,
    /// Store wall-clock time per game. Off by default because it makes
    /// otherwise identical runs differ.
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub environment: Environment,
    pub player: AgentSpec,
    pub opponent: AgentSpec,
    /// Tournament rows and columns; empty means just `player` / `opponent`.
    pub players: Vec<AgentSpec>,
    pub opponents: Vec<AgentSpec>,
    pub sessions: usize,
    pub mirrored: bool,
    pub seed: u64,
    /// Worker threads for games; `None` uses every core.
    pub workers: Option<usize>,
    pub oracle: OracleConfig,
    pub exploration: ExplorationConfig,
    pub mcts: MctsConfig,
    pub holdem: HoldemConfig,
    pub negotiation: InstanceConfig,
    pub output: OutputConfig,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            environment: Environment::Holdem,
            player: AgentSpec::Bidder,
            opponent: AgentSpec::Random,
            players: Vec::new(),
            opponents: Vec::new(),
            sessions: 100,
            mirrored: true,
            seed: 0,
            workers: None,
            oracle: OracleConfig::default(),
            exploration: ExplorationConfig::default(),
            mcts: MctsConfig::default(),
            holdem: HoldemConfig::default(),
            negotiation: InstanceConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl MatchConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn games(&self) -> usize {
        self.sessions * if self.mirrored { 2 } else { 1 }
    }

    /// Exploration settings as used for this environment. Negotiation has
    /// hundreds of legal proposals, so BIDDER branches on the two best
    /// unless a limit is configured.
    pub fn effective_exploration(&self) -> ExplorationConfig {
        let mut e = self.exploration.clone();
        if self.environment == Environment::Negotiation && e.max_branching.is_none() {
            e.max_branching = Some(2);
        }
        e
    }

    pub fn roster(&self) -> (Vec<AgentSpec>, Vec<AgentSpec>) {
        let rows = if self.players.is_empty() { vec![self.player] } else { self.players.clone() };
        let cols = if self.opponents.is_empty() { vec![self.opponent] } else { self.opponents.clone() };
        (rows, cols)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.sessions == 0 {
            return Err(HarnessError::Config("sessions must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(HarnessError::Config("workers must be positive".into()));
        }
        self.effective_exploration().validate()?;
        let (rows, cols) = self.roster();
        let mut agents: Vec<AgentSpec> = rows.into_iter().chain(cols).collect();
        if self.environment == Environment::Holdem {
            agents.push(self.holdem.reference);
        }
        for a in agents {
            if matches!(
                (self.environment, a),
                (Environment::Holdem, AgentSpec::Mcts) | (Environment::Negotiation, AgentSpec::Rule)
            ) {
                return Err(HarnessError::Config(format!("agent {a} is not available for {}", self.environment)));
            }
        }
        Ok(())
    }
}

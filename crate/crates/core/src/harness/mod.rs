//! Tournament runner: seeded sessions (optionally mirrored), parallel game
//! execution with deterministic output order, JSONL logs, metrics and
//! reports.

mod config;
mod metrics;
mod report;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::{mpsc, Arc};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use config::{
    AgentSpec, Environment, HoldemConfig, MatchConfig, OracleConfig, OracleHandle, OracleKind, OutputConfig,
    VariantName,
};
pub use metrics::{
    action_distribution, agreement_rate, compute_report, mean_payoffs, negotiation_metrics, rational_degree,
    MatchupMetrics, MetricsReport, NegotiationMetrics,
};
pub use report::{emit_report, matrix_path, payoff_matrix, read_report, PayoffMatrix, ReportFormat, CSV_COLUMNS};

use crate::baselines::{
    checked_act, Agent, AgentError, BidderAgent, LlmAgent, MctsAgent, MctsConfig, RandomAgent, RuleAgent,
};
use crate::bidder::{BidderError, ExplorationConfig};
use crate::game::{settle, Game, GameError, PlayerId};
use crate::holdem::{sample_session, HoldemError, HoldemState, SessionSpec};
use crate::negotiation::{sample_instance, NegotiationError, NegotiationInstance, NegotiationState};
use crate::oracle::{Deliberator, Exchange, OracleError, OracleGame};

pub const SCHEMA_VERSION: u32 = 1;

/// Hard stop for runaway games; real games end long before.
const MAX_STEPS: usize = 10_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("log format error: {0}")]
    Log(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
    #[error("metric undefined: {0}")]
    Metric(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Bidder(#[from] BidderError),
    #[error(transparent)]
    Holdem(#[from] HoldemError),
    #[error(transparent)]
    Negotiation(#[from] NegotiationError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which agent of a matchup made a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Player,
    Opponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub step: usize,
    pub seat: PlayerId,
    pub role: Role,
    pub action: Value,
    pub label: String,
    pub oracle_calls: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deliberation: Option<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchanges: Option<Vec<Exchange>>,
}

/// One finished (or failed) game; one JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameLog {
    pub schema_version: u32,
    pub environment: Environment,
    pub session: usize,
    pub mirrored: bool,
    pub seed: u64,
    pub player: String,
    pub opponent: String,
    pub player_seat: PlayerId,
    pub setup: Value,
    pub decisions: Vec<DecisionLog>,
    /// Seat-indexed terminal payoffs; absent when the game failed.
    pub payoffs: Option<[f64; 2]>,
    pub oracle_calls: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GameLog {
    pub fn completed(&self) -> bool {
        self.payoffs.is_some() && self.error.is_none()
    }

    pub fn player_payoff(&self) -> Option<f64> {
        self.payoffs.map(|p| p[self.player_seat.index()])
    }

    pub fn matchup(&self) -> String {
        format!("{} vs {}", self.player, self.opponent)
    }

    pub fn to_line(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Per-environment hooks the runner needs.
pub trait HarnessGame: OracleGame {
    type Setup: Clone + Serialize + DeserializeOwned + Send + Sync;
    const ENV: Environment;

    fn sample(seed: u64, cfg: &MatchConfig) -> Result<Self::Setup, HarnessError>;
    fn mirror(setup: &Self::Setup) -> Self::Setup;
    fn player_seat(setup: &Self::Setup) -> PlayerId;
    fn initial(setup: &Self::Setup) -> Result<Self, HarnessError>;
    fn build_agent(spec: AgentSpec, kit: &AgentKit<Self>) -> Result<Box<dyn Agent<Self>>, HarnessError>;
}

/// Shared ingredients for building agents.
pub struct AgentKit<G: OracleGame> {
    pub oracle: Option<Arc<Deliberator<G>>>,
    pub exploration: ExplorationConfig,
    pub mcts: MctsConfig,
}

impl<G: OracleGame> AgentKit<G> {
    fn oracle(&self, spec: AgentSpec) -> Result<Arc<Deliberator<G>>, HarnessError> {
        self.oracle.clone().ok_or_else(|| HarnessError::Config(format!("agent {spec} needs an oracle")))
    }

    fn common(&self, spec: AgentSpec) -> Result<Option<Box<dyn Agent<G>>>, HarnessError> {
        Ok(match spec {
            AgentSpec::Random => Some(Box::new(RandomAgent)),
            AgentSpec::Bidder => Some(Box::new(BidderAgent::new(self.exploration.clone(), self.oracle(spec)?))),
            AgentSpec::Llm(v) => Some(Box::new(LlmAgent::new(v.variant(), self.oracle(spec)?))),
            AgentSpec::Rule | AgentSpec::Mcts => None,
        })
    }
}

fn unavailable(spec: AgentSpec, env: Environment) -> HarnessError {
    HarnessError::Config(format!("agent {spec} is not available for {env}"))
}

impl HarnessGame for HoldemState {
    type Setup = SessionSpec;
    const ENV: Environment = Environment::Holdem;

    fn sample(seed: u64, cfg: &MatchConfig) -> Result<SessionSpec, HarnessError> {
        Ok(sample_session(seed, &cfg.holdem.boost)?)
    }

    fn mirror(setup: &SessionSpec) -> SessionSpec {
        setup.mirror()
    }

    fn player_seat(setup: &SessionSpec) -> PlayerId {
        setup.player_seat()
    }

    fn initial(setup: &SessionSpec) -> Result<Self, HarnessError> {
        Ok(HoldemState::from_session(setup)?)
    }

    fn build_agent(spec: AgentSpec, kit: &AgentKit<Self>) -> Result<Box<dyn Agent<Self>>, HarnessError> {
        if let Some(a) = kit.common(spec)? {
            return Ok(a);
        }
        match spec {
            AgentSpec::Rule => Ok(Box::new(RuleAgent)),
            _ => Err(unavailable(spec, Self::ENV)),
        }
    }
}

impl HarnessGame for NegotiationState {
    type Setup = NegotiationInstance;
    const ENV: Environment = Environment::Negotiation;

    fn sample(seed: u64, cfg: &MatchConfig) -> Result<NegotiationInstance, HarnessError> {
        Ok(sample_instance(seed, &cfg.negotiation)?)
    }

    fn mirror(setup: &NegotiationInstance) -> NegotiationInstance {
        setup.mirror()
    }

    fn player_seat(setup: &NegotiationInstance) -> PlayerId {
        setup.player_seat()
    }

    fn initial(setup: &NegotiationInstance) -> Result<Self, HarnessError> {
        Ok(setup.initial_state()?)
    }

    fn build_agent(spec: AgentSpec, kit: &AgentKit<Self>) -> Result<Box<dyn Agent<Self>>, HarnessError> {
        if let Some(a) = kit.common(spec)? {
            return Ok(a);
        }
        match spec {
            AgentSpec::Mcts => Ok(Box::new(MctsAgent { config: kit.mcts })),
            _ => Err(unavailable(spec, Self::ENV)),
        }
    }
}

/// Seed of session `index`, derived from the master seed independently of
/// execution order.
pub fn session_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64 + 1);
    rng.gen()
}

/// Per-seat agent randomness for one game.
fn seat_rng(seed: u64, mirrored: bool, seat: PlayerId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 + 2 * mirrored as u64 + seat.index() as u64);
    rng
}

#[derive(Debug, Clone, Copy)]
struct Job {
    pair: usize,
    session: usize,
    mirrored: bool,
}

struct Matchup<'a, G: HarnessGame> {
    player: &'a dyn Agent<G>,
    opponent: &'a dyn Agent<G>,
}

fn play<G: HarnessGame>(cfg: &MatchConfig, job: Job, m: &Matchup<'_, G>) -> GameLog {
    let seed = session_seed(cfg.seed, job.session);
    let started = Instant::now();
    let mut log = GameLog {
        schema_version: SCHEMA_VERSION,
        environment: G::ENV,
        session: job.session,
        mirrored: job.mirrored,
        seed,
        player: m.player.name(),
        opponent: m.opponent.name(),
        player_seat: if job.mirrored { PlayerId::P1 } else { PlayerId::P0 },
        setup: Value::Null,
        decisions: Vec::new(),
        payoffs: None,
        oracle_calls: 0,
        wall_ms: None,
        error: None,
    };
    if let Err(e) = play_into::<G>(cfg, seed, job.mirrored, m, &mut log) {
        log.error = Some(e.to_string());
        log.payoffs = None;
    }
    if cfg.output.record_timing {
        log.wall_ms = Some(started.elapsed().as_millis() as u64);
    }
    log
}

fn play_into<G: HarnessGame>(
    cfg: &MatchConfig,
    seed: u64,
    mirrored: bool,
    m: &Matchup<'_, G>,
    log: &mut GameLog,
) -> Result<(), HarnessError> {
    let mut setup = G::sample(seed, cfg)?;
    if mirrored {
        setup = G::mirror(&setup);
    }
    log.setup = serde_json::to_value(&setup)?;
    let player_seat = G::player_seat(&setup);
    log.player_seat = player_seat;
    let mut rngs = PlayerId::both().map(|s| seat_rng(seed, mirrored, s));
    let mut state = settle(G::initial(&setup)?)?;
    while let Some(seat) = state.current_player() {
        if log.decisions.len() >= MAX_STEPS {
            return Err(HarnessError::Game(GameError::Contract("game exceeded the step limit".into())));
        }
        let (role, agent) = if seat == player_seat { (Role::Player, m.player) } else { (Role::Opponent, m.opponent) };
        let d = checked_act(agent, &state, seat, &mut rngs[seat.index()])?;
        let calls = d.transcript.calls();
        log.oracle_calls += calls;
        log.decisions.push(DecisionLog {
            step: state.step(),
            seat,
            role,
            action: serde_json::to_value(&d.action)?,
            label: d.action.to_string(),
            oracle_calls: calls,
            deliberation: d.record,
            notes: d.transcript.notes.clone(),
            exchanges: cfg.output.log_exchanges.then(|| d.transcript.exchanges.clone()),
        });
        state = settle(state.apply(&d.action)?)?;
    }
    log.payoffs = Some([state.payoff(PlayerId::P0)?, state.payoff(PlayerId::P1)?]);
    Ok(())
}

/// Runs every (player, opponent) pair of the roster, calling `sink` with each
/// log in a fixed order (pair, session, original before mirror) no matter
/// how the worker pool schedules the games.
pub fn run_games<G: HarnessGame>(
    cfg: &MatchConfig,
    kit: &AgentKit<G>,
    sink: &mut dyn FnMut(&GameLog) -> Result<(), HarnessError>,
) -> Result<Vec<GameLog>, HarnessError> {
    cfg.validate()?;
    if cfg.environment != G::ENV {
        return Err(HarnessError::Config(format!("config is for {} but the runner is {}", cfg.environment, G::ENV)));
    }
    let (rows, cols) = cfg.roster();
    let mut agents: BTreeMap<AgentSpec, Box<dyn Agent<G>>> = BTreeMap::new();
    for spec in rows.iter().chain(&cols) {
        if !agents.contains_key(spec) {
            agents.insert(*spec, G::build_agent(*spec, kit)?);
        }
    }
    let pairs: Vec<(AgentSpec, AgentSpec)> = rows.iter().flat_map(|r| cols.iter().map(move |c| (*r, *c))).collect();
    let mut jobs = Vec::new();
    for pair in 0..pairs.len() {
        for session in 0..cfg.sessions {
            jobs.push(Job { pair, session, mirrored: false });
            if cfg.mirrored {
                jobs.push(Job { pair, session, mirrored: true });
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;

    let mut out = Vec::with_capacity(jobs.len());
    let mut pending: BTreeMap<usize, GameLog> = BTreeMap::new();
    let (tx, rx) = mpsc::channel::<(usize, GameLog)>();
    let agents = &agents;
    let pairs = &pairs;
    let jobs = &jobs;
    std::thread::scope(|scope| -> Result<(), HarnessError> {
        scope.spawn(move || {
            pool.install(|| {
                jobs.par_iter().enumerate().for_each_with(tx, |tx, (i, job)| {
                    let (p, o) = pairs[job.pair];
                    let m = Matchup { player: agents[&p].as_ref(), opponent: agents[&o].as_ref() };
                    let _ = tx.send((i, play::<G>(cfg, *job, &m)));
                });
            });
        });
        // single appender: emit strictly in job order
        for (i, log) in rx {
            pending.insert(i, log);
            while let Some(log) = pending.remove(&out.len()) {
                sink(&log)?;
                out.push(log);
            }
        }
        Ok(())
    })?;
    if out.len() != jobs.len() {
        return Err(HarnessError::Log(format!("only {} of {} games reported", out.len(), jobs.len())));
    }
    Ok(out)
}

/// Builds the oracle and agents for `cfg.environment` and runs the roster.
pub fn run_tournament(
    cfg: &MatchConfig,
    sink: &mut dyn FnMut(&GameLog) -> Result<(), HarnessError>,
) -> Result<Vec<GameLog>, HarnessError> {
    match cfg.environment {
        Environment::Holdem => run_env::<HoldemState>(cfg, sink),
        Environment::Negotiation => run_env::<NegotiationState>(cfg, sink),
    }
}

fn run_env<G: HarnessGame>(
    cfg: &MatchConfig,
    sink: &mut dyn FnMut(&GameLog) -> Result<(), HarnessError>,
) -> Result<Vec<GameLog>, HarnessError> {
    cfg.validate()?;
    let (rows, cols) = cfg.roster();
    let needs_oracle = rows.iter().chain(&cols).any(|a| a.uses_oracle());
    let handle = if needs_oracle { Some(cfg.oracle.build::<G>()?) } else { None };
    let kit = AgentKit {
        oracle: handle.as_ref().map(|h| h.deliberator.clone()),
        exploration: cfg.effective_exploration(),
        mcts: cfg.mcts,
    };
    let logs = run_games::<G>(cfg, &kit, sink)?;
    if let (Some(h), Some(path)) = (&handle, &cfg.oracle.record) {
        h.save_recording(path)?;
    }
    Ok(logs)
}

/// `run_tournament` for the single `player` / `opponent` pair.
pub fn run_match(cfg: &MatchConfig) -> Result<Vec<GameLog>, HarnessError> {
    let single = MatchConfig { players: Vec::new(), opponents: Vec::new(), ..cfg.clone() };
    run_tournament(&single, &mut |_| Ok(()))
}

/// Appends logs to a JSONL file, one game per line, flushing each line.
pub struct LogWriter {
    out: std::io::BufWriter<std::fs::File>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        Ok(LogWriter { out: std::io::BufWriter::new(std::fs::File::create(path)?) })
    }

    pub fn append(&mut self, log: &GameLog) -> Result<(), HarnessError> {
        writeln!(self.out, "{}", log.to_line()?)?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_logs(path: &Path) -> Result<Vec<GameLog>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let log: GameLog =
                serde_json::from_str(l).map_err(|e| HarnessError::Log(format!("line {}: {e}", i + 1)))?;
            if log.schema_version != SCHEMA_VERSION {
                return Err(HarnessError::Log(format!(
                    "line {}: schema version {} (expected {SCHEMA_VERSION})",
                    i + 1,
                    log.schema_version
                )));
            }
            Ok(log)
        })
        .collect()
}

/// Re-simulates a log's actions from its setup; returns every state where a
/// decision was taken and the terminal state.
pub fn replay<G: HarnessGame>(log: &GameLog) -> Result<(Vec<G>, G), HarnessError> {
    if log.environment != G::ENV {
        return Err(HarnessError::Log(format!("log is for {}", log.environment)));
    }
    let setup: G::Setup = serde_json::from_value(log.setup.clone())?;
    let mut state = settle(G::initial(&setup)?)?;
    let mut states = Vec::with_capacity(log.decisions.len());
    for d in &log.decisions {
        if state.current_player() != Some(d.seat) {
            return Err(HarnessError::Replay(format!("step {}: seat {} is not to act", d.step, d.seat)));
        }
        let action: G::Action = serde_json::from_value(d.action.clone())?;
        let next = settle(state.apply(&action)?)?;
        states.push(state);
        state = next;
    }
    Ok((states, state))
}

/// Checks that re-simulating a completed log reproduces its payoffs exactly.
pub fn verify_replay(log: &GameLog) -> Result<(), HarnessError> {
    let Some(logged) = log.payoffs else {
        return Ok(());
    };
    let payoffs = match log.environment {
        Environment::Holdem => terminal_payoffs(&replay::<HoldemState>(log)?.1)?,
        Environment::Negotiation => terminal_payoffs(&replay::<NegotiationState>(log)?.1)?,
    };
    if payoffs != logged {
        return Err(HarnessError::Replay(format!(
            "session {} (mirrored {}): logged {logged:?}, replayed {payoffs:?}",
            log.session, log.mirrored
        )));
    }
    Ok(())
}

fn terminal_payoffs<G: Game>(s: &G) -> Result<[f64; 2], HarnessError> {
    if !s.is_terminal() {
        return Err(HarnessError::Replay("replayed game did not finish".into()));
    }
    Ok([s.payoff(PlayerId::P0)?, s.payoff(PlayerId::P1)?])
}

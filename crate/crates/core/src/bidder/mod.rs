//! The deliberation engine: infer the opponent's hidden state, explore
//! bounded futures with one modeled opponent reply per step, aggregate
//! discounted rewards per root action and decide.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Game, GameError, PlayerId, ToAct};
use crate::oracle::{Deliberator, OracleError, OracleGame, Transcript, Variant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BidderError {
    #[error("invalid exploration config: {0}")]
    Config(String),
    #[error("no traces to aggregate")]
    NoTraces,
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// How traces sharing a root action combine into that action's return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Best trace, as in the method description.
    #[default]
    Max,
    /// Average over traces; an ablation, not the method's rule.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationConfig {
    pub horizon: usize,
    pub beta: f64,
    pub aggregation: Aggregation,
    /// Explore only the k best actions (by estimated reward) at each state.
    pub max_branching: Option<usize>,
    /// Modeled opponent replies per step; values above 1 branch on the
    /// opponent's k most likely actions.
    pub opponent_branching: usize,
    /// Explore root branches on the rayon pool.
    pub parallel: bool,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            horizon: 2,
            beta: 0.8,
            aggregation: Aggregation::Max,
            max_branching: None,
            opponent_branching: 1,
            parallel: false,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<(), BidderError> {
        if self.horizon == 0 {
            return Err(BidderError::Config("horizon must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(BidderError::Config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if self.max_branching == Some(0) || self.opponent_branching == 0 {
            return Err(BidderError::Config("branching limits must be positive".into()));
        }
        Ok(())
    }
}

/// Why a trace stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum TraceEnd {
    Horizon,
    Terminal,
    Chance,
    /// The oracle failed after the recorded steps.
    Failed(String),
}

/// One explored path: player actions, the modeled opponent reply after each
/// (if the opponent moved), and the reward estimated for each player action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationTrace<A> {
    pub actions: Vec<A>,
    pub opponent: Vec<Option<A>>,
    pub rewards: Vec<f64>,
    pub end: TraceEnd,
}

impl<A: Clone> ExplorationTrace<A> {
    fn empty() -> Self {
        ExplorationTrace { actions: Vec::new(), opponent: Vec::new(), rewards: Vec::new(), end: TraceEnd::Horizon }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Discounted sum of the rewards along the trace.
    pub fn discounted(&self, beta: f64) -> f64 {
        discounted(&self.rewards, beta)
    }

    /// The first `depth` steps.
    pub fn truncated(&self, depth: usize) -> ExplorationTrace<A> {
        let d = depth.min(self.len());
        ExplorationTrace {
            actions: self.actions[..d].to_vec(),
            opponent: self.opponent[..d].to_vec(),
            rewards: self.rewards[..d].to_vec(),
            end: if d < self.len() { TraceEnd::Horizon } else { self.end.clone() },
        }
    }
}

/// `sum_k beta^k * r_k`.
pub fn discounted(rewards: &[f64], beta: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += weight * r;
        weight *= beta;
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedReturns<A> {
    /// `G(a)` for every action with at least one trace, in `legal` order.
    pub returns: Vec<(A, f64)>,
    /// Legal actions no trace started with.
    pub missing: Vec<A>,
}

/// Per-action returns: the max (or mean) discounted sum over traces that
/// start with the action.
pub fn aggregate<A: Clone + PartialEq>(
    traces: &[ExplorationTrace<A>],
    legal: &[A],
    beta: f64,
    mode: Aggregation,
) -> Result<AggregatedReturns<A>, BidderError> {
    let usable: Vec<&ExplorationTrace<A>> = traces.iter().filter(|t| !t.is_empty()).collect();
    if usable.is_empty() {
        return Err(BidderError::NoTraces);
    }
    let mut returns = Vec::new();
    let mut missing = Vec::new();
    for a in legal {
        let gs: Vec<f64> = usable.iter().filter(|t| &t.actions[0] == a).map(|t| t.discounted(beta)).collect();
        if gs.is_empty() {
            missing.push(a.clone());
            continue;
        }
        let g = match mode {
            Aggregation::Max => gs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Mean => gs.iter().sum::<f64>() / gs.len() as f64,
        };
        returns.push((a.clone(), g));
    }
    Ok(AggregatedReturns { returns, missing })
}

/// Explores from `state` (with `me` to act) to depth `cfg.horizon`.
/// Fails only if the root itself cannot be scored; later oracle failures
/// truncate the affected branch.
pub fn explore<G: OracleGame>(
    state: &G,
    me: PlayerId,
    hidden: &G::Hidden,
    cfg: &ExplorationConfig,
    oracle: &Deliberator<G>,
    tx: &mut Transcript,
) -> Result<Vec<ExplorationTrace<G::Action>>, BidderError> {
    cfg.validate()?;
    if state.current_player() != Some(me) {
        return Err(BidderError::Game(GameError::Contract("exploration must start at the player's decision".into())));
    }
    let explorer = Explorer { me, hidden, cfg, oracle };
    let branches = explorer.branches(state, tx)?;
    let mut out = Vec::new();
    if cfg.parallel {
        let parts: Vec<(Vec<ExplorationTrace<G::Action>>, Transcript)> = branches
            .into_par_iter()
            .map(|(a, r)| {
                let mut local = Transcript::default();
                let traces = explorer.follow(state, &a, r, 1, ExplorationTrace::empty(), &mut local);
                (traces, local)
            })
            .collect();
        for (traces, local) in parts {
            out.extend(traces);
            tx.extend(local);
        }
    } else {
        for (a, r) in branches {
            out.extend(explorer.follow(state, &a, r, 1, ExplorationTrace::empty(), tx));
        }
    }
    Ok(out)
}

struct Explorer<'a, G: OracleGame> {
    me: PlayerId,
    hidden: &'a G::Hidden,
    cfg: &'a ExplorationConfig,
    oracle: &'a Deliberator<G>,
}

impl<G: OracleGame> Explorer<'_, G> {
    /// Scored actions to branch on at a player decision.
    fn branches(&self, state: &G, tx: &mut Transcript) -> Result<Vec<(G::Action, f64)>, BidderError> {
        let legal = state.legal_actions()?;
        let scored = self.oracle.estimate_rewards(&state.view(self.me), self.hidden, &legal, tx)?;
        Ok(match self.cfg.max_branching {
            Some(k) if k < scored.len() => {
                let mut order: Vec<usize> = (0..scored.len()).collect();
                order.sort_by(|&i, &j| scored[j].1.total_cmp(&scored[i].1).then(i.cmp(&j)));
                order.truncate(k);
                order.sort_unstable();
                order.into_iter().map(|i| scored[i].clone()).collect()
            }
            _ => scored,
        })
    }

    /// Modeled opponent replies at a state where the opponent is to act.
    fn replies(&self, state: &G, tx: &mut Transcript) -> Result<Vec<G::Action>, BidderError> {
        let mut legal = state.legal_actions()?;
        let view = state.view(self.me);
        let mut picked = Vec::new();
        while picked.len() < self.cfg.opponent_branching && !legal.is_empty() {
            let a = self.oracle.model_opponent(&view, self.hidden, &legal, tx)?;
            legal.retain(|b| b != &a);
            picked.push(a);
        }
        Ok(picked)
    }

    /// Takes `action` (reward `reward`) at `depth` and continues to the
    /// horizon, returning one trace per explored leaf.
    fn follow(
        &self,
        state: &G,
        action: &G::Action,
        reward: f64,
        depth: usize,
        mut prefix: ExplorationTrace<G::Action>,
        tx: &mut Transcript,
    ) -> Vec<ExplorationTrace<G::Action>> {
        prefix.actions.push(action.clone());
        prefix.rewards.push(reward);
        prefix.opponent.push(None);
        let fail = |mut t: ExplorationTrace<G::Action>, e: String| {
            t.end = TraceEnd::Failed(e);
            vec![t]
        };
        let next = match state.apply(action) {
            Ok(s) => s,
            Err(e) => return fail(prefix, e.to_string()),
        };
        if let Some(t) = stop_at(&next, &prefix) {
            return vec![t];
        }
        let successors: Vec<(Option<G::Action>, G)> = match next.to_act() {
            ToAct::Player(p) if p != self.me => match self.replies(&next, tx) {
                Ok(replies) => {
                    let mut out = Vec::new();
                    for r in replies {
                        match next.apply(&r) {
                            Ok(s) => out.push((Some(r), s)),
                            Err(e) => return fail(prefix, e.to_string()),
                        }
                    }
                    out
                }
                Err(e) => return fail(prefix, e.to_string()),
            },
            _ => vec![(None, next)],
        };
        let mut out = Vec::new();
        for (reply, s) in successors {
            let mut trace = prefix.clone();
            *trace.opponent.last_mut().expect("step pushed") = reply;
            if let Some(t) = stop_at(&s, &trace) {
                out.push(t);
                continue;
            }
            if depth >= self.cfg.horizon || s.current_player() != Some(self.me) {
                trace.end = TraceEnd::Horizon;
                out.push(trace);
                continue;
            }
            match self.branches(&s, tx) {
                Ok(branches) => {
                    for (a, r) in branches {
                        out.extend(self.follow(&s, &a, r, depth + 1, trace.clone(), tx));
                    }
                }
                Err(e) => out.extend(fail(trace, e.to_string())),
            }
        }
        out
    }
}

fn stop_at<G: Game>(state: &G, trace: &ExplorationTrace<G::Action>) -> Option<ExplorationTrace<G::Action>> {
    let end = match state.to_act() {
        ToAct::Terminal => TraceEnd::Terminal,
        ToAct::Chance => TraceEnd::Chance,
        ToAct::Player(_) => return None,
    };
    let mut t = trace.clone();
    t.end = end;
    Some(t)
}

/// Serialized form of one trace in a deliberation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub actions: Vec<String>,
    pub opponent: Vec<Option<String>>,
    pub rewards: Vec<f64>,
    #[serde(rename = "G")]
    pub g: f64,
    pub end: TraceEnd,
}

/// Everything behind one decision, as stored in game logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliberationRecord {
    pub hidden: Option<serde_json::Value>,
    pub traces: Vec<TraceRecord>,
    pub returns: BTreeMap<String, f64>,
    pub chosen: String,
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BidderDecision<A> {
    pub action: A,
    pub record: DeliberationRecord,
    pub transcript: Transcript,
}

/// Full pipeline for one decision: infer, explore, aggregate, decide.
/// Oracle failures degrade to the direct prompt, then to the first legal
/// action.
pub fn bidder_act<G: OracleGame>(
    state: &G,
    me: PlayerId,
    cfg: &ExplorationConfig,
    oracle: &Deliberator<G>,
) -> Result<BidderDecision<G::Action>, BidderError> {
    cfg.validate()?;
    let legal = state.legal_actions()?;
    if state.current_player() != Some(me) {
        return Err(BidderError::Game(GameError::Contract("not this player's decision".into())));
    }
    let mut tx = Transcript::default();
    let view = state.view(me);
    let hidden = match oracle.infer_hidden(&view, &G::hidden_space(), &mut tx) {
        Ok(h) => h,
        Err(e) => {
            tx.note(format!("hidden-state inference failed ({e}); using the neutral state"));
            G::neutral_hidden()
        }
    };
    let hidden_json = serde_json::to_value(&hidden).ok();
    let planned = explore(state, me, &hidden, cfg, oracle, &mut tx).and_then(|traces| {
        let agg = aggregate(&traces, &legal, cfg.beta, cfg.aggregation)?;
        Ok((traces, agg))
    });
    let (traces, agg) = match planned {
        Ok(p) => p,
        Err(e) => {
            tx.note(format!("exploration failed ({e}); falling back to the direct prompt"));
            let action = direct_fallback(&view, &legal, oracle, &mut tx);
            let record = DeliberationRecord {
                hidden: hidden_json,
                traces: Vec::new(),
                returns: BTreeMap::new(),
                chosen: action.to_string(),
                degraded: true,
                missing: Vec::new(),
            };
            return Ok(BidderDecision { action, record, transcript: tx });
        }
    };
    let (action, degraded) = match oracle.decide(&view, &hidden, &agg.returns, &mut tx) {
        Ok(a) => (a, false),
        Err(e) => {
            tx.note(format!("decision query failed ({e}); falling back to the direct prompt"));
            (direct_fallback(&view, &legal, oracle, &mut tx), true)
        }
    };
    let record = DeliberationRecord {
        hidden: hidden_json,
        traces: traces
            .iter()
            .map(|t| TraceRecord {
                actions: t.actions.iter().map(|a| a.to_string()).collect(),
                opponent: t.opponent.iter().map(|o| o.as_ref().map(|a| a.to_string())).collect(),
                rewards: t.rewards.clone(),
                g: t.discounted(cfg.beta),
                end: t.end.clone(),
            })
            .collect(),
        returns: agg.returns.iter().map(|(a, g)| (a.to_string(), *g)).collect(),
        chosen: action.to_string(),
        degraded,
        missing: agg.missing.iter().map(|a| a.to_string()).collect(),
    };
    Ok(BidderDecision { action, record, transcript: tx })
}

fn direct_fallback<G: OracleGame>(
    view: &G::View,
    legal: &[G::Action],
    oracle: &Deliberator<G>,
    tx: &mut Transcript,
) -> G::Action {
    match oracle.variant_act(view, legal, Variant::Direct, tx) {
        Ok(a) => a,
        Err(e) => {
            tx.note(format!("direct prompt failed ({e}); taking the first legal action"));
            legal[0].clone()
        }
    }
}

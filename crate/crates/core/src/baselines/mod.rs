//! Reference agents and the agent contract shared by the harness.

pub mod cfr;
mod mcts;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bidder::{bidder_act, BidderError, ExplorationConfig};
use crate::game::{Game, GameError, PlayerId};
use crate::holdem::{HandCategory, HoldemAction, HoldemState};
use crate::oracle::{Deliberator, OracleError, OracleGame, Transcript, Variant};

pub use mcts::{mcts_act, MctsAgent, MctsConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Bidder(#[from] BidderError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("agent {agent} returned illegal action {action}")]
    Illegal { agent: String, action: String },
}

/// An action plus whatever the agent wants logged about how it got there.
#[derive(Debug, Clone)]
pub struct Decision<A> {
    pub action: A,
    pub record: Option<serde_json::Value>,
    pub transcript: Transcript,
}

impl<A> Decision<A> {
    pub fn plain(action: A) -> Self {
        Decision { action, record: None, transcript: Transcript::default() }
    }
}

/// A player. Agents are shared across parallel games, so all per-game
/// randomness comes through `rng`. Implementations only look at
/// `state.view(seat)` for anything private; the full state is passed so
/// planners can simulate the public dynamics.
pub trait Agent<G: Game>: Send + Sync {
    fn name(&self) -> String;

    fn act(&self, state: &G, seat: PlayerId, rng: &mut ChaCha8Rng) -> Result<Decision<G::Action>, AgentError>;
}

/// Calls `agent` and checks the contract: the action must be legal.
pub fn checked_act<G: Game>(
    agent: &dyn Agent<G>,
    state: &G,
    seat: PlayerId,
    rng: &mut ChaCha8Rng,
) -> Result<Decision<G::Action>, AgentError> {
    let d = agent.act(state, seat, rng)?;
    if !state.is_legal(&d.action) {
        return Err(AgentError::Illegal { agent: agent.name(), action: d.action.to_string() });
    }
    Ok(d)
}

/// Uniform over the legal actions.
pub fn random_act<G: Game>(state: &G, rng: &mut ChaCha8Rng) -> Result<G::Action, GameError> {
    let legal = state.legal_actions()?;
    if legal.is_empty() {
        return Err(GameError::Contract("no legal actions".into()));
    }
    Ok(legal[rng.gen_range(0..legal.len())].clone())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomAgent;

impl<G: Game> Agent<G> for RandomAgent {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&self, state: &G, _: PlayerId, rng: &mut ChaCha8Rng) -> Result<Decision<G::Action>, AgentError> {
        Ok(Decision::plain(random_act(state, rng)?))
    }
}

/// Threshold policy on the current made hand: any pair or better raises
/// (calling once raises are capped), a bare high card folds to a raise,
/// everything else checks or calls.
pub fn rule_act(state: &HoldemState, seat: PlayerId) -> Result<HoldemAction, GameError> {
    let view = state.view(seat);
    let legal = &view.legal;
    let has = |a: HoldemAction| legal.contains(&a);
    let facing_raise =
        view.to_call() > 0 && view.history.events.last().is_some_and(|e| e.action == HoldemAction::Raise);
    let choice = if view.hand_category() >= HandCategory::OnePair {
        [HoldemAction::Raise, HoldemAction::Call, HoldemAction::Check].into_iter().find(|a| has(*a))
    } else if facing_raise {
        Some(HoldemAction::Fold)
    } else {
        [HoldemAction::Check, HoldemAction::Call].into_iter().find(|a| has(*a))
    };
    choice.filter(|a| has(*a)).ok_or_else(|| GameError::Contract("no legal action for the rule policy".into()))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleAgent;

impl Agent<HoldemState> for RuleAgent {
    fn name(&self) -> String {
        "rule".into()
    }

    fn act(
        &self,
        state: &HoldemState,
        seat: PlayerId,
        _: &mut ChaCha8Rng,
    ) -> Result<Decision<HoldemAction>, AgentError> {
        Ok(Decision::plain(rule_act(state, seat)?))
    }
}

/// Prompt-only agent: one of the direct / chain-of-thought / reflexion /
/// tree-of-thought variants.
pub struct LlmAgent<G: OracleGame> {
    pub variant: Variant,
    pub oracle: Arc<Deliberator<G>>,
}

impl<G: OracleGame> LlmAgent<G> {
    pub fn new(variant: Variant, oracle: Arc<Deliberator<G>>) -> Self {
        LlmAgent { variant, oracle }
    }
}

/// One variant decision; failures fall back to the first legal action.
pub fn llm_variant_act<G: OracleGame>(
    state: &G,
    seat: PlayerId,
    variant: Variant,
    oracle: &Deliberator<G>,
) -> Result<Decision<G::Action>, AgentError> {
    let legal = state.legal_actions()?;
    let mut tx = Transcript::default();
    let action = match oracle.variant_act(&state.view(seat), &legal, variant, &mut tx) {
        Ok(a) => a,
        Err(e) => {
            tx.note(format!("{variant} prompt failed ({e}); taking the first legal action"));
            legal[0].clone()
        }
    };
    Ok(Decision { action, record: None, transcript: tx })
}

impl<G: OracleGame> Agent<G> for LlmAgent<G> {
    fn name(&self) -> String {
        self.variant.name().into()
    }

    fn act(&self, state: &G, seat: PlayerId, _: &mut ChaCha8Rng) -> Result<Decision<G::Action>, AgentError> {
        llm_variant_act(state, seat, self.variant, &self.oracle)
    }
}

/// The deliberating agent.
pub struct BidderAgent<G: OracleGame> {
    pub exploration: ExplorationConfig,
    pub oracle: Arc<Deliberator<G>>,
}

impl<G: OracleGame> BidderAgent<G> {
    pub fn new(exploration: ExplorationConfig, oracle: Arc<Deliberator<G>>) -> Self {
        BidderAgent { exploration, oracle }
    }
}

impl<G: OracleGame> Agent<G> for BidderAgent<G> {
    fn name(&self) -> String {
        "bidder".into()
    }

    fn act(&self, state: &G, seat: PlayerId, _: &mut ChaCha8Rng) -> Result<Decision<G::Action>, AgentError> {
        let d = bidder_act(state, seat, &self.exploration, &self.oracle)?;
        let record = serde_json::to_value(&d.record).ok();
        Ok(Decision { action: d.action, record, transcript: d.transcript })
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NegotiationError;
use crate::game::{Game, GameError, PlayerId, ToAct, Trajectory};

pub const ITEM_NAMES: [&str; 3] = ["Peppers", "Strawberries", "Cherries"];

/// Item counts for peppers, strawberries and cherries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemPool(pub [u32; 3]);

impl ItemPool {
    pub fn counts(&self) -> [u32; 3] {
        self.0
    }

    /// All requests `r` with `0 <= r[i] <= pool[i]`, lexicographic.
    pub fn valid_requests(&self) -> Vec<Proposal> {
        let [a, b, c] = self.0;
        let mut out = Vec::with_capacity(((a + 1) * (b + 1) * (c + 1)) as usize);
        for i in 0..=a {
            for j in 0..=b {
                for k in 0..=c {
                    out.push(Proposal([i, j, k]));
                }
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        let [a, b, c] = self.0;
        format!("Peppers: {a}, Strawberries: {b}, Cherries: {c}")
    }
}

/// Private per-item values of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtilityVector(pub [u32; 3]);

impl UtilityVector {
    pub fn values(&self) -> [u32; 3] {
        self.0
    }

    pub fn dot(&self, items: [u32; 3]) -> u32 {
        self.0.iter().zip(items).map(|(u, x)| u * x).sum()
    }

    pub fn total(&self, pool: &ItemPool) -> u32 {
        self.dot(pool.0)
    }
}

/// Quantities of each item the proposer asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Proposal(pub [u32; 3]);

impl Proposal {
    pub fn is_valid_for(&self, pool: &ItemPool) -> bool {
        self.0.iter().zip(pool.0).all(|(r, p)| *r <= p)
    }

    /// What the other side receives; `None` for an invalid request.
    pub fn complement(&self, pool: &ItemPool) -> Option<[u32; 3]> {
        self.is_valid_for(pool).then(|| [pool.0[0] - self.0[0], pool.0[1] - self.0[1], pool.0[2] - self.0[2]])
    }
}

impl fmt::Display for Proposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "[{a}, {b}, {c}]")
    }
}

impl FromStr for Proposal {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let nums = bracket_vectors(s);
        nums.first().copied().map(Proposal).ok_or_else(|| GameError::Contract(format!("no [a, b, c] vector in {s:?}")))
    }
}

/// Every `[a, b, c]` triple of non-negative integers in `s`, in order.
pub fn bracket_vectors(s: &str) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('[') {
        let after = &rest[open + 1..];
        let Some(close) = after.find(']') else { break };
        let parts: Vec<Option<u32>> = after[..close].split(',').map(|p| p.trim().parse().ok()).collect();
        if let [Some(a), Some(b), Some(c)] = parts.as_slice() {
            out.push([*a, *b, *c]);
        }
        rest = &after[close + 1..];
    }
    out
}

/// Either a proposal with its accompanying utterance, or acceptance of the
/// most recent proposal. Proposals order lexicographically before Accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NegotiationAction {
    Propose { proposal: Proposal, utterance: Proposal },
    Accept,
}

impl NegotiationAction {
    /// A proposal whose utterance states the same request.
    pub fn plain(request: [u32; 3]) -> Self {
        NegotiationAction::Propose { proposal: Proposal(request), utterance: Proposal(request) }
    }
}

impl fmt::Display for NegotiationAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegotiationAction::Accept => f.write_str("accept"),
            NegotiationAction::Propose { proposal, utterance } if proposal == utterance => write!(f, "{proposal}"),
            NegotiationAction::Propose { proposal, utterance } => write!(f, "{proposal} say {utterance}"),
        }
    }
}

impl FromStr for NegotiationAction {
    type Err = GameError;

    /// Accepts `accept`/`agree`, or one or two `[a, b, c]` vectors (proposal
    /// then utterance; a lone vector is also the utterance).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let vectors = bracket_vectors(s);
        if vectors.is_empty() {
            let lower = s.to_ascii_lowercase();
            if lower.contains("accept") || lower.contains("agree") {
                return Ok(NegotiationAction::Accept);
            }
            return Err(GameError::Contract(format!("unrecognised negotiation action {s:?}")));
        }
        let proposal = Proposal(vectors[0]);
        let utterance = vectors.get(1).copied().map(Proposal).unwrap_or(proposal);
        Ok(NegotiationAction::Propose { proposal, utterance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    /// `acceptor` agreed to `proposal`, the request made by the other seat.
    Agreement {
        acceptor: PlayerId,
        proposal: Proposal,
    },
    NoAgreement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegotiationState {
    pool: ItemPool,
    utilities: [UtilityVector; 2],
    turn: u32,
    max_turns: u32,
    last_proposal: Option<Proposal>,
    last_utterance: Option<Proposal>,
    outcome: Option<Outcome>,
    history: Trajectory<NegotiationAction, ()>,
}

impl NegotiationState {
    /// Starts a game at turn 1 with seat 0 (agent A) to move. Utilities are
    /// seat-indexed.
    pub fn new(pool: ItemPool, utilities: [UtilityVector; 2], max_turns: u32) -> Result<Self, NegotiationError> {
        if pool.0.iter().all(|&c| c == 0) {
            return Err(NegotiationError::Instance("empty item pool".into()));
        }
        if max_turns == 0 {
            return Err(NegotiationError::Instance("max_turns must be positive".into()));
        }
        Ok(NegotiationState {
            pool,
            utilities,
            turn: 1,
            max_turns,
            last_proposal: None,
            last_utterance: None,
            outcome: None,
            history: Trajectory::new(),
        })
    }

    pub fn pool(&self) -> ItemPool {
        self.pool
    }

    pub fn turn(&self) -> u32 {
        self.turn
    }

    pub fn max_turns(&self) -> u32 {
        self.max_turns
    }

    pub fn utility(&self, seat: PlayerId) -> UtilityVector {
        self.utilities[seat.index()]
    }

    pub fn last_proposal(&self) -> Option<Proposal> {
        self.last_proposal
    }

    pub fn last_utterance(&self) -> Option<Proposal> {
        self.last_utterance
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn history(&self) -> &Trajectory<NegotiationAction, ()> {
        &self.history
    }

    /// Items each seat receives under an agreed valid deal.
    pub fn allocation(&self) -> Option<[[u32; 3]; 2]> {
        let Some(Outcome::Agreement { acceptor, proposal }) = self.outcome else { return None };
        let rest = proposal.complement(&self.pool)?;
        let mut alloc = [[0; 3]; 2];
        alloc[acceptor.index()] = rest;
        alloc[acceptor.other().index()] = proposal.0;
        Some(alloc)
    }

    fn seat_for_turn(turn: u32) -> PlayerId {
        if turn % 2 == 1 {
            PlayerId::P0
        } else {
            PlayerId::P1
        }
    }
}

impl Game for NegotiationState {
    type Action = NegotiationAction;
    type View = NegotiationView;

    fn to_act(&self) -> ToAct {
        if self.outcome.is_some() {
            ToAct::Terminal
        } else {
            ToAct::Player(Self::seat_for_turn(self.turn))
        }
    }

    fn step(&self) -> usize {
        self.history.len()
    }

    /// Every valid request with a matching utterance, lexicographic, then
    /// Accept when a proposal is on the table. `apply` also takes requests
    /// outside this set (including invalid ones) and mismatched utterances.
    fn legal_actions(&self) -> Result<Vec<NegotiationAction>, GameError> {
        if self.outcome.is_some() {
            return Err(GameError::Contract("negotiation is over".into()));
        }
        let mut out: Vec<_> = self.pool.valid_requests().into_iter().map(|p| NegotiationAction::plain(p.0)).collect();
        if self.last_proposal.is_some() {
            out.push(NegotiationAction::Accept);
        }
        Ok(out)
    }

    fn is_legal(&self, action: &NegotiationAction) -> bool {
        self.outcome.is_none() && (*action != NegotiationAction::Accept || self.last_proposal.is_some())
    }

    fn apply(&self, action: &NegotiationAction) -> Result<Self, GameError> {
        let ToAct::Player(seat) = self.to_act() else {
            return Err(GameError::Contract("negotiation is over".into()));
        };
        if !self.is_legal(action) {
            return Err(GameError::illegal(action, &self.legal_actions()?));
        }
        let mut next = self.clone();
        next.history.push(seat, *action);
        match action {
            NegotiationAction::Accept => {
                let proposal = self.last_proposal.expect("checked by is_legal");
                next.outcome = Some(Outcome::Agreement { acceptor: seat, proposal });
            }
            NegotiationAction::Propose { proposal, utterance } => {
                next.last_proposal = Some(*proposal);
                next.last_utterance = Some(*utterance);
                if self.turn >= self.max_turns {
                    next.outcome = Some(Outcome::NoAgreement);
                }
            }
        }
        next.turn += 1;
        Ok(next)
    }

    fn advance_chance(&self) -> Result<Self, GameError> {
        Err(GameError::Contract("negotiation has no chance events".into()))
    }

    fn payoff(&self, player: PlayerId) -> Result<f64, GameError> {
        if self.outcome.is_none() {
            return Err(GameError::Contract("payoff requested before the negotiation ended".into()));
        }
        Ok(self.allocation().map_or(0, |alloc| self.utilities[player.index()].dot(alloc[player.index()])) as f64)
    }

    fn view(&self, player: PlayerId) -> NegotiationView {
        NegotiationView {
            seat: player,
            pool: self.pool,
            utility: self.utilities[player.index()],
            turn: self.turn,
            max_turns: self.max_turns,
            last_proposal: self.last_proposal,
            last_utterance: self.last_utterance,
            to_act: self.to_act(),
            history: self.history.public(),
        }
    }
}

/// One seat's information: the pool, its own values and the public record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NegotiationView {
    pub seat: PlayerId,
    pub pool: ItemPool,
    pub utility: UtilityVector,
    pub turn: u32,
    pub max_turns: u32,
    pub last_proposal: Option<Proposal>,
    pub last_utterance: Option<Proposal>,
    pub to_act: ToAct,
    pub history: Trajectory<NegotiationAction, ()>,
}

impl NegotiationView {
    pub fn is_last_turn(&self) -> bool {
        self.turn >= self.max_turns
    }

    /// Proposals made by the opponent, oldest first.
    pub fn opponent_requests(&self) -> Vec<Proposal> {
        self.history
            .actions_of(self.seat.other())
            .filter_map(|a| match a {
                NegotiationAction::Propose { proposal, .. } => Some(*proposal),
                NegotiationAction::Accept => None,
            })
            .collect()
    }
}

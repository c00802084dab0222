//! Two-player extensive-form game abstraction shared by both environments
//! and by the exploration engine.

use std::fmt;
use std::hash::Hash;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seat index of one of the two players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PlayerId(u8);

impl PlayerId {
    pub const P0: PlayerId = PlayerId(0);
    pub const P1: PlayerId = PlayerId(1);

    pub fn new(index: u8) -> Result<Self, GameError> {
        match index {
            0 | 1 => Ok(PlayerId(index)),
            other => Err(GameError::Contract(format!("player index {other} is not 0 or 1"))),
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn other(self) -> PlayerId {
        PlayerId(1 - self.0)
    }

    pub fn both() -> [PlayerId; 2] {
        [PlayerId::P0, PlayerId::P1]
    }
}

impl TryFrom<u8> for PlayerId {
    type Error = GameError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        PlayerId::new(value)
    }
}

impl From<PlayerId> for u8 {
    fn from(p: PlayerId) -> u8 {
        p.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "player {}", self.0)
    }
}

/// Who moves next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToAct {
    Player(PlayerId),
    /// New public information must be revealed before play continues.
    Chance,
    Terminal,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("illegal action {action}; legal actions are [{legal}]")]
    IllegalAction { action: String, legal: String },
    #[error("contract violation: {0}")]
    Contract(String),
}

impl GameError {
    pub fn illegal<A: fmt::Display>(action: &A, legal: &[A]) -> Self {
        GameError::IllegalAction {
            action: action.to_string(),
            legal: legal.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
        }
    }
}

/// One player action in a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord<A> {
    pub actor: PlayerId,
    pub action: A,
    pub step: usize,
}

/// Ordered action log. `initial_hidden` carries the owner's private
/// endowment and is only present in the full view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory<A, H> {
    pub events: Vec<ActionRecord<A>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_hidden: Option<H>,
}

impl<A, H> Default for Trajectory<A, H> {
    fn default() -> Self {
        Trajectory { events: Vec::new(), initial_hidden: None }
    }
}

impl<A: Clone, H: Clone> Trajectory<A, H> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_hidden(hidden: H) -> Self {
        Trajectory { events: Vec::new(), initial_hidden: Some(hidden) }
    }

    /// Appends an action; the step is one past the previous event.
    pub fn push(&mut self, actor: PlayerId, action: A) {
        let step = self.events.last().map_or(0, |e| e.step + 1);
        self.events.push(ActionRecord { actor, action, step });
    }

    /// The same event log with the private endowment stripped.
    pub fn public(&self) -> Trajectory<A, H> {
        Trajectory { events: self.events.clone(), initial_hidden: None }
    }

    /// Actions taken by `actor`, in order.
    pub fn actions_of(&self, actor: PlayerId) -> impl Iterator<Item = &A> {
        self.events.iter().filter(move |e| e.actor == actor).map(|e| &e.action)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Action token requirements shared by every environment.
pub trait ActionToken:
    Clone + Eq + Ord + Hash + fmt::Debug + fmt::Display + Serialize + DeserializeOwned + Send + Sync
{
}

impl<T> ActionToken for T where
    T: Clone + Eq + Ord + Hash + fmt::Debug + fmt::Display + Serialize + DeserializeOwned + Send + Sync
{
}

/// An immutable two-player game state. `apply` returns a successor and
/// never mutates the receiver.
pub trait Game: Clone + fmt::Debug + Send + Sync + Sized + 'static {
    type Action: ActionToken;
    /// What one seat is allowed to see: public information plus its own
    /// private endowment.
    type View: Clone + fmt::Debug + Serialize + Send + Sync;

    fn to_act(&self) -> ToAct;

    /// Number of player actions taken so far.
    fn step(&self) -> usize;

    /// Legal actions in canonical order.
    fn legal_actions(&self) -> Result<Vec<Self::Action>, GameError>;

    fn apply(&self, action: &Self::Action) -> Result<Self, GameError>;

    /// Reveals pending public information (e.g. the next community cards).
    fn advance_chance(&self) -> Result<Self, GameError>;

    fn payoff(&self, player: PlayerId) -> Result<f64, GameError>;

    fn view(&self, player: PlayerId) -> Self::View;

    fn is_terminal(&self) -> bool {
        self.to_act() == ToAct::Terminal
    }

    /// True exactly when a betting round (or equivalent) has closed and new
    /// public information is pending.
    fn is_chance_boundary(&self) -> bool {
        self.to_act() == ToAct::Chance
    }

    fn current_player(&self) -> Option<PlayerId> {
        match self.to_act() {
            ToAct::Player(p) => Some(p),
            _ => None,
        }
    }

    fn is_legal(&self, action: &Self::Action) -> bool {
        self.legal_actions().map(|l| l.contains(action)).unwrap_or(false)
    }
}

/// Plays out chance nodes until a player must act or the game ends.
pub fn settle<G: Game>(mut state: G) -> Result<G, GameError> {
    while state.is_chance_boundary() {
        state = state.advance_chance()?;
    }
    Ok(state)
}

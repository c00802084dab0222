//! Heads-up Limit Texas Hold'em: cards, hand evaluation, the betting engine
//! and strength-boosted session sampling.

mod cards;
mod eval;
mod session;
mod state;

use thiserror::Error;

pub use cards::{format_cards, full_deck, parse_cards, rank_char, Card, SUITS};
pub(crate) use eval::evaluate_unchecked;
pub use eval::{categorize, evaluate, evaluate7, HandCategory, HandRank};
pub use session::{sample_session, SessionSpec, StrengthBoostConfig};
pub use state::{
    bet_size, HoldemAction, HoldemState, HoldemView, Street, BIG_BLIND, MAX_RAISES_PER_ROUND, SMALL_BLIND,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HoldemError {
    #[error("bad card: {0}")]
    BadCard(String),
    #[error("duplicate card {0}")]
    DuplicateCard(String),
    #[error("expected {expected} cards, got {got}")]
    CardCount { expected: &'static str, got: usize },
    #[error("configuration error: {0}")]
    Config(String),
}

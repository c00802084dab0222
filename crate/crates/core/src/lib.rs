//! Bi-directional deliberation agents for two-player games.
//!
//! The crate bundles two exact game engines (heads-up Limit Hold'em and the
//! item-division negotiation game), a pluggable deliberation oracle (HTTP
//! chat endpoint, scripted heuristics or replayed transcripts), the
//! deliberation engine itself, baseline agents and a tournament harness.

pub mod baselines;
pub mod bidder;
pub mod game;
pub mod harness;
pub mod holdem;
pub mod negotiation;
pub mod oracle;

//! Item-division negotiation: three item types, alternating proposals with
//! free-form utterances, acceptance of the latest proposal, and a Pareto
//! optimality check for agreed deals.

mod instance;
mod pareto;
mod state;

use thiserror::Error;

pub use instance::{sample_instance, InstanceConfig, NegotiationInstance, RoleUtilities};
pub use pareto::{pareto_frontier, pareto_optimal};
pub use state::{
    bracket_vectors, ItemPool, NegotiationAction, NegotiationState, NegotiationView, Outcome, Proposal, UtilityVector,
    ITEM_NAMES,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NegotiationError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid instance: {0}")]
    Instance(String),
}

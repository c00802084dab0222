//! Open-loop UCT for the negotiation game: the tree is keyed by our own
//! action sequence, the opponent replies uniformly at random.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{random_act, Agent, AgentError, Decision};
use crate::game::{Game, GameError, PlayerId, ToAct};
use crate::negotiation::{NegotiationAction, NegotiationState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    pub simulations: usize,
    pub c_uct: f64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig { simulations: 1_000, c_uct: std::f64::consts::SQRT_2 }
    }
}

struct TreeNode {
    actions: Vec<NegotiationAction>,
    children: Vec<Option<usize>>,
    visits: Vec<u32>,
    value: Vec<f64>,
    total: u32,
    untried: Vec<usize>,
}

impl TreeNode {
    fn new(actions: Vec<NegotiationAction>, rng: &mut ChaCha8Rng) -> Self {
        let n = actions.len();
        let mut untried: Vec<usize> = (0..n).collect();
        untried.shuffle(rng);
        TreeNode { actions, children: vec![None; n], visits: vec![0; n], value: vec![0.0; n], total: 0, untried }
    }

    fn select(&self, c: f64) -> usize {
        let ln = (self.total.max(1) as f64).ln();
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.actions.len() {
            let n = self.visits[i] as f64;
            let score = self.value[i] / n + c * (ln / n).sqrt();
            if score > best.1 {
                best = (i, score);
            }
        }
        best.0
    }
}

/// Own payoff scaled by the best score possible, so rewards lie in [0, 1].
fn reward(state: &NegotiationState, me: PlayerId) -> Result<f64, GameError> {
    let total = state.utility(me).total(&state.pool()) as f64;
    let p = state.payoff(me)?;
    Ok(if total > 0.0 { p / total } else { 0.0 })
}

fn opponent_moves(mut s: NegotiationState, me: PlayerId, rng: &mut ChaCha8Rng) -> Result<NegotiationState, GameError> {
    while let ToAct::Player(p) = s.to_act() {
        if p == me {
            break;
        }
        s = s.apply(&random_act(&s, rng)?)?;
    }
    Ok(s)
}

/// UCT over our own actions with uniformly random rollouts; returns the
/// most visited root action (first in canonical order on ties).
pub fn mcts_act(
    state: &NegotiationState,
    me: PlayerId,
    cfg: &MctsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<NegotiationAction, GameError> {
    if state.current_player() != Some(me) {
        return Err(GameError::Contract("not this player's decision".into()));
    }
    let mut nodes = vec![TreeNode::new(state.legal_actions()?, rng)];
    for _ in 0..cfg.simulations.max(1) {
        let mut s = state.clone();
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut node = 0;
        loop {
            let (edge, expanded) = match nodes[node].untried.pop() {
                Some(i) => (i, true),
                None => (nodes[node].select(cfg.c_uct), false),
            };
            path.push((node, edge));
            s = opponent_moves(s.apply(&nodes[node].actions[edge])?, me, rng)?;
            if expanded || s.is_terminal() {
                break;
            }
            node = match nodes[node].children[edge] {
                Some(child) => child,
                None => {
                    let child = nodes.len();
                    nodes.push(TreeNode::new(s.legal_actions()?, rng));
                    nodes[node].children[edge] = Some(child);
                    child
                }
            };
            // the open-loop child may list different actions than this
            // sample's state allows; stop descending if so
            if nodes[node].actions.iter().any(|a| !s.is_legal(a)) {
                break;
            }
        }
        while !s.is_terminal() {
            s = s.apply(&random_act(&s, rng)?)?;
        }
        let r = reward(&s, me)?;
        for (n, e) in path {
            let t = &mut nodes[n];
            t.visits[e] += 1;
            t.value[e] += r;
            t.total += 1;
        }
    }
    let root = &nodes[0];
    let best =
        (0..root.actions.len()).max_by(|&i, &j| root.visits[i].cmp(&root.visits[j]).then(j.cmp(&i))).unwrap_or(0);
    Ok(root.actions[best])
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MctsAgent {
    pub config: MctsConfig,
}

impl Agent<NegotiationState> for MctsAgent {
    fn name(&self) -> String {
        "mcts".into()
    }

    fn act(
        &self,
        state: &NegotiationState,
        seat: PlayerId,
        rng: &mut ChaCha8Rng,
    ) -> Result<Decision<NegotiationAction>, AgentError> {
        Ok(Decision::plain(mcts_act(state, seat, &self.config, rng)?))
    }
}

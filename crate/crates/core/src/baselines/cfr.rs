//! Tabular counterfactual regret minimization for games small enough to
//! enumerate, with Kuhn poker as the bundled validation game.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CfrError {
    #[error("more than {0} information sets; abstract the game before solving it tabularly")]
    TooManyInfosets(usize),
    #[error("policy has no entry for information set {0}")]
    UnknownInfoset(String),
    #[error("policy io: {0}")]
    Io(#[from] std::io::Error),
    #[error("policy json: {0}")]
    Json(#[from] serde_json::Error),
}

/// What happens at a node of a small two-player zero-sum game.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Payoff to player 0 (player 1 gets the negation).
    Terminal(f64),
    /// Outcome probabilities, one child per entry.
    Chance(Vec<f64>),
    /// Player to move and number of actions.
    Player(usize, usize),
}

pub trait ExtensiveGame {
    type State: Clone;

    fn root(&self) -> Self::State;
    fn node(&self, s: &Self::State) -> Node;
    fn child(&self, s: &Self::State, branch: usize) -> Self::State;
    /// Key of the acting player's information set.
    fn infoset(&self, s: &Self::State) -> String;
}

/// Kuhn poker: three cards, one each, ante 1, a single bet of 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kuhn;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KuhnState {
    pub cards: Option<[u8; 2]>,
    /// 'p' for pass/check/fold, 'b' for bet/call.
    pub history: String,
}

const KUHN_DEALS: [[u8; 2]; 6] = [[0, 1], [0, 2], [1, 0], [1, 2], [2, 0], [2, 1]];

impl ExtensiveGame for Kuhn {
    type State = KuhnState;

    fn root(&self) -> KuhnState {
        KuhnState { cards: None, history: String::new() }
    }

    fn node(&self, s: &KuhnState) -> Node {
        let Some(cards) = s.cards else {
            return Node::Chance(vec![1.0 / 6.0; 6]);
        };
        let showdown = |stake: f64| if cards[0] > cards[1] { stake } else { -stake };
        match s.history.as_str() {
            "pp" => Node::Terminal(showdown(1.0)),
            "bb" | "pbb" => Node::Terminal(showdown(2.0)),
            "bp" => Node::Terminal(1.0),
            "pbp" => Node::Terminal(-1.0),
            h => Node::Player(h.len() % 2, 2),
        }
    }

    fn child(&self, s: &KuhnState, branch: usize) -> KuhnState {
        match s.cards {
            None => KuhnState { cards: Some(KUHN_DEALS[branch]), history: String::new() },
            Some(_) => {
                let mut next = s.clone();
                next.history.push(if branch == 0 { 'p' } else { 'b' });
                next
            }
        }
    }

    fn infoset(&self, s: &KuhnState) -> String {
        let cards = s.cards.expect("infoset of a dealt state");
        let card = ['J', 'Q', 'K'][cards[s.history.len() % 2] as usize];
        format!("{card}{}", s.history)
    }
}

/// Strategy proportional to positive regrets, uniform when none is positive.
pub fn regret_matching(regrets: &[f64]) -> Vec<f64> {
    let positive: f64 = regrets.iter().map(|r| r.max(0.0)).sum();
    if positive > 0.0 {
        regrets.iter().map(|r| r.max(0.0) / positive).collect()
    } else {
        vec![1.0 / regrets.len() as f64; regrets.len()]
    }
}

/// Average strategy per information set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CfrPolicy {
    pub strategy: BTreeMap<String, Vec<f64>>,
}

impl CfrPolicy {
    pub fn probabilities(&self, infoset: &str) -> Result<&[f64], CfrError> {
        self.strategy.get(infoset).map(Vec::as_slice).ok_or_else(|| CfrError::UnknownInfoset(infoset.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CfrError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CfrError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, Default)]
struct Tables {
    regret: Vec<f64>,
    strategy_sum: Vec<f64>,
}

/// Vanilla CFR with alternating updates.
pub struct CfrSolver<'g, G: ExtensiveGame> {
    game: &'g G,
    max_infosets: usize,
    tables: HashMap<String, Tables>,
    iterations: u64,
}

impl<'g, G: ExtensiveGame> CfrSolver<'g, G> {
    pub fn new(game: &'g G, max_infosets: usize) -> Self {
        CfrSolver { game, max_infosets, tables: HashMap::new(), iterations: 0 }
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Current regret-matching strategy at an infoset.
    pub fn current(&self, infoset: &str) -> Option<Vec<f64>> {
        self.tables.get(infoset).map(|t| regret_matching(&t.regret))
    }

    pub fn regrets(&self, infoset: &str) -> Option<&[f64]> {
        self.tables.get(infoset).map(|t| t.regret.as_slice())
    }

    pub fn run(&mut self, iterations: u64) -> Result<(), CfrError> {
        for _ in 0..iterations {
            for p in 0..2 {
                self.walk(&self.game.root(), p, 1.0, 1.0)?;
            }
            self.iterations += 1;
        }
        Ok(())
    }

    /// Counterfactual value for `traverser`; `reach` is the traverser's own
    /// reach and `others` the opponent-and-chance reach.
    fn walk(&mut self, s: &G::State, traverser: usize, reach: f64, others: f64) -> Result<f64, CfrError> {
        match self.game.node(s) {
            Node::Terminal(v) => Ok(if traverser == 0 { v } else { -v }),
            Node::Chance(probs) => {
                let mut total = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    total += p * self.walk(&self.game.child(s, i), traverser, reach, others * p)?;
                }
                Ok(total)
            }
            Node::Player(player, n) => {
                let key = self.game.infoset(s);
                if !self.tables.contains_key(&key) {
                    if self.tables.len() >= self.max_infosets {
                        return Err(CfrError::TooManyInfosets(self.max_infosets));
                    }
                    self.tables.insert(key.clone(), Tables { regret: vec![0.0; n], strategy_sum: vec![0.0; n] });
                }
                let sigma = regret_matching(&self.tables[&key].regret);
                if player == traverser {
                    let mut values = vec![0.0; n];
                    let mut node_value = 0.0;
                    for a in 0..n {
                        values[a] = self.walk(&self.game.child(s, a), traverser, reach * sigma[a], others)?;
                        node_value += sigma[a] * values[a];
                    }
                    let t = self.tables.get_mut(&key).expect("inserted above");
                    for a in 0..n {
                        t.regret[a] += others * (values[a] - node_value);
                        t.strategy_sum[a] += reach * sigma[a];
                    }
                    Ok(node_value)
                } else {
                    let mut total = 0.0;
                    for a in 0..n {
                        total += sigma[a] * self.walk(&self.game.child(s, a), traverser, reach, others * sigma[a])?;
                    }
                    Ok(total)
                }
            }
        }
    }

    /// Normalized strategy sums; uniform where nothing was accumulated.
    pub fn average_policy(&self) -> CfrPolicy {
        let strategy = self
            .tables
            .iter()
            .map(|(k, t)| {
                let total: f64 = t.strategy_sum.iter().sum();
                let probs = if total > 0.0 {
                    t.strategy_sum.iter().map(|x| x / total).collect()
                } else {
                    vec![1.0 / t.strategy_sum.len() as f64; t.strategy_sum.len()]
                };
                (k.clone(), probs)
            })
            .collect();
        CfrPolicy { strategy }
    }
}

/// Runs CFR and returns the average strategy. Zero iterations yield the
/// uniform policy over every reachable information set.
pub fn cfr_train<G: ExtensiveGame>(game: &G, iterations: u64, max_infosets: usize) -> Result<CfrPolicy, CfrError> {
    let mut solver = CfrSolver::new(game, max_infosets);
    if iterations == 0 {
        let mut strategy = BTreeMap::new();
        collect_infosets(game, &game.root(), &mut strategy, max_infosets)?;
        return Ok(CfrPolicy { strategy });
    }
    solver.run(iterations)?;
    Ok(solver.average_policy())
}

fn collect_infosets<G: ExtensiveGame>(
    game: &G,
    s: &G::State,
    out: &mut BTreeMap<String, Vec<f64>>,
    limit: usize,
) -> Result<(), CfrError> {
    match game.node(s) {
        Node::Terminal(_) => Ok(()),
        Node::Chance(p) => (0..p.len()).try_for_each(|i| collect_infosets(game, &game.child(s, i), out, limit)),
        Node::Player(_, n) => {
            out.entry(game.infoset(s)).or_insert_with(|| vec![1.0 / n as f64; n]);
            if out.len() > limit {
                return Err(CfrError::TooManyInfosets(limit));
            }
            (0..n).try_for_each(|a| collect_infosets(game, &game.child(s, a), out, limit))
        }
    }
}

/// Expected payoff to player 0 when both players follow `policy`.
pub fn expected_value<G: ExtensiveGame>(game: &G, policy: &CfrPolicy) -> Result<f64, CfrError> {
    fn go<G: ExtensiveGame>(game: &G, s: &G::State, policy: &CfrPolicy) -> Result<f64, CfrError> {
        match game.node(s) {
            Node::Terminal(v) => Ok(v),
            Node::Chance(p) => {
                let mut total = 0.0;
                for (i, pi) in p.iter().enumerate() {
                    total += pi * go(game, &game.child(s, i), policy)?;
                }
                Ok(total)
            }
            Node::Player(_, n) => {
                let sigma = policy.probabilities(&game.infoset(s))?;
                let mut total = 0.0;
                for a in 0..n {
                    total += sigma[a] * go(game, &game.child(s, a), policy)?;
                }
                Ok(total)
            }
        }
    }
    go(game, &game.root(), policy)
}

/// Value `player` gets by best-responding to `policy` (in that player's
/// own payoff units). Assumes perfect recall.
pub fn best_response_value<G: ExtensiveGame>(game: &G, policy: &CfrPolicy, player: usize) -> Result<f64, CfrError> {
    // histories of each responder infoset with their opponent-and-chance reach
    struct Entry<S> {
        depth: usize,
        histories: Vec<(S, f64)>,
        actions: usize,
    }
    let mut sets: HashMap<String, Entry<G::State>> = HashMap::new();
    let mut stack = vec![(game.root(), 1.0, 0usize)];
    while let Some((s, w, depth)) = stack.pop() {
        match game.node(&s) {
            Node::Terminal(_) => {}
            Node::Chance(p) => {
                for (i, pi) in p.iter().enumerate() {
                    stack.push((game.child(&s, i), w * pi, depth + 1));
                }
            }
            Node::Player(q, n) => {
                if q == player {
                    let e = sets.entry(game.infoset(&s)).or_insert(Entry { depth, histories: Vec::new(), actions: n });
                    e.histories.push((s.clone(), w));
                    for a in 0..n {
                        stack.push((game.child(&s, a), w, depth + 1));
                    }
                } else {
                    let sigma = policy.probabilities(&game.infoset(&s))?;
                    for a in 0..n {
                        stack.push((game.child(&s, a), w * sigma[a], depth + 1));
                    }
                }
            }
        }
    }

    fn value<G: ExtensiveGame>(
        game: &G,
        s: &G::State,
        policy: &CfrPolicy,
        player: usize,
        chosen: &HashMap<String, usize>,
    ) -> Result<f64, CfrError> {
        match game.node(s) {
            Node::Terminal(v) => Ok(if player == 0 { v } else { -v }),
            Node::Chance(p) => {
                let mut total = 0.0;
                for (i, pi) in p.iter().enumerate() {
                    total += pi * value(game, &game.child(s, i), policy, player, chosen)?;
                }
                Ok(total)
            }
            Node::Player(q, n) if q != player => {
                let sigma = policy.probabilities(&game.infoset(s))?;
                let mut total = 0.0;
                for a in 0..n {
                    if sigma[a] > 0.0 {
                        total += sigma[a] * value(game, &game.child(s, a), policy, player, chosen)?;
                    }
                }
                Ok(total)
            }
            Node::Player(..) => {
                let key = game.infoset(s);
                let a = *chosen.get(&key).ok_or(CfrError::UnknownInfoset(key))?;
                value(game, &game.child(s, a), policy, player, chosen)
            }
        }
    }

    // deepest infosets first, so every later choice is already fixed
    let mut order: Vec<(&String, &Entry<G::State>)> = sets.iter().collect();
    order.sort_by(|a, b| b.1.depth.cmp(&a.1.depth).then(a.0.cmp(b.0)));
    let mut chosen = HashMap::new();
    for (key, entry) in order {
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..entry.actions {
            let mut v = 0.0;
            for (s, w) in &entry.histories {
                v += w * value(game, &game.child(s, a), policy, player, &chosen)?;
            }
            if v > best.1 {
                best = (a, v);
            }
        }
        chosen.insert(key.clone(), best.0);
    }
    let v = value(game, &game.root(), policy, player, &chosen)?;
    Ok(v)
}

/// Mean of the two best-response values: how much a best-responding
/// opponent gains per hand on average over seats. Zero at equilibrium.
pub fn exploitability<G: ExtensiveGame>(game: &G, policy: &CfrPolicy) -> Result<f64, CfrError> {
    Ok((best_response_value(game, policy, 0)? + best_response_value(game, policy, 1)?) / 2.0)
}

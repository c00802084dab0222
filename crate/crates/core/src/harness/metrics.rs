//! Post-hoc reductions over game logs. Everything here is a pure function of
//! the logs (plus, for the rational degree, a deterministic reference agent).

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{replay, Environment, GameLog, HarnessError, HarnessGame, Role};
use crate::baselines::Agent;
use crate::game::Game;
use crate::holdem::{HoldemAction, HoldemState};
use crate::negotiation::{pareto_optimal, NegotiationInstance, NegotiationState};

/// Fraction of positions where the two action sequences agree.
pub fn agreement_rate<A: PartialEq>(actions: &[A], reference: &[A]) -> Result<f64, HarnessError> {
    if actions.is_empty() {
        return Err(HarnessError::Metric("no actions to compare".into()));
    }
    if actions.len() != reference.len() {
        return Err(HarnessError::Metric(format!(
            "{} actions but {} reference actions",
            actions.len(),
            reference.len()
        )));
    }
    let same = actions.iter().zip(reference).filter(|(a, b)| a == b).count();
    Ok(same as f64 / actions.len() as f64)
}

/// Share of `role`'s logged actions that `reference` would also have taken
/// at the same decision point.
pub fn rational_degree<G: HarnessGame>(
    logs: &[GameLog],
    role: Role,
    reference: &dyn Agent<G>,
) -> Result<f64, HarnessError> {
    let mut actions = Vec::new();
    let mut refs = Vec::new();
    for log in logs.iter().filter(|l| l.completed()) {
        let (states, _) = replay::<G>(log)?;
        let mut rng = ChaCha8Rng::seed_from_u64(log.seed);
        for (d, s) in log.decisions.iter().zip(&states) {
            if d.role != role {
                continue;
            }
            let taken: G::Action = serde_json::from_value(d.action.clone())?;
            let r = reference.act(s, d.seat, &mut rng)?.action;
            actions.push(taken);
            refs.push(r);
        }
    }
    agreement_rate(&actions, &refs)
}

/// Raw mean over original (unmirrored) games, and the mean over sessions
/// whose original and mirror both completed, each pair averaged first.
pub fn mean_payoffs(logs: &[GameLog]) -> (Option<f64>, Option<f64>) {
    let mean = |v: &[f64]| if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) };
    let raw: Vec<f64> = logs.iter().filter(|l| !l.mirrored).filter_map(GameLog::player_payoff).collect();
    let mut pairs: BTreeMap<usize, [Option<f64>; 2]> = BTreeMap::new();
    for l in logs {
        pairs.entry(l.session).or_default()[l.mirrored as usize] = l.player_payoff();
    }
    let averaged: Vec<f64> = pairs.values().filter_map(|p| Some((p[0]? + p[1]?) / 2.0)).collect();
    (mean(&raw), mean(&averaged))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationMetrics {
    pub games: usize,
    /// Mean player score over agreed games; `None` when nothing was agreed.
    pub score: Option<f64>,
    pub agreement: f64,
    /// Share of agreed deals that are Pareto optimal.
    pub pareto: Option<f64>,
}

/// Score, agreement rate and Pareto rate from the player's side.
pub fn negotiation_metrics(logs: &[GameLog]) -> Result<NegotiationMetrics, HarnessError> {
    let mut games = 0;
    let mut scores = Vec::new();
    let mut pareto = 0usize;
    for log in logs.iter().filter(|l| l.completed()) {
        if log.environment != Environment::Negotiation {
            return Err(HarnessError::Metric("negotiation metrics need negotiation logs".into()));
        }
        games += 1;
        let (_, end) = replay::<NegotiationState>(log)?;
        let Some(alloc) = end.allocation() else { continue };
        let inst: NegotiationInstance = serde_json::from_value(log.setup.clone())?;
        let seat = log.player_seat;
        scores.push(end.payoff(seat)?);
        if pareto_optimal(alloc[seat.index()], &inst.pool, &end.utility(seat), &end.utility(seat.other())) {
            pareto += 1;
        }
    }
    let agreed = scores.len();
    Ok(NegotiationMetrics {
        games,
        score: (agreed > 0).then(|| scores.iter().sum::<f64>() / agreed as f64),
        agreement: if games > 0 { agreed as f64 / games as f64 } else { 0.0 },
        pareto: (agreed > 0).then(|| pareto as f64 / agreed as f64),
    })
}

/// Frequencies of `role`'s Hold'em actions, keyed by action name; only
/// actions that occurred appear.
pub fn action_distribution(logs: &[GameLog], role: Role) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for d in logs.iter().flat_map(|l| &l.decisions).filter(|d| d.role == role) {
        *counts.entry(d.label.clone()).or_default() += 1;
        total += 1;
    }
    counts.into_iter().map(|(k, n)| (k, n as f64 / total as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchupMetrics {
    pub matchup: String,
    pub player: String,
    pub opponent: String,
    pub environment: Environment,
    pub games: usize,
    pub failed: usize,
    pub mean_payoff: Option<f64>,
    pub mean_payoff_mirrored: Option<f64>,
    pub rational_degree: Option<f64>,
    pub score: Option<f64>,
    pub agreement: Option<f64>,
    pub pareto: Option<f64>,
    /// Player action frequencies (Hold'em only).
    pub actions: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MatchupMetrics>,
}

/// Groups logs by matchup (in order of first appearance) and computes every
/// metric. The rational degree needs a Hold'em reference agent.
pub fn compute_report(
    logs: &[GameLog],
    reference: Option<&dyn Agent<HoldemState>>,
) -> Result<MetricsReport, HarnessError> {
    let mut order: Vec<(Environment, String, String)> = Vec::new();
    let mut groups: BTreeMap<(Environment, String, String), Vec<GameLog>> = BTreeMap::new();
    for l in logs {
        let key = (l.environment, l.player.clone(), l.opponent.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(l.clone());
    }
    let mut rows = Vec::new();
    for key in order {
        let group = &groups[&key];
        let (env, player, opponent) = key;
        let (mean_payoff, mean_payoff_mirrored) = mean_payoffs(group);
        let failed = group.iter().filter(|l| !l.completed()).count();
        let mut row = MatchupMetrics {
            matchup: format!("{player} vs {opponent}"),
            player,
            opponent,
            environment: env,
            games: group.len(),
            failed,
            mean_payoff,
            mean_payoff_mirrored: if group.iter().any(|l| l.mirrored) { mean_payoff_mirrored } else { None },
            rational_degree: None,
            score: None,
            agreement: None,
            pareto: None,
            actions: BTreeMap::new(),
        };
        match env {
            Environment::Holdem => {
                let dist = action_distribution(group, Role::Player);
                row.actions = HoldemAction::ALL
                    .iter()
                    .map(|a| (a.to_string(), dist.get(a.as_str()).copied().unwrap_or(0.0)))
                    .collect();
                if let Some(r) = reference {
                    row.rational_degree = rational_degree::<HoldemState>(group, Role::Player, r).ok();
                }
            }
            Environment::Negotiation => {
                let m = negotiation_metrics(group)?;
                row.score = m.score;
                row.agreement = Some(m.agreement);
                row.pareto = m.pareto;
            }
        }
        rows.push(row);
    }
    Ok(MetricsReport { rows })
}

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::deliberator::join;
use super::holdem::argmax;
use super::parse::{brace_blocks, json_objects, normalize_quotes, number, ActionFields};
use super::{
    ChatMessage, OracleError, OracleGame, PromptStyle, QueryContext, QueryKind, RewardSchema, TemplateSet, VariantTurn,
};
use crate::negotiation::{
    bracket_vectors, NegotiationAction, NegotiationState, NegotiationView, Proposal, UtilityVector, ITEM_NAMES,
};

/// Inferred per-item values of the opponent, each in 1..=10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InferredValues(pub [u32; 3]);

impl fmt::Display for InferredValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", values_text(self.0))
    }
}

fn values_text(v: [u32; 3]) -> String {
    ITEM_NAMES.iter().zip(v).map(|(n, x)| format!("{n}: {x}")).collect::<Vec<_>>().join(", ")
}

/// Deterministic heuristics behind the scripted backend.
pub struct NegotiationScripted;

impl NegotiationScripted {
    /// Values guessed from the share of each item the opponent has asked
    /// for: `1 + round(9 * mean fraction)`, 5 everywhere before it speaks.
    pub fn infer(view: &NegotiationView) -> InferredValues {
        let asks: Vec<[u32; 3]> = view
            .history
            .actions_of(view.seat.other())
            .filter_map(|a| match a {
                NegotiationAction::Propose { utterance, .. } => Some(utterance.0),
                NegotiationAction::Accept => None,
            })
            .collect();
        if asks.is_empty() {
            return InferredValues([5; 3]);
        }
        let pool = view.pool.0;
        InferredValues([0, 1, 2].map(|i| {
            let frac =
                asks.iter().map(|a| a[i].min(pool[i]) as f64 / pool[i].max(1) as f64).sum::<f64>() / asks.len() as f64;
            1 + (9.0 * frac).round() as u32
        }))
    }

    /// The opponent's move: accept when it would get at least half of its
    /// (inferred) pool value, or anything at all on the final turn;
    /// otherwise the cheapest request worth at least 60% of the pool.
    pub fn opponent_rule(
        view: &NegotiationView,
        values: InferredValues,
        legal: &[NegotiationAction],
    ) -> NegotiationAction {
        let h = UtilityVector(values.0);
        let total = h.total(&view.pool) as f64;
        if legal.contains(&NegotiationAction::Accept) {
            let received = view.last_proposal.and_then(|p| p.complement(&view.pool)).map_or(0, |c| h.dot(c)) as f64;
            if 2.0 * received >= total || (view.is_last_turn() && received > 0.0) {
                return NegotiationAction::Accept;
            }
        }
        let asks = legal.iter().filter_map(|a| match a {
            NegotiationAction::Propose { proposal, .. } => Some((a, h.dot(proposal.0) as f64)),
            NegotiationAction::Accept => None,
        });
        let mut best: Option<(&NegotiationAction, f64)> = None;
        for (a, v) in asks {
            if v >= 0.6 * total && best.is_none_or(|(_, b)| v < b) {
                best = Some((a, v));
            }
        }
        best.map(|(a, _)| *a).unwrap_or(legal[0])
    }

    /// Chance the opponent accepts a request, from its inferred value of the
    /// remainder.
    pub fn acceptance(view: &NegotiationView, values: InferredValues, request: Proposal) -> f64 {
        let h = UtilityVector(values.0);
        let Some(rest) = request.complement(&view.pool) else { return 0.0 };
        let share = h.dot(rest) as f64 / h.total(&view.pool).max(1) as f64;
        ((share - 0.25) / 0.5).clamp(0.0, 1.0)
    }

    /// `(action, own payoff, acceptance probability)` for every legal action.
    pub fn assess(
        view: &NegotiationView,
        values: InferredValues,
        legal: &[NegotiationAction],
    ) -> Vec<(NegotiationAction, u32, f64)> {
        legal
            .iter()
            .map(|a| match a {
                NegotiationAction::Accept => {
                    let got =
                        view.last_proposal.and_then(|p| p.complement(&view.pool)).map_or(0, |c| view.utility.dot(c));
                    (*a, got, 1.0)
                }
                NegotiationAction::Propose { proposal, .. } => {
                    let p = if view.is_last_turn() { 0.0 } else { Self::acceptance(view, values, *proposal) };
                    (*a, view.utility.dot(proposal.0), p)
                }
            })
            .collect()
    }

    /// Expected share of own pool value for every legal action.
    pub fn rewards(
        view: &NegotiationView,
        values: InferredValues,
        legal: &[NegotiationAction],
    ) -> Vec<(NegotiationAction, f64)> {
        let total = view.utility.total(&view.pool).max(1) as f64;
        Self::assess(view, values, legal).into_iter().map(|(a, pay, p)| (a, pay as f64 / total * p)).collect()
    }

    pub fn baseline(view: &NegotiationView, legal: &[NegotiationAction]) -> NegotiationAction {
        argmax(&Self::rewards(view, NegotiationState::neutral_hidden(), legal))
    }
}

fn utterance_text(a: &NegotiationAction) -> String {
    match a {
        NegotiationAction::Accept => "agree".into(),
        NegotiationAction::Propose { utterance, .. } => utterance.to_string(),
    }
}

fn describe_state(view: &NegotiationView) -> String {
    let me = view.seat;
    let total = view.utility.total(&view.pool);
    let mut lines = vec![
        format!("Item Pool: {}", view.pool.describe()),
        format!("Your values: {} (the whole pool is worth {total} to you)", values_text(view.utility.0)),
        format!(
            "This is turn {} of the negotiation; it ends without agreement after turn {}.",
            view.turn, view.max_turns
        ),
    ];
    if view.history.is_empty() {
        lines.push("No proposals have been made yet.".into());
    } else {
        lines.push("History:".into());
        for ev in &view.history.events {
            let who = if ev.actor == me { "you" } else { "the opponent" };
            lines.push(match ev.action {
                NegotiationAction::Accept => format!("Turn {}: {who} accepted", ev.step + 1),
                NegotiationAction::Propose { proposal, utterance } => {
                    format!("Turn {}: {who} proposed {proposal} and said {utterance}", ev.step + 1)
                }
            });
        }
    }
    if let (Some(p), Some(last)) = (view.last_proposal, view.history.events.last()) {
        if last.actor != me {
            if let Some(rest) = p.complement(&view.pool) {
                lines.push(format!(
                    "The opponent's proposal asks for {p}; accepting it gives you {} worth {}.",
                    Proposal(rest),
                    view.utility.dot(rest)
                ));
            }
        }
    }
    lines.join("\n")
}

fn opponent_events(view: &NegotiationView) -> String {
    let lines: Vec<String> = view
        .history
        .events
        .iter()
        .filter(|e| e.actor != view.seat)
        .map(|e| match e.action {
            NegotiationAction::Accept => format!("Turn {}: accepted", e.step + 1),
            NegotiationAction::Propose { utterance, .. } => format!("Turn {}: asked for {utterance}", e.step + 1),
        })
        .collect();
    if lines.is_empty() {
        "The opponent has not acted yet.".into()
    } else {
        lines.join("\n")
    }
}

fn last_utterance(view: &NegotiationView) -> String {
    match (view.last_utterance, view.history.events.last()) {
        (Some(u), Some(ev)) if ev.actor != view.seat => format!("The opponent's last utterance: {u}"),
        _ => "The opponent has not made an utterance since your last move.".into(),
    }
}

fn hidden_text(ctx: &QueryContext<NegotiationState>) -> String {
    format!("The opponent's values: {}", values_of(ctx))
}

fn values_of(ctx: &QueryContext<NegotiationState>) -> InferredValues {
    ctx.hidden.unwrap_or_else(NegotiationState::neutral_hidden)
}

fn action_menu(view: &NegotiationView, legal: &[NegotiationAction]) -> String {
    let [a, b, c] = view.pool.0;
    let mut text = format!("Requests take the form [a, b, c] with 0 <= a <= {a}, 0 <= b <= {b}, 0 <= c <= {c}.");
    if legal.contains(&NegotiationAction::Accept) {
        text.push_str(" Accepting the current proposal is written as 'accept'.");
    }
    text
}

impl OracleGame for NegotiationState {
    type Hidden = InferredValues;

    const REWARD_SCHEMA: RewardSchema = RewardSchema::Candidates;

    fn hidden_space() -> Vec<InferredValues> {
        static SPACE: OnceLock<Vec<InferredValues>> = OnceLock::new();
        SPACE
            .get_or_init(|| {
                let mut out = Vec::with_capacity(1000);
                for a in 1..=10 {
                    for b in 1..=10 {
                        for c in 1..=10 {
                            out.push(InferredValues([a, b, c]));
                        }
                    }
                }
                out
            })
            .clone()
    }

    fn neutral_hidden() -> InferredValues {
        InferredValues([5; 3])
    }

    fn render(t: &TemplateSet, style: PromptStyle, ctx: &QueryContext<Self>) -> Result<Vec<ChatMessage>, OracleError> {
        let view = &ctx.view;
        let system = ChatMessage::system(t.render("negotiation_game_setting", &[])?);
        let pool_prompt = format!("Item Pool: {}", view.pool.describe());
        let user = match (ctx.kind, style) {
            (QueryKind::Hidden, PromptStyle::Tailored) => t.render(
                "negotiation_hidden_inference",
                &[
                    ("state", describe_state(view)),
                    ("events", opponent_events(view)),
                    ("item_pool_prompt", view.pool.describe()),
                ],
            )?,
            (QueryKind::Hidden, PromptStyle::Generic) => {
                let body = t.render(
                    "hidden_inference",
                    &[
                        ("opponent_trajectory", opponent_events(view)),
                        ("state_space", "Each item is worth an integer from 1 to 10 to the opponent.".into()),
                    ],
                )?;
                format!("{}\n\n{body}\n{}", describe_state(view), Self::schema_hint(QueryKind::Hidden))
            }
            (QueryKind::Model, _) => {
                let body = t.render(
                    "opponent_modeling",
                    &[("hidden_state", hidden_text(ctx)), ("opponent_trajectory", opponent_events(view))],
                )?;
                format!(
                    "{}\n\n{body}\n{}\n\n{}",
                    describe_state(view),
                    action_menu(view, &ctx.legal),
                    t.render("direct", &[])?
                )
            }
            (QueryKind::Reward, PromptStyle::Tailored) => t.render(
                "negotiation_reward",
                &[
                    ("item_pool_prompt", pool_prompt),
                    ("value_vector", format!("Your values: {}", values_text(view.utility.0))),
                    ("last_utterance_prompt", last_utterance(view)),
                    ("infered_values", values_of(ctx).to_string()),
                ],
            )?,
            (QueryKind::Reward, PromptStyle::Generic) => {
                let history = format!("{}\n{}", describe_state(view), hidden_text(ctx));
                let body = t.render(
                    "reward_calculation",
                    &[("trajectories", history), ("feasible_actions", join(&ctx.legal))],
                )?;
                format!("{body}\n{}", Self::schema_hint(QueryKind::Reward))
            }
            (QueryKind::Decide, _) => {
                let returns = ctx.returns.iter().map(|(a, g)| format!("- {a}: G = {g:.4}")).collect::<Vec<_>>();
                let body = t.render(
                    "decision_making",
                    &[
                        ("state", describe_state(view)),
                        ("hidden_state", hidden_text(ctx)),
                        ("returns", returns.join("\n")),
                    ],
                )?;
                format!("{body}\n\n{}", t.render("direct", &[])?)
            }
            (QueryKind::Variant(_), _) => format!(
                "{}\n\n{}\n\n{}\n\n{} To say something other than your proposal, add an 'utterance' key.",
                describe_state(view),
                t.render("negotiation_proposal_state", &[])?,
                t.render("negotiation_utterance_state", &[])?,
                action_menu(view, &ctx.legal)
            ),
        };
        Ok(vec![system, ChatMessage::user(user)])
    }

    fn schema_hint(kind: QueryKind) -> &'static str {
        match kind {
            QueryKind::Hidden => {
                "Answer with three lines, Peppers: <value>, Strawberries: <value>, Cherries: <value>, each an integer from 1 to 10."
            }
            QueryKind::Reward => {
                "Answer with one or two JSON objects with the keys \"Utterance\" (\"<Utterance: [a, b, c]>\" or \"<Utterance: agree>\"), \"Payoff\" and \"Probability\"."
            }
            _ => "Answer with {'action': '[a, b, c]'} or {'action': 'accept'}.",
        }
    }

    fn parse_hidden(reply: &str, _ctx: &QueryContext<Self>) -> Option<InferredValues> {
        static ITEMS: OnceLock<[Regex; 3]> = OnceLock::new();
        let res = ITEMS.get_or_init(|| {
            ITEM_NAMES.map(|n| {
                let stem = &n[..n.len() - 1];
                Regex::new(&format!(r#"(?i){}\w*["']?\s*[:=]\s*["']?(\d+)"#, &stem[..stem.len().min(6)]))
                    .expect("static regex")
            })
        });
        let mut out = [0u32; 3];
        for (slot, re) in out.iter_mut().zip(res) {
            *slot = re.captures_iter(reply).last()?[1].parse().ok()?;
        }
        Some(InferredValues(out))
    }

    fn parse_rewards(reply: &str, ctx: &QueryContext<Self>) -> Vec<(NegotiationAction, f64)> {
        let total = ctx.view.utility.total(&ctx.view.pool).max(1) as f64;
        let to_action = |text: &str| -> Option<NegotiationAction> {
            let a = match bracket_vectors(text).first() {
                Some(v) => NegotiationAction::plain(*v),
                None => {
                    let lower = text.to_ascii_lowercase();
                    if lower.contains("agree") || lower.contains("accept") {
                        NegotiationAction::Accept
                    } else {
                        return None;
                    }
                }
            };
            ctx.legal.contains(&a).then_some(a)
        };
        let field = |m: &serde_json::Map<String, Value>, key: &str| {
            m.iter().find(|(k, _)| k.trim().eq_ignore_ascii_case(key)).map(|(_, v)| v.clone())
        };
        let mut objects = json_objects(reply);
        if objects.iter().all(|m| field(m, "utterance").is_none()) {
            // several objects separated by commas, not wrapped in a list
            objects = brace_blocks(reply)
                .into_iter()
                .filter_map(|b| serde_json::from_str::<Value>(&normalize_quotes(b)).ok())
                .filter_map(|v| v.as_object().cloned())
                .collect();
        }
        let mut out = Vec::new();
        for m in objects {
            let Some(Value::String(u)) = field(&m, "utterance") else { continue };
            let Some(a) = to_action(&u) else { continue };
            let pay = field(&m, "payoff").as_ref().and_then(number).unwrap_or(0.0);
            let prob = field(&m, "probability").as_ref().and_then(number).unwrap_or(0.0);
            let r = (pay / total).clamp(0.0, 1.0) * prob.clamp(0.0, 1.0);
            if !out.iter().any(|(b, _)| *b == a) {
                out.push((a, r));
            }
        }
        out
    }

    fn parse_action(fields: &ActionFields) -> Option<NegotiationAction> {
        let action: NegotiationAction = fields.action.parse().ok()?;
        match (action, fields.utterance.as_deref().map(bracket_vectors)) {
            (NegotiationAction::Propose { proposal, .. }, Some(v)) if !v.is_empty() => {
                Some(NegotiationAction::Propose { proposal, utterance: Proposal(v[0]) })
            }
            _ => Some(action),
        }
    }

    fn admissible(ctx: &QueryContext<Self>, action: &NegotiationAction) -> bool {
        match action {
            NegotiationAction::Accept => ctx.legal.contains(action),
            NegotiationAction::Propose { proposal, utterance } => {
                ctx.legal.contains(action)
                    || (ctx.kind != QueryKind::Decide
                        && proposal.is_valid_for(&ctx.view.pool)
                        && utterance.is_valid_for(&ctx.view.pool))
            }
        }
    }

    fn scripted_reply(ctx: &QueryContext<Self>) -> String {
        let view = &ctx.view;
        let action_reply = |a: &NegotiationAction| format!("{{\"action\": \"{a}\"}}");
        match ctx.kind {
            QueryKind::Hidden => {
                let v = NegotiationScripted::infer(view).0;
                format!("Evaluation:\nPeppers: {}\nStrawberries: {}\nCherries: {}", v[0], v[1], v[2])
            }
            QueryKind::Model => action_reply(&NegotiationScripted::opponent_rule(view, values_of(ctx), &ctx.legal)),
            QueryKind::Reward => {
                let total = view.utility.total(&view.pool).max(1) as f64;
                let mut ranked = NegotiationScripted::assess(view, values_of(ctx), &ctx.legal);
                // stable sort keeps canonical order among equals
                ranked.sort_by(|x, y| (y.1 as f64 / total * y.2).total_cmp(&(x.1 as f64 / total * x.2)));
                let blocks: Vec<String> = ranked
                    .iter()
                    .take(2)
                    .map(|(a, pay, p)| {
                        format!(
                            "{{\n    \"Utterance\": \"<Utterance: {}>\",\n    \"Payoff\": \"{pay}\",\n    \"Probability\": \"{p:.4}\"\n}}",
                            utterance_text(a)
                        )
                    })
                    .collect();
                format!("Utterances:\n{}", blocks.join(",\n"))
            }
            QueryKind::Decide => action_reply(&argmax(&ctx.returns)),
            QueryKind::Variant(turn) => {
                let a = NegotiationScripted::baseline(view, &ctx.legal);
                match turn {
                    VariantTurn::Direct | VariantTurn::TotEvaluate => format!("{{'action': '{a}'}}"),
                    VariantTurn::Cot => {
                        format!("My thought is that {a} balances my payoff against acceptance, and my action is {{'action': '{a}'}}")
                    }
                    VariantTurn::ReflexionRefine => {
                        format!(
                            "My revised thought is that {a} is still right. My revised action is {{'action': '{a}'}}."
                        )
                    }
                    VariantTurn::TotPropose => {
                        let mut ranked =
                            NegotiationScripted::rewards(view, NegotiationState::neutral_hidden(), &ctx.legal);
                        ranked.sort_by(|x, y| y.1.total_cmp(&x.1));
                        ranked
                            .iter()
                            .take(3)
                            .map(|(a, _)| format!("{{'action': '{a}'}}"))
                            .collect::<Vec<_>>()
                            .join("\n")
                    }
                }
            }
        }
    }
}

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::deliberator::join;
use super::parse::{json_objects, numeric_pairs, ActionFields};
use super::{
    ChatMessage, OracleError, OracleGame, PromptStyle, QueryContext, QueryKind, RewardSchema, TemplateSet, VariantTurn,
};
use crate::game::PlayerId;
use crate::holdem::{
    bet_size, evaluate_unchecked, format_cards, full_deck, Card, HoldemAction, HoldemState, HoldemView, Street,
};

type EquityKey = (u64, [Card; 2], Vec<Card>);

// Equity depends only on the visible cards; a bounded memo keeps repeated
// queries on the same street cheap.
static EQUITY_CACHE: OnceLock<Mutex<HashMap<EquityKey, f64>>> = OnceLock::new();
const EQUITY_CACHE_LIMIT: usize = 50_000;

/// Opponent hand-strength rating, 1 (weakest) to 5 (strongest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rating(pub u8);

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

const EQUITY_SAMPLES: usize = 400;

/// Deterministic heuristics behind the scripted backend.
pub struct HoldemScripted;

impl HoldemScripted {
    /// Aggression of the opponent's actions mapped onto 1..=5; 3 when the
    /// opponent has not acted.
    pub fn aggression_rating(view: &HoldemView) -> Rating {
        let scores: Vec<f64> = view
            .opponent_actions()
            .map(|a| match a {
                HoldemAction::Raise => 1.0,
                HoldemAction::Call => 0.5,
                HoldemAction::Check => 0.25,
                HoldemAction::Fold => 0.0,
            })
            .collect();
        if scores.is_empty() {
            return Rating(3);
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        Rating((1.0 + (4.0 * mean).round()) as u8)
    }

    /// Rule table for the opponent's move given its rating.
    pub fn opponent_rule(rating: Rating, legal: &[HoldemAction], raises_this_round: u8) -> HoldemAction {
        use HoldemAction::*;
        let preference: &[HoldemAction] = match rating.0 {
            4.. => &[Raise, Call, Check],
            3 => &[Check, Call],
            2 if raises_this_round <= 1 => &[Check, Call, Fold],
            2 => &[Check, Fold],
            _ => &[Check, Fold],
        };
        preference.iter().copied().find(|a| legal.contains(a)).unwrap_or(legal[0])
    }

    /// Probability of winning at showdown against a uniformly random hand,
    /// exact on the river and sampled (seeded by the cards) before it.
    pub fn equity(hand: [Card; 2], board: &[Card]) -> f64 {
        let key = hand
            .iter()
            .chain(board)
            .fold(0xcbf2_9ce4_8422_2325u64, |h, c| (h ^ c.index() as u64).wrapping_mul(0x0100_0000_01b3));
        let cache = EQUITY_CACHE.get_or_init(Default::default);
        if let Some(&e) = cache.lock().expect("equity cache").get(&(key, hand, board.to_vec())) {
            return e;
        }
        let e = Self::compute_equity(hand, board, key);
        let mut guard = cache.lock().expect("equity cache");
        if guard.len() >= EQUITY_CACHE_LIMIT {
            guard.clear();
        }
        guard.insert((key, hand, board.to_vec()), e);
        e
    }

    fn compute_equity(hand: [Card; 2], board: &[Card], seed: u64) -> f64 {
        let mut used = [false; 52];
        for c in hand.iter().chain(board) {
            used[c.index()] = true;
        }
        let rest: Vec<Card> = full_deck().into_iter().filter(|c| !used[c.index()]).collect();
        let n = board.len();
        let mut me = [hand[0]; 7];
        let mut them = [hand[0]; 7];
        me[1] = hand[1];
        me[2..2 + n].copy_from_slice(board);
        them[2..2 + n].copy_from_slice(board);
        let mut score = |opp: [Card; 2], runout: &[Card]| -> f64 {
            me[2 + n..].copy_from_slice(runout);
            them[0] = opp[0];
            them[1] = opp[1];
            them[2 + n..].copy_from_slice(runout);
            match evaluate_unchecked(&me).cmp(&evaluate_unchecked(&them)) {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            }
        };
        if n == 5 {
            let mut total = 0.0;
            let mut count = 0usize;
            for i in 0..rest.len() {
                for j in i + 1..rest.len() {
                    total += score([rest[i], rest[j]], &[]);
                    count += 1;
                }
            }
            return total / count as f64;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let need = 2 + 5 - n;
        let mut deck = rest;
        let mut total = 0.0;
        for _ in 0..EQUITY_SAMPLES {
            let (draw, _) = deck.partial_shuffle(&mut rng, need);
            total += score([draw[0], draw[1]], &draw[2..]);
        }
        total / EQUITY_SAMPLES as f64
    }

    /// Normalised expected chips of each action if the hand went to showdown
    /// now, with equity shaded by the opponent's rating.
    pub fn rewards(view: &HoldemView, rating: Rating, legal: &[HoldemAction]) -> Vec<(HoldemAction, f64)> {
        let raw = Self::equity(view.hand, &view.board);
        let eq = raw.powf(1.0 + 0.35 * (rating.0 as f64 - 3.0));
        let me = view.invested[view.seat.index()] as f64;
        let opp = view.invested[view.seat.other().index()] as f64;
        let bet = bet_size(view.street) as f64;
        let span = opp + bet;
        let edge = 2.0 * eq - 1.0;
        legal
            .iter()
            .map(|&a| {
                let net = match a {
                    HoldemAction::Fold => -me,
                    HoldemAction::Check => edge * me,
                    HoldemAction::Call => edge * opp,
                    HoldemAction::Raise => edge * (opp + bet),
                };
                (a, ((net + span) / (2.0 * span)).clamp(0.0, 1.0))
            })
            .collect()
    }

    /// Best action by the myopic rewards; ties go to canonical order.
    pub fn baseline(view: &HoldemView, legal: &[HoldemAction]) -> HoldemAction {
        argmax(&Self::rewards(view, Rating(3), legal))
    }
}

pub(crate) fn argmax<A: Clone>(scores: &[(A, f64)]) -> A {
    let mut best = 0;
    for (i, (_, v)) in scores.iter().enumerate() {
        if *v > scores[best].1 {
            best = i;
        }
    }
    scores[best].0.clone()
}

fn name(seat: PlayerId) -> String {
    format!("Player {}", seat.index())
}

fn board_text(board: &[Card]) -> String {
    if board.is_empty() {
        "not dealt yet".into()
    } else {
        format_cards(board)
    }
}

/// Public betting record grouped by street.
fn events(view: &HoldemView) -> String {
    let mut lines = Vec::new();
    for street in [Street::Preflop, Street::Flop, Street::Turn, Street::River] {
        if street > view.street {
            break;
        }
        let mut parts = Vec::new();
        if street == Street::Preflop {
            parts.push(format!("{} posts the small blind (1)", name(PlayerId::P0)));
            parts.push(format!("{} posts the big blind (2)", name(PlayerId::P1)));
        }
        for (ev, s) in view.history.events.iter().zip(&view.event_streets) {
            if *s == street {
                parts.push(format!("{} {}", name(ev.actor), ev.action));
            }
        }
        if parts.is_empty() {
            parts.push("no actions yet".into());
        }
        let header = match street {
            Street::Preflop => street.name().to_string(),
            _ => format!("{} [{}]", street.name(), format_cards(&view.board[..street.board_len()])),
        };
        lines.push(format!("{header}: {}", parts.join("; ")));
    }
    lines.join("\n")
}

fn rating_text(seat: PlayerId, rating: Rating) -> String {
    format!("{}: estimated hand strength rating {rating} (1 = weakest, 5 = strongest)", name(seat))
}

fn hand_strength(view: &HoldemView, rating: Rating) -> String {
    format!(
        "{} (you): holding {}, currently {}\n  {}",
        name(view.seat),
        format_cards(&view.hand),
        view.hand_category().name(),
        rating_text(view.seat.other(), rating)
    )
}

fn payoff_template(legal: &[HoldemAction]) -> String {
    let body = legal.iter().map(|a| format!("\"{a}\": <payoff>")).collect::<Vec<_>>().join(", ");
    format!("{{{body}}}")
}

fn state_prompt(t: &TemplateSet, view: &HoldemView, legal: &[HoldemAction]) -> Result<String, OracleError> {
    let me = view.seat;
    let events = &view.history.events;
    let last_mine = events.iter().rposition(|e| e.actor == me);
    let pre_action = match last_mine {
        Some(i) => events[i].action.to_string(),
        None if me == PlayerId::P0 => "small blind".into(),
        None => "big blind".into(),
    };
    let since: Vec<String> = events[last_mine.map_or(0, |i| i + 1)..]
        .iter()
        .filter(|e| e.actor != me)
        .map(|e| e.action.to_string())
        .collect();
    let opp_actions = if since.is_empty() {
        format!("{} has not acted since", name(me.other()))
    } else {
        format!("{} chose {}", name(me.other()), since.join(" then "))
    };
    let actions = legal.iter().map(|a| format!("'{a}'")).collect::<Vec<_>>().join(", ");
    t.render(
        "holdem_state",
        &[
            ("public_card", board_text(&view.board)),
            ("hand", format_cards(&view.hand)),
            ("my_bid", view.invested[me.index()].to_string()),
            ("all_chips", format!("[{}, {}]", view.invested[0], view.invested[1])),
            ("pre_action", pre_action),
            ("oppoent_actions", opp_actions),
            ("actions", format!("[{actions}]")),
        ],
    )
}

fn game_setting(t: &TemplateSet, seat: PlayerId) -> Result<String, OracleError> {
    t.render(
        "holdem_game_setting",
        &[
            ("name", name(seat)),
            ("num_players", "2".into()),
            ("players", format!("{} and {}", name(PlayerId::P0), name(PlayerId::P1))),
        ],
    )
}

fn rating_of(ctx: &QueryContext<HoldemState>) -> Rating {
    ctx.hidden.unwrap_or_else(HoldemState::neutral_hidden)
}

impl OracleGame for HoldemState {
    type Hidden = Rating;

    const REWARD_SCHEMA: RewardSchema = RewardSchema::Dense;

    fn hidden_space() -> Vec<Rating> {
        (1..=5).map(Rating).collect()
    }

    fn neutral_hidden() -> Rating {
        Rating(3)
    }

    fn render(t: &TemplateSet, style: PromptStyle, ctx: &QueryContext<Self>) -> Result<Vec<ChatMessage>, OracleError> {
        let view = &ctx.view;
        let me = view.seat;
        let system = ChatMessage::system(game_setting(t, me)?);
        let user = match (ctx.kind, style) {
            (QueryKind::Hidden, PromptStyle::Tailored) => {
                t.render("holdem_hidden_inference", &[("events", events(view))])?
            }
            (QueryKind::Hidden, PromptStyle::Generic) => {
                let space = ctx
                    .space
                    .iter()
                    .map(|r| format!("- {}", rating_text(me.other(), *r)))
                    .collect::<Vec<_>>()
                    .join("\n");
                let body =
                    t.render("hidden_inference", &[("opponent_trajectory", events(view)), ("state_space", space)])?;
                format!("{body}\n{}", Self::schema_hint(QueryKind::Hidden))
            }
            (QueryKind::Model, PromptStyle::Tailored) => t.render(
                "holdem_modeling",
                &[
                    ("public_cards", board_text(&view.board)),
                    ("hand_strength", hand_strength(view, rating_of(ctx))),
                    ("events", events(view)),
                    ("player", name(me.other())),
                    ("legal_action", join(&ctx.legal)),
                ],
            )?,
            (QueryKind::Model, PromptStyle::Generic) => {
                let body = t.render(
                    "opponent_modeling",
                    &[("hidden_state", rating_text(me.other(), rating_of(ctx))), ("opponent_trajectory", events(view))],
                )?;
                format!(
                    "{body}\nLegal actions for {}: {}.\n\n{}",
                    name(me.other()),
                    join(&ctx.legal),
                    t.render("direct", &[])?
                )
            }
            (QueryKind::Reward, PromptStyle::Tailored) => t.render(
                "holdem_reward",
                &[
                    ("public_cards", board_text(&view.board)),
                    ("hand_strength", hand_strength(view, rating_of(ctx))),
                    ("events", events(view)),
                    ("player", name(me)),
                    ("action_payoff_template", payoff_template(&ctx.legal)),
                ],
            )?,
            (QueryKind::Reward, PromptStyle::Generic) => {
                let history = format!("{}\n{}", events(view), hand_strength(view, rating_of(ctx)));
                let body = t.render(
                    "reward_calculation",
                    &[("trajectories", history), ("feasible_actions", join(&ctx.legal))],
                )?;
                format!("{body}\nReturn JSON in this format:\n{}", payoff_template(&ctx.legal))
            }
            (QueryKind::Decide, _) => {
                let returns = ctx.returns.iter().map(|(a, g)| format!("- {a}: G = {g:.4}")).collect::<Vec<_>>();
                let body = t.render(
                    "decision_making",
                    &[
                        ("state", state_prompt(t, view, &ctx.legal)?),
                        ("hidden_state", rating_text(me.other(), rating_of(ctx))),
                        ("returns", returns.join("\n")),
                    ],
                )?;
                format!("{body}\n\n{}", t.render("direct", &[])?)
            }
            (QueryKind::Variant(_), _) => state_prompt(t, view, &ctx.legal)?,
        };
        Ok(vec![system, ChatMessage::user(user)])
    }

    fn schema_hint(kind: QueryKind) -> &'static str {
        match kind {
            QueryKind::Hidden => {
                "Answer with {\"Player\": {\"Rating\": <rating>}} where the rating is an integer from 1 to 5."
            }
            QueryKind::Reward => {
                "Answer with one JSON object that maps every listed action to a payoff between 0 and 1."
            }
            _ => "Answer with {'action': '<action>'} naming one of the legal actions.",
        }
    }

    fn parse_hidden(reply: &str, ctx: &QueryContext<Self>) -> Option<Rating> {
        let opponent = name(ctx.view.seat.other()).to_ascii_lowercase();
        let rating_in = |v: &Value| -> Option<u8> {
            let obj = v.as_object()?;
            let r = obj.iter().find(|(k, _)| k.eq_ignore_ascii_case("rating"))?.1;
            super::parse::number(r).map(|x| x.round() as u8)
        };
        let mut first = None;
        for obj in json_objects(reply) {
            let whole = Value::Object(obj.clone());
            if let Some(r) = rating_in(&whole) {
                first.get_or_insert(r);
            }
            for (k, v) in &obj {
                if let Some(r) = rating_in(v) {
                    if k.to_ascii_lowercase().contains(&opponent) {
                        return Some(Rating(r));
                    }
                    first.get_or_insert(r);
                }
            }
        }
        if let Some(r) = first {
            return Some(Rating(r));
        }
        static RATING: OnceLock<Regex> = OnceLock::new();
        let re = RATING.get_or_init(|| Regex::new(r#"(?i)rating["']?\s*[:=]?\s*["']?(\d+)"#).expect("static regex"));
        re.captures(reply).and_then(|c| c[1].parse().ok()).map(Rating)
    }

    fn parse_rewards(reply: &str, ctx: &QueryContext<Self>) -> Vec<(HoldemAction, f64)> {
        numeric_pairs(reply)
            .into_iter()
            .filter_map(|(k, v)| {
                let a: HoldemAction = k.parse().ok()?;
                ctx.legal.contains(&a).then_some((a, v))
            })
            .collect()
    }

    fn parse_action(fields: &ActionFields) -> Option<HoldemAction> {
        fields.action.parse().ok()
    }

    fn scripted_reply(ctx: &QueryContext<Self>) -> String {
        let view = &ctx.view;
        let action_reply = |a: HoldemAction| format!("{{\"action\": \"{a}\"}}");
        match ctx.kind {
            QueryKind::Hidden => {
                let r = HoldemScripted::aggression_rating(view);
                let pick = ctx.space.iter().min_by_key(|s| (s.0 as i32 - r.0 as i32).abs()).copied().unwrap_or(r);
                format!("{{\"Player\": {{\"Rating\": {pick}}}}}")
            }
            QueryKind::Model => {
                action_reply(HoldemScripted::opponent_rule(rating_of(ctx), &ctx.legal, view.raises_this_round))
            }
            QueryKind::Reward => {
                let body = HoldemScripted::rewards(view, rating_of(ctx), &ctx.legal)
                    .iter()
                    .map(|(a, r)| format!("\"{a}\": {r:.4}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("{{{body}}}")
            }
            QueryKind::Decide => action_reply(argmax(&ctx.returns)),
            QueryKind::Variant(turn) => {
                let a = HoldemScripted::baseline(view, &ctx.legal);
                match turn {
                    VariantTurn::Direct | VariantTurn::TotEvaluate => format!("{{'action': '{a}'}}"),
                    VariantTurn::Cot => {
                        format!("My thought is that {a} has the best immediate payoff, and my action is {{'action': '{a}'}}")
                    }
                    VariantTurn::ReflexionRefine => {
                        format!("My revised thought is that {a} still looks best. My revised action is {{'action': '{a}'}}.")
                    }
                    VariantTurn::TotPropose => {
                        let mut ranked = HoldemScripted::rewards(view, Rating(3), &ctx.legal);
                        ranked.sort_by(|x, y| y.1.total_cmp(&x.1));
                        ranked.iter().map(|(a, _)| format!("{{'action': '{a}'}}")).collect::<Vec<_>>().join("\n")
                    }
                }
            }
        }
    }
}

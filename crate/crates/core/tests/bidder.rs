mod common;

use std::fmt;
use std::sync::Arc;

use bidder_core::bidder::{
    aggregate, bidder_act, discounted, explore, Aggregation, ExplorationConfig, ExplorationTrace, TraceEnd,
};
use bidder_core::game::{settle, Game, GameError, PlayerId, ToAct};
use bidder_core::holdem::{parse_cards, HoldemAction, HoldemState};
use bidder_core::negotiation::{ItemPool, NegotiationAction, NegotiationState, UtilityVector};
use bidder_core::oracle::{
    parse::ActionFields, Backend, ChatMessage, Deliberator, DeliberatorConfig, OracleError, OracleGame, PromptStyle,
    Query, QueryContext, QueryKind, RewardSchema, ScriptedBackend, TemplateSet, Transcript,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

// A tiny alternating game: seat 0 has three actions at its first decision
// and two afterwards, seat 1 always has two. Six actions end it.
#[derive(Debug, Clone)]
struct Ladder {
    history: Vec<u8>,
}

#[derive(Debug, Clone, Serialize)]
struct LadderView {
    history: Vec<u8>,
}

impl Ladder {
    fn mover(&self) -> PlayerId {
        if self.history.len().is_multiple_of(2) {
            PlayerId::P0
        } else {
            PlayerId::P1
        }
    }
}

impl Game for Ladder {
    type Action = u8;
    type View = LadderView;

    fn to_act(&self) -> ToAct {
        if self.history.len() >= 6 {
            ToAct::Terminal
        } else {
            ToAct::Player(self.mover())
        }
    }

    fn step(&self) -> usize {
        self.history.len()
    }

    fn legal_actions(&self) -> Result<Vec<u8>, GameError> {
        Ok(if self.history.is_empty() { vec![0, 1, 2] } else { vec![0, 1] })
    }

    fn apply(&self, action: &u8) -> Result<Self, GameError> {
        let legal = self.legal_actions()?;
        if !legal.contains(action) || self.is_terminal() {
            return Err(GameError::illegal(action, &legal));
        }
        let mut next = self.clone();
        next.history.push(*action);
        Ok(next)
    }

    fn advance_chance(&self) -> Result<Self, GameError> {
        Err(GameError::Contract("no chance nodes".into()))
    }

    fn payoff(&self, _: PlayerId) -> Result<f64, GameError> {
        Ok(0.0)
    }

    fn view(&self, _: PlayerId) -> LadderView {
        LadderView { history: self.history.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
struct Mood(u8);

impl fmt::Display for Mood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn ladder_reward(history: &[u8], a: u8) -> f64 {
    let s: usize = history.iter().map(|&x| x as usize).sum::<usize>() + 3 * a as usize + history.len();
    (s * 7 % 11) as f64 / 10.0
}

impl OracleGame for Ladder {
    type Hidden = Mood;
    const REWARD_SCHEMA: RewardSchema = RewardSchema::Dense;

    fn hidden_space() -> Vec<Mood> {
        vec![Mood(0), Mood(1)]
    }

    fn neutral_hidden() -> Mood {
        Mood(0)
    }

    fn render(_: &TemplateSet, _: PromptStyle, ctx: &QueryContext<Self>) -> Result<Vec<ChatMessage>, OracleError> {
        Ok(vec![ChatMessage::user(format!("{:?} {:?} {:?} {:?}", ctx.kind, ctx.view.history, ctx.legal, ctx.returns))])
    }

    fn schema_hint(_: QueryKind) -> &'static str {
        "answer properly"
    }

    fn parse_hidden(reply: &str, _: &QueryContext<Self>) -> Option<Mood> {
        reply.trim().parse().ok().map(Mood)
    }

    fn parse_rewards(reply: &str, _: &QueryContext<Self>) -> Vec<(u8, f64)> {
        reply
            .lines()
            .filter_map(|l| {
                let (a, r) = l.split_once('=')?;
                Some((a.trim().parse().ok()?, r.trim().parse().ok()?))
            })
            .collect()
    }

    fn parse_action(fields: &ActionFields) -> Option<u8> {
        fields.action.trim().parse().ok()
    }

    fn scripted_reply(ctx: &QueryContext<Self>) -> String {
        let h = &ctx.view.history;
        let act = |a: u8| format!("{{\"action\": \"{a}\"}}");
        match ctx.kind {
            QueryKind::Hidden => "1".into(),
            QueryKind::Model => act(*ctx.legal.iter().max().unwrap()),
            QueryKind::Reward => {
                ctx.legal.iter().map(|&a| format!("{a}={}", ladder_reward(h, a))).collect::<Vec<_>>().join("\n")
            }
            QueryKind::Decide => {
                let best = ctx.returns.iter().fold(None::<&(u8, f64)>, |b, x| match b {
                    Some(y) if y.1 >= x.1 => Some(y),
                    _ => Some(x),
                });
                act(best.unwrap().0)
            }
            QueryKind::Variant(_) => act(ctx.legal[0]),
        }
    }
}

fn oracle<G: OracleGame>(backend: Arc<dyn Backend<G>>) -> Deliberator<G> {
    Deliberator::new(backend, Arc::new(TemplateSet::shipped()), DeliberatorConfig::default())
}

fn logging<G: OracleGame>() -> Deliberator<G> {
    let cfg = DeliberatorConfig { log_prompts: true, ..Default::default() };
    Deliberator::new(Arc::new(ScriptedBackend), Arc::new(TemplateSet::shipped()), cfg)
}

struct FnBackend<F>(F);

impl<G: OracleGame, F: Fn(&Query<G>) -> Result<String, OracleError> + Send + Sync> Backend<G> for FnBackend<F> {
    fn complete(&self, q: &Query<G>) -> Result<String, OracleError> {
        (self.0)(q)
    }
}

fn cfg(horizon: usize) -> ExplorationConfig {
    ExplorationConfig { horizon, ..Default::default() }
}

fn key<A: Clone + fmt::Display>(t: &ExplorationTrace<A>) -> (Vec<String>, Vec<Option<String>>, Vec<u64>) {
    (
        t.actions.iter().map(ToString::to_string).collect(),
        t.opponent.iter().map(|o| o.as_ref().map(ToString::to_string)).collect(),
        t.rewards.iter().map(|r| r.to_bits()).collect(),
    )
}

#[test]
fn toy_game_yields_six_traces_matching_hand_enumeration() {
    let root = Ladder { history: vec![] };
    let d = oracle::<Ladder>(Arc::new(ScriptedBackend));
    let mut tx = Transcript::default();
    let traces = explore(&root, PlayerId::P0, &Mood(1), &cfg(2), &d, &mut tx).unwrap();
    assert_eq!(traces.len(), 6);

    // independent enumeration: the modeled reply is always the larger action
    let mut expected = Vec::new();
    for a in 0..3u8 {
        for b in 0..2u8 {
            let rewards = vec![ladder_reward(&[], a), ladder_reward(&[a, 1], b)];
            expected.push((a.to_string(), rewards));
        }
    }
    for (t, (first, rewards)) in traces.iter().zip(&expected) {
        assert_eq!(&t.actions[0].to_string(), first);
        assert_eq!(&t.rewards, rewards);
        assert_eq!(t.opponent, vec![Some(1), Some(1)]);
        assert_eq!(t.end, TraceEnd::Horizon);
    }
    let agg = aggregate(&traces, &[0, 1, 2], 0.8, Aggregation::Max).unwrap();
    let brute = common::brute_max_returns(&expected, 0.8);
    assert_eq!(agg.returns.len(), 3);
    for (a, g) in &agg.returns {
        assert!((brute[&a.to_string()] - g).abs() < 1e-12);
    }

    // 1 root reward + 3 models + 3 rewards + 6 models
    assert_eq!(tx.calls(), 13);
}

#[test]
fn full_pipeline_on_the_toy_game() {
    let root = Ladder { history: vec![] };
    let d = oracle::<Ladder>(Arc::new(ScriptedBackend));
    let decision = bidder_act(&root, PlayerId::P0, &cfg(2), &d).unwrap();
    let best = decision.record.returns.iter().fold((String::new(), f64::NEG_INFINITY), |b, (a, g)| {
        if *g > b.1 {
            (a.clone(), *g)
        } else {
            b
        }
    });
    assert_eq!(decision.action.to_string(), best.0);
    assert!(!decision.record.degraded);

    let json = serde_json::to_value(&decision.record).unwrap();
    assert_eq!(json["hidden"], serde_json::json!(1));
    let traces = json["traces"].as_array().unwrap();
    assert_eq!(traces.len(), 6);
    for t in traces {
        assert!(t["actions"].is_array() && t["rewards"].is_array() && t["G"].is_number());
    }
    assert!(json["returns"].is_object());
    assert_eq!(json["chosen"], serde_json::json!(decision.action.to_string()));
}

#[test]
fn terminal_and_chance_stops() {
    // two actions from the end: each root branch ends after the opponent's reply
    let near_end = Ladder { history: vec![0, 0, 0, 0] };
    let d = oracle::<Ladder>(Arc::new(ScriptedBackend));
    let traces = explore(&near_end, PlayerId::P0, &Mood(0), &cfg(3), &d, &mut Transcript::default()).unwrap();
    assert_eq!(traces.len(), 2);
    assert!(traces.iter().all(|t| t.len() == 1 && t.end == TraceEnd::Terminal));

    // a preflop call by the big blind closes the round
    let s = HoldemState::new(
        [parse_cards("As Ks").unwrap().try_into().unwrap(), parse_cards("2c 7d").unwrap().try_into().unwrap()],
        parse_cards("3h 4h 5h Jc Qd").unwrap().try_into().unwrap(),
    )
    .unwrap();
    let s = s.apply(&HoldemAction::Call).unwrap();
    let d = oracle::<HoldemState>(Arc::new(ScriptedBackend));
    let traces =
        explore(&s, PlayerId::P1, &HoldemState::neutral_hidden(), &cfg(3), &d, &mut Transcript::default()).unwrap();
    for t in &traces {
        match t.actions[0] {
            HoldemAction::Fold => assert_eq!(t.end, TraceEnd::Terminal),
            HoldemAction::Check => assert_eq!((t.len(), &t.end), (1, &TraceEnd::Chance)),
            _ => assert!(!t.is_empty()),
        }
    }
}

#[test]
fn model_failure_truncates_only_the_affected_branch() {
    let failing = FnBackend(|q: &Query<Ladder>| match q.context.kind {
        QueryKind::Model if q.context.view.history == vec![2] => Err(OracleError::Transport("down".into())),
        _ => Ok(Ladder::scripted_reply(&q.context)),
    });
    let d = oracle::<Ladder>(Arc::new(failing));
    let traces =
        explore(&Ladder { history: vec![] }, PlayerId::P0, &Mood(1), &cfg(2), &d, &mut Transcript::default()).unwrap();
    assert_eq!(traces.len(), 5);
    let failed: Vec<_> = traces.iter().filter(|t| matches!(t.end, TraceEnd::Failed(_))).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].actions, vec![2]);
}

#[test]
fn total_oracle_failure_degrades_to_first_legal_action() {
    let down = FnBackend(|_: &Query<Ladder>| Err(OracleError::Transport("down".into())));
    let d = oracle::<Ladder>(Arc::new(down));
    let decision = bidder_act(&Ladder { history: vec![] }, PlayerId::P0, &cfg(2), &d).unwrap();
    assert_eq!(decision.action, 0);
    assert!(decision.record.degraded);
    assert!(!decision.transcript.notes.is_empty());
}

#[test]
fn wrong_seat_is_a_contract_error() {
    let d = oracle::<Ladder>(Arc::new(ScriptedBackend));
    assert!(bidder_act(&Ladder { history: vec![] }, PlayerId::P1, &cfg(1), &d).is_err());
    assert!(bidder_act(&Ladder { history: vec![] }, PlayerId::P0, &cfg(0), &d).is_err());
}

fn random_holdem(seed: u64) -> (HoldemState, PlayerId) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deck = bidder_core::holdem::full_deck();
    rand::seq::SliceRandom::shuffle(deck.as_mut_slice(), &mut rng);
    let mut s =
        HoldemState::new([[deck[0], deck[1]], [deck[2], deck[3]]], [deck[4], deck[5], deck[6], deck[7], deck[8]])
            .unwrap();
    let moves = rng.gen_range(0..8);
    for _ in 0..moves {
        let legal: Vec<_> = s.legal_actions().unwrap().into_iter().filter(|a| *a != HoldemAction::Fold).collect();
        let next = settle(s.apply(&legal[rng.gen_range(0..legal.len())]).unwrap()).unwrap();
        if next.is_terminal() {
            break;
        }
        s = next;
    }
    let me = s.current_player().unwrap();
    (s, me)
}

fn random_negotiation(seed: u64, theirs: Option<[u32; 3]>) -> (NegotiationState, PlayerId) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = ItemPool([(); 3].map(|_| rng.gen_range(1..=3)));
    let mine = UtilityVector([(); 3].map(|_| rng.gen_range(0..=10)));
    let drawn = [(); 3].map(|_| rng.gen_range(0..=10));
    let other = UtilityVector(theirs.unwrap_or(drawn));
    let moves = rng.gen_range(0..3);
    let me = if moves % 2 == 0 { PlayerId::P0 } else { PlayerId::P1 };
    let mut utilities = [mine, other];
    if me == PlayerId::P1 {
        utilities.swap(0, 1);
    }
    let mut s = NegotiationState::new(pool, utilities, 6).unwrap();
    for _ in 0..moves {
        let req = pool.valid_requests();
        s = s.apply(&NegotiationAction::plain(req[rng.gen_range(0..req.len())].0)).unwrap();
    }
    assert_eq!(s.current_player(), Some(me));
    (s, me)
}

fn check_truncation<G: OracleGame>(state: &G, me: PlayerId, max_branching: Option<usize>) {
    let d = oracle::<G>(Arc::new(ScriptedBackend));
    let hidden = G::neutral_hidden();
    let mut prev: Option<Vec<_>> = None;
    for t in 1..=3 {
        let c = ExplorationConfig { horizon: t, max_branching, ..Default::default() };
        let traces = explore(state, me, &hidden, &c, &d, &mut Transcript::default()).unwrap();
        assert!(traces.iter().all(|tr| tr.len() <= t && !matches!(tr.end, TraceEnd::Failed(_))));
        if let Some(p) = prev {
            let mut cut: Vec<_> = traces.iter().map(|tr| key(&tr.truncated(t - 1))).collect();
            cut.dedup();
            assert_eq!(cut, p, "horizon {t}");
        }
        prev = Some(traces.iter().map(key).collect());
    }
}

#[test]
fn deeper_horizons_extend_shallower_trace_sets() {
    for seed in 0..6 {
        let (s, me) = random_holdem(seed);
        check_truncation(&s, me, None);
        let (s, me) = random_negotiation(seed, None);
        check_truncation(&s, me, Some(2));
    }
}

fn prompts<G: OracleGame>(state: &G, me: PlayerId) -> Vec<Vec<ChatMessage>> {
    let d = logging::<G>();
    let decision = bidder_act(state, me, &cfg(2), &d).unwrap();
    decision.transcript.exchanges.iter().map(|e| e.prompt.clone().unwrap()).collect()
}

#[test]
fn prompts_do_not_depend_on_opponent_private_information() {
    for seed in 0..4 {
        let (s, me) = random_holdem(seed);
        let opp = s.hole(me.other());
        let mut used: Vec<_> = s.board().to_vec();
        used.extend(s.hole(me));
        // rebuild the same action sequence with a different opponent hand
        let fresh: Vec<_> = bidder_core::holdem::full_deck()
            .into_iter()
            .filter(|c| !used.contains(c) && !opp.contains(c))
            .take(2)
            .collect();
        let mut holes = [s.hole(PlayerId::P0), s.hole(PlayerId::P1)];
        holes[me.other().index()] = [fresh[0], fresh[1]];
        let board = full_board_of(&s, &used, &fresh).try_into().unwrap();
        let mut alt = HoldemState::new(holes, board).unwrap();
        for e in &s.history().events {
            alt = settle(alt.apply(&e.action).unwrap()).unwrap();
        }
        let a = prompts(&s, me);
        let b = prompts(&alt, me);
        assert_eq!(a, b, "seed {seed}");
        let text = a.iter().flatten().map(|m| m.content.clone()).collect::<String>();
        for c in opp {
            assert!(!text.contains(&c.to_string()) || s.board().contains(&c), "seed {seed} leaks {c}");
        }

        let (s, me) = random_negotiation(seed, Some([1, 2, 3]));
        let (t, _) = random_negotiation(seed, Some([9, 0, 7]));
        assert!(prompts(&s, me) == prompts(&t, me), "seed {seed}");
    }
}

// The full five-card board of `s`, with undealt cards filled from outside
// every hand so the visible prefix is unchanged.
fn full_board_of(
    s: &HoldemState,
    used: &[bidder_core::holdem::Card],
    fresh: &[bidder_core::holdem::Card],
) -> Vec<bidder_core::holdem::Card> {
    let mut board = s.board().to_vec();
    let hidden_board: Vec<_> = bidder_core::holdem::full_deck()
        .into_iter()
        .filter(|c| {
            !used.contains(c)
                && !fresh.contains(c)
                && !s.hole(PlayerId::P0).contains(c)
                && !s.hole(PlayerId::P1).contains(c)
        })
        .collect();
    board.extend(hidden_board.into_iter().take(5 - board.len()));
    board
}

fn arb_traces() -> impl Strategy<Value = Vec<ExplorationTrace<u8>>> {
    prop::collection::vec((0u8..5, prop::collection::vec(0.0f64..1.0, 1..=4)), 1..=50).prop_map(|v| {
        v.into_iter()
            .map(|(a, rewards)| ExplorationTrace {
                actions: std::iter::once(a).chain(std::iter::repeat_n(0, rewards.len() - 1)).collect(),
                opponent: vec![None; rewards.len()],
                rewards,
                end: TraceEnd::Horizon,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn aggregation_matches_brute_force(traces in arb_traces(), beta in 0.05f64..=1.0) {
        let legal: Vec<u8> = (0..5).collect();
        let agg = aggregate(&traces, &legal, beta, Aggregation::Max).unwrap();
        let flat: Vec<_> = traces.iter().map(|t| (t.actions[0].to_string(), t.rewards.clone())).collect();
        let brute = common::brute_max_returns(&flat, beta);
        prop_assert_eq!(agg.returns.len() + agg.missing.len(), legal.len());
        prop_assert_eq!(agg.returns.len(), brute.len());
        for (a, g) in &agg.returns {
            prop_assert!((brute[&a.to_string()] - g).abs() < 1e-9);
        }
    }

    #[test]
    fn returns_grow_with_beta_for_nonnegative_rewards(traces in arb_traces(), b1 in 0.05f64..=1.0, b2 in 0.05f64..=1.0) {
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let legal: Vec<u8> = (0..5).collect();
        let a = aggregate(&traces, &legal, lo, Aggregation::Max).unwrap();
        let b = aggregate(&traces, &legal, hi, Aggregation::Max).unwrap();
        for ((_, g_lo), (_, g_hi)) in a.returns.iter().zip(&b.returns) {
            prop_assert!(g_lo <= g_hi);
        }
    }

    #[test]
    fn scaling_rewards_scales_returns(traces in arb_traces(), c in 0.1f64..10.0, beta in 0.05f64..=1.0) {
        let legal: Vec<u8> = (0..5).collect();
        let scaled: Vec<_> = traces
            .iter()
            .map(|t| ExplorationTrace { rewards: t.rewards.iter().map(|r| r * c).collect(), ..t.clone() })
            .collect();
        for mode in [Aggregation::Max, Aggregation::Mean] {
            let a = aggregate(&traces, &legal, beta, mode).unwrap();
            let b = aggregate(&scaled, &legal, beta, mode).unwrap();
            for ((x, ga), (y, gb)) in a.returns.iter().zip(&b.returns) {
                prop_assert_eq!(x, y);
                prop_assert!((ga * c - gb).abs() < 1e-9 * (1.0 + gb.abs()));
            }
            let top = |r: &[(u8, f64)]| r.iter().fold((0u8, f64::NEG_INFINITY), |m, x| if x.1 > m.1 { *x } else { m }).0;
            prop_assert_eq!(top(&a.returns), top(&b.returns));
        }
    }

    #[test]
    fn discounting_by_hand(rewards in prop::collection::vec(-1.0f64..1.0, 0..6), beta in 0.0f64..=1.0) {
        let mut g = 0.0;
        for (k, r) in rewards.iter().enumerate() {
            g += beta.powi(k as i32) * r;
        }
        prop_assert!((discounted(&rewards, beta) - g).abs() < 1e-12);
    }
}

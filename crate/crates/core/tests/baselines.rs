use std::sync::Arc;

use bidder_core::baselines::cfr::{
    best_response_value, cfr_train, expected_value, exploitability, regret_matching, CfrPolicy, CfrSolver, Kuhn,
};
use bidder_core::baselines::{
    checked_act, llm_variant_act, mcts_act, random_act, rule_act, Agent, BidderAgent, LlmAgent, MctsAgent, MctsConfig,
    RandomAgent, RuleAgent,
};
use bidder_core::bidder::ExplorationConfig;
use bidder_core::game::{settle, Game, PlayerId};
use bidder_core::holdem::{parse_cards, sample_session, HoldemAction, HoldemState, StrengthBoostConfig};
use bidder_core::negotiation::{
    sample_instance, InstanceConfig, ItemPool, NegotiationAction, NegotiationState, UtilityVector,
};
use bidder_core::oracle::{
    Deliberator, DeliberatorConfig, HoldemScripted, OracleGame, ScriptedBackend, TemplateSet, Variant,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn holdem(cards: &str) -> HoldemState {
    let c = parse_cards(cards).unwrap();
    HoldemState::new([[c[0], c[1]], [c[2], c[3]]], [c[4], c[5], c[6], c[7], c[8]]).unwrap()
}

fn scripted<G: OracleGame>() -> Arc<Deliberator<G>> {
    Arc::new(Deliberator::new(
        Arc::new(ScriptedBackend),
        Arc::new(TemplateSet::shipped()),
        DeliberatorConfig::default(),
    ))
}

#[test]
fn random_is_uniform_and_reproducible() {
    let s = holdem("As Kd 7c 2h 3s 4s 9h Jd Qc");
    assert_eq!(s.legal_actions().unwrap().len(), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0usize; 4];
    for _ in 0..10_000 {
        counts[random_act(&s, &mut rng).unwrap() as usize] += 1;
    }
    for a in s.legal_actions().unwrap() {
        let f = counts[a as usize] as f64 / 10_000.0;
        assert!((f - 1.0 / 3.0).abs() < 0.02, "{a}: {f}");
    }
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..50).map(|_| random_act(&s, &mut rng).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(9), draw(9));
}

#[test]
fn rule_policy_table() {
    // pocket pair preflop with a raise available
    let s = holdem("9s 9d 7c 2h 3s 4s Kh Jd Qc");
    assert_eq!(rule_act(&s, PlayerId::P0).unwrap(), HoldemAction::Raise);

    // high card facing a raise folds
    let s = holdem("As Kd 7c 2h 3s 4s 9h Jd Qc").apply(&HoldemAction::Raise).unwrap();
    assert_eq!(rule_act(&s, PlayerId::P1).unwrap(), HoldemAction::Fold);

    // high card not facing a raise checks or calls
    let s = holdem("7c 2h As Kd 3s 4s 9h Jd Qc");
    assert_eq!(rule_act(&s, PlayerId::P0).unwrap(), HoldemAction::Call);
    let s = s.apply(&HoldemAction::Call).unwrap();
    assert_eq!(rule_act(&s, PlayerId::P1).unwrap(), HoldemAction::Check);

    // pair at the raise cap calls
    let mut s = holdem("9s 9d Ac Ah 3s 4s Kh Jd Qc");
    for _ in 0..4 {
        s = s.apply(&HoldemAction::Raise).unwrap();
    }
    assert!(!s.is_legal(&HoldemAction::Raise));
    assert_eq!(rule_act(&s, s.current_player().unwrap()).unwrap(), HoldemAction::Call);
}

// ---- Kuhn poker: an independent best-response oracle by enumerating every
// pure strategy of the responder.

// P0 infosets: card at the root and card after "pb"; P1 infosets: card after "p" and after "b".
type Mixed = [[f64; 2]; 6];

fn kuhn_payoff(c0: usize, c1: usize, p0: &Mixed, p1: &Mixed) -> f64 {
    let bet = |p: &Mixed, i: usize| p[i][1];
    let show = |stake: f64| if c0 > c1 { stake } else { -stake };
    let b0 = bet(p0, c0);
    let after_p = bet(p1, c1); // P1 bets after a check
    let after_b = bet(p1, 3 + c1); // P1 calls a bet
    let call_pb = bet(p0, 3 + c0);
    let checked = after_p * (call_pb * show(2.0) + -(1.0 - call_pb)) + (1.0 - after_p) * show(1.0);
    let betted = after_b * show(2.0) + (1.0 - after_b) * 1.0;
    b0 * betted + (1.0 - b0) * checked
}

fn kuhn_value(p0: &Mixed, p1: &Mixed) -> f64 {
    let mut v = 0.0;
    for c0 in 0..3 {
        for c1 in 0..3 {
            if c0 != c1 {
                v += kuhn_payoff(c0, c1, p0, p1) / 6.0;
            }
        }
    }
    v
}

fn mixed_from(policy: &CfrPolicy, player: usize) -> Mixed {
    let keys: [&str; 2] = if player == 0 { ["", "pb"] } else { ["p", "b"] };
    let mut m = [[0.0; 2]; 6];
    for (slot, suffix) in keys.iter().enumerate() {
        for (c, name) in ["J", "Q", "K"].iter().enumerate() {
            let p = policy.probabilities(&format!("{name}{suffix}")).unwrap();
            m[slot * 3 + c] = [p[0], p[1]];
        }
    }
    m
}

fn pure(bits: u32) -> Mixed {
    let mut m = [[0.0; 2]; 6];
    for (i, row) in m.iter_mut().enumerate() {
        *row = if bits >> i & 1 == 1 { [0.0, 1.0] } else { [1.0, 0.0] };
    }
    m
}

fn brute_best_responses(policy: &CfrPolicy) -> (f64, f64) {
    let (s0, s1) = (mixed_from(policy, 0), mixed_from(policy, 1));
    let br0 = (0..64).map(|b| kuhn_value(&pure(b), &s1)).fold(f64::NEG_INFINITY, f64::max);
    let br1 = (0..64).map(|b| -kuhn_value(&s0, &pure(b))).fold(f64::NEG_INFINITY, f64::max);
    (br0, br1)
}

#[test]
fn kuhn_cfr_converges_to_equilibrium() {
    let policy = cfr_train(&Kuhn, 100_000, 1_000).unwrap();
    for probs in policy.strategy.values() {
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let (br0, br1) = brute_best_responses(&policy);
    assert!((best_response_value(&Kuhn, &policy, 0).unwrap() - br0).abs() < 1e-12);
    assert!((best_response_value(&Kuhn, &policy, 1).unwrap() - br1).abs() < 1e-12);
    let expl = exploitability(&Kuhn, &policy).unwrap();
    assert!((expl - (br0 + br1) / 2.0).abs() < 1e-12);
    assert!(expl < 0.01, "exploitability {expl}");
    // the game value seen by a best-responding first player
    assert!((br0 + 1.0 / 18.0).abs() < 0.005, "{br0}");
    let v = expected_value(&Kuhn, &policy).unwrap();
    assert!((v + 1.0 / 18.0).abs() < 0.005, "{v}");
}

#[test]
fn exploitability_shrinks_with_training() {
    let e = |n| exploitability(&Kuhn, &cfr_train(&Kuhn, n, 100).unwrap()).unwrap();
    let (a, b, c) = (e(10), e(1_000), e(20_000));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn untrained_policy_is_uniform_and_round_trips() {
    let policy = cfr_train(&Kuhn, 0, 100).unwrap();
    assert_eq!(policy.strategy.len(), 12);
    assert!(policy.strategy.values().all(|p| p == &vec![0.5, 0.5]));
    // uniform play: the brute oracle and the library agree on exploitability
    let (br0, br1) = brute_best_responses(&policy);
    assert!((exploitability(&Kuhn, &policy).unwrap() - (br0 + br1) / 2.0).abs() < 1e-12);

    let trained = cfr_train(&Kuhn, 500, 100).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kuhn.json");
    trained.save(&path).unwrap();
    assert_eq!(CfrPolicy::load(&path).unwrap(), trained);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(json["Kpb"].is_array());
}

#[test]
fn solver_strategy_follows_positive_regret() {
    let mut solver = CfrSolver::new(&Kuhn, 100);
    solver.run(37).unwrap();
    for key in ["J", "Qp", "Kb", "Jpb"] {
        let r = solver.regrets(key).unwrap();
        assert_eq!(solver.current(key).unwrap(), regret_matching(r));
    }
}

proptest! {
    #[test]
    fn regret_matching_invariant(regrets in prop::collection::vec(-5.0f64..5.0, 1..6)) {
        let s = regret_matching(&regrets);
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let positive: f64 = regrets.iter().map(|r| r.max(0.0)).sum();
        for (p, r) in s.iter().zip(&regrets) {
            if positive > 0.0 {
                prop_assert!((p - r.max(0.0) / positive).abs() < 1e-12);
            } else {
                prop_assert!((p - 1.0 / regrets.len() as f64).abs() < 1e-12);
            }
        }
    }
}

// ---- MCTS

fn dominant_accept_state() -> NegotiationState {
    // the opponent asks for nothing, so accepting hands us the whole pool
    let s =
        NegotiationState::new(ItemPool([2, 1, 3]), [UtilityVector([3, 2, 1]), UtilityVector([1, 2, 3])], 6).unwrap();
    s.apply(&NegotiationAction::plain([0, 0, 0])).unwrap()
}

#[test]
fn mcts_accepts_a_dominant_offer() {
    let s = dominant_accept_state();
    let me = s.current_player().unwrap();
    let cfg = MctsConfig { simulations: 10_000, ..Default::default() };
    let runs = 20;
    let accepted = (0..runs)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            mcts_act(&s, me, &cfg, &mut rng).unwrap() == NegotiationAction::Accept
        })
        .count();
    assert!(accepted as f64 / runs as f64 >= 0.95, "{accepted}/{runs}");
}

#[test]
fn mcts_degenerate_budget_and_reproducibility() {
    let s = dominant_accept_state();
    let me = s.current_player().unwrap();
    let one = MctsConfig { simulations: 1, ..Default::default() };
    let picks: std::collections::BTreeSet<_> = (0..40)
        .map(|seed| mcts_act(&s, me, &one, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap())
        .inspect(|a| assert!(s.is_legal(a)))
        .collect();
    assert!(picks.len() > 10);
    let cfg = MctsConfig { simulations: 300, ..Default::default() };
    let a = mcts_act(&s, me, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = mcts_act(&s, me, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a, b);
}

// ---- prompt variants

#[test]
fn variants_follow_the_scripted_baseline() {
    let s = holdem("As Ad 7c 2h 3s 4s 9h Jd Qc");
    let d = scripted::<HoldemState>();
    let view = s.view(PlayerId::P0);
    let expected = HoldemScripted::baseline(&view, &s.legal_actions().unwrap());
    for v in [Variant::Direct, Variant::Cot, Variant::Reflexion] {
        let decision = llm_variant_act(&s, PlayerId::P0, v, &d).unwrap();
        assert_eq!(decision.action, expected, "{v}");
        let turns = if v == Variant::Reflexion { 2 } else { 1 };
        assert_eq!(decision.transcript.calls(), turns, "{v}");
    }
    let tot = llm_variant_act(&s, PlayerId::P0, Variant::TotLite, &d).unwrap();
    assert!(s.is_legal(&tot.action));
    assert_eq!(tot.transcript.calls(), 2);
}

// ---- agent contract fuzz

fn holdem_states(n: usize, seed: u64) -> Vec<(HoldemState, PlayerId)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let spec = sample_session(rng.gen(), &StrengthBoostConfig::natural()).unwrap();
        let mut s = HoldemState::from_session(&spec).unwrap();
        while let Some(p) = s.current_player() {
            out.push((s.clone(), p));
            let a = random_act(&s, &mut rng).unwrap();
            s = settle(s.apply(&a).unwrap()).unwrap();
        }
    }
    out.truncate(n);
    out
}

fn negotiation_states(n: usize, seed: u64) -> Vec<(NegotiationState, PlayerId)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let inst = sample_instance(rng.gen(), &InstanceConfig::default()).unwrap();
        let mut s = inst.initial_state().unwrap();
        while let Some(p) = s.current_player() {
            out.push((s.clone(), p));
            // bias towards long games so late turns are covered
            let legal = s.legal_actions().unwrap();
            let a = if rng.gen_bool(0.1) {
                *legal.last().unwrap()
            } else {
                legal[rng.gen_range(0..legal.len())]
            };
            s = s.apply(&a).unwrap();
        }
    }
    out.truncate(n);
    out
}

fn fuzz<G: OracleGame>(agents: &[Box<dyn Agent<G>>], states: &[(G, PlayerId)]) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (s, p) in states {
        for agent in agents {
            let d = checked_act(agent.as_ref(), s, *p, &mut rng).unwrap_or_else(|e| panic!("{}: {e}", agent.name()));
            assert!(s.is_legal(&d.action));
        }
    }
}

#[test]
fn holdem_agents_always_act_legally() {
    let d = scripted::<HoldemState>();
    let mut agents: Vec<Box<dyn Agent<HoldemState>>> = vec![Box::new(RandomAgent), Box::new(RuleAgent)];
    for v in Variant::ALL {
        agents.push(Box::new(LlmAgent::new(v, d.clone())));
    }
    agents.push(Box::new(BidderAgent::new(ExplorationConfig { horizon: 1, ..Default::default() }, d)));
    fuzz(&agents, &holdem_states(10_000, 7));
}

#[test]
fn negotiation_agents_always_act_legally() {
    let d = scripted::<NegotiationState>();
    let mut agents: Vec<Box<dyn Agent<NegotiationState>>> = vec![Box::new(RandomAgent)];
    agents.push(Box::new(MctsAgent { config: MctsConfig { simulations: 30, ..Default::default() } }));
    for v in Variant::ALL {
        agents.push(Box::new(LlmAgent::new(v, d.clone())));
    }
    let bidder = ExplorationConfig { horizon: 1, max_branching: Some(2), ..Default::default() };
    agents.push(Box::new(BidderAgent::new(bidder, d)));
    fuzz(&agents, &negotiation_states(10_000, 8));
}

#[test]
fn transcripts_are_empty_for_non_oracle_agents() {
    let s = holdem("As Ad 7c 2h 3s 4s 9h Jd Qc");
    let d = RandomAgent.act(&s, PlayerId::P0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(d.transcript.calls(), 0);
    assert_eq!(Agent::<HoldemState>::name(&RandomAgent), "random");
}

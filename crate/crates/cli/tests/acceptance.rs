//! End-to-end acceptance checks. Runs as a plain binary so each criterion
//! prints one PASS/FAIL line; exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bidder_core::baselines::cfr::{best_response_value, cfr_train, expected_value, exploitability, Kuhn};
use bidder_core::baselines::RuleAgent;
use bidder_core::bidder::{aggregate, explore, Aggregation, ExplorationConfig, ExplorationTrace, TraceEnd};
use bidder_core::game::{settle, Game, PlayerId, ToAct};
use bidder_core::harness::{
    agreement_rate, mean_payoffs, rational_degree, run_match, AgentSpec, Environment, MatchConfig, OracleKind, Role,
};
use bidder_core::holdem::{evaluate7, full_deck, sample_session, HoldemAction, HoldemState, StrengthBoostConfig};
use bidder_core::negotiation::{
    pareto_optimal, sample_instance, InstanceConfig, ItemPool, NegotiationAction, NegotiationState, UtilityVector,
};
use bidder_core::oracle::{placeholders, Deliberator, DeliberatorConfig, OracleGame, ScriptedBackend, TemplateSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !bool::from($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn hand_evaluator() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut deck = full_deck();
    let mut pairs = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        deck.shuffle(&mut rng);
        let hand = &deck[..7];
        pairs.push((common::brute_rank7(hand), evaluate7(hand).map_err(|e| e.to_string())?));
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let mut mismatches = 0;
    for w in pairs.windows(2) {
        let ok = if w[0].0 == w[1].0 { w[0].1 == w[1].1 } else { w[0].1 < w[1].1 };
        mismatches += !ok as usize;
    }
    let took = start.elapsed();
    ensure!(mismatches == 0, "{mismatches} ordering mismatches");
    ensure!(took < Duration::from_secs(10), "took {took:?}");
    Ok(format!("10000 hands, 0 mismatches, {took:.2?}"))
}

fn zero_sum() -> Check {
    let boost = StrengthBoostConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut steps = 0;
    for g in 0..1_000u64 {
        let spec = sample_session(g, &boost).map_err(|e| e.to_string())?;
        let mut s = HoldemState::from_session(&spec).map_err(|e| e.to_string())?;
        loop {
            let inv = s.invested();
            ensure!(s.pot() == inv[0] + inv[1], "game {g}: pot {} but invested {inv:?}", s.pot());
            steps += 1;
            s = match s.to_act() {
                ToAct::Terminal => break,
                ToAct::Chance => s.advance_chance().map_err(|e| e.to_string())?,
                ToAct::Player(_) => {
                    let legal = s.legal_actions().map_err(|e| e.to_string())?;
                    s.apply(&legal[rng.gen_range(0..legal.len())]).map_err(|e| e.to_string())?
                }
            };
        }
        let (a, b) = (s.payoff(PlayerId::P0).unwrap(), s.payoff(PlayerId::P1).unwrap());
        ensure!(a + b == 0.0, "game {g}: payoffs {a} + {b}");
    }
    Ok(format!("1000 games, {steps} states checked"))
}

fn aggregation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let legal: Vec<u8> = (0..6).collect();
    for set in 0..1_000 {
        let beta = [0.5, 0.8, 1.0][set % 3];
        let n = rng.gen_range(1..=50);
        let traces: Vec<ExplorationTrace<u8>> = (0..n)
            .map(|_| {
                let depth = rng.gen_range(1..=4);
                ExplorationTrace {
                    actions: (0..depth).map(|_| rng.gen_range(0..6)).collect(),
                    opponent: vec![None; depth],
                    rewards: (0..depth).map(|_| rng.gen_range(-10.0..10.0)).collect(),
                    end: TraceEnd::Horizon,
                }
            })
            .collect();
        let agg = aggregate(&traces, &legal, beta, Aggregation::Max).map_err(|e| e.to_string())?;
        let flat: Vec<_> = traces.iter().map(|t| (t.actions[0].to_string(), t.rewards.clone())).collect();
        let oracle = common::brute_max_returns(&flat, beta);
        ensure!(agg.returns.len() == oracle.len(), "set {set}: {} returns vs {}", agg.returns.len(), oracle.len());
        for (a, g) in &agg.returns {
            let want = oracle[&a.to_string()];
            ensure!((g - want).abs() < 1e-9, "set {set} action {a}: {g} vs {want}");
        }
    }
    Ok("1000 trace sets within 1e-9".into())
}

fn scripted<G: OracleGame>() -> Deliberator<G> {
    Deliberator::new(Arc::new(ScriptedBackend), Arc::new(TemplateSet::shipped()), DeliberatorConfig::default())
}

fn shape_at<G: OracleGame>(state: &G, d: &Deliberator<G>) -> Result<(), String> {
    let me = state.current_player().ok_or("no player to act")?;
    let legal = state.legal_actions().map_err(|e| e.to_string())?;
    let hidden = G::neutral_hidden();
    let run = |t| {
        let cfg = ExplorationConfig { horizon: t, ..Default::default() };
        explore(state, me, &hidden, &cfg, d, &mut Default::default()).map_err(|e| e.to_string())
    };
    let one = run(1)?;
    let two = run(2)?;
    ensure!(one.len() == legal.len(), "T=1 gave {} traces for {} actions", one.len(), legal.len());
    let key = |t: &ExplorationTrace<G::Action>| format!("{:?}|{:?}|{:?}", t.actions, t.opponent, t.rewards);
    let mut cut: Vec<String> = two.iter().map(|t| key(&t.truncated(1))).collect();
    cut.dedup();
    ensure!(cut == one.iter().map(key).collect::<Vec<_>>(), "T=2 truncated differs from T=1");

    for (horizon, traces) in [(1, &one), (2, &two)] {
        for t in traces {
            let mut s = state.clone();
            for (a, o) in t.actions.iter().zip(&t.opponent) {
                s = s.apply(a).map_err(|e| e.to_string())?;
                if let Some(o) = o {
                    s = s.apply(o).map_err(|e| e.to_string())?;
                }
            }
            let ok = match t.end {
                TraceEnd::Horizon => t.len() == horizon || s.current_player() != Some(me),
                TraceEnd::Terminal => s.is_terminal(),
                TraceEnd::Chance => s.to_act() == ToAct::Chance,
                TraceEnd::Failed(ref e) => return Err(format!("failed trace: {e}")),
            };
            ensure!(ok, "trace {:?} ends {:?} at horizon {horizon}", t.actions, t.end);
        }
    }
    Ok(())
}

fn exploration_shape() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let hd = scripted::<HoldemState>();
    let nd = scripted::<NegotiationState>();
    for point in 0..100 {
        let mut deck = full_deck();
        deck.shuffle(&mut rng);
        let mut s = settle(
            HoldemState::new([[deck[0], deck[1]], [deck[2], deck[3]]], [deck[4], deck[5], deck[6], deck[7], deck[8]])
                .unwrap(),
        )
        .unwrap();
        for _ in 0..rng.gen_range(0..8) {
            let legal: Vec<_> = s.legal_actions().unwrap().into_iter().filter(|a| *a != HoldemAction::Fold).collect();
            let next = settle(s.apply(&legal[rng.gen_range(0..legal.len())]).unwrap()).unwrap();
            if next.is_terminal() {
                break;
            }
            s = next;
        }
        shape_at(&s, &hd).map_err(|e| format!("holdem point {point}: {e}"))?;

        let pool = ItemPool([(); 3].map(|_| rng.gen_range(1..=2)));
        let u = [(); 2].map(|_| UtilityVector([(); 3].map(|_| rng.gen_range(0..=10))));
        let mut s = NegotiationState::new(pool, u, rng.gen_range(4..=10)).unwrap();
        for _ in 0..rng.gen_range(0..3) {
            let req = pool.valid_requests();
            s = s.apply(&NegotiationAction::plain(req[rng.gen_range(0..req.len())].0)).unwrap();
        }
        shape_at(&s, &nd).map_err(|e| format!("negotiation point {point}: {e}"))?;
    }
    Ok("200 decision points".into())
}

fn cfr() -> Check {
    let start = Instant::now();
    let policy = cfr_train(&Kuhn, 100_000, 1_000).map_err(|e| e.to_string())?;
    let expl = exploitability(&Kuhn, &policy).map_err(|e| e.to_string())?;
    let br0 = best_response_value(&Kuhn, &policy, 0).map_err(|e| e.to_string())?;
    let br1 = best_response_value(&Kuhn, &policy, 1).map_err(|e| e.to_string())?;
    let value = expected_value(&Kuhn, &policy).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    // the true value lies between what either best response concedes
    let (lo, hi) = (-br1, br0);
    let optimum = -1.0 / 18.0;
    ensure!(expl < 0.01, "exploitability {expl}");
    ensure!(lo <= optimum + 1e-12 && optimum <= hi + 1e-12, "bracket [{lo}, {hi}] misses {optimum}");
    ensure!((value - optimum).abs() <= 0.005, "value {value}");
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(format!("exploitability {expl:.5}, value {value:.5} in [{lo:.5}, {hi:.5}], {took:.2?}"))
}

fn negotiation_rules() -> Check {
    let cfg = InstanceConfig::default();
    for seed in 0..1_000 {
        let inst = sample_instance(seed, &cfg).map_err(|e| e.to_string())?;
        let [a, b] = inst.seat_utilities();
        ensure!(a.total(&inst.pool) == b.total(&inst.pool), "instance {seed}: unequal totals");
        ensure!((4..=10).contains(&inst.max_turns), "instance {seed}: max_turns {}", inst.max_turns);

        let start = inst.initial_state().map_err(|e| e.to_string())?;
        let mut s = start.clone();
        while !s.is_terminal() {
            s = s.apply(&NegotiationAction::plain(inst.pool.0)).map_err(|e| e.to_string())?;
        }
        ensure!(payoffs(&s) == [0.0, 0.0], "instance {seed}: timeout paid {:?}", payoffs(&s));

        let greedy = inst.pool.0.map(|c| c + 1);
        let s = start
            .apply(&NegotiationAction::plain(greedy))
            .and_then(|s| s.apply(&NegotiationAction::Accept))
            .map_err(|e| e.to_string())?;
        ensure!(payoffs(&s) == [0.0, 0.0], "instance {seed}: invalid deal paid {:?}", payoffs(&s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..500 {
        let pool = [(); 3].map(|_| rng.gen_range(0..=4u32));
        let ua = [(); 3].map(|_| rng.gen_range(0..=10u32));
        let ub = [(); 3].map(|_| rng.gen_range(0..=10u32));
        let deal = [0, 1, 2].map(|k| rng.gen_range(0..=pool[k]));
        let fast = pareto_optimal(deal, &ItemPool(pool), &UtilityVector(ua), &UtilityVector(ub));
        ensure!(fast == common::brute_pareto(deal, pool, ua, ub), "pareto case {i}: pool {pool:?} deal {deal:?}");
    }
    Ok("1000 instances, 500 Pareto cases, 0 mismatches".into())
}

fn payoffs<G: Game>(s: &G) -> [f64; 2] {
    [s.payoff(PlayerId::P0).unwrap(), s.payoff(PlayerId::P1).unwrap()]
}

fn holdem(player: AgentSpec, opponent: AgentSpec, sessions: usize, seed: u64) -> MatchConfig {
    MatchConfig { player, opponent, sessions, seed, ..MatchConfig::default() }
}

fn rational() -> Check {
    let logs = run_match(&holdem(AgentSpec::Rule, AgentSpec::Random, 50, 7)).map_err(|e| e.to_string())?;
    let own = rational_degree::<HoldemState>(&logs, Role::Player, &RuleAgent).map_err(|e| e.to_string())?;
    use HoldemAction::*;
    let fixture = agreement_rate(&[Raise, Call, Fold], &[Raise, Raise, Fold]).map_err(|e| e.to_string())?;
    ensure!(own == 1.0, "self agreement {own}");
    ensure!((fixture - 2.0 / 3.0).abs() < 1e-15, "fixture {fixture}");
    Ok(format!("self {own}, fixture {fixture:.6}"))
}

fn mirror() -> Check {
    let logs = run_match(&holdem(AgentSpec::Rule, AgentSpec::Rule, 100, 8)).map_err(|e| e.to_string())?;
    ensure!(logs.len() == 200, "{} logs", logs.len());
    for pair in logs.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (pa, pb) = (a.payoffs.ok_or("failed game")?, b.payoffs.ok_or("failed game")?);
        ensure!(
            pa[a.player_seat.index()] == pb[b.player_seat.other().index()],
            "session {}: {pa:?} vs mirrored {pb:?}",
            a.session
        );
    }
    Ok("100 mirrored pairs symmetric".into())
}

fn cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out =
        Command::new(env!("CARGO_BIN_EXE_bidder")).args(args).current_dir(dir).output().map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "bidder {args:?} exited {}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [("holdem", "bidder,rule", "random", "4"), ("negotiation", "bidder,mcts", "random", "1")];
    let mut lines = 0;
    for (env, players, opponents, workers) in runs {
        let go = |name: &str, workers: &str| {
            cli(
                &[
                    "tournament",
                    "--env",
                    env,
                    "--players",
                    players,
                    "--opponents",
                    opponents,
                    "--oracle",
                    "scripted",
                    "--sessions",
                    "3",
                    "--seed",
                    "11",
                    "--workers",
                    workers,
                    "--out",
                    name,
                ],
                dir.path(),
            )?;
            std::fs::read(dir.path().join(name)).map_err(|e| e.to_string())
        };
        let a = go("a.jsonl", workers)?;
        let b = go("b.jsonl", workers)?;
        let c = go("c.jsonl", "2")?;
        ensure!(a == b, "{env}: repeated runs differ");
        ensure!(a == c, "{env}: {workers} vs 2 workers differ");
        lines += a.iter().filter(|&&x| x == b'\n').count();
    }
    Ok(format!("{lines} log lines byte-identical across runs and worker counts"))
}

fn templates() -> Check {
    let set = TemplateSet::shipped();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_stem().and_then(|s| s.to_str()).ok_or("bad golden file name")?.to_string();
        let body = set.body(&name).map_err(|e| e.to_string())?;
        let names = placeholders(body);
        let bindings: Vec<(&str, String)> = names.iter().map(|p| (p.as_str(), format!("<<{p}>>"))).collect();
        let rendered = set.render(&name, &bindings).map_err(|e| e.to_string())?;
        let expected = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        ensure!(format!("{rendered}\n") == expected, "template {name} differs from its golden text");
        n += 1;
    }
    ensure!(n >= 17, "only {n} golden files");
    Ok(format!("{n} templates byte-identical"))
}

fn smoke() -> Check {
    let start = Instant::now();
    let mut cfg = holdem(AgentSpec::Bidder, AgentSpec::Random, 50, 0);
    cfg.environment = Environment::Holdem;
    cfg.oracle.kind = OracleKind::Scripted;
    cfg.exploration = ExplorationConfig { horizon: 2, beta: 0.8, ..Default::default() };
    let logs = run_match(&cfg).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure!(logs.len() == 100 && logs.iter().all(|l| l.completed()), "not every game completed");
    let (raw, mirrored) = mean_payoffs(&logs);
    let (raw, mirrored) = (raw.unwrap_or(f64::NAN), mirrored.unwrap_or(f64::NAN));
    ensure!(mirrored > 0.0, "mean payoff {mirrored} (raw {raw})");
    Ok(format!("mean payoff {mirrored:.3} over 100 games (raw {raw:.3}), {took:.2?}"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("hand evaluator vs brute force", hand_evaluator),
        ("zero-sum and chip conservation", zero_sum),
        ("aggregation oracle equivalence", aggregation),
        ("exploration shape", exploration_shape),
        ("CFR on Kuhn poker", cfr),
        ("negotiation rules and Pareto checker", negotiation_rules),
        ("rational degree", rational),
        ("mirror protocol", mirror),
        ("tournament determinism", determinism),
        ("template fidelity", templates),
        ("end-to-end smoke", smoke),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} passed in {:.1?}", criteria.len() - failed, criteria.len(), start.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}

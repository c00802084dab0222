use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bidder_core::baselines::{Agent, RandomAgent, RuleAgent};
use bidder_core::harness::{
    compute_report, emit_report, read_logs, read_report, run_tournament, AgentSpec, Environment, GameLog, LogWriter,
    MatchConfig, MetricsReport, OracleKind, ReportFormat,
};
use bidder_core::holdem::HoldemState;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bidder", version, about = "Run and score game-playing agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play a single game and print every decision.
    Play(RunArgs),
    /// Run every player against every opponent over seeded sessions.
    Tournament(TournamentArgs),
    /// Recompute metrics from JSONL game logs.
    Metrics(MetricsArgs),
    /// Write report tables from logs or a saved JSON report.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<Environment>,
    #[arg(long)]
    player: Option<AgentSpec>,
    #[arg(long)]
    opponent: Option<AgentSpec>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    oracle: Option<OracleKind>,
    /// Transcript for the replay oracle.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Save every oracle exchange of this run as a replayable transcript.
    #[arg(long)]
    record: Option<PathBuf>,
    /// JSONL file for the game logs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TournamentArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    sessions: Option<usize>,
    /// Also play every session with the seats' endowments swapped.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    mirrored: Option<bool>,
    /// Comma-separated row agents; overrides --player.
    #[arg(long, value_delimiter = ',')]
    players: Vec<AgentSpec>,
    /// Comma-separated column agents; overrides --opponent.
    #[arg(long, value_delimiter = ',')]
    opponents: Vec<AgentSpec>,
    #[arg(long)]
    workers: Option<usize>,
    /// Report file; `.json` writes JSON, anything else CSV.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    logs: PathBuf,
    /// Reference agent for the rational degree (rule or random).
    #[arg(long, default_value = "rule")]
    reference: AgentSpec,
    /// Where to save the report; `.json` writes JSON, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSONL logs to score.
    #[arg(long, conflicts_with = "metrics", required_unless_present = "metrics")]
    logs: Option<PathBuf>,
    /// JSON report written earlier by `metrics` or `tournament`.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long, default_value = "rule")]
    reference: AgentSpec,
    #[arg(long)]
    out: PathBuf,
    /// Output format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<ReportFormat>,
}

fn base_config(run: &RunArgs) -> Result<MatchConfig> {
    let mut cfg = match &run.config {
        Some(p) => MatchConfig::load(p)?,
        None => MatchConfig::default(),
    };
    if let Some(e) = run.env {
        cfg.environment = e;
    }
    if let Some(p) = run.player {
        cfg.player = p;
    }
    if let Some(o) = run.opponent {
        cfg.opponent = o;
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(h) = run.horizon {
        cfg.exploration.horizon = h;
    }
    if let Some(b) = run.beta {
        cfg.exploration.beta = b;
    }
    if let Some(k) = run.oracle {
        cfg.oracle.kind = k;
    }
    if let Some(r) = &run.replay {
        cfg.oracle.replay = Some(r.clone());
    }
    if let Some(r) = &run.record {
        cfg.oracle.record = Some(r.clone());
    }
    if let Some(o) = &run.out {
        cfg.output.logs = Some(o.clone());
    }
    Ok(cfg)
}

/// Runs the configured roster, streaming logs to the output file if set.
fn run(cfg: &MatchConfig, mut each: impl FnMut(&GameLog)) -> Result<Vec<GameLog>> {
    let mut writer = cfg.output.logs.as_deref().map(LogWriter::create).transpose()?;
    let logs = run_tournament(cfg, &mut |log| {
        if let Some(w) = writer.as_mut() {
            w.append(log)?;
        }
        each(log);
        Ok(())
    })?;
    Ok(logs)
}

fn failed(logs: &[GameLog]) -> usize {
    logs.iter().filter(|l| !l.completed()).count()
}

fn play(args: RunArgs) -> Result<bool> {
    let mut cfg = base_config(&args)?;
    cfg.sessions = 1;
    cfg.mirrored = false;
    cfg.players.clear();
    cfg.opponents.clear();
    cfg.workers = Some(1);
    let logs = run(&cfg, |log| {
        println!("{} ({}), player in seat {}", log.matchup(), log.environment, log.player_seat.index());
        println!("setup: {}", log.setup);
        for d in &log.decisions {
            let calls = if d.oracle_calls > 0 { format!("  [{} oracle calls]", d.oracle_calls) } else { String::new() };
            println!(
                "  {:>3} seat {} {:<8} {}{calls}",
                d.step,
                d.seat.index(),
                format!("{:?}", d.role).to_lowercase(),
                d.label
            );
            for n in &d.notes {
                println!("        note: {n}");
            }
        }
        match (&log.payoffs, &log.error) {
            (_, Some(e)) => println!("failed: {e}"),
            (Some(p), None) => println!("payoffs: seat 0 {} / seat 1 {}", p[0], p[1]),
            (None, None) => {}
        }
    })?;
    Ok(failed(&logs) == 0)
}

fn tournament(args: TournamentArgs) -> Result<bool> {
    let mut cfg = base_config(&args.run)?;
    if let Some(s) = args.sessions {
        cfg.sessions = s;
    }
    if let Some(m) = args.mirrored {
        cfg.mirrored = m;
    }
    if !args.players.is_empty() {
        cfg.players = args.players;
    } else if args.run.player.is_some() {
        cfg.players.clear();
    }
    if !args.opponents.is_empty() {
        cfg.opponents = args.opponents;
    } else if args.run.opponent.is_some() {
        cfg.opponents.clear();
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if let Some(r) = args.report {
        cfg.output.report = Some(r);
    }
    let total = cfg.games() * {
        let (r, c) = cfg.roster();
        r.len() * c.len()
    };
    let mut done = 0;
    let logs = run(&cfg, |log| {
        done += 1;
        if let Some(e) = &log.error {
            eprintln!("game {done}/{total} ({}, session {}) failed: {e}", log.matchup(), log.session);
        }
    })?;
    let reference = reference_agent(cfg.holdem.reference)?;
    let report = compute_report(&logs, reference.as_deref())?;
    print_report(&report);
    if let Some(path) = &cfg.output.report {
        write_report(&report, path, None)?;
    }
    let n = failed(&logs);
    if n > 0 {
        eprintln!("{n} of {} games failed", logs.len());
    }
    Ok(n == 0)
}

fn reference_agent(spec: AgentSpec) -> Result<Option<Box<dyn Agent<HoldemState>>>> {
    Ok(Some(match spec {
        AgentSpec::Rule => Box::new(RuleAgent),
        AgentSpec::Random => Box::new(RandomAgent),
        other => bail!("reference agent must be rule or random, not {other}"),
    }))
}

fn write_report(report: &MetricsReport, path: &Path, format: Option<ReportFormat>) -> Result<()> {
    let format = format.unwrap_or_else(|| ReportFormat::for_path(path));
    for f in emit_report(report, format, path)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn print_report(report: &MetricsReport) {
    for r in &report.rows {
        let mut line = format!("{:<28} games {:>4}", r.matchup, r.games);
        match r.environment {
            Environment::Holdem => {
                line += &format!(
                    "  payoff {:>8}  mirrored {:>8}  rational {}",
                    fmt(r.mean_payoff),
                    fmt(r.mean_payoff_mirrored),
                    fmt(r.rational_degree)
                );
            }
            Environment::Negotiation => {
                line += &format!("  score {}  agreement {}  pareto {}", fmt(r.score), fmt(r.agreement), fmt(r.pareto));
            }
        }
        if r.failed > 0 {
            line += &format!("  failed {}", r.failed);
        }
        println!("{line}");
    }
}

fn load_logs(path: &Path) -> Result<Vec<GameLog>> {
    read_logs(path).with_context(|| format!("reading {}", path.display()))
}

fn metrics(args: MetricsArgs) -> Result<bool> {
    let logs = load_logs(&args.logs)?;
    let reference = reference_agent(args.reference)?;
    let report = compute_report(&logs, reference.as_deref())?;
    print_report(&report);
    if let Some(out) = &args.out {
        write_report(&report, out, None)?;
    }
    Ok(true)
}

fn report(args: ReportArgs) -> Result<bool> {
    let report = match (&args.logs, &args.metrics) {
        (Some(l), _) => compute_report(&load_logs(l)?, reference_agent(args.reference)?.as_deref())?,
        (None, Some(m)) => read_report(m).with_context(|| format!("reading {}", m.display()))?,
        (None, None) => bail!("give --logs or --metrics"),
    };
    write_report(&report, &args.out, args.format)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Play(a) => play(a),
        Command::Tournament(a) => tournament(a),
        Command::Metrics(a) => metrics(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! `cardguess`: play, simulate and verify the card guessing game from the
//! command line.
//!
//! Exit codes: 0 success, 1 a check failed or a run errored, 2 bad usage,
//! 3 the request exceeds the exact oracle's size limit.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use cardguess::coupling::CouplingReport;
use cardguess::experiments::{run_monte_carlo, sweep, GridSpec, SweepRow, SWEEP_COLUMNS};
use cardguess::game::{new_deck, play_round, Feedback, FeedbackMode, GameConfig, Label, TallyTable};
use cardguess::oracle::{optimal_value, optimal_value_complete, verify_hit_bound, PosteriorOracle};
use cardguess::rng::{self, Stream};
use cardguess::suite::{run_suite, SuiteKind};
use cardguess::{Error, StrategySpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cardguess", version, about = "Card guessing with partial feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a strategy's expected payoff by Monte Carlo.
    Simulate(SimulateArgs),
    /// Exact posterior quantities for small decks.
    Oracle(OracleArgs),
    /// Build the coupled process and report its diagnostics.
    Couple(CoupleArgs),
    /// Run a grid of Monte Carlo estimates and bound checks.
    Sweep(SweepArgs),
    /// Run the acceptance criteria.
    Verify(VerifyArgs),
    /// Play a game at the terminal.
    Play(PlayArgs),
}

#[derive(Args)]
struct Deck {
    /// Copies of each label.
    #[arg(long)]
    m: u32,
    /// Number of distinct labels.
    #[arg(long)]
    n: u32,
}

#[derive(Args)]
struct Jobs {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Feedbackarg {
    Partial,
    Complete,
}

impl From<Feedbackarg> for FeedbackMode {
    fn from(f: Feedbackarg) -> Self {
        match f {
            Feedbackarg::Partial => FeedbackMode::Partial,
            Feedbackarg::Complete => FeedbackMode::Complete,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    deck: Deck,
    /// fixed:K, sticky, random, greedy-bound, exact-greedy or greedy-remaining.
    #[arg(long)]
    strategy: StrategySpec,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "partial")]
    feedback: Feedbackarg,
    /// Write the report as JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the summary line.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    deck: Deck,
    /// Exact optimal expected payoff.
    #[arg(long)]
    optimal: bool,
    /// Optimal payoff under complete feedback.
    #[arg(long)]
    complete: bool,
    /// Check the hit-probability bound at every reachable history.
    #[arg(long)]
    verify_bound: bool,
    /// Next-card distribution after a history such as `1:0,1:1,2:0`
    /// (guess:hit pairs).
    #[arg(long)]
    history: Option<String>,
}

#[derive(Args)]
struct CoupleArgs {
    #[command(flatten)]
    deck: Deck,
    #[arg(long)]
    strategy: StrategySpec,
    /// Sampled coupled games; required unless --exact-drift is given.
    #[arg(long)]
    trials: Option<usize>,
    /// Required whenever games are sampled.
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate the potential drift over the full probability tree.
    #[arg(long)]
    exact_drift: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON grid: {"m":[..],"n":[..],"strategies":[..],"trials":N}.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the rows as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Skip rows before this index and append to --out without a header.
    #[arg(long, default_value_t = 0)]
    from_row: usize,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Bounds,
    Coupling,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: SuiteArg,
    #[arg(long)]
    seed: u64,
    /// Write the results as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct PlayArgs {
    #[command(flatten)]
    deck: Deck,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "partial")]
    feedback: Feedbackarg,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::OracleLimitExceeded { .. } => 3,
            Error::InvalidConfig(_)
            | Error::InvalidLabel { .. }
            | Error::UnknownStrategy(_)
            | Error::WrongFeedbackMode(_)
            | Error::RandomizedStrategyUnsupported(_)
            | Error::InfeasibleHistory => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => with_jobs(&a.jobs, || simulate(&a)),
        Command::Oracle(a) => oracle(&a),
        Command::Couple(a) => with_jobs(&a.jobs, || couple(&a)),
        Command::Sweep(a) => with_jobs(&a.jobs, || run_sweep(&a)),
        Command::Verify(a) => with_jobs(&a.jobs, || verify(&a)),
        Command::Play(a) => play(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn with_jobs(jobs: &Jobs, body: impl FnOnce() -> Outcome + Send) -> Outcome {
    let threads = match jobs.jobs {
        Some(0) => return Err(usage("--jobs must be at least 1")),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |p| p.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure { code: 1, message: e.to_string() })?;
    pool.install(body)
}

fn config(deck: &Deck) -> Result<GameConfig, Failure> {
    Ok(GameConfig::new(deck.m, deck.n)?)
}

fn write_json(path: &PathBuf, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Outcome {
    let config = config(&a.deck)?.with_feedback(a.feedback.into());
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let report = run_monte_carlo(&config, a.strategy, a.trials, a.seed)?;
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        println!(
            "{} m={} n={} {}: mean {:.6} se {:.6} ci95 [{:.6}, {:.6}] over {} games",
            a.strategy,
            config.m,
            config.n,
            config.feedback,
            report.mean,
            report.std_error,
            report.ci95.0,
            report.ci95.1,
            report.trials
        );
    }
    Ok(true)
}

fn parse_history(text: &str, n: u32) -> Result<(Vec<Label>, Vec<bool>), Failure> {
    let mut guesses = Vec::new();
    let mut hits = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (g, y) = item.split_once(':').ok_or_else(|| usage(format!("expected guess:hit, got `{item}`")))?;
        let g: u32 = g.trim().parse().map_err(|_| usage(format!("bad label `{g}`")))?;
        let label = Label::new(g).filter(|l| l.get() <= n).ok_or(Error::InvalidLabel { label: g, n })?;
        let hit = match y.trim() {
            "1" => true,
            "0" => false,
            other => return Err(usage(format!("hit must be 0 or 1, got `{other}`"))),
        };
        guesses.push(label);
        hits.push(hit);
    }
    Ok((guesses, hits))
}

fn oracle(a: &OracleArgs) -> Outcome {
    let config = config(&a.deck)?;
    if !(a.optimal || a.complete || a.verify_bound || a.history.is_some()) {
        return Err(usage("choose at least one of --optimal, --complete, --verify-bound, --history"));
    }
    let mut pass = true;
    if a.optimal {
        let v = optimal_value(config.m, config.n)?;
        let r = v.as_ratio();
        println!("{}", json!({"m": config.m, "n": config.n, "feedback": "partial", "value": v.as_f64(), "exact": r.to_string()}));
    }
    if a.complete {
        let v = optimal_value_complete(config.m, config.n)?;
        let r = v.as_ratio();
        println!("{}", json!({"m": config.m, "n": config.n, "feedback": "complete", "value": v.as_f64(), "exact": r.to_string()}));
    }
    if a.verify_bound {
        let report = verify_hit_bound(config.m, config.n)?;
        pass &= report.pass;
        println!("{}", serde_json::to_string(&report).expect("serializable"));
    }
    if let Some(text) = &a.history {
        let (guesses, hits) = parse_history(text, config.n)?;
        if guesses.len() >= config.rounds() {
            return Err(usage("history must leave at least one card"));
        }
        let oracle = PosteriorOracle::new(config.m, config.n)?;
        let mut tallies = TallyTable::new(config.n);
        for (&g, &y) in guesses.iter().zip(&hits) {
            tallies.record(g, y);
        }
        let counts = oracle.next_card_counts(&tallies)?;
        let exact: Vec<String> = (1..=config.n).map(|k| counts.exact(Label::new(k).expect("positive")).to_string()).collect();
        println!(
            "{}",
            json!({"t": guesses.len() + 1, "distribution": counts.distribution(), "exact": exact, "consistent_orderings": counts.total.to_string()})
        );
    }
    Ok(pass)
}

fn couple(a: &CoupleArgs) -> Outcome {
    let trials = match (a.trials, a.exact_drift) {
        (Some(t), _) => t,
        (None, true) => 0,
        (None, false) => return Err(usage("--trials is required unless --exact-drift is given")),
    };
    let seed = match (a.seed, trials) {
        (Some(s), _) => s,
        (None, 0) => 0,
        (None, _) => return Err(usage("--seed is required when games are sampled")),
    };
    let report = CouplingReport::run(a.deck.m, a.deck.n, a.strategy, trials, seed, a.exact_drift)?;
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(report.pass())
}

fn run_sweep(a: &SweepArgs) -> Outcome {
    let text = fs::read_to_string(&a.grid)?;
    let grid: GridSpec = serde_json::from_str(&text).map_err(|e| usage(format!("malformed grid: {e}")))?;
    if grid.trials == 0 {
        return Err(usage("grid trials must be at least 1"));
    }
    let rows = sweep(&grid, a.seed, a.from_row);
    let mut writer: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(
            fs::OpenOptions::new()
                .create(true)
                .write(true)
                .append(a.from_row > 0)
                .truncate(a.from_row == 0)
                .open(path)?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    if a.from_row == 0 || a.out.is_none() {
        writeln!(writer, "{}", SWEEP_COLUMNS.join(","))?;
    }
    for row in &rows {
        writeln!(writer, "{}", row.csv_record().join(","))?;
    }
    writer.flush()?;
    if let Some(path) = &a.json {
        write_json(path, &rows)?;
    }
    let failed: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    for r in &failed {
        eprintln!("row {} ({},{},{}): {}", r.row, r.m, r.n, r.strategy, r.error.as_deref().unwrap_or(""));
    }
    Ok(failed.is_empty())
}

fn verify(a: &VerifyArgs) -> Outcome {
    let kind = match a.suite {
        SuiteArg::Bounds => SuiteKind::Bounds,
        SuiteArg::Coupling => SuiteKind::Coupling,
        SuiteArg::All => SuiteKind::All,
    };
    let results = run_suite(kind, a.seed, |r| println!("{r}"));
    if let Some(path) = &a.out {
        write_json(path, &results)?;
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.pass).map(|r| r.id.to_string()).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        Ok(true)
    } else {
        eprintln!("failing criteria: {}", failed.join(", "));
        Ok(false)
    }
}

fn play(a: &PlayArgs) -> Outcome {
    let config = config(&a.deck)?.with_seed(a.seed).with_feedback(a.feedback.into());
    let mut deck = new_deck(&config, &mut rng::stream(config.seed, Stream::Deck));
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    let mut score = 0;
    println!("{} cards: {} copies of labels 1..={}. Enter a label each round, q to quit.", config.rounds(), config.m, config.n);
    for t in 1..=config.rounds() {
        let guess = loop {
            print!("round {t}> ");
            io::stdout().flush()?;
            let Some(line) = lines.next().transpose()? else {
                println!();
                println!("score {score} after {} rounds", t - 1);
                return Ok(true);
            };
            let line = line.trim();
            if line == "q" {
                println!("score {score} after {} rounds", t - 1);
                return Ok(true);
            }
            match line.parse::<u32>().ok().and_then(Label::new).filter(|l| l.get() <= config.n) {
                Some(label) => break label,
                None => println!("enter a label between 1 and {}", config.n),
            }
        };
        let Feedback { correct, revealed, .. } = play_round(&mut deck, guess)?;
        score += correct as u32;
        match revealed {
            Some(card) => println!("{} (card was {card})", if correct { "hit" } else { "miss" }),
            None => println!("{}", if correct { "hit" } else { "miss" }),
        }
    }
    println!("final score {score} of {}", config.rounds());
    Ok(true)
}

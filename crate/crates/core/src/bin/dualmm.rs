use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use dualmm::engine::Market;
use dualmm::error::Error;
use dualmm::ledger::{parse_bundle, verify, MarketConfig, MarketState};
use dualmm::payoffs::Outcome;

#[derive(Parser)]
#[command(name = "dualmm", version, about = "Cost-function market maker built from convex conjugates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a fresh market state from a config file
    Init { config: PathBuf, state: PathBuf },
    /// Price a bundle without trading
    Quote {
        state: PathBuf,
        /// JSON array, e.g. "[1, 0]" or "[[1, 2, 0.5]]" for pair bets
        #[arg(long)]
        bundle: String,
    },
    /// Buy a bundle and persist the new state
    Trade {
        state: PathBuf,
        #[arg(long)]
        bundle: String,
    },
    /// Current instantaneous prices
    Price { state: PathBuf },
    /// Bid-ask spread for a bundle at the current state
    Spread {
        state: PathBuf,
        #[arg(long)]
        bundle: String,
    },
    /// Settle the market on an outcome
    Settle {
        state: PathBuf,
        /// Index, point or permutation as JSON
        #[arg(long)]
        outcome: String,
    },
    /// Summary of a state
    Report { state: PathBuf },
    /// Run the invariant battery on a config or state file
    Verify {
        path: PathBuf,
        /// Emit the report as JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Simulate traders who know the outcome pulling prices towards it
    Drain {
        state: PathBuf,
        #[arg(long)]
        outcome: String,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_VERIFY: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::SolverFailure { .. }) => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Init { config, state } => {
            let config = MarketConfig::load(&config)?;
            let (fresh, market) = MarketState::init(config)?;
            fresh.save(&state)?;
            print_json(&json!({
                "state": state.display().to_string(),
                "kind": fresh.config.spec.kind_name(),
                "initial_price": market.initial_price(),
            }));
        }
        Command::Quote { state, bundle } => {
            let (st, market) = load(&state)?;
            let parsed = parse_bundle(&market, &parse_json(&bundle, "bundle")?)?;
            let (r, fixed) = parsed.resolve(&market)?;
            let mut quote = market.quote(&st.q, &r)?;
            quote.cost += fixed;
            print_json(&quote);
        }
        Command::Trade { state, bundle } => {
            let (mut st, market) = load(&state)?;
            let parsed = parse_bundle(&market, &parse_json(&bundle, "bundle")?)?;
            let quote = parsed.apply(&mut st, &market)?;
            st.save(&state)?;
            print_json(&quote);
        }
        Command::Price { state } => {
            let (st, market) = load(&state)?;
            let price = market.price(&st.q)?;
            print_json(&json!({ "price": price, "price_sum": price.iter().sum::<f64>() }));
        }
        Command::Spread { state, bundle } => {
            let (st, market) = load(&state)?;
            let parsed = parse_bundle(&market, &parse_json(&bundle, "bundle")?)?;
            let (r, _) = parsed.resolve(&market)?;
            print_json(&json!({ "spread": market.bid_ask_spread(&st.q, &r)? }));
        }
        Command::Settle { state, outcome } => {
            let (mut st, market) = load(&state)?;
            let o = parse_outcome(&market, &outcome)?;
            let settlement = st.settle(&market, &o)?;
            st.save(&state)?;
            print_json(&settlement);
        }
        Command::Report { state } => {
            let (st, market) = load(&state)?;
            print_json(&st.report(&market)?);
        }
        Command::Verify { path, json } => {
            let text = read(&path)?;
            let report = match MarketState::from_json(&text) {
                Ok(st) => verify(&st.market()?, Some(&st)),
                Err(_) => verify(&MarketConfig::from_json(&text)?.build()?, None),
            };
            if json {
                print_json(&report);
            } else {
                print!("{}", report.to_text());
            }
            return Ok(if report.passed() { 0 } else { EXIT_VERIFY });
        }
        Command::Drain { state, outcome, steps, eps } => {
            let (st, market) = load(&state)?;
            let o = parse_outcome(&market, &outcome)?;
            let start = market.realized_loss(&st.q, &o)?;
            let mut q = st.q.clone();
            let mut trace = Vec::new();
            for step in 1..=steps {
                q = market.drain_step(&q, &o, eps)?;
                if step.is_power_of_two() || step == steps {
                    trace.push(json!({ "step": step, "loss": market.realized_loss(&q, &o)? }));
                }
            }
            let end = market.realized_loss(&q, &o)?;
            print_json(&json!({
                "steps": steps,
                "eps": eps,
                "initial_loss": start,
                "final_loss": end,
                "mean_loss_per_step": if steps > 0 { (end - start) / steps as f64 } else { 0.0 },
                "final_price": market.price(&q)?,
                "trace": trace,
            }));
        }
    }
    Ok(0)
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(path: &Path) -> anyhow::Result<(MarketState, Market)> {
    let st = MarketState::load(path)?;
    let market = st.market()?;
    Ok((st, market))
}

fn parse_json(text: &str, what: &str) -> anyhow::Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{what} is not valid JSON: {e}")).into())
}

fn parse_outcome(market: &Market, text: &str) -> anyhow::Result<Outcome> {
    Ok(market.payoff().parse_outcome(&parse_json(text, "outcome")?)?)
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

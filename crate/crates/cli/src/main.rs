//! `lsectors`: learn sector universes from fundamentals, backtest them with
//! synthetic sector ETFs and rank the results.
//!
//! Exit codes: 0 on success, 1 on a runtime error, 2 on a usage error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, UsageError};

#[derive(Parser, Debug)]
#[command(name = "lsectors", version, about = "Learned sector universes and synthetic-ETF backtests")]
struct Cli {
    /// key=value configuration file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for backtests; 0 uses every core.
    #[arg(short = 'j', long, global = true)]
    parallelism: Option<usize>,
    /// Log progress to stderr (`RUST_LOG` takes precedence).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ClusterArgs {
    #[arg(long, value_name = "CSV")]
    fundamentals: Option<PathBuf>,
    /// Comma-separated linkage methods.
    #[arg(long, alias = "linkage")]
    linkages: Option<String>,
    /// Fiscal year to cluster [default: latest].
    #[arg(long)]
    year: Option<i32>,
    /// One output directory per fiscal year.
    #[arg(long)]
    all_years: bool,
}

#[derive(Args, Debug)]
struct BacktestArgs {
    /// Universe CSVs or directories of them.
    #[arg(value_name = "UNIVERSE")]
    universes: Vec<String>,
    #[arg(long, value_name = "CSV")]
    prices: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    holidays: Option<PathBuf>,
    #[arg(long, value_name = "YYYY-MM-DD")]
    start: Option<String>,
    #[arg(long, value_name = "YYYY-MM-DD")]
    end: Option<String>,
    #[arg(long, value_name = "USD")]
    starting_capital: Option<String>,
    /// third-friday, first-trading-day or <n>-<weekday>.
    #[arg(long)]
    restructure: Option<String>,
    #[arg(long)]
    rebalance: Option<String>,
    #[arg(long)]
    lookback: Option<String>,
    /// integer or fractional.
    #[arg(long)]
    share_mode: Option<String>,
    #[arg(long)]
    risk_free_rate: Option<String>,
    #[arg(long)]
    sharpe_window: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the merge tree of each linkage.
    Cluster(ClusterArgs),
    /// Write every candidate universe, `<linkage>_<k>.csv`.
    Universes {
        #[command(flatten)]
        base: ClusterArgs,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        /// Benchmark universe to include as a second label column.
        #[arg(long, value_name = "CSV")]
        benchmark: Option<PathBuf>,
    },
    /// Backtest universes into `<out>/<linkage>_<k>/`.
    Backtest(BacktestArgs),
    /// Rank the ledgers under a backtest output directory.
    Rank {
        #[arg(value_name = "LEDGER_DIR")]
        ledgers: Option<PathBuf>,
    },
    /// Compare two ledgers, typically a learned universe and the benchmark.
    Compare {
        ledger_a: Option<PathBuf>,
        ledger_b: Option<PathBuf>,
    },
    /// Count label transitions between two universes over common tickers.
    Transitions {
        universe_a: Option<PathBuf>,
        universe_b: Option<PathBuf>,
    },
}

fn path_str(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

fn set_cluster_args(cfg: &mut RunConfig, a: ClusterArgs) {
    cfg.set("fundamentals", path_str(a.fundamentals));
    cfg.set("linkages", a.linkages);
    cfg.set("year", a.year);
    cfg.set("all_years", a.all_years.then_some(true));
}

fn resolve(cli: Cli) -> Result<(RunConfig, Command), UsageError> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &cli.config {
        cfg.apply_file(p)?;
    }
    cfg.set("out", path_str(cli.out));
    cfg.set("parallelism", cli.parallelism);
    let command = cli.command;
    match &command {
        Command::Cluster(a) => set_cluster_args(&mut cfg, a.clone()),
        Command::Universes { base, k_min, k_max, benchmark } => {
            set_cluster_args(&mut cfg, base.clone());
            cfg.set("k_min", *k_min);
            cfg.set("k_max", *k_max);
            cfg.set("benchmark", path_str(benchmark.clone()));
        }
        Command::Backtest(a) => {
            if !a.universes.is_empty() {
                cfg.set("universes", Some(a.universes.join(",")));
            }
            cfg.set("prices", path_str(a.prices.clone()));
            cfg.set("holidays", path_str(a.holidays.clone()));
            cfg.set("start", a.start.clone());
            cfg.set("end", a.end.clone());
            cfg.set("starting_capital", a.starting_capital.clone());
            cfg.set("restructure", a.restructure.clone());
            cfg.set("rebalance", a.rebalance.clone());
            cfg.set("lookback", a.lookback.clone());
            cfg.set("share_mode", a.share_mode.clone());
            cfg.set("risk_free_rate", a.risk_free_rate.clone());
            cfg.set("sharpe_window", a.sharpe_window.clone());
        }
        Command::Rank { ledgers } => cfg.set("ledgers", path_str(ledgers.clone())),
        Command::Compare { ledger_a, ledger_b } => {
            cfg.set("ledger_a", path_str(ledger_a.clone()));
            cfg.set("ledger_b", path_str(ledger_b.clone()));
        }
        Command::Transitions { universe_a, universe_b } => {
            cfg.set("universe_a", path_str(universe_a.clone()));
            cfg.set("universe_b", path_str(universe_b.clone()));
        }
    }
    Ok((cfg, command))
}

fn run(cfg: &RunConfig, command: &Command) -> anyhow::Result<()> {
    match command {
        Command::Cluster(_) => commands::cluster(cfg),
        Command::Universes { .. } => commands::universes(cfg),
        Command::Backtest(_) => commands::backtest(cfg),
        Command::Rank { .. } => commands::rank_cmd(cfg),
        Command::Compare { .. } => commands::compare_cmd(cfg),
        Command::Transitions { .. } => commands::transitions_cmd(cfg),
    }
}

fn init_logging(verbose: bool) {
    let default = if verbose { "info" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_logging(cli.verbose);
    let (cfg, command) = match resolve(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg, &command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

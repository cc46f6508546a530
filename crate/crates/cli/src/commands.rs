//! Subcommand implementations. Each reads its inputs from the resolved
//! configuration and writes outputs atomically under the output directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use tracing::{info, warn};

use learned_sectors::backtest::{run_backtest, BacktestLedger};
use learned_sectors::hca::{build_merge_tree, euclidean_distances};
use learned_sectors::ingest::{
    load_fundamentals, load_prices, load_universe, load_universe_file, origin_from_stem, write_universe,
    Fundamentals, SectorUniverse, UniverseFile,
};
use learned_sectors::ranking::{compare, rank, score, Panel, UniverseKey};
use learned_sectors::universe::{transitions, SearchSpace};

use crate::config::{RunConfig, UsageError};
use crate::output::{write_atomic, write_text};

fn echo_config(cfg: &RunConfig, command: &str) -> anyhow::Result<()> {
    write_text(&cfg.out_dir().join(format!("{command}.config")), &cfg.render(command))
}

fn years(cfg: &RunConfig, f: &Fundamentals) -> anyhow::Result<Vec<i32>> {
    if cfg.parse::<bool>("all_years")? {
        return Ok(f.years());
    }
    match cfg.optional::<i32>("year")? {
        Some(y) => Ok(vec![y]),
        None => Ok(vec![f.latest_year().ok_or_else(|| anyhow!("fundamentals file has no rows"))?]),
    }
}

/// Write `dendrogram_<linkage>.csv` per linkage.
pub fn cluster(cfg: &RunConfig) -> anyhow::Result<()> {
    let path = cfg.required_path("fundamentals")?;
    let linkages = cfg.linkages()?;
    let f = load_fundamentals(&path)?;
    let all = cfg.parse::<bool>("all_years")?;
    echo_config(cfg, "cluster")?;
    for year in years(cfg, &f)? {
        let (tickers, m) = f.year_matrix(year).with_context(|| format!("fiscal year {year}"))?;
        let d = euclidean_distances(&m);
        let dir = if all { cfg.out_dir().join(year.to_string()) } else { cfg.out_dir() };
        for &linkage in &linkages {
            let tree = build_merge_tree(&d, linkage)?;
            let target = dir.join(format!("dendrogram_{linkage}.csv"));
            write_atomic(&target, |w| Ok(tree.write_csv(w)?))?;
            info!("{} leaves, {} merges -> {}", tickers.len(), tree.merges().len(), target.display());
        }
        write_atomic(&dir.join("leaves.csv"), |w| {
            writeln!(w, "leaf,ticker")?;
            for (i, t) in tickers.iter().enumerate() {
                writeln!(w, "{i},{t}")?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

/// Write `<linkage>_<k>.csv` for every linkage and sector count.
pub fn universes(cfg: &RunConfig) -> anyhow::Result<()> {
    let path = cfg.required_path("fundamentals")?;
    let linkages = cfg.linkages()?;
    let k_range = cfg.k_range()?;
    let f = load_fundamentals(&path)?;
    let benchmark = match cfg.path("benchmark") {
        Some(p) => Some(load_universe(&p)?),
        None => None,
    };
    let all = cfg.parse::<bool>("all_years")?;
    echo_config(cfg, "universes")?;
    for year in years(cfg, &f)? {
        let (tickers, m) = f.year_matrix(year).with_context(|| format!("fiscal year {year}"))?;
        if *k_range.end() > tickers.len() {
            return Err(UsageError(format!(
                "k_max {} exceeds the {} tickers reported for {year}",
                k_range.end(),
                tickers.len()
            ))
            .into());
        }
        let space = SearchSpace::build(&m, &tickers, &linkages, k_range.clone(), Some(year))?;
        let dir = if all { cfg.out_dir().join(year.to_string()) } else { cfg.out_dir() };
        for ((linkage, k), u) in &space.universes {
            let target = dir.join(SearchSpace::file_name(*linkage, *k));
            write_atomic(&target, |w| Ok(write_universe(u, benchmark.as_ref(), w)?))?;
        }
        info!("{year}: {} universes written to {}", space.len(), dir.display());
    }
    Ok(())
}

/// Universe files named by `arg`: a file, or every `*.csv` in a directory.
fn expand_universe_args(args: &[String]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for a in args {
        let p = PathBuf::from(a);
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p);
        }
    }
    Ok(out)
}

/// The key a universe file is backtested under: `<linkage>_<k>` from a
/// builder file name, or `benchmark` for a file with only benchmark labels.
fn universe_key(path: &Path) -> anyhow::Result<(UniverseKey, SectorUniverse)> {
    let file = load_universe_file(path).with_context(|| format!("reading {}", path.display()))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    if let Some((linkage, k)) = origin_from_stem(stem) {
        return Ok((UniverseKey::Learned { linkage, k }, file.primary()));
    }
    match file {
        UniverseFile { learned: None, benchmark: Some(b) } => Ok((UniverseKey::Benchmark, b)),
        _ => bail!(
            "{}: learned universe files must be named <linkage>_<k>.csv",
            path.display()
        ),
    }
}

fn write_ledger(dir: &Path, ledger: &BacktestLedger) -> anyhow::Result<()> {
    write_atomic(&dir.join("ledger.csv"), |w| Ok(ledger.write_csv(w)?))?;
    write_atomic(&dir.join("positions.csv"), |w| Ok(ledger.write_positions_csv(w)?))?;
    write_atomic(&dir.join("weights.csv"), |w| Ok(ledger.write_weights_csv(w)?))?;
    write_atomic(&dir.join("etf_prices.csv"), |w| Ok(ledger.write_etf_prices_csv(w)?))?;
    Ok(())
}

/// Backtest each universe into `<out>/<key>/`.
pub fn backtest(cfg: &RunConfig) -> anyhow::Result<()> {
    let prices_path = cfg.required_path("prices")?;
    let bt = cfg.backtest()?;
    let args = cfg.list("universes");
    if args.is_empty() {
        return Err(UsageError("universes is required (flag or config key)".into()).into());
    }
    let threads: usize = cfg.parse("parallelism")?;
    let files = expand_universe_args(&args)?;
    if files.is_empty() {
        bail!("no universe files found in {}", args.join(", "));
    }
    let mut jobs = Vec::with_capacity(files.len());
    let mut keys = BTreeSet::new();
    for f in &files {
        let (key, u) = universe_key(f)?;
        if !keys.insert(key) {
            return Err(UsageError(format!("two universe files map to {key}")).into());
        }
        jobs.push((f.clone(), key, u));
    }
    let prices = load_prices(&prices_path)?;
    let cal = cfg.calendar()?;
    echo_config(cfg, "backtest")?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("starting worker threads")?;
    let out = cfg.out_dir();
    let results: Vec<anyhow::Result<()>> = pool.install(|| {
        jobs.par_iter()
            .map(|(file, key, u)| {
                let ledger = run_backtest(u, &prices, &bt, &cal)
                    .with_context(|| format!("backtesting {}", file.display()))?;
                write_ledger(&out.join(key.to_string()), &ledger)?;
                let last = ledger.rows.last().map_or(f64::NAN, |r| r.portfolio_value);
                info!("{key}: terminal value {last}");
                Ok(())
            })
            .collect()
    });
    let failures: Vec<anyhow::Error> = results.into_iter().filter_map(Result::err).collect();
    let n = failures.len();
    if let Some(first) = failures.into_iter().next() {
        if n > 1 {
            warn!("{n} universes failed; reporting the first");
        }
        return Err(first);
    }
    Ok(())
}

fn ledger_csv(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("ledger.csv")
    } else {
        p.to_path_buf()
    }
}

/// Key from the ledger's directory name.
fn ledger_key(p: &Path) -> anyhow::Result<UniverseKey> {
    let dir = if p.is_dir() { Some(p) } else { p.parent() };
    let name = dir
        .and_then(|d| d.file_name())
        .and_then(|n| n.to_str())
        .unwrap_or("");
    name.parse()
        .map_err(|_| anyhow!("{}: ledger directories must be named <linkage>_<k> or benchmark", p.display()))
}

fn read_ledger(p: &Path) -> anyhow::Result<BacktestLedger> {
    let path = ledger_csv(p);
    let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    BacktestLedger::read_csv(file).with_context(|| format!("reading {}", path.display()))
}

/// Score every `<ledgers>/<key>/ledger.csv` and write the ranking report.
pub fn rank_cmd(cfg: &RunConfig) -> anyhow::Result<()> {
    let root = cfg.required_path("ledgers")?;
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(&root)
        .with_context(|| format!("listing {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("ledger.csv").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no */ledger.csv under {}", root.display());
    }
    let mut scores = Vec::with_capacity(dirs.len());
    for d in &dirs {
        scores.push(score(&read_ledger(d)?, ledger_key(d)?)?);
    }
    let report = rank(&scores)?;
    echo_config(cfg, "rank")?;
    let out = cfg.out_dir();
    write_atomic(&out.join("ranking.csv"), |w| Ok(report.write_csv(w)?))?;
    write_atomic(&out.join("winners.csv"), |w| Ok(report.write_winners_csv(w)?))?;
    for win in report.winners() {
        let ties = if win.ties.is_empty() {
            String::new()
        } else {
            let t: Vec<String> = win.ties.iter().map(|k| k.to_string()).collect();
            format!(" (tied with {})", t.join(", "))
        };
        println!("{}: {} = {}{ties}", win.metric.name(), win.key, win.value);
    }
    if report.max_mean_sharpe.is_none() {
        println!("max_mean_rolling_sharpe: no universe has a defined rolling Sharpe ratio");
    }
    Ok(())
}

/// Compare two ledgers and write the summary and the four panels.
pub fn compare_cmd(cfg: &RunConfig) -> anyhow::Result<()> {
    let a = cfg.required_path("ledger_a")?;
    let b = cfg.required_path("ledger_b")?;
    let (la, lb) = (read_ledger(&a)?, read_ledger(&b)?);
    let (sa, sb) = (score(&la, ledger_key(&a)?)?, score(&lb, ledger_key(&b)?)?);
    let report = compare((&sa, &la), (&sb, &lb))?;
    echo_config(cfg, "compare")?;
    let out = cfg.out_dir();
    write_atomic(&out.join("comparison_summary.csv"), |w| Ok(report.write_summary_csv(w)?))?;
    for panel in [Panel::SetfTurnover, Panel::RebalTurnover, Panel::PortfolioValue, Panel::RollingSharpe] {
        write_atomic(&out.join(panel.file_name()), |w| Ok(report.write_panel_csv(panel, w)?))?;
    }
    println!(
        "{} vs {}: terminal value ratio {:.4}, outperformance {:.2}% of starting capital",
        sa.key,
        sb.key,
        report.terminal_value_ratio,
        100.0 * report.outperformance
    );
    Ok(())
}

/// Label flows between two universes, or from the benchmark column to the
/// learned column of a single three-column file.
pub fn transitions_cmd(cfg: &RunConfig) -> anyhow::Result<()> {
    let a = cfg.required_path("universe_a")?;
    let (from, to) = match cfg.path("universe_b") {
        Some(b) => (load_universe(&a)?, load_universe(&b)?),
        None => {
            let file = load_universe_file(&a)?;
            match (file.benchmark, file.learned) {
                (Some(x), Some(y)) => (x, y),
                _ => {
                    return Err(UsageError(format!(
                        "{} has one label column; give universe_b as well",
                        a.display()
                    ))
                    .into())
                }
            }
        }
    };
    let table = transitions(&from, &to)?;
    echo_config(cfg, "transitions")?;
    write_atomic(&cfg.out_dir().join("transitions.csv"), |w| Ok(table.write_csv(w)?))?;
    for t in &table.only_in_from {
        warn!("{t} is only in the source universe");
    }
    for t in &table.only_in_to {
        warn!("{t} is only in the target universe");
    }
    println!(
        "{} common tickers in {} flows ({} only in source, {} only in target)",
        table.total(),
        table.flows.len(),
        table.only_in_from.len(),
        table.only_in_to.len()
    );
    Ok(())
}

//! Scoring, ranking and pairwise comparison of backtested universes.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;
use tracing::warn;

use crate::backtest::{BacktestLedger, LedgerRow};
use crate::hca::Linkage;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("ledger for {0} has no rows")]
    EmptyLedger(UniverseKey),
    #[error("nothing to rank")]
    NoScores,
    #[error("backtest windows differ: {a} has {a_start}..{a_end}, {b} has {b_start}..{b_end}")]
    WindowMismatch {
        a: UniverseKey,
        b: UniverseKey,
        a_start: NaiveDate,
        a_end: NaiveDate,
        b_start: NaiveDate,
        b_end: NaiveDate,
    },
    #[error("ledgers differ on trading dates at row {0}")]
    DateMismatch(usize),
    #[error("starting capital differs: {0} vs {1}")]
    CapitalMismatch(f64, f64),
    #[error("unrecognised universe key {0:?}")]
    BadKey(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Identifies a backtested universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UniverseKey {
    Learned { linkage: Linkage, k: usize },
    Benchmark,
}

impl UniverseKey {
    fn order(&self) -> (usize, usize) {
        match *self {
            UniverseKey::Learned { linkage, k } => {
                (k, Linkage::ALL.iter().position(|l| *l == linkage).unwrap_or(0))
            }
            UniverseKey::Benchmark => (usize::MAX, usize::MAX),
        }
    }

    pub fn linkage_name(&self) -> &'static str {
        match self {
            UniverseKey::Learned { linkage, .. } => linkage.name(),
            UniverseKey::Benchmark => "benchmark",
        }
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            UniverseKey::Learned { k, .. } => Some(*k),
            UniverseKey::Benchmark => None,
        }
    }
}

/// Smaller `k` first, then single < complete < average < ward; the benchmark last.
impl Ord for UniverseKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order().cmp(&other.order())
    }
}

impl PartialOrd for UniverseKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for UniverseKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UniverseKey::Learned { linkage, k } => write!(f, "{linkage}_{k}"),
            UniverseKey::Benchmark => f.write_str("benchmark"),
        }
    }
}

/// Parses `benchmark` or `<linkage>_<k>`, the file stem convention.
impl FromStr for UniverseKey {
    type Err = RankingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "benchmark" {
            return Ok(UniverseKey::Benchmark);
        }
        let bad = || RankingError::BadKey(s.to_string());
        let (l, k) = s.rsplit_once('_').ok_or_else(bad)?;
        Ok(UniverseKey::Learned {
            linkage: l.parse().map_err(|_| bad())?,
            k: k.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniverseScore {
    pub key: UniverseKey,
    pub terminal_cum_setf_turnover: f64,
    pub terminal_cum_rebal_turnover: f64,
    pub terminal_portfolio_value: f64,
    /// Mean over days with a defined rolling Sharpe; `None` if there are none.
    pub mean_rolling_sharpe: Option<f64>,
}

pub fn score(ledger: &BacktestLedger, key: UniverseKey) -> Result<UniverseScore, RankingError> {
    let last = ledger.rows.last().ok_or(RankingError::EmptyLedger(key))?;
    let mean_rolling_sharpe = mean_defined_sharpe(&ledger.rows);
    if mean_rolling_sharpe.is_none() {
        warn!("{key}: rolling Sharpe is undefined on every day; excluded from the Sharpe ranking");
    }
    Ok(UniverseScore {
        key,
        terminal_cum_setf_turnover: last.cum_setf_turnover,
        terminal_cum_rebal_turnover: last.cum_rebal_turnover,
        terminal_portfolio_value: last.portfolio_value,
        mean_rolling_sharpe,
    })
}

fn mean_defined_sharpe(rows: &[LedgerRow]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in rows.iter().filter_map(|r| r.rolling_sharpe) {
        sum += s;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    SetfTurnover,
    RebalTurnover,
    PortfolioValue,
    MeanSharpe,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::SetfTurnover,
        Metric::RebalTurnover,
        Metric::PortfolioValue,
        Metric::MeanSharpe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SetfTurnover => "min_setf_turnover",
            Metric::RebalTurnover => "min_rebal_turnover",
            Metric::PortfolioValue => "max_portfolio_value",
            Metric::MeanSharpe => "max_mean_rolling_sharpe",
        }
    }

    fn value(self, s: &UniverseScore) -> Option<f64> {
        match self {
            Metric::SetfTurnover => Some(s.terminal_cum_setf_turnover),
            Metric::RebalTurnover => Some(s.terminal_cum_rebal_turnover),
            Metric::PortfolioValue => Some(s.terminal_portfolio_value),
            Metric::MeanSharpe => s.mean_rolling_sharpe,
        }
    }

    fn minimize(self) -> bool {
        matches!(self, Metric::SetfTurnover | Metric::RebalTurnover)
    }
}

/// Best universe for one metric. `ties` holds the other universes attaining
/// exactly the same value, in key order.
#[derive(Debug, Clone, PartialEq)]
pub struct Winner {
    pub metric: Metric,
    pub key: UniverseKey,
    pub value: f64,
    pub ties: Vec<UniverseKey>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    /// Input scores sorted by key.
    pub scores: Vec<UniverseScore>,
    pub min_setf_turnover: Winner,
    pub min_rebal_turnover: Winner,
    pub max_portfolio_value: Winner,
    /// `None` when no universe has a defined mean Sharpe.
    pub max_mean_sharpe: Option<Winner>,
}

impl RankingReport {
    pub fn winners(&self) -> Vec<&Winner> {
        let mut out = vec![&self.min_setf_turnover, &self.min_rebal_turnover, &self.max_portfolio_value];
        out.extend(self.max_mean_sharpe.as_ref());
        out
    }

    /// `linkage,k,terminal_value,terminal_setf_turnover,terminal_rebal_turnover,mean_rolling_sharpe`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), RankingError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "linkage",
            "k",
            "terminal_value",
            "terminal_setf_turnover",
            "terminal_rebal_turnover",
            "mean_rolling_sharpe",
        ])?;
        for s in &self.scores {
            w.write_record([
                s.key.linkage_name().to_string(),
                s.key.k().map_or(String::new(), |k| k.to_string()),
                s.terminal_portfolio_value.to_string(),
                s.terminal_cum_setf_turnover.to_string(),
                s.terminal_cum_rebal_turnover.to_string(),
                s.mean_rolling_sharpe.map_or(String::new(), |x| x.to_string()),
            ])?;
        }
        w.flush().map_err(|e| RankingError::Csv(e.into()))?;
        Ok(())
    }

    /// `metric,linkage,k,value,ties`, ties as `;`-separated keys.
    pub fn write_winners_csv<W: Write>(&self, writer: W) -> Result<(), RankingError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "linkage", "k", "value", "ties"])?;
        for win in self.winners() {
            let ties: Vec<String> = win.ties.iter().map(|k| k.to_string()).collect();
            w.write_record([
                win.metric.name().to_string(),
                win.key.linkage_name().to_string(),
                win.key.k().map_or(String::new(), |k| k.to_string()),
                win.value.to_string(),
                ties.join(";"),
            ])?;
        }
        w.flush().map_err(|e| RankingError::Csv(e.into()))?;
        Ok(())
    }
}

fn winner(sorted: &[UniverseScore], metric: Metric) -> Option<Winner> {
    let mut best: Option<(f64, Vec<UniverseKey>)> = None;
    for s in sorted {
        let Some(v) = metric.value(s) else { continue };
        match &mut best {
            None => best = Some((v, vec![s.key])),
            Some((b, keys)) => {
                let better = if metric.minimize() { v < *b } else { v > *b };
                if better {
                    *b = v;
                    *keys = vec![s.key];
                } else if v == *b {
                    keys.push(s.key);
                }
            }
        }
    }
    best.map(|(value, keys)| Winner {
        metric,
        key: keys[0],
        value,
        ties: keys[1..].to_vec(),
    })
}

pub fn rank(scores: &[UniverseScore]) -> Result<RankingReport, RankingError> {
    if scores.is_empty() {
        return Err(RankingError::NoScores);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by_key(|s| s.key);
    let must = |m| winner(&sorted, m).expect("every score has this metric");
    Ok(RankingReport {
        min_setf_turnover: must(Metric::SetfTurnover),
        min_rebal_turnover: must(Metric::RebalTurnover),
        max_portfolio_value: must(Metric::PortfolioValue),
        max_mean_sharpe: winner(&sorted, Metric::MeanSharpe),
        scores: sorted,
    })
}

/// One of the four per-day comparison series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    SetfTurnover,
    RebalTurnover,
    PortfolioValue,
    RollingSharpe,
}

impl Panel {
    pub const ALL: [Panel; 4] = [
        Panel::SetfTurnover,
        Panel::RebalTurnover,
        Panel::PortfolioValue,
        Panel::RollingSharpe,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Panel::SetfTurnover => "panel_a_setf_turnover.csv",
            Panel::RebalTurnover => "panel_b_rebal_turnover.csv",
            Panel::PortfolioValue => "panel_c_portfolio_value.csv",
            Panel::RollingSharpe => "panel_d_rolling_sharpe.csv",
        }
    }

    fn value(self, r: &LedgerRow) -> Option<f64> {
        match self {
            Panel::SetfTurnover => Some(r.cum_setf_turnover),
            Panel::RebalTurnover => Some(r.cum_rebal_turnover),
            Panel::PortfolioValue => Some(r.portfolio_value),
            Panel::RollingSharpe => r.rolling_sharpe,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub a: UniverseScore,
    pub b: UniverseScore,
    pub starting_capital: f64,
    /// `a − b`.
    pub delta_setf_turnover: f64,
    pub delta_rebal_turnover: f64,
    pub delta_portfolio_value: f64,
    pub delta_mean_sharpe: Option<f64>,
    /// `terminal_a / terminal_b`.
    pub terminal_value_ratio: f64,
    /// `(terminal_a − terminal_b) / starting_capital`.
    pub outperformance: f64,
    pub dates: Vec<NaiveDate>,
    rows_a: Vec<LedgerRow>,
    rows_b: Vec<LedgerRow>,
}

pub fn compare(
    a: (&UniverseScore, &BacktestLedger),
    b: (&UniverseScore, &BacktestLedger),
) -> Result<ComparisonReport, RankingError> {
    let (sa, la) = a;
    let (sb, lb) = b;
    let (Some(a0), Some(a1)) = (la.rows.first(), la.rows.last()) else {
        return Err(RankingError::EmptyLedger(sa.key));
    };
    let (Some(b0), Some(b1)) = (lb.rows.first(), lb.rows.last()) else {
        return Err(RankingError::EmptyLedger(sb.key));
    };
    if a0.date != b0.date || a1.date != b1.date || la.rows.len() != lb.rows.len() {
        return Err(RankingError::WindowMismatch {
            a: sa.key,
            b: sb.key,
            a_start: a0.date,
            a_end: a1.date,
            b_start: b0.date,
            b_end: b1.date,
        });
    }
    if let Some(i) = la.rows.iter().zip(&lb.rows).position(|(x, y)| x.date != y.date) {
        return Err(RankingError::DateMismatch(i));
    }
    if la.starting_capital != lb.starting_capital {
        return Err(RankingError::CapitalMismatch(la.starting_capital, lb.starting_capital));
    }
    let capital = la.starting_capital;
    let delta_mean_sharpe = match (sa.mean_rolling_sharpe, sb.mean_rolling_sharpe) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    };
    Ok(ComparisonReport {
        a: sa.clone(),
        b: sb.clone(),
        starting_capital: capital,
        delta_setf_turnover: sa.terminal_cum_setf_turnover - sb.terminal_cum_setf_turnover,
        delta_rebal_turnover: sa.terminal_cum_rebal_turnover - sb.terminal_cum_rebal_turnover,
        delta_portfolio_value: sa.terminal_portfolio_value - sb.terminal_portfolio_value,
        delta_mean_sharpe,
        terminal_value_ratio: sa.terminal_portfolio_value / sb.terminal_portfolio_value,
        outperformance: (sa.terminal_portfolio_value - sb.terminal_portfolio_value) / capital,
        dates: la.dates(),
        rows_a: la.rows.clone(),
        rows_b: lb.rows.clone(),
    })
}

impl ComparisonReport {
    /// Aligned `(a, b)` values of `panel`, one per date.
    pub fn panel(&self, panel: Panel) -> Vec<(Option<f64>, Option<f64>)> {
        self.rows_a
            .iter()
            .zip(&self.rows_b)
            .map(|(x, y)| (panel.value(x), panel.value(y)))
            .collect()
    }

    /// `date,a,b`
    pub fn write_panel_csv<W: Write>(&self, panel: Panel, writer: W) -> Result<(), RankingError> {
        let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "a", "b"])?;
        for (d, (x, y)) in self.dates.iter().zip(self.panel(panel)) {
            w.write_record([d.format("%Y-%m-%d").to_string(), cell(x), cell(y)])?;
        }
        w.flush().map_err(|e| RankingError::Csv(e.into()))?;
        Ok(())
    }

    /// `metric,a,b,delta`, followed by the terminal value ratio and the
    /// outperformance as a fraction of starting capital.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<(), RankingError> {
        let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "a", "b", "delta"])?;
        w.write_record(["universe", &self.a.key.to_string(), &self.b.key.to_string(), ""])?;
        let rows = [
            (
                "terminal_setf_turnover",
                self.a.terminal_cum_setf_turnover,
                self.b.terminal_cum_setf_turnover,
                self.delta_setf_turnover,
            ),
            (
                "terminal_rebal_turnover",
                self.a.terminal_cum_rebal_turnover,
                self.b.terminal_cum_rebal_turnover,
                self.delta_rebal_turnover,
            ),
            (
                "terminal_value",
                self.a.terminal_portfolio_value,
                self.b.terminal_portfolio_value,
                self.delta_portfolio_value,
            ),
        ];
        for (name, a, b, d) in rows {
            w.write_record([name.to_string(), a.to_string(), b.to_string(), d.to_string()])?;
        }
        w.write_record([
            "mean_rolling_sharpe".to_string(),
            cell(self.a.mean_rolling_sharpe),
            cell(self.b.mean_rolling_sharpe),
            cell(self.delta_mean_sharpe),
        ])?;
        w.write_record(["terminal_value_ratio", &self.terminal_value_ratio.to_string(), "", ""])?;
        w.write_record(["outperformance_of_capital", &self.outperformance.to_string(), "", ""])?;
        w.flush().map_err(|e| RankingError::Csv(e.into()))?;
        Ok(())
    }
}

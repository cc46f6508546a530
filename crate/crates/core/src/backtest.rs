//! Daily simulation of a GMV portfolio of sector synthetic ETFs.
//!
//! Each simulated day runs, in order: forward-fill prices, restructure the
//! SETFs if it is a restructure day, rebalance the portfolio if it is a
//! rebalance day, mark to market and record the ledger row.
//!
//! The portfolio holds SETF *units*: a rebalance buys `ω_i · V / Π_i` units of
//! SETF `i`, and one unit holds `w_j` shares of each constituent `j`. The
//! portfolio value therefore always equals `Σ_i Σ_j w_j P_j · units_i` plus
//! cash. On a restructure day the holdings of each SETF are rolled into the
//! newly weighted SETF at constant value.
//!
//! The simulation starts `lookback − 1` trading days before the window start
//! so that SETF price history exists when the first rebalance fires. Ledger
//! rows and turnover accumulation cover the window only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;
use tracing::warn;

use crate::calendar::{schedule, CalendarError, TradingCalendar, TriggerRule};
use crate::ingest::{PriceTable, SectorUniverse};
use crate::optimizer::{self, OptimizerError};
use crate::setf::{self, SetfError, SyntheticEtf};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid backtest configuration: {0}")]
    InvalidConfig(String),
    #[error("price data starts {first}, but the simulation needs prices from {needed}")]
    InsufficientHistory { needed: NaiveDate, first: NaiveDate },
    #[error("price data ends {last}, before the window end {needed}")]
    PricesEndEarly { needed: NaiveDate, last: NaiveDate },
    #[error("no universe ticker has price data")]
    EmptyUniverse,
    #[error("ticker {0} is assigned to more than one sector")]
    TickerInTwoSectors(String),
    #[error("weights length mismatch: {0}")]
    Shape(String),
    #[error("portfolio optimization failed on {date}: {source}")]
    Optimizer {
        date: NaiveDate,
        #[source]
        source: OptimizerError,
    },
    #[error("on {date}: {source}")]
    Setf {
        date: NaiveDate,
        #[source]
        source: SetfError,
    },
    #[error(transparent)]
    Calendar(#[from] CalendarError),
    #[error("ledger csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("ledger csv line {line}: {message}")]
    LedgerFormat { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShareMode {
    Integer,
    Fractional,
}

impl fmt::Display for ShareMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShareMode::Integer => "integer",
            ShareMode::Fractional => "fractional",
        })
    }
}

impl FromStr for ShareMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "integer" => Ok(ShareMode::Integer),
            "fractional" => Ok(ShareMode::Fractional),
            other => Err(format!("unknown share mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub starting_capital: f64,
    pub restructure: TriggerRule,
    pub rebalance: TriggerRule,
    /// SETF price observations fed to each covariance estimate.
    pub lookback: usize,
    pub share_mode: ShareMode,
    /// Annual risk-free rate, as a decimal.
    pub risk_free_rate: f64,
    /// Trailing daily returns per rolling Sharpe value.
    pub sharpe_window: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2012, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2017, 12, 31).unwrap(),
            starting_capital: 10_000_000_000.0,
            restructure: TriggerRule::THIRD_FRIDAY,
            rebalance: TriggerRule::FirstTradingDay,
            lookback: 126,
            share_mode: ShareMode::Integer,
            risk_free_rate: 0.0,
            sharpe_window: 63,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        let bad = |m: &str| Err(BacktestError::InvalidConfig(m.to_string()));
        if self.start >= self.end {
            return bad("start must be before end");
        }
        if !(self.starting_capital.is_finite() && self.starting_capital > 0.0) {
            return bad("starting capital must be positive");
        }
        if self.lookback < 2 {
            return bad("lookback must be at least 2");
        }
        if self.sharpe_window < 2 {
            return bad("sharpe window must be at least 2");
        }
        if !self.risk_free_rate.is_finite() {
            return bad("risk-free rate must be finite");
        }
        Ok(())
    }
}

/// One simulated day inside the backtest window.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub date: NaiveDate,
    pub portfolio_value: f64,
    pub cash: f64,
    pub cum_setf_turnover: f64,
    pub cum_rebal_turnover: f64,
    pub rolling_sharpe: Option<f64>,
}

/// A portfolio rebalance: SETF weights chosen on `date`.
#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceRecord {
    pub date: NaiveDate,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestLedger {
    pub starting_capital: f64,
    /// Sector labels, sorted.
    pub sectors: Vec<String>,
    /// Traded tickers, sector-major then by ticker.
    pub tickers: Vec<String>,
    pub rows: Vec<LedgerRow>,
    /// Shares held per ticker at each row's close.
    pub positions: Vec<Vec<f64>>,
    pub rebalances: Vec<RebalanceRecord>,
    /// Every simulated day, warm-up included.
    pub simulated_dates: Vec<NaiveDate>,
    /// `setf_prices[d][i]`: SETF `i` on `simulated_dates[d]`.
    pub setf_prices: Vec<Vec<Option<f64>>>,
}

impl BacktestLedger {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.rows.iter().map(|r| r.date).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.portfolio_value).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BacktestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "date",
            "portfolio_value",
            "cash",
            "cum_setf_turnover",
            "cum_rebal_turnover",
            "rolling_sharpe",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.date.format("%Y-%m-%d").to_string(),
                r.portfolio_value.to_string(),
                r.cash.to_string(),
                r.cum_setf_turnover.to_string(),
                r.cum_rebal_turnover.to_string(),
                r.rolling_sharpe.map_or(String::new(), |s| s.to_string()),
            ])?;
        }
        w.flush().map_err(|e| BacktestError::Csv(e.into()))?;
        Ok(())
    }

    /// `date,ticker,shares`, written for the first day and every day on which
    /// holdings change.
    pub fn write_positions_csv<W: Write>(&self, writer: W) -> Result<(), BacktestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "ticker", "shares"])?;
        let mut prev: Option<&Vec<f64>> = None;
        for (row, pos) in self.rows.iter().zip(&self.positions) {
            if prev != Some(pos) {
                for (t, s) in self.tickers.iter().zip(pos) {
                    w.write_record([row.date.format("%Y-%m-%d").to_string(), t.clone(), s.to_string()])?;
                }
            }
            prev = Some(pos);
        }
        w.flush().map_err(|e| BacktestError::Csv(e.into()))?;
        Ok(())
    }

    /// `date,sector_label,weight` for every rebalance.
    pub fn write_weights_csv<W: Write>(&self, writer: W) -> Result<(), BacktestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "sector_label", "weight"])?;
        for r in &self.rebalances {
            for (label, x) in self.sectors.iter().zip(&r.weights) {
                w.write_record([r.date.format("%Y-%m-%d").to_string(), label.clone(), x.to_string()])?;
            }
        }
        w.flush().map_err(|e| BacktestError::Csv(e.into()))?;
        Ok(())
    }

    /// `date,sector_label,price` over all simulated days on which the SETF is
    /// priced.
    pub fn write_etf_prices_csv<W: Write>(&self, writer: W) -> Result<(), BacktestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "sector_label", "price"])?;
        for (date, prices) in self.simulated_dates.iter().zip(&self.setf_prices) {
            for (label, p) in self.sectors.iter().zip(prices) {
                if let Some(p) = p {
                    w.write_record([date.format("%Y-%m-%d").to_string(), label.clone(), p.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| BacktestError::Csv(e.into()))?;
        Ok(())
    }

    /// Read a ledger CSV. Only the daily rows are restored; the starting
    /// capital is taken from the first row, which is always all cash.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, BacktestError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> Result<f64, BacktestError> {
                field(i).parse().map_err(|_| BacktestError::LedgerFormat {
                    line,
                    message: format!("column {i}: {:?} is not a number", field(i)),
                })
            };
            let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d").map_err(|_| {
                BacktestError::LedgerFormat {
                    line,
                    message: format!("bad date {:?}", field(0)),
                }
            })?;
            let sharpe = if field(5).is_empty() { None } else { Some(num(5)?) };
            rows.push(LedgerRow {
                date,
                portfolio_value: num(1)?,
                cash: num(2)?,
                cum_setf_turnover: num(3)?,
                cum_rebal_turnover: num(4)?,
                rolling_sharpe: sharpe,
            });
        }
        Ok(Self {
            starting_capital: rows.first().map_or(0.0, |r| r.portfolio_value),
            sectors: Vec::new(),
            tickers: Vec::new(),
            rows,
            positions: Vec::new(),
            rebalances: Vec::new(),
            simulated_dates: Vec::new(),
            setf_prices: Vec::new(),
        })
    }
}

/// Per-ticker portfolio weights `γ = w_i(θ) · ω_i`, in constituent order of
/// `etfs` concatenated.
pub fn flatten_weights(etfs: &[SyntheticEtf], omega: &[f64]) -> Result<Vec<f64>, BacktestError> {
    if etfs.len() != omega.len() {
        return Err(BacktestError::Shape(format!(
            "{} sectors but {} portfolio weights",
            etfs.len(),
            omega.len()
        )));
    }
    let mut seen = BTreeSet::new();
    let mut gamma = Vec::new();
    for (etf, &om) in etfs.iter().zip(omega) {
        for (t, &w) in etf.constituents().iter().zip(etf.weights()) {
            if !seen.insert(t.as_str()) {
                return Err(BacktestError::TickerInTwoSectors(t.clone()));
            }
            gamma.push(w * om);
        }
    }
    Ok(gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareOrders {
    pub targets: Vec<f64>,
    pub deltas: Vec<f64>,
    pub residual_cash: f64,
}

/// Convert value weights into share targets for a book worth `value`.
/// Integer mode floors `γ·V/P`; the unspent remainder is returned as cash.
/// Tickers with zero weight may be unpriced.
pub fn to_share_orders(
    weights: &[f64],
    value: f64,
    prices: &[Option<f64>],
    current: &[f64],
    mode: ShareMode,
) -> ShareOrders {
    let mut targets = Vec::with_capacity(weights.len());
    let mut spent = 0.0;
    for (&g, p) in weights.iter().zip(prices) {
        let shares = match p {
            Some(p) if g > 0.0 => {
                let exact = g * value / p;
                let s = match mode {
                    ShareMode::Integer => exact.floor(),
                    ShareMode::Fractional => exact,
                };
                spent += s * p;
                s
            }
            _ => 0.0,
        };
        targets.push(shares);
    }
    let residual_cash = match mode {
        ShareMode::Integer => value - spent,
        ShareMode::Fractional => 0.0,
    };
    let deltas = targets.iter().zip(current).map(|(t, c)| t - c).collect();
    ShareOrders {
        targets,
        deltas,
        residual_cash,
    }
}

/// Annualized Sharpe ratio over each trailing window of `window` daily
/// log-returns of `values`. Entry `i` uses the returns ending at `values[i]`,
/// so the first `window` entries are `None`. Also `None` when the window's
/// return volatility is zero.
pub fn rolling_sharpe(values: &[f64], window: usize, risk_free_rate: f64) -> Vec<Option<f64>> {
    assert!(window >= 2, "sharpe window must be at least 2");
    let returns: Vec<f64> = values.windows(2).map(|w| libm::log(w[1] / w[0])).collect();
    let mut out = vec![None; values.len()];
    for i in window..values.len() {
        let r = &returns[i - window..i];
        let mut sum = 0.0;
        for x in r {
            sum += x;
        }
        let mean = sum / window as f64;
        let mut ss = 0.0;
        for x in r {
            ss += (x - mean) * (x - mean);
        }
        let sd = (ss / (window - 1) as f64).sqrt();
        if sd.is_nan() || sd <= 1e-14 {
            continue;
        }
        let annual_return = mean * TRADING_DAYS_PER_YEAR;
        let annual_vol = sd * TRADING_DAYS_PER_YEAR.sqrt();
        out[i] = Some((annual_return - risk_free_rate) / annual_vol);
    }
    out
}

/// Forward-filled prices per asset for each simulated day.
fn forward_filled(prices: &PriceTable, asset_cols: &[usize], days: &[NaiveDate]) -> Vec<Vec<Option<f64>>> {
    let table_dates = prices.dates();
    let mut last: Vec<Option<f64>> = vec![None; asset_cols.len()];
    let mut next_row = 0;
    let mut out = Vec::with_capacity(days.len());
    for day in days {
        while next_row < table_dates.len() && table_dates[next_row] <= *day {
            for (a, &col) in asset_cols.iter().enumerate() {
                if let Some(p) = prices.price(col, next_row) {
                    last[a] = Some(p);
                }
            }
            next_row += 1;
        }
        out.push(last.clone());
    }
    out
}

struct Sectors {
    etfs: Vec<SyntheticEtf>,
    /// Asset index range of each SETF in the flat asset list.
    ranges: Vec<std::ops::Range<usize>>,
    /// Whether each SETF has been successfully restructured at least once.
    live: Vec<bool>,
}

impl Sectors {
    fn slice<'a, T>(&self, i: usize, v: &'a [T]) -> &'a [T] {
        &v[self.ranges[i].clone()]
    }
}

/// Simulate `universe` over `cfg`'s window.
///
/// Universe tickers absent from `prices` are dropped with a warning.
pub fn run_backtest(
    universe: &SectorUniverse,
    prices: &PriceTable,
    cfg: &BacktestConfig,
    cal: &TradingCalendar,
) -> Result<BacktestLedger, BacktestError> {
    cfg.validate()?;

    // Sector layout.
    let mut by_sector: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (ticker, label) in universe.iter() {
        if prices.ticker_index(ticker).is_some() {
            by_sector.entry(label).or_default().push(ticker);
        } else {
            warn!("ticker {ticker} has no price data; dropped from the backtest");
        }
    }
    if by_sector.is_empty() {
        return Err(BacktestError::EmptyUniverse);
    }
    let mut etfs = Vec::new();
    let mut ranges = Vec::new();
    let mut tickers: Vec<String> = Vec::new();
    for (label, members) in &by_sector {
        let start = tickers.len();
        tickers.extend(members.iter().map(|t| t.to_string()));
        ranges.push(start..tickers.len());
        etfs.push(
            SyntheticEtf::new(*label, members.iter().map(|t| t.to_string()).collect())
                .expect("sector has members"),
        );
    }
    let n_sectors = etfs.len();
    let mut sectors = Sectors {
        etfs,
        ranges,
        live: vec![false; n_sectors],
    };
    let sector_labels: Vec<String> = by_sector.keys().map(|s| s.to_string()).collect();
    let asset_cols: Vec<usize> = tickers
        .iter()
        .map(|t| prices.ticker_index(t).expect("filtered above"))
        .collect();

    // Simulated days: warm-up then the window.
    let window_days = cal.trading_days(cfg.start, cfg.end)?;
    let Some(&first_window_day) = window_days.first() else {
        return Err(BacktestError::InvalidConfig("window has no trading days".into()));
    };
    let warmup = cal.trading_days_before(first_window_day, cfg.lookback - 1);
    let warm_n = warmup.len();
    let days: Vec<NaiveDate> = warmup.into_iter().chain(window_days.iter().copied()).collect();

    let first_needed = days[0];
    match prices.dates().first() {
        Some(&first) if first <= first_needed => {}
        Some(&first) => {
            return Err(BacktestError::InsufficientHistory {
                needed: first_needed,
                first,
            })
        }
        None => {
            return Err(BacktestError::InsufficientHistory {
                needed: first_needed,
                first: cfg.end,
            })
        }
    }
    let last_needed = *days.last().expect("non-empty");
    let last_price_date = *prices.dates().last().expect("non-empty");
    if last_price_date < last_needed {
        return Err(BacktestError::PricesEndEarly {
            needed: last_needed,
            last: last_price_date,
        });
    }

    let restructure_days: BTreeSet<NaiveDate> =
        schedule(cal, cfg.restructure, days[0], last_needed).into_iter().collect();
    let rebalance_days: BTreeSet<NaiveDate> =
        schedule(cal, cfg.rebalance, first_window_day, last_needed).into_iter().collect();

    let filled = forward_filled(prices, &asset_cols, &days);
    let n_assets = tickers.len();

    let mut shares = vec![0.0; n_assets];
    let mut cash = cfg.starting_capital;
    let mut cum_setf = 0.0;
    let mut cum_rebal = 0.0;
    let mut last_omega: Option<Vec<f64>> = None;
    let mut setf_history: Vec<Vec<Option<f64>>> = Vec::with_capacity(days.len());
    let mut rows = Vec::with_capacity(window_days.len());
    let mut positions = Vec::with_capacity(window_days.len());
    let mut rebalances = Vec::new();

    for (d, &date) in days.iter().enumerate() {
        let px = &filled[d];
        let in_window = d >= warm_n;

        let restructured = d == 0 || restructure_days.contains(&date);
        if restructured {
            for i in 0..n_sectors {
                let asset_px = sectors.slice(i, px).to_vec();
                match sectors.etfs[i].restructure_available(&asset_px, date) {
                    Ok(old) => {
                        if sectors.live[i] && in_window {
                            let p: Vec<f64> = asset_px.iter().map(|p| p.unwrap_or(0.0)).collect();
                            cum_setf += setf::restructuring_turnover(&old, sectors.etfs[i].weights(), &p)
                                .map_err(|source| BacktestError::Setf { date, source })?;
                        }
                        sectors.live[i] = true;
                    }
                    Err(SetfError::NothingPriced { .. }) => {}
                    Err(source) => return Err(BacktestError::Setf { date, source }),
                }
            }
        }
        let etf_px = setf_prices(&sectors, px, date)?;
        setf_history.push(etf_px.clone());

        let rebalance_today = in_window && rebalance_days.contains(&date);
        let mut rebalanced = false;
        if rebalance_today {
            if let Some(omega) = gmv_weights(&sectors, &setf_history, cfg.lookback, date)? {
                if let Some(prev) = &last_omega {
                    let p: Vec<f64> = etf_px.iter().map(|p| p.unwrap_or(0.0)).collect();
                    cum_rebal += optimizer::rebalancing_turnover(prev, &omega, &p)
                        .map_err(|source| BacktestError::Optimizer { date, source })?;
                }
                let value = cash + holdings_value(&shares, px);
                let alloc = unit_allocation(&sectors, &omega, px, &etf_px)?;
                let orders = to_share_orders(&alloc, value, px, &shares, cfg.share_mode);
                shares = orders.targets;
                cash = orders.residual_cash;
                rebalances.push(RebalanceRecord {
                    date,
                    weights: omega.clone(),
                });
                last_omega = Some(omega);
                rebalanced = true;
            }
        }

        if restructured && !rebalanced && shares.iter().any(|&s| s != 0.0) {
            // Roll each SETF position into the reweighted SETF at constant value.
            let mut held = vec![0.0; n_sectors];
            for (i, h) in held.iter_mut().enumerate() {
                *h = holdings_value(sectors.slice(i, &shares), sectors.slice(i, px));
            }
            let invested: f64 = held.iter().sum();
            if invested > 0.0 {
                let drift: Vec<f64> = held.iter().map(|h| h / invested).collect();
                let alloc = unit_allocation(&sectors, &drift, px, &etf_px)?;
                let orders = to_share_orders(&alloc, invested, px, &shares, cfg.share_mode);
                shares = orders.targets;
                cash += orders.residual_cash;
            }
        }

        if in_window {
            let value = cash + holdings_value(&shares, px);
            rows.push(LedgerRow {
                date,
                portfolio_value: value,
                cash,
                cum_setf_turnover: cum_setf,
                cum_rebal_turnover: cum_rebal,
                rolling_sharpe: None,
            });
            positions.push(shares.clone());
        }
    }

    let mut series = Vec::with_capacity(rows.len() + 1);
    series.push(cfg.starting_capital);
    series.extend(rows.iter().map(|r| r.portfolio_value));
    let sharpe = rolling_sharpe(&series, cfg.sharpe_window, cfg.risk_free_rate);
    for (row, s) in rows.iter_mut().zip(sharpe.into_iter().skip(1)) {
        row.rolling_sharpe = s;
    }

    Ok(BacktestLedger {
        starting_capital: cfg.starting_capital,
        sectors: sector_labels,
        tickers,
        rows,
        positions,
        rebalances,
        simulated_dates: days,
        setf_prices: setf_history,
    })
}

fn setf_prices(sectors: &Sectors, px: &[Option<f64>], date: NaiveDate) -> Result<Vec<Option<f64>>, BacktestError> {
    let mut out = Vec::with_capacity(sectors.etfs.len());
    for (i, etf) in sectors.etfs.iter().enumerate() {
        if !sectors.live[i] {
            out.push(None);
            continue;
        }
        let p = etf
            .price(sectors.slice(i, px))
            .map_err(|source| BacktestError::Setf { date, source })?;
        out.push(Some(p));
    }
    Ok(out)
}

fn holdings_value(shares: &[f64], px: &[Option<f64>]) -> f64 {
    let mut v = 0.0;
    for (s, p) in shares.iter().zip(px) {
        if *s != 0.0 {
            v += s * p.expect("held assets are priced");
        }
    }
    v
}

/// Value weight per asset of holding SETF units in proportion `omega`:
/// `γ_j · P_j / Π_i` with `γ = flatten(w, ω)`.
fn unit_allocation(
    sectors: &Sectors,
    omega: &[f64],
    px: &[Option<f64>],
    etf_px: &[Option<f64>],
) -> Result<Vec<f64>, BacktestError> {
    let gamma = flatten_weights(&sectors.etfs, omega)?;
    let mut alloc = vec![0.0; gamma.len()];
    for (i, range) in sectors.ranges.iter().enumerate() {
        if omega[i] == 0.0 {
            continue;
        }
        let pi = etf_px[i].expect("weighted SETFs are live");
        for j in range.clone() {
            if gamma[j] > 0.0 {
                alloc[j] = gamma[j] * px[j].expect("weighted constituents are priced") / pi;
            }
        }
    }
    Ok(alloc)
}

/// GMV weights over SETFs with a full lookback history ending today, or
/// `None` when no SETF has one yet.
fn gmv_weights(
    sectors: &Sectors,
    history: &[Vec<Option<f64>>],
    lookback: usize,
    date: NaiveDate,
) -> Result<Option<Vec<f64>>, BacktestError> {
    let n = sectors.etfs.len();
    if history.len() < lookback {
        warn!("{date}: only {} SETF observations, waiting for {lookback}", history.len());
        return Ok(None);
    }
    let recent = &history[history.len() - lookback..];
    let eligible: Vec<usize> = (0..n)
        .filter(|&i| recent.iter().all(|day| day[i].is_some()))
        .collect();
    if eligible.len() < n {
        for i in (0..n).filter(|i| !eligible.contains(i)) {
            warn!(
                "{date}: sector {} lacks a full price history and is left out of the portfolio",
                sectors.etfs[i].label()
            );
        }
    }
    if eligible.is_empty() {
        return Ok(None);
    }
    let series: Vec<Vec<f64>> = eligible
        .iter()
        .map(|&i| recent.iter().map(|day| day[i].expect("eligible")).collect())
        .collect();
    let cov = optimizer::log_return_covariance(&series)
        .map_err(|source| BacktestError::Optimizer { date, source })?
        .with_end(date);
    let sol = optimizer::solve_gmv(&cov).map_err(|source| BacktestError::Optimizer { date, source })?;
    let mut omega = vec![0.0; n];
    for (k, &i) in eligible.iter().enumerate() {
        omega[i] = sol.weights[k];
    }
    Ok(Some(omega))
}

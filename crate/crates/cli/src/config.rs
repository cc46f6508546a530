//! Run configuration: built-in defaults, then a `key=value` file, then
//! command-line flags. The resolved configuration is echoed next to the
//! outputs and can be fed back through `--config`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use learned_sectors::backtest::{BacktestConfig, ShareMode};
use learned_sectors::calendar::{TradingCalendar, TriggerRule};
use learned_sectors::hca::Linkage;

/// Bad flags, config keys or values. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

/// `(key, default, description)`. An empty default means unset.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("out", "out", "output directory"),
    ("parallelism", "0", "worker threads for backtests; 0 uses every core"),
    ("fundamentals", "", "fundamentals CSV"),
    ("prices", "", "daily prices CSV"),
    ("benchmark", "", "benchmark universe CSV (ticker,benchmark_sector)"),
    ("holidays", "", "market holiday list, one date per line; empty uses the bundled list"),
    ("year", "", "fiscal year of fundamentals to cluster; empty uses the latest"),
    ("all_years", "false", "emit universes for every fiscal year, one directory per year"),
    ("linkages", "single,complete,average,ward", "comma-separated linkage methods"),
    ("k_min", "5", "smallest sector count"),
    ("k_max", "19", "largest sector count"),
    ("universes", "", "comma-separated universe CSVs or directories of them"),
    ("ledgers", "", "directory holding one ledger directory per universe"),
    ("ledger_a", "", "first ledger directory or ledger.csv to compare"),
    ("ledger_b", "", "second ledger directory or ledger.csv to compare"),
    ("universe_a", "", "source universe CSV for transitions"),
    ("universe_b", "", "target universe CSV for transitions"),
    ("start", "2012-01-01", "first day of the backtest window"),
    ("end", "2017-12-31", "last day of the backtest window"),
    ("starting_capital", "10000000000", "starting capital in USD"),
    ("restructure", "third-friday", "SETF restructure trigger"),
    ("rebalance", "first-trading-day", "portfolio rebalance trigger"),
    ("lookback", "126", "SETF price observations per covariance estimate"),
    ("share_mode", "integer", "integer or fractional share holdings"),
    ("risk_free_rate", "0", "annual risk-free rate as a decimal"),
    ("sharpe_window", "63", "trailing daily returns per rolling Sharpe value"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v, _)| (*k, v.to_string())).collect(),
        }
    }
}

fn known_key(key: &str) -> Result<&'static str, UsageError> {
    KEYS.iter()
        .map(|(k, _, _)| *k)
        .find(|k| *k == key)
        .ok_or_else(|| UsageError(format!("unknown config key {key:?}")))
}

impl RunConfig {
    /// Apply a `key=value` file over the current values. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), UsageError> {
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("{origin}:{}: expected key=value", i + 1));
            };
            let key = known_key(k.trim()).map_err(|e| UsageError(format!("{origin}:{}: {e}", i + 1)))?;
            if let Some(prev) = seen.insert(key, i + 1) {
                return usage(format!("{origin}:{}: {key} already set on line {prev}", i + 1));
            }
            self.values.insert(key, v.trim().to_string());
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Override `key` when a flag was given.
    pub fn set(&mut self, key: &'static str, value: Option<impl ToString>) {
        debug_assert!(known_key(key).is_ok(), "{key}");
        if let Some(v) = value {
            self.values.insert(key, v.to_string());
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn parse<T>(&self, key: &str) -> Result<T, UsageError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let v = self.raw(key);
        v.parse()
            .map_err(|e| UsageError(format!("{key}: invalid value {v:?}: {e}")))
    }

    pub fn optional<T>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.parse(key).map(Some)
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.raw(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    pub fn required_path(&self, key: &str) -> Result<PathBuf, UsageError> {
        self.path(key)
            .ok_or_else(|| UsageError(format!("{key} is required (flag or config key)")))
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out"))
    }

    pub fn linkages(&self) -> Result<Vec<Linkage>, UsageError> {
        let mut out = Vec::new();
        for name in self.list("linkages") {
            let l: Linkage = name
                .parse()
                .map_err(|_| UsageError(format!("unknown linkage {name:?}; expected single, complete, average or ward")))?;
            if !out.contains(&l) {
                out.push(l);
            }
        }
        if out.is_empty() {
            return usage("linkages must name at least one method");
        }
        out.sort();
        Ok(out)
    }

    pub fn k_range(&self) -> Result<std::ops::RangeInclusive<usize>, UsageError> {
        let (lo, hi): (usize, usize) = (self.parse("k_min")?, self.parse("k_max")?);
        if lo == 0 || lo > hi {
            return usage(format!("need 1 <= k_min <= k_max, got {lo}..{hi}"));
        }
        Ok(lo..=hi)
    }

    pub fn calendar(&self) -> anyhow::Result<TradingCalendar> {
        Ok(match self.path("holidays") {
            Some(p) => TradingCalendar::from_holiday_file(&p)?,
            None => TradingCalendar::us_default(),
        })
    }

    pub fn backtest(&self) -> Result<BacktestConfig, UsageError> {
        let cfg = BacktestConfig {
            start: self.parse::<NaiveDate>("start")?,
            end: self.parse::<NaiveDate>("end")?,
            starting_capital: self.parse("starting_capital")?,
            restructure: self.parse::<TriggerRule>("restructure")?,
            rebalance: self.parse::<TriggerRule>("rebalance")?,
            lookback: self.parse("lookback")?,
            share_mode: self.parse::<ShareMode>("share_mode")?,
            risk_free_rate: self.parse("risk_free_rate")?,
            sharpe_window: self.parse("sharpe_window")?,
        };
        cfg.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(cfg)
    }

    /// Every key with its description, in a form `apply_text` reads back.
    pub fn render(&self, command: &str) -> String {
        let mut s = format!("# effective configuration for `lsectors {command}`\n");
        for (key, _, doc) in KEYS {
            s.push_str(&format!("\n# {doc}\n{key} = {}\n", self.raw(key)));
        }
        s
    }
}

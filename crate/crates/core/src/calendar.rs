//! Trading calendar and monthly trigger schedules.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use thiserror::Error;
use tracing::warn;

const BUNDLED_HOLIDAYS: &str = include_str!("../data/us_market_holidays_2010_2018.txt");

#[derive(Debug, Error, PartialEq)]
pub enum CalendarError {
    #[error("window start {start} is after end {end}")]
    InvertedWindow { start: NaiveDate, end: NaiveDate },
    #[error("holiday file line {line}: unparseable date {raw:?}")]
    BadHoliday { line: usize, raw: String },
    #[error("cannot read holiday file: {0}")]
    Io(String),
    #[error("unknown trigger rule {0:?}")]
    UnknownRule(String),
}

/// Weekdays minus a fixed holiday set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TradingCalendar {
    holidays: BTreeSet<NaiveDate>,
}

impl TradingCalendar {
    pub fn new(holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self {
            holidays: holidays.into_iter().collect(),
        }
    }

    /// US market closures 2010–2018.
    pub fn us_default() -> Self {
        Self::parse_holidays(BUNDLED_HOLIDAYS).expect("bundled holiday list parses")
    }

    /// One ISO-8601 date per line; `#` starts a comment.
    pub fn parse_holidays(text: &str) -> Result<Self, CalendarError> {
        let mut holidays = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let date = NaiveDate::parse_from_str(body, "%Y-%m-%d").map_err(|_| {
                CalendarError::BadHoliday {
                    line: i + 1,
                    raw: body.to_string(),
                }
            })?;
            holidays.insert(date);
        }
        Ok(Self { holidays })
    }

    pub fn from_holiday_file(path: &Path) -> Result<Self, CalendarError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CalendarError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_holidays(&text)
    }

    pub fn holidays(&self) -> &BTreeSet<NaiveDate> {
        &self.holidays
    }

    pub fn is_trading_day(&self, d: NaiveDate) -> bool {
        !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.contains(&d)
    }

    pub fn trading_days(&self, start: NaiveDate, end: NaiveDate) -> Result<Vec<NaiveDate>, CalendarError> {
        if start > end {
            return Err(CalendarError::InvertedWindow { start, end });
        }
        Ok(start
            .iter_days()
            .take_while(|d| *d <= end)
            .filter(|d| self.is_trading_day(*d))
            .collect())
    }

    /// The `count` trading days strictly before `date`, oldest first.
    pub fn trading_days_before(&self, date: NaiveDate, count: usize) -> Vec<NaiveDate> {
        let mut out = Vec::with_capacity(count);
        let mut d = date;
        while out.len() < count {
            d = d.pred_opt().expect("date in range");
            if self.is_trading_day(d) {
                out.push(d);
            }
        }
        out.reverse();
        out
    }

    /// First trading day on or after `d` within the same month.
    fn roll_forward_in_month(&self, d: NaiveDate) -> Option<NaiveDate> {
        d.iter_days()
            .take_while(|x| x.month() == d.month())
            .find(|x| self.is_trading_day(*x))
    }
}

/// When a monthly event fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerRule {
    /// The `nth` given weekday of the month, rolled forward past closures.
    NthWeekday { nth: u8, weekday: Weekday },
    FirstTradingDay,
}

impl TriggerRule {
    pub const THIRD_FRIDAY: TriggerRule = TriggerRule::NthWeekday {
        nth: 3,
        weekday: Weekday::Fri,
    };
}

impl fmt::Display for TriggerRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriggerRule::FirstTradingDay => f.write_str("first-trading-day"),
            TriggerRule::NthWeekday { nth: 3, weekday: Weekday::Fri } => f.write_str("third-friday"),
            TriggerRule::NthWeekday { nth, weekday } => {
                write!(f, "{nth}-{}", weekday.to_string().to_ascii_lowercase())
            }
        }
    }
}

impl FromStr for TriggerRule {
    type Err = CalendarError;

    /// `third-friday`, `first-trading-day`, or `<n>-<weekday>` such as `2-wed`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "third-friday" => return Ok(Self::THIRD_FRIDAY),
            "first-trading-day" => return Ok(Self::FirstTradingDay),
            _ => {}
        }
        let bad = || CalendarError::UnknownRule(s.clone());
        let (n, wd) = s.split_once('-').ok_or_else(bad)?;
        let nth: u8 = n.parse().map_err(|_| bad())?;
        let weekday: Weekday = wd.parse().map_err(|_| bad())?;
        if !(1..=5).contains(&nth) {
            return Err(bad());
        }
        Ok(TriggerRule::NthWeekday { nth, weekday })
    }
}

fn months(start: NaiveDate, end: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    let mut cur = NaiveDate::from_ymd_opt(start.year(), start.month(), 1).expect("valid month");
    std::iter::from_fn(move || {
        if cur > end {
            return None;
        }
        let out = cur;
        cur = cur.checked_add_months(chrono::Months::new(1))?;
        Some(out)
    })
}

fn nth_weekday(first_of_month: NaiveDate, nth: u8, weekday: Weekday) -> Option<NaiveDate> {
    let offset = (7 + weekday.num_days_from_monday() - first_of_month.weekday().num_days_from_monday()) % 7;
    let d = first_of_month.checked_add_days(Days::new((offset + 7 * (nth as u32 - 1)) as u64))?;
    (d.month() == first_of_month.month()).then_some(d)
}

/// Trigger dates of `rule` within `[start, end]`, one per month at most.
pub fn schedule(cal: &TradingCalendar, rule: TriggerRule, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    for first in months(start, end) {
        let nominal = match rule {
            TriggerRule::FirstTradingDay => Some(first),
            TriggerRule::NthWeekday { nth, weekday } => nth_weekday(first, nth, weekday),
        };
        let Some(nominal) = nominal else { continue };
        match cal.roll_forward_in_month(nominal) {
            Some(d) if d >= start && d <= end => out.push(d),
            Some(_) => {}
            None => warn!(
                "no trading day left in {}-{:02} for {rule} trigger; skipping",
                first.year(),
                first.month()
            ),
        }
    }
    out
}

pub fn third_friday_schedule(cal: &TradingCalendar, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    schedule(cal, TriggerRule::THIRD_FRIDAY, start, end)
}

pub fn first_trading_day_schedule(cal: &TradingCalendar, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    schedule(cal, TriggerRule::FirstTradingDay, start, end)
}

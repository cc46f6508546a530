//! Seeded synthetic markets for fixtures and tests.
//!
//! Fundamentals follow a line-and-rays geometry. Ordinary firms are evenly
//! spaced by size along the average industry profile, with a slight tilt
//! towards their own industry, so nearest neighbours are always close but the
//! group as a whole is long. A few mega-caps sit off that line on pure
//! industry rays.
//!
//! Prices are geometric random walks driven by a market factor, one factor
//! per industry and idiosyncratic noise. Mega-caps trade at high prices with
//! large idiosyncratic volatility.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::calendar::TradingCalendar;
use crate::ingest::{Fundamentals, FundamentalsRecord, PriceTable, SectorUniverse, UniverseOrigin, FEATURE_COLUMNS};

pub const INDUSTRIES: [&str; 5] = [
    "Energy",
    "Financials",
    "Health Care",
    "Industrials",
    "Information Technology",
];

#[derive(Debug, Clone)]
pub struct StarConfig {
    pub seed: u64,
    pub n_small: usize,
    /// Sizes of the mega-caps, one per entry, placed on industries in turn.
    pub outlier_sizes: Vec<f64>,
    /// Largest small-firm size; small firms are spread over `[2, max_small_size]`.
    pub max_small_size: f64,
    /// Weight of an industry's own feature columns relative to the others.
    /// Larger values spread the industry rays further apart.
    pub industry_emphasis: f64,
    /// How far a small firm's profile leans from the average towards its
    /// industry, in `[0, 1]`.
    pub small_tilt: f64,
    /// Relative noise on each reported feature.
    pub feature_noise: f64,
    pub years: std::ops::RangeInclusive<i32>,
    pub price_start: NaiveDate,
    pub price_end: NaiveDate,
    /// Index of a small firm whose prices begin only on this date.
    pub late_listing: Option<(usize, NaiveDate)>,
}

impl Default for StarConfig {
    fn default() -> Self {
        Self {
            seed: 20_190_101,
            n_small: 36,
            outlier_sizes: vec![80.0, 105.0, 130.0, 160.0],
            max_small_size: 180.0,
            industry_emphasis: 3.0,
            small_tilt: 0.15,
            feature_noise: 0.02,
            years: 2012..=2017,
            price_start: NaiveDate::from_ymd_opt(2011, 1, 3).unwrap(),
            price_end: NaiveDate::from_ymd_opt(2017, 12, 29).unwrap(),
            late_listing: Some((7, NaiveDate::from_ymd_opt(2013, 6, 3).unwrap())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub fundamentals: Fundamentals,
    pub benchmark: SectorUniverse,
    pub prices: PriceTable,
    /// Industry index per ticker, in ticker order of `prices`.
    pub industry: Vec<usize>,
    pub is_outlier: Vec<bool>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Unit-norm, non-negative profile per industry over the feature columns.
fn industry_profiles(rng: &mut ChaCha8Rng, emphasis_weight: f64) -> Vec<[f64; 15]> {
    (0..INDUSTRIES.len())
        .map(|ind| {
            let mut p = [0.0; 15];
            for (c, v) in p.iter_mut().enumerate() {
                // Each industry leans on its own share of the columns.
                let emphasis = if c % INDUSTRIES.len() == ind { emphasis_weight } else { 1.0 };
                *v = emphasis * rng.random_range(0.2..1.0);
            }
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            p.iter_mut().for_each(|x| *x /= norm);
            p
        })
        .collect()
}

fn ticker_names(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut names = std::collections::BTreeSet::new();
    while names.len() < n {
        let len = rng.random_range(3..=4);
        let name: String = (0..len).map(|_| (b'A' + rng.random_range(0..26u8)) as char).collect();
        names.insert(name);
    }
    // Shuffle away the alphabetical order so ticker order says nothing about industry.
    let mut names: Vec<String> = names.into_iter().collect();
    for i in (1..names.len()).rev() {
        let j = rng.random_range(0..=i);
        names.swap(i, j);
    }
    names
}

pub fn star_market(cfg: &StarConfig, cal: &TradingCalendar) -> SyntheticMarket {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let profiles = industry_profiles(&mut rng, cfg.industry_emphasis);
    let n = cfg.n_small + cfg.outlier_sizes.len();
    let tickers = ticker_names(&mut rng, n);

    let mut industry = Vec::with_capacity(n);
    let mut size = Vec::with_capacity(n);
    let mut is_outlier = Vec::with_capacity(n);
    for i in 0..cfg.n_small {
        industry.push(i % INDUSTRIES.len());
        let frac = (i as f64 + rng.random_range(0.0..1.0)) / cfg.n_small as f64;
        size.push(2.0 + frac * (cfg.max_small_size - 2.0));
        is_outlier.push(false);
    }
    for (o, &s) in cfg.outlier_sizes.iter().enumerate() {
        industry.push(o % INDUSTRIES.len());
        size.push(s);
        is_outlier.push(true);
    }

    let mut mean = [0.0; 15];
    for p in &profiles {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / profiles.len() as f64;
        }
    }
    let direction: Vec<[f64; 15]> = (0..n)
        .map(|i| {
            let tilt = if is_outlier[i] { 1.0 } else { cfg.small_tilt };
            let mut d = [0.0; 15];
            for (c, v) in d.iter_mut().enumerate() {
                *v = mean[c] + tilt * (profiles[industry[i]][c] - mean[c]);
            }
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            d.iter_mut().for_each(|x| *x /= norm);
            d
        })
        .collect();

    let mut records = Vec::new();
    for (i, ticker) in tickers.iter().enumerate() {
        let mut s = size[i];
        for year in cfg.years.clone() {
            s *= 1.0 + 0.03 + 0.02 * normal(&mut rng);
            let mut features = [0.0; 15];
            for (c, f) in features.iter_mut().enumerate() {
                let noise = 1.0 + cfg.feature_noise * normal(&mut rng);
                // Hundreds of millions of USD, rounded to the cent.
                *f = (100.0 * s * direction[i][c] * noise * 100.0).round() / 100.0;
            }
            records.push(FundamentalsRecord {
                ticker: ticker.clone(),
                fiscal_year: year,
                features,
            });
        }
    }
    debug_assert_eq!(FEATURE_COLUMNS.len(), 15);

    let benchmark = SectorUniverse::new(
        tickers
            .iter()
            .zip(&industry)
            .map(|(t, &ind)| (t.clone(), INDUSTRIES[ind].to_string())),
        UniverseOrigin::Benchmark,
        None,
    )
    .expect("unique tickers");

    let start_prices: Vec<f64> = (0..n)
        .map(|i| {
            if is_outlier[i] {
                rng.random_range(300.0..900.0)
            } else {
                rng.random_range(10.0..120.0)
            }
        })
        .collect();
    let idio: Vec<f64> = (0..n)
        .map(|i| if is_outlier[i] { 0.03 } else { 0.012 })
        .collect();
    let beta: Vec<f64> = (0..n)
        .map(|i| {
            if is_outlier[i] {
                rng.random_range(1.5..1.9)
            } else {
                rng.random_range(0.6..1.2)
            }
        })
        .collect();
    let prices = factor_prices(
        &mut rng,
        cal,
        cfg.price_start,
        cfg.price_end,
        &tickers,
        &industry,
        &start_prices,
        &beta,
        &idio,
        cfg.late_listing,
    );

    SyntheticMarket {
        fundamentals: Fundamentals { records },
        benchmark,
        prices,
        industry,
        is_outlier,
    }
}

#[allow(clippy::too_many_arguments)]
fn factor_prices(
    rng: &mut ChaCha8Rng,
    cal: &TradingCalendar,
    start: NaiveDate,
    end: NaiveDate,
    tickers: &[String],
    industry: &[usize],
    start_prices: &[f64],
    beta: &[f64],
    idio: &[f64],
    late_listing: Option<(usize, NaiveDate)>,
) -> PriceTable {
    let dates = cal.trading_days(start, end).expect("start before end");
    let n = tickers.len();
    let n_ind = industry.iter().copied().max().map_or(0, |m| m + 1);
    let drift: Vec<f64> = (0..n).map(|_| rng.random_range(-0.0002..0.0008)).collect();
    let mut level: Vec<f64> = start_prices.iter().map(|p| libm::log(*p)).collect();
    let mut series: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(dates.len()); n];
    for date in &dates {
        let market = 0.008 * normal(rng);
        let sector: Vec<f64> = (0..n_ind).map(|_| 0.009 * normal(rng)).collect();
        for j in 0..n {
            let eps = idio[j] * normal(rng);
            level[j] += drift[j] + beta[j] * market + sector[industry[j]] + eps;
            let listed = match late_listing {
                Some((k, from)) if k == j => *date >= from,
                _ => true,
            };
            let p = (libm::exp(level[j]) * 100.0).round() / 100.0;
            series[j].push(listed.then_some(p.max(0.01)));
        }
    }
    PriceTable::new(dates, tickers.to_vec(), series).expect("well-formed synthetic prices")
}

/// A small market of `3 × per_sector` tickers in three industries, with a
/// matching benchmark universe.
pub fn small_market(seed: u64, per_sector: usize, start: NaiveDate, end: NaiveDate, cal: &TradingCalendar) -> (SectorUniverse, PriceTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3 * per_sector;
    let tickers = ticker_names(&mut rng, n);
    let industry: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let start_prices: Vec<f64> = (0..n).map(|_| rng.random_range(15.0..150.0)).collect();
    let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.6..1.4)).collect();
    let idio = vec![0.012; n];
    let prices = factor_prices(&mut rng, cal, start, end, &tickers, &industry, &start_prices, &beta, &idio, None);
    let universe = SectorUniverse::new(
        tickers
            .iter()
            .zip(&industry)
            .map(|(t, &i)| (t.clone(), INDUSTRIES[i].to_string())),
        UniverseOrigin::Benchmark,
        None,
    )
    .expect("unique tickers");
    (universe, prices)
}

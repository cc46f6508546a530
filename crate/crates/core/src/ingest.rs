//! CSV ingestion for fundamentals, daily prices and sector universes.
//!
//! All three formats carry a mandatory header row. Fundamentals columns are
//! matched by name, so their order in the file does not matter; features are
//! always stored in [`FEATURE_COLUMNS`] order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use crate::hca::{FeatureMatrix, Linkage};

/// The 15 fundamentals features, in storage order.
pub const FEATURE_COLUMNS: [&str; 15] = [
    "total_assets",
    "cash_and_equivalents",
    "receivables",
    "inventories",
    "sales",
    "cost_of_goods_sold",
    "gross_profit",
    "operating_cash_flow",
    "operating_income",
    "depreciation_depletion_amortization",
    "interest_expense",
    "non_operating_income_expense",
    "income_taxes",
    "advertising_expense",
    "rnd_expense",
];

pub const FEATURE_COUNT: usize = FEATURE_COLUMNS.len();

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("ticker {ticker} year {year}: feature {column} is not a finite number ({raw:?})")]
    NonFiniteFeature {
        ticker: String,
        year: i32,
        column: &'static str,
        raw: String,
    },
    #[error("duplicate record for ticker {ticker} year {year}")]
    DuplicateRecord { ticker: String, year: i32 },
    #[error("line {line}: unparseable date {raw:?}")]
    BadDate { line: u64, raw: String },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("price at {date} for {ticker} must be a positive number, got {raw:?}")]
    BadPrice {
        date: NaiveDate,
        ticker: String,
        raw: String,
    },
    #[error("duplicate ticker {0}")]
    DuplicateTicker(String),
    #[error("line {line}: empty sector label for ticker {ticker}")]
    EmptyLabel { line: u64, ticker: String },
    #[error("no fundamentals for fiscal year {0}")]
    NoSuchYear(i32),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// One company's fundamentals for one fiscal year.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalsRecord {
    pub ticker: String,
    pub fiscal_year: i32,
    pub features: [f64; FEATURE_COUNT],
}

/// Fundamentals records in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fundamentals {
    pub records: Vec<FundamentalsRecord>,
}

impl Fundamentals {
    pub fn years(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.records.iter().map(|r| r.fiscal_year).collect();
        set.into_iter().collect()
    }

    pub fn latest_year(&self) -> Option<i32> {
        self.records.iter().map(|r| r.fiscal_year).max()
    }

    /// Tickers and feature matrix for one fiscal year, rows in file order.
    pub fn year_matrix(&self, year: i32) -> Result<(Vec<String>, FeatureMatrix), IngestError> {
        let rows: Vec<&FundamentalsRecord> = self
            .records
            .iter()
            .filter(|r| r.fiscal_year == year)
            .collect();
        if rows.is_empty() {
            return Err(IngestError::NoSuchYear(year));
        }
        let tickers = rows.iter().map(|r| r.ticker.clone()).collect();
        let features: Vec<&[f64]> = rows.iter().map(|r| &r.features[..]).collect();
        let matrix = FeatureMatrix::from_rows(&features)
            .expect("validated records are finite and 15-dimensional");
        Ok((tickers, matrix))
    }
}

pub fn load_fundamentals(path: &Path) -> Result<Fundamentals, IngestError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_fundamentals(file)
}

pub fn read_fundamentals<R: Read>(reader: R) -> Result<Fundamentals, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let ticker_col = column("ticker")?;
    let year_col = column("fiscal_year")?;
    let mut feature_cols = [0usize; FEATURE_COUNT];
    for (slot, name) in feature_cols.iter_mut().zip(FEATURE_COLUMNS) {
        *slot = column(name)?;
    }

    let mut seen = HashMap::new();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let ticker = row.get(ticker_col).unwrap_or("").to_string();
        if ticker.is_empty() {
            return Err(IngestError::Row {
                line,
                message: "empty ticker".into(),
            });
        }
        let raw_year = row.get(year_col).unwrap_or("");
        let fiscal_year: i32 = raw_year.parse().map_err(|_| IngestError::Row {
            line,
            message: format!("fiscal_year {raw_year:?} is not an integer"),
        })?;
        let mut features = [0.0; FEATURE_COUNT];
        for (k, &col) in feature_cols.iter().enumerate() {
            let raw = row.get(col).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => features[k] = v,
                _ => {
                    return Err(IngestError::NonFiniteFeature {
                        ticker,
                        year: fiscal_year,
                        column: FEATURE_COLUMNS[k],
                        raw: raw.to_string(),
                    })
                }
            }
        }
        if seen.insert((ticker.clone(), fiscal_year), ()).is_some() {
            return Err(IngestError::DuplicateRecord {
                ticker,
                year: fiscal_year,
            });
        }
        records.push(FundamentalsRecord {
            ticker,
            fiscal_year,
            features,
        });
    }
    Ok(Fundamentals { records })
}

pub fn write_fundamentals<W: Write>(table: &Fundamentals, writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["ticker", "fiscal_year"];
    header.extend(FEATURE_COLUMNS);
    w.write_record(&header)?;
    for r in &table.records {
        let mut fields = vec![r.ticker.clone(), r.fiscal_year.to_string()];
        fields.extend(r.features.iter().map(|v| v.to_string()));
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

/// Daily closing prices, one column per ticker. Missing observations are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    /// `series[t][d]` is ticker `t` on `dates[d]`.
    series: Vec<Vec<Option<f64>>>,
}

impl PriceTable {
    /// Build from per-ticker series aligned to `dates`. Rows are sorted by
    /// date; duplicate dates and non-positive prices are rejected.
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        series: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, IngestError> {
        assert_eq!(tickers.len(), series.len());
        let mut seen = BTreeSet::new();
        for t in &tickers {
            if !seen.insert(t.as_str()) {
                return Err(IngestError::DuplicateTicker(t.clone()));
            }
        }
        for (t, s) in tickers.iter().zip(&series) {
            assert_eq!(s.len(), dates.len());
            for (d, p) in dates.iter().zip(s) {
                if let Some(p) = p {
                    if !(p.is_finite() && *p > 0.0) {
                        return Err(IngestError::BadPrice {
                            date: *d,
                            ticker: t.clone(),
                            raw: p.to_string(),
                        });
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..dates.len()).collect();
        order.sort_by_key(|&i| dates[i]);
        for w in order.windows(2) {
            if dates[w[0]] == dates[w[1]] {
                return Err(IngestError::DuplicateDate(dates[w[0]]));
            }
        }
        let dates = order.iter().map(|&i| dates[i]).collect();
        let series = series
            .into_iter()
            .map(|s| order.iter().map(|&i| s[i]).collect())
            .collect();
        Ok(Self {
            dates,
            tickers,
            series,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    pub fn series(&self, ticker_idx: usize) -> &[Option<f64>] {
        &self.series[ticker_idx]
    }

    pub fn price(&self, ticker_idx: usize, date_idx: usize) -> Option<f64> {
        self.series[ticker_idx][date_idx]
    }

    /// Count of stored (non-missing) prices.
    pub fn observation_count(&self) -> usize {
        self.series.iter().flatten().filter(|p| p.is_some()).count()
    }
}

pub fn load_prices(path: &Path) -> Result<PriceTable, IngestError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_prices(file)
}

pub fn read_prices<R: Read>(reader: R) -> Result<PriceTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0).map(str::to_ascii_lowercase).as_deref() != Some("date") {
        return Err(IngestError::MissingColumn("date".into()));
    }
    let tickers: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut series: Vec<Vec<Option<f64>>> = vec![Vec::new(); tickers.len()];
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let raw_date = row.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            IngestError::BadDate {
                line,
                raw: raw_date.to_string(),
            }
        })?;
        for (t, ticker) in tickers.iter().enumerate() {
            let raw = row.get(t + 1).unwrap_or("");
            let cell = if raw.is_empty() {
                None
            } else {
                match raw.parse::<f64>() {
                    Ok(p) if p.is_finite() && p > 0.0 => Some(p),
                    _ => {
                        return Err(IngestError::BadPrice {
                            date,
                            ticker: ticker.clone(),
                            raw: raw.to_string(),
                        })
                    }
                }
            };
            series[t].push(cell);
        }
        dates.push(date);
    }
    PriceTable::new(dates, tickers, series)
}

pub fn write_prices<W: Write>(table: &PriceTable, writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(table.tickers.iter().cloned());
    w.write_record(&header)?;
    for (d, date) in table.dates.iter().enumerate() {
        let mut fields = vec![date.format("%Y-%m-%d").to_string()];
        fields.extend(
            table
                .series
                .iter()
                .map(|s| s[d].map_or(String::new(), |p| p.to_string())),
        );
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

/// Where a universe's labels came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UniverseOrigin {
    Learned(Linkage),
    Benchmark,
    /// Learned labels of unknown provenance.
    Custom,
}

impl fmt::Display for UniverseOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UniverseOrigin::Learned(l) => write!(f, "{l}"),
            UniverseOrigin::Benchmark => f.write_str("benchmark"),
            UniverseOrigin::Custom => f.write_str("custom"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniverseMeta {
    pub origin: UniverseOrigin,
    pub sector_count: usize,
    pub source_year: Option<i32>,
}

/// Total assignment of tickers to sector labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorUniverse {
    assignments: BTreeMap<String, String>,
    meta: UniverseMeta,
}

impl SectorUniverse {
    /// Build from `(ticker, label)` pairs; `sector_count` is inferred.
    pub fn new<I>(pairs: I, origin: UniverseOrigin, source_year: Option<i32>) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut assignments = BTreeMap::new();
        for (ticker, label) in pairs {
            if label.is_empty() {
                return Err(IngestError::EmptyLabel { line: 0, ticker });
            }
            if assignments.contains_key(&ticker) {
                return Err(IngestError::DuplicateTicker(ticker));
            }
            assignments.insert(ticker, label);
        }
        let sector_count = assignments.values().collect::<BTreeSet<_>>().len();
        Ok(Self {
            assignments,
            meta: UniverseMeta {
                origin,
                sector_count,
                source_year,
            },
        })
    }

    pub fn meta(&self) -> &UniverseMeta {
        &self.meta
    }

    pub fn sector_count(&self) -> usize {
        self.meta.sector_count
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn label(&self, ticker: &str) -> Option<&str> {
        self.assignments.get(ticker).map(String::as_str)
    }

    /// `(ticker, label)` in ticker order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.assignments
            .iter()
            .map(|(t, l)| (t.as_str(), l.as_str()))
    }

    /// Sector label → member tickers, both sorted.
    pub fn sectors(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (t, l) in self.iter() {
            out.entry(l).or_default().push(t);
        }
        out
    }

    /// Keep only tickers accepted by `keep`; the sector count is re-inferred.
    pub fn restricted<F: Fn(&str) -> bool>(&self, keep: F) -> Self {
        let pairs = self
            .iter()
            .filter(|(t, _)| keep(t))
            .map(|(t, l)| (t.to_string(), l.to_string()));
        Self::new(pairs, self.meta.origin, self.meta.source_year)
            .expect("subset of a valid universe is valid")
    }
}

/// Sector label → number of tickers.
pub fn sector_distribution(u: &SectorUniverse) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (_, label) in u.iter() {
        *out.entry(label.to_string()).or_insert(0) += 1;
    }
    out
}

/// Both label columns of a universe file. At least one is present.
#[derive(Debug, Clone, PartialEq)]
pub struct UniverseFile {
    pub benchmark: Option<SectorUniverse>,
    pub learned: Option<SectorUniverse>,
}

impl UniverseFile {
    /// The learned universe when present, otherwise the benchmark one.
    pub fn primary(self) -> SectorUniverse {
        self.learned
            .or(self.benchmark)
            .expect("a universe file always has one label column")
    }
}

/// Parse `<linkage>_<k>` file stems written by the universe builder.
pub fn origin_from_stem(stem: &str) -> Option<(Linkage, usize)> {
    let (l, k) = stem.rsplit_once('_')?;
    Some((l.parse().ok()?, k.parse().ok()?))
}

/// Load a universe CSV and return its learned column if it has one, otherwise
/// its benchmark column.
pub fn load_universe(path: &Path) -> Result<SectorUniverse, IngestError> {
    Ok(load_universe_file(path)?.primary())
}

pub fn load_universe_file(path: &Path) -> Result<UniverseFile, IngestError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let learned_origin = origin_from_stem(stem)
        .map(|(l, _)| UniverseOrigin::Learned(l))
        .unwrap_or(UniverseOrigin::Custom);
    read_universe(file, learned_origin)
}

/// Read `ticker,benchmark_sector,learned_sector`. Either label column may be
/// omitted, but not both. `learned_origin` tags the learned column.
pub fn read_universe<R: Read>(reader: R, learned_origin: UniverseOrigin) -> Result<UniverseFile, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ticker_col = headers
        .iter()
        .position(|h| h == "ticker")
        .ok_or_else(|| IngestError::MissingColumn("ticker".into()))?;
    let bench_col = headers.iter().position(|h| h == "benchmark_sector");
    let learned_col = headers.iter().position(|h| h == "learned_sector");
    if bench_col.is_none() && learned_col.is_none() {
        return Err(IngestError::MissingColumn("benchmark_sector".into()));
    }

    let mut seen = BTreeSet::new();
    let mut bench = Vec::new();
    let mut learned = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let ticker = row.get(ticker_col).unwrap_or("").to_string();
        if ticker.is_empty() {
            return Err(IngestError::Row {
                line,
                message: "empty ticker".into(),
            });
        }
        if !seen.insert(ticker.clone()) {
            return Err(IngestError::DuplicateTicker(ticker));
        }
        for (col, out) in [(bench_col, &mut bench), (learned_col, &mut learned)] {
            if let Some(c) = col {
                let label = row.get(c).unwrap_or("");
                if label.is_empty() {
                    return Err(IngestError::EmptyLabel { line, ticker });
                }
                out.push((ticker.clone(), label.to_string()));
            }
        }
    }
    let benchmark = match bench_col {
        Some(_) => Some(SectorUniverse::new(bench, UniverseOrigin::Benchmark, None)?),
        None => None,
    };
    let learned = match learned_col {
        Some(_) => Some(SectorUniverse::new(learned, learned_origin, None)?),
        None => None,
    };
    Ok(UniverseFile { benchmark, learned })
}

/// Write a universe file. With a benchmark, emits all three columns over the
/// learned universe's tickers; benchmark labels missing for a ticker are an
/// error because empty labels are not loadable.
pub fn write_universe<W: Write>(
    learned: &SectorUniverse,
    benchmark: Option<&SectorUniverse>,
    writer: W,
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    match benchmark {
        Some(b) => {
            w.write_record(["ticker", "benchmark_sector", "learned_sector"])?;
            for (t, l) in learned.iter() {
                let bl = b.label(t).ok_or_else(|| IngestError::EmptyLabel {
                    line: 0,
                    ticker: t.to_string(),
                })?;
                w.write_record([t, bl, l])?;
            }
        }
        None => {
            w.write_record(["ticker", "learned_sector"])?;
            for (t, l) in learned.iter() {
                w.write_record([t, l])?;
            }
        }
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

/// Write a single-column benchmark universe file.
pub fn write_benchmark_universe<W: Write>(u: &SectorUniverse, writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["ticker", "benchmark_sector"])?;
    for (t, l) in u.iter() {
        w.write_record([t, l])?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

pub fn save_universe(
    path: &Path,
    learned: &SectorUniverse,
    benchmark: Option<&SectorUniverse>,
) -> Result<(), IngestError> {
    let mut buf = Vec::new();
    write_universe(learned, benchmark, &mut buf)?;
    std::fs::write(path, buf).map_err(io_err(path))
}

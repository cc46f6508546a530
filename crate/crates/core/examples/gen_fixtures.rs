//! Regenerate the bundled synthetic fixtures.
//!
//! ```text
//! cargo run -p learned-sectors --example gen_fixtures [-- <out_dir>]
//! ```

use std::fs::File;
use std::path::PathBuf;

use chrono::NaiveDate;
use learned_sectors::calendar::TradingCalendar;
use learned_sectors::ingest::{write_benchmark_universe, write_fundamentals, write_prices};
use learned_sectors::synthetic::{small_market, star_market, StarConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(out.join("small"))?;
    let cal = TradingCalendar::us_default();

    let market = star_market(&StarConfig::default(), &cal);
    write_fundamentals(&market.fundamentals, File::create(out.join("fundamentals.csv"))?)?;
    write_prices(&market.prices, File::create(out.join("prices.csv"))?)?;
    write_benchmark_universe(&market.benchmark, File::create(out.join("benchmark.csv"))?)?;

    let (universe, prices) = small_market(
        7,
        4,
        NaiveDate::from_ymd_opt(2015, 1, 2).unwrap(),
        NaiveDate::from_ymd_opt(2017, 12, 29).unwrap(),
        &cal,
    );
    write_prices(&prices, File::create(out.join("small/prices.csv"))?)?;
    write_benchmark_universe(&universe, File::create(out.join("small/universe.csv"))?)?;
    println!("fixtures written to {}", out.display());
    Ok(())
}

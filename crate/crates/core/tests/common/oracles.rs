//! Slow, straightforward reference implementations used as test oracles.
//!
//! Shared with the CLI acceptance suite through a `#[path]` module, so nothing
//! here may depend on test-crate-local items.

#![allow(dead_code, clippy::needless_range_loop, clippy::too_many_arguments)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use learned_sectors::backtest::BacktestLedger;
use learned_sectors::calendar::{schedule, TradingCalendar, TriggerRule};
use learned_sectors::hca::Linkage;
use learned_sectors::ingest::{PriceTable, SectorUniverse};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Linkage distance between two clusters of points, recomputed from scratch.
pub fn cluster_distance(points: &[Vec<f64>], a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    let pair = || a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j)));
    match linkage {
        Linkage::Single => pair().map(|(i, j)| euclid(&points[i], &points[j])).fold(f64::INFINITY, f64::min),
        Linkage::Complete => pair().map(|(i, j)| euclid(&points[i], &points[j])).fold(0.0, f64::max),
        Linkage::Average => {
            pair().map(|(i, j)| euclid(&points[i], &points[j])).sum::<f64>() / (a.len() * b.len()) as f64
        }
        Linkage::Ward => {
            // Centroid form of the Ward recursion seeded with Euclidean distances.
            let dim = points[0].len();
            let centroid = |c: &[usize]| -> Vec<f64> {
                (0..dim)
                    .map(|k| c.iter().map(|&i| points[i][k]).sum::<f64>() / c.len() as f64)
                    .collect()
            };
            let (na, nb) = (a.len() as f64, b.len() as f64);
            (2.0 * na * nb / (na + nb)).sqrt() * euclid(&centroid(a), &centroid(b))
        }
    }
}

/// Naive agglomeration: every step recomputes all cluster-pair distances.
/// Returns `(min id, max id, height)` per merge, or `None` if some step's
/// best and runner-up distances are within `tie_gap` (relative).
pub fn naive_merges(points: &[Vec<f64>], linkage: Linkage, tie_gap: f64) -> Option<Vec<(usize, usize, f64)>> {
    let n = points.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut out = Vec::new();
    for t in 0..n - 1 {
        let mut cands = Vec::new();
        for x in 0..clusters.len() {
            for y in x + 1..clusters.len() {
                let d = cluster_distance(points, &clusters[x].1, &clusters[y].1, linkage);
                cands.push((d, x, y));
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        if cands.len() > 1 && cands[1].0 - cands[0].0 <= tie_gap * cands[0].0.abs().max(1.0) {
            return None;
        }
        let (d, x, y) = cands[0];
        let (ix, iy) = (clusters[x].0, clusters[y].0);
        let mut members = clusters[x].1.clone();
        members.extend(&clusters[y].1);
        clusters.remove(y);
        clusters.remove(x);
        clusters.push((n + t, members));
        out.push((ix.min(iy), ix.max(iy), d));
    }
    Some(out)
}

/// Random tie-free instance: `n` points in `dim` dimensions.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Portfolio optimization

pub fn quad(s: &[Vec<f64>], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..w.len() {
        for j in 0..w.len() {
            acc += w[i] * s[i][j] * w[j];
        }
    }
    acc
}

/// Michelot's projection onto the simplex: repeatedly drop coordinates that
/// the current shift would make non-positive.
fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut active: Vec<usize> = (0..v.len()).collect();
    let theta = loop {
        let theta = (active.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / active.len() as f64;
        let before = active.len();
        active.retain(|&i| v[i] > theta);
        if active.len() == before {
            break theta;
        }
    };
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Fixed-step projected gradient from 20 random feasible starts, each capped
/// at ten times the production iteration budget; for `n ≤ 4` a simplex grid
/// refined locally. Returns the best point found.
pub fn gmv_oracle(s: &[Vec<f64>], seed: u64) -> (Vec<f64>, f64) {
    let n = s.len();
    let lipschitz = 2.0 * (0..n).map(|i| s[i].iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lipschitz.max(1e-300);
    let mut r = rng(seed);
    let mut best = (vec![], f64::INFINITY);
    for _ in 0..20 {
        let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let t: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|x| x / t).collect();
        for _ in 0..50_000 {
            let g: Vec<f64> = (0..n).map(|i| 2.0 * (0..n).map(|j| s[i][j] * w[j]).sum::<f64>()).collect();
            let next: Vec<f64> = w.iter().zip(&g).map(|(x, gi)| x - step * gi).collect();
            let next = simplex_projection(&next);
            let moved = next.iter().zip(&w).any(|(a, b)| a != b);
            w = next;
            if !moved {
                break;
            }
        }
        let f = quad(s, &w);
        if f < best.1 {
            best = (w, f);
        }
    }
    if n <= 4 {
        let g = grid_refine(s, &best.0);
        if g.1 < best.1 {
            best = g;
        }
    }
    best
}

/// Coarse simplex grid, then shrinking local grids around the incumbent.
fn grid_refine(s: &[Vec<f64>], seed_w: &[f64]) -> (Vec<f64>, f64) {
    let n = s.len();
    let mut best = (seed_w.to_vec(), quad(s, seed_w));
    let steps = 40;
    let visit = |w: &[f64], best: &mut (Vec<f64>, f64)| {
        let f = quad(s, w);
        if f < best.1 {
            *best = (w.to_vec(), f);
        }
    };
    fn compositions(n: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=total {
            prefix.push(k);
            compositions(n - 1, total - k, prefix, out);
            prefix.pop();
        }
    }
    let mut grid = Vec::new();
    compositions(n, steps, &mut Vec::new(), &mut grid);
    for c in &grid {
        let w: Vec<f64> = c.iter().map(|&k| k as f64 / steps as f64).collect();
        visit(&w, &mut best);
    }
    let mut radius = 1.0 / steps as f64;
    for _ in 0..40 {
        let center = best.0.clone();
        for c in &grid {
            let w: Vec<f64> = c
                .iter()
                .zip(&center)
                .map(|(&k, x)| (x + radius * (k as f64 / steps as f64 - 1.0 / n as f64)).max(0.0))
                .collect();
            let t: f64 = w.iter().sum();
            let w: Vec<f64> = w.iter().map(|x| x / t).collect();
            visit(&w, &mut best);
        }
        radius *= 0.5;
    }
    best
}

/// Random PSD matrix `A Aᵀ / m` from a `n × m` Gaussian-ish factor.
pub fn random_psd(r: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..m).map(|k| a[i][k] * a[j][k]).sum::<f64>() / m as f64)
                .collect()
        })
        .collect()
}

/// Sample covariance of log-returns, computed with explicit means first.
pub fn two_pass_covariance(histories: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rets: Vec<Vec<f64>> = histories
        .iter()
        .map(|h| h.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
        .collect();
    let t = rets[0].len();
    let means: Vec<f64> = rets.iter().map(|r| r.iter().sum::<f64>() / t as f64).collect();
    let n = rets.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..t {
                acc += (rets[i][k] - means[i]) * (rets[j][k] - means[j]);
            }
            c[i][j] = acc / (t as f64 - 1.0);
        }
    }
    c
}

// ---------------------------------------------------------------------------
// Backtest

/// Rolling Sharpe over `values` preceded by `base`: entry `d` uses the
/// `window` log-returns ending at `values[d]`.
pub fn two_pass_sharpe(base: f64, values: &[f64], window: usize, rf: f64) -> Vec<Option<f64>> {
    let mut series = vec![base];
    series.extend_from_slice(values);
    let rets: Vec<f64> = series.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    (0..values.len())
        .map(|d| {
            if d + 1 < window {
                return None;
            }
            let r = &rets[d + 1 - window..=d];
            let mean = r.iter().sum::<f64>() / window as f64;
            let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (window as f64 - 1.0);
            let sd = var.sqrt();
            if sd < 1e-14 {
                return None;
            }
            Some((mean * 252.0 - rf) / (sd * 252f64.sqrt()))
        })
        .collect()
}

/// `γ_j = w_j · ω_i` by explicit nested loops over sectors and members.
pub fn nested_flatten(sector_weights: &[Vec<f64>], omega: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..sector_weights.len() {
        for j in 0..sector_weights[i].len() {
            out.push(sector_weights[i][j] * omega[i]);
        }
    }
    out
}

/// Replays a ledger's SETF unit holdings from raw prices and the ledger's
/// rebalance weights, returning the nested value `Σ_i units_i Σ_j w_j P_j`
/// (plus cash before the first rebalance) for each window day.
pub fn replay_nested_values(
    universe: &SectorUniverse,
    prices: &PriceTable,
    ledger: &BacktestLedger,
    cal: &TradingCalendar,
    start: NaiveDate,
    end: NaiveDate,
    lookback: usize,
    restructure: TriggerRule,
) -> Vec<(NaiveDate, f64)> {
    // Sectors in label order, members in ticker order, priced tickers only.
    let mut sectors: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (t, l) in universe.iter() {
        if prices.ticker_index(t).is_some() {
            sectors.entry(l.to_string()).or_default().insert(t.to_string());
        }
    }
    let labels: Vec<String> = sectors.keys().cloned().collect();
    assert_eq!(labels, ledger.sectors);
    let members: Vec<Vec<usize>> = sectors
        .values()
        .map(|ts| ts.iter().map(|t| prices.ticker_index(t).unwrap()).collect())
        .collect();

    let window = cal.trading_days(start, end).unwrap();
    let mut days = cal.trading_days_before(window[0], lookback - 1);
    let warm = days.len();
    days.extend(window.iter().copied());
    let restructure_days: BTreeSet<NaiveDate> = schedule(cal, restructure, days[0], *days.last().unwrap())
        .into_iter()
        .collect();
    let rebalances: BTreeMap<NaiveDate, &Vec<f64>> =
        ledger.rebalances.iter().map(|r| (r.date, &r.weights)).collect();

    let price_on = |col: usize, day: NaiveDate| -> Option<f64> {
        let mut last = None;
        for (k, d) in prices.dates().iter().enumerate() {
            if *d > day {
                break;
            }
            if let Some(p) = prices.price(col, k) {
                last = Some(p);
            }
        }
        last
    };

    let s = members.len();
    let mut w: Vec<Vec<f64>> = members.iter().map(|m| vec![0.0; m.len()]).collect();
    let mut live = vec![false; s];
    let mut units = vec![0.0; s];
    let mut cash = ledger.starting_capital;
    let mut out = Vec::new();
    for (d, &day) in days.iter().enumerate() {
        let p: Vec<Vec<Option<f64>>> = members
            .iter()
            .map(|m| m.iter().map(|&c| price_on(c, day)).collect())
            .collect();
        let etf = |w: &Vec<Vec<f64>>, i: usize| -> f64 {
            let mut acc = 0.0;
            for j in 0..w[i].len() {
                if w[i][j] != 0.0 {
                    acc += w[i][j] * p[i][j].unwrap();
                }
            }
            acc
        };
        if d == 0 || restructure_days.contains(&day) {
            let before: Vec<f64> = (0..s).map(|i| if live[i] { etf(&w, i) } else { 0.0 }).collect();
            for i in 0..s {
                let total: f64 = p[i].iter().flatten().sum();
                if total > 0.0 {
                    w[i] = p[i].iter().map(|x| x.map_or(0.0, |v| v / total)).collect();
                    live[i] = true;
                }
            }
            if !rebalances.contains_key(&day) {
                for i in 0..s {
                    if units[i] != 0.0 {
                        units[i] *= before[i] / etf(&w, i);
                    }
                }
            }
        }
        if let Some(omega) = rebalances.get(&day) {
            let value: f64 = cash + (0..s).map(|i| if units[i] != 0.0 { units[i] * etf(&w, i) } else { 0.0 }).sum::<f64>();
            for i in 0..s {
                units[i] = if omega[i] > 0.0 { omega[i] * value / etf(&w, i) } else { 0.0 };
            }
            cash = 0.0;
        }
        if d >= warm {
            let mut v = cash;
            for i in 0..s {
                if units[i] != 0.0 {
                    v += units[i] * etf(&w, i);
                }
            }
            out.push((day, v));
        }
    }
    out
}

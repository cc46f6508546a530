//! Candidate universe generation from merge trees, sector labelling and
//! cross-universe transition counts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::hca::{self, FeatureMatrix, HcaError, Linkage, MergeTree};
use crate::ingest::{IngestError, SectorUniverse, UniverseOrigin};

#[derive(Debug, Error)]
pub enum UniverseError {
    #[error("tree has {leaves} leaves but {tickers} tickers were given")]
    SizeMismatch { leaves: usize, tickers: usize },
    #[error("sector count range {start}..={end} is outside 1..={n}")]
    RangeOutOfBounds { start: usize, end: usize, n: usize },
    #[error("the two universes share no tickers")]
    EmptyIntersection,
    #[error(transparent)]
    Hca(#[from] HcaError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

const NATO: [&str; 26] = [
    "Alpha", "Bravo", "Charlie", "Delta", "Echo", "Foxtrot", "Golf", "Hotel", "India", "Juliett",
    "Kilo", "Lima", "Mike", "November", "Oscar", "Papa", "Quebec", "Romeo", "Sierra", "Tango",
    "Uniform", "Victor", "Whiskey", "Xray", "Yankee", "Zulu",
];

/// The `i`-th sector label: `Alpha`..`Zulu`, then `Alpha2`..`Zulu2`, and so on.
pub fn sector_label(i: usize) -> String {
    let round = i / NATO.len();
    let name = NATO[i % NATO.len()];
    if round == 0 {
        name.to_string()
    } else {
        format!("{name}{}", round + 1)
    }
}

/// Labels for each cluster of `partition`, in the same order. Larger clusters
/// get earlier labels; equal sizes are ordered by smallest member leaf.
pub fn label_sectors(partition: &[Vec<usize>]) -> Vec<String> {
    let mut order: Vec<usize> = (0..partition.len()).collect();
    let min_leaf = |c: usize| partition[c].iter().copied().min().unwrap_or(usize::MAX);
    order.sort_by(|&a, &b| {
        partition[b]
            .len()
            .cmp(&partition[a].len())
            .then(min_leaf(a).cmp(&min_leaf(b)))
    });
    let mut labels = vec![String::new(); partition.len()];
    for (rank, &c) in order.iter().enumerate() {
        labels[c] = sector_label(rank);
    }
    labels
}

/// One labelled universe per sector count in `k_range`.
pub fn universes_from_tree(
    tree: &MergeTree,
    tickers: &[String],
    k_range: RangeInclusive<usize>,
    year: Option<i32>,
) -> Result<Vec<SectorUniverse>, UniverseError> {
    let n = tree.n_leaves();
    if tickers.len() != n {
        return Err(UniverseError::SizeMismatch {
            leaves: n,
            tickers: tickers.len(),
        });
    }
    let (start, end) = (*k_range.start(), *k_range.end());
    if start == 0 || end > n || start > end {
        return Err(UniverseError::RangeOutOfBounds { start, end, n });
    }
    let mut out = Vec::with_capacity(end - start + 1);
    for k in k_range {
        let partition = hca::cut(tree, k)?;
        let labels = label_sectors(&partition);
        let pairs = partition.iter().zip(&labels).flat_map(|(cluster, label)| {
            cluster
                .iter()
                .map(move |&leaf| (tickers[leaf].clone(), label.clone()))
        });
        out.push(SectorUniverse::new(
            pairs,
            UniverseOrigin::Learned(tree.linkage()),
            year,
        )?);
    }
    Ok(out)
}

/// Every candidate universe, keyed by `(linkage, k)`.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    pub universes: BTreeMap<(Linkage, usize), SectorUniverse>,
    pub k_range: RangeInclusive<usize>,
    pub trees: BTreeMap<Linkage, MergeTree>,
}

impl SearchSpace {
    /// Cluster `features` under each linkage and cut at every `k`.
    pub fn build(
        features: &FeatureMatrix,
        tickers: &[String],
        linkages: &[Linkage],
        k_range: RangeInclusive<usize>,
        year: Option<i32>,
    ) -> Result<Self, UniverseError> {
        let distances = hca::euclidean_distances(features);
        let mut universes = BTreeMap::new();
        let mut trees = BTreeMap::new();
        for &linkage in linkages {
            let tree = hca::build_merge_tree(&distances, linkage)?;
            let us = universes_from_tree(&tree, tickers, k_range.clone(), year)?;
            for (k, u) in k_range.clone().zip(us) {
                universes.insert((linkage, k), u);
            }
            trees.insert(linkage, tree);
        }
        Ok(Self {
            universes,
            k_range,
            trees,
        })
    }

    pub fn len(&self) -> usize {
        self.universes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.universes.is_empty()
    }

    /// File name for a universe: `<linkage>_<k>.csv`.
    pub fn file_name(linkage: Linkage, k: usize) -> String {
        format!("{linkage}_{k}.csv")
    }
}

/// Flow counts between the labels of two universes over their common tickers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransitionTable {
    pub flows: BTreeMap<(String, String), usize>,
    pub only_in_from: Vec<String>,
    pub only_in_to: Vec<String>,
}

impl TransitionTable {
    pub fn total(&self) -> usize {
        self.flows.values().sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["from_label", "to_label", "count"])?;
        for ((a, b), n) in &self.flows {
            w.write_record([a.as_str(), b.as_str(), &n.to_string()])?;
        }
        w.flush().map_err(|e| IngestError::Csv(e.into()))?;
        Ok(())
    }
}

pub fn transitions(from: &SectorUniverse, to: &SectorUniverse) -> Result<TransitionTable, UniverseError> {
    let mut table = TransitionTable::default();
    for (ticker, a) in from.iter() {
        match to.label(ticker) {
            Some(b) => *table.flows.entry((a.to_string(), b.to_string())).or_insert(0) += 1,
            None => table.only_in_from.push(ticker.to_string()),
        }
    }
    let from_tickers: BTreeSet<&str> = from.iter().map(|(t, _)| t).collect();
    table.only_in_to = to
        .iter()
        .filter(|(t, _)| !from_tickers.contains(t))
        .map(|(t, _)| t.to_string())
        .collect();
    if table.flows.is_empty() {
        return Err(UniverseError::EmptyIntersection);
    }
    Ok(table)
}

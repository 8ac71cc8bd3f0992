//! Item popularity from training counts and the popularity-decile analysis.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{InteractionLog, ItemCatalog};

/// Per-item training counts `N^i`, popularity factors `C_i = N^i / sum N`
/// and their min-max normalization `P_i`, all indexed by canonical item index.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityTable {
    counts: Vec<u64>,
    factor: Vec<f64>,
    normalized: Vec<f64>,
    /// Training interactions whose item is not in the catalog.
    pub rejected: usize,
}

impl PopularityTable {
    /// Builds the table from raw counts indexed by canonical item index.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        let total: u64 = counts.iter().sum();
        let factor: Vec<f64> = if total == 0 {
            vec![0.0; counts.len()]
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        };
        let normalized = min_max(&factor);
        Ok(PopularityTable {
            counts,
            factor,
            normalized,
            rejected: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Item indices by count descending, ties by index ascending.
    pub fn by_popularity(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.counts.len()).collect();
        order.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        order
    }

    /// `item_id \t count \t C \t P` rows in canonical order, with a header.
    pub fn to_tsv(&self, catalog: &ItemCatalog) -> String {
        let mut out = String::from("item_id\tcount\tC\tP\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                catalog.id(i),
                self.counts[i],
                self.factor[i],
                self.normalized[i]
            ));
        }
        out
    }
}

/// Min-max scales `values` into [0, 1]. When every value is equal the result
/// is all zeros.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if values.is_empty() || span <= 0.0 || !span.is_finite() {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|&v| ((v - lo) / span).clamp(0.0, 1.0))
        .collect()
}

/// Counts training interactions per catalog item.
pub fn compute_popularity(
    train: &InteractionLog,
    catalog: &ItemCatalog,
) -> Result<PopularityTable> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let mut counts = vec![0u64; catalog.len()];
    let mut rejected = 0;
    for rec in train.iter() {
        match catalog.index_of(&rec.item_id) {
            Some(i) => counts[i] += 1,
            None => rejected += 1,
        }
    }
    if rejected > 0 {
        log::warn!("{rejected} training interactions reference items outside the catalog");
    }
    let mut table = PopularityTable::from_counts(counts)?;
    table.rejected = rejected;
    Ok(table)
}

/// Share of interactions held by each popularity decile, most popular first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecileReport {
    /// Canonical item indices per bucket.
    pub groups: Vec<Vec<usize>>,
    pub share: Vec<f64>,
    /// Set when the catalog has fewer than ten items, so some buckets are empty.
    pub small_catalog: bool,
}

impl DecileReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("decile\titems\tshare\n");
        for (k, (g, s)) in self.groups.iter().zip(&self.share).enumerate() {
            out.push_str(&format!("{}\t{}\t{}\n", k + 1, g.len(), s));
        }
        out
    }
}

pub fn decile_report(table: &PopularityTable) -> DecileReport {
    const BUCKETS: usize = 10;
    let order = table.by_popularity();
    let n = order.len();
    let (base, rem) = (n / BUCKETS, n % BUCKETS);
    let total = table.total();

    let mut groups = Vec::with_capacity(BUCKETS);
    let mut share = Vec::with_capacity(BUCKETS);
    let mut start = 0;
    for k in 0..BUCKETS {
        let size = base + usize::from(k < rem);
        let group = order[start..start + size].to_vec();
        start += size;
        let sum: u64 = group.iter().map(|&i| table.counts()[i]).sum();
        share.push(if total == 0 {
            0.0
        } else {
            sum as f64 / total as f64
        });
        groups.push(group);
    }
    DecileReport {
        groups,
        share,
        small_catalog: n < BUCKETS,
    }
}

//! First-order item transition counts used as a stand-in collaborative model.
//! Its per-item prediction scores are normalized and injected in place of
//! popularity.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{InteractionLog, ItemCatalog, SequenceSample};
use crate::pop::min_max;

pub const SCORER_MAGIC: &[u8; 4] = b"GRCO";

/// Recency weights for the last three history items, most recent first.
pub const RECENCY_WEIGHTS: [f64; 3] = [1.0, 0.5, 0.25];

#[derive(Debug, Clone, PartialEq)]
pub struct CoScorer {
    n_items: usize,
    /// prev -> [(next, count)] sorted by next.
    transitions: Vec<Vec<(u32, u32)>>,
    pub alpha: f64,
}

/// Counts adjacent `(prev, next)` pairs in each user's time-ordered training
/// items. Interactions with items outside the catalog break adjacency.
pub fn fit_cooccurrence(train: &InteractionLog, catalog: &ItemCatalog) -> CoScorer {
    let mut last: HashMap<&str, Option<usize>> = HashMap::new();
    let mut pairs: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for rec in train.iter() {
        let cur = catalog.index_of(&rec.item_id);
        let prev = last.insert(rec.user_id.as_str(), cur).flatten();
        if let (Some(p), Some(c)) = (prev, cur) {
            *pairs.entry((p as u32, c as u32)).or_default() += 1;
        }
    }
    CoScorer::from_pairs(
        catalog.len(),
        pairs.into_iter().map(|((p, n), c)| (p, n, c)),
    )
    .expect("indices come from the catalog")
}

impl CoScorer {
    pub fn from_pairs(
        n_items: usize,
        pairs: impl IntoIterator<Item = (u32, u32, u32)>,
    ) -> Result<Self> {
        let mut transitions = vec![Vec::new(); n_items];
        for (prev, next, count) in pairs {
            if prev as usize >= n_items || next as usize >= n_items {
                return Err(Error::Invalid(format!(
                    "transition ({prev}, {next}) outside a catalog of {n_items} items"
                )));
            }
            transitions[prev as usize].push((next, count));
        }
        for row in &mut transitions {
            row.sort_unstable();
            // merge duplicates from hand-built pair lists
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        Ok(CoScorer {
            n_items,
            transitions,
            alpha: 0.0,
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Invalid(format!(
                "smoothing alpha must be >= 0, got {alpha}"
            )));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn count(&self, prev: usize, next: usize) -> u32 {
        self.transitions[prev]
            .binary_search_by_key(&(next as u32), |&(n, _)| n)
            .map_or(0, |i| self.transitions[prev][i].1)
    }

    /// `(prev, next, count)` triples in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.transitions
            .iter()
            .enumerate()
            .flat_map(|(p, row)| row.iter().map(move |&(n, c)| (p as u32, n, c)))
    }

    /// Raw prediction score of every item for `sample`.
    pub fn score(&self, sample: &SequenceSample, catalog: &ItemCatalog) -> Vec<f64> {
        let recent: Vec<usize> = sample
            .real_history()
            .rev()
            .take(RECENCY_WEIGHTS.len())
            .filter_map(|id| catalog.index_of(id))
            .collect();
        if sample.real_history().next().is_none() {
            return vec![0.0; self.n_items];
        }
        let mut scores = vec![self.alpha; self.n_items];
        for (&h, weight) in recent.iter().zip(RECENCY_WEIGHTS) {
            for &(next, count) in &self.transitions[h] {
                scores[next as usize] += weight * f64::from(count);
            }
        }
        scores
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let pairs: Vec<_> = self.pairs().collect();
        let mut out = Vec::with_capacity(8 + pairs.len() * 12);
        out.extend_from_slice(SCORER_MAGIC);
        out.extend_from_slice(&(pairs.len() as u32).to_le_bytes());
        for (p, n, c) in pairs {
            out.extend_from_slice(&p.to_le_bytes());
            out.extend_from_slice(&n.to_le_bytes());
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], n_items: usize) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != SCORER_MAGIC {
            return Err(Error::Invalid("not a GRCO scorer file".into()));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let body = &bytes[8..];
        if body.len() != count * 12 {
            return Err(Error::Invalid(format!(
                "GRCO header declares {count} pairs but body holds {} bytes",
                body.len()
            )));
        }
        let word = |c: &[u8], k: usize| u32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap());
        Self::from_pairs(
            n_items,
            body.chunks_exact(12)
                .map(|c| (word(c, 0), word(c, 1), word(c, 2))),
        )
    }

    pub fn load(path: &Path, n_items: usize) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, n_items)
    }
}

/// Per-query min-max scaling into [0, 1], same degenerate rule as popularity.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    min_max(raw)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::ingest::{Interaction, PAD, WINDOW};

    fn catalog(ids: &[&str]) -> ItemCatalog {
        ItemCatalog::new(ids.iter().map(|i| (*i, *i))).unwrap()
    }

    fn log(events: &[(&str, &str)]) -> InteractionLog {
        InteractionLog::from_records(
            events
                .iter()
                .enumerate()
                .map(|(t, (u, i))| Interaction {
                    user_id: (*u).into(),
                    item_id: (*i).into(),
                    timestamp: t as i64,
                    domain_tag: None,
                })
                .collect(),
        )
    }

    fn sample(history: &[&str]) -> SequenceSample {
        let mut h = vec![PAD.to_owned(); WINDOW - history.len()];
        h.extend(history.iter().map(|s| (*s).to_owned()));
        SequenceSample {
            user_id: "u".into(),
            history: h,
            target: "z".into(),
            target_timestamp: 0,
            known_items: BTreeSet::new(),
        }
    }

    #[test]
    fn counts_adjacent_pairs() {
        let cat = catalog(&["a", "b", "c"]);
        let s = fit_cooccurrence(&log(&[("u", "a"), ("u", "b"), ("u", "c")]), &cat);
        assert_eq!(s.pairs().collect::<Vec<_>>(), vec![(0, 1, 1), (1, 2, 1)]);

        let s = fit_cooccurrence(
            &log(&[("u", "a"), ("v", "a"), ("u", "b"), ("v", "b")]),
            &cat,
        );
        assert_eq!(s.pairs().collect::<Vec<_>>(), vec![(0, 1, 2)]);

        let s = fit_cooccurrence(&log(&[("u", "a")]), &cat);
        assert_eq!(s.pairs().count(), 0);
    }

    #[test]
    fn scores_by_hand() {
        let cat = catalog(&["a", "b", "x"]);
        let s = CoScorer::from_pairs(3, [(0, 1, 2)]).unwrap();
        assert_eq!(s.score(&sample(&["a"]), &cat), vec![0.0, 2.0, 0.0]);
        assert_eq!(s.score(&sample(&[]), &cat), vec![0.0; 3]);

        let s = CoScorer::from_pairs(3, [(0, 1, 2), (2, 1, 1)]).unwrap();
        assert_eq!(s.score(&sample(&["x", "a"]), &cat), vec![0.0, 2.5, 0.0]);
    }

    #[test]
    fn only_last_three_items_count() {
        let cat = catalog(&["a", "b", "c", "d", "t"]);
        let s = CoScorer::from_pairs(5, [(0, 4, 8), (1, 4, 4), (2, 4, 2), (3, 4, 1)]).unwrap();
        // history a b c d: d weight 1, c 0.5, b 0.25, a ignored
        let scores = s.score(&sample(&["a", "b", "c", "d"]), &cat);
        assert_eq!(scores[4], 1.0 + 0.5 * 2.0 + 0.25 * 4.0);
    }

    #[test]
    fn smoothing_makes_scores_positive() {
        let cat = catalog(&["a", "b"]);
        let s = CoScorer::from_pairs(2, [])
            .unwrap()
            .with_alpha(0.1)
            .unwrap();
        assert!(s.score(&sample(&["a"]), &cat).iter().all(|&v| v > 0.0));
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_scores(&[0.0, 2.0, 4.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_scores(&[3.0, 3.0, 3.0]), vec![0.0; 3]);
        assert_eq!(normalize_scores(&[5.0]), vec![0.0]);
    }

    #[test]
    fn binary_roundtrip() {
        let s = CoScorer::from_pairs(4, [(3, 0, 7), (0, 1, 2), (0, 3, 1)]).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..4], b"GRCO");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(&bytes[8..20], &[0, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(CoScorer::from_bytes(&bytes, 4).unwrap(), s);
        assert!(CoScorer::from_bytes(&bytes, 3).is_err());
        assert!(CoScorer::from_bytes(&bytes[..bytes.len() - 1], 4).is_err());
    }
}

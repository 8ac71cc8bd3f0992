//! Okapi BM25 over catalog titles, the lexical alternative to embedding
//! grounding.

use std::collections::HashMap;

use crate::error::Result;
use crate::ground::{rank_by_keys, RankedList, Strategy};
use crate::ingest::ItemCatalog;
use crate::text::tokenize;

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Clone)]
pub struct Bm25Index {
    k1: f64,
    b: f64,
    term_freqs: Vec<HashMap<String, u32>>,
    doc_lens: Vec<usize>,
    avg_len: f64,
    doc_freq: HashMap<String, usize>,
}

impl Bm25Index {
    pub fn new(catalog: &ItemCatalog, k1: f64, b: f64) -> Self {
        let docs: Vec<Vec<String>> = catalog.titles().iter().map(|t| tokenize(t)).collect();
        Self::from_docs(&docs, k1, b)
    }

    pub fn from_docs(docs: &[Vec<String>], k1: f64, b: f64) -> Self {
        let mut term_freqs = Vec::with_capacity(docs.len());
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            let mut tf: HashMap<String, u32> = HashMap::new();
            for tok in doc {
                *tf.entry(tok.clone()).or_default() += 1;
            }
            for term in tf.keys() {
                *doc_freq.entry(term.clone()).or_default() += 1;
            }
            term_freqs.push(tf);
        }
        let doc_lens: Vec<usize> = docs.iter().map(Vec::len).collect();
        let total: usize = doc_lens.iter().sum();
        let avg_len = if docs.is_empty() {
            0.0
        } else {
            total as f64 / docs.len() as f64
        };
        Bm25Index {
            k1,
            b,
            term_freqs,
            doc_lens,
            avg_len,
            doc_freq,
        }
    }

    /// Non-negative variant: `ln(1 + (N - df + 0.5) / (df + 0.5))`.
    fn idf(&self, term: &str) -> f64 {
        let n = self.term_freqs.len() as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        ((n - df + 0.5) / (df + 0.5)).ln_1p()
    }

    /// Score of every document, in index order. Repeated query tokens count
    /// once per occurrence.
    pub fn scores(&self, query: &[String]) -> Vec<f64> {
        let idf: Vec<f64> = query.iter().map(|t| self.idf(t)).collect();
        self.term_freqs
            .iter()
            .zip(&self.doc_lens)
            .map(|(tf, &len)| {
                let norm = if self.avg_len > 0.0 {
                    len as f64 / self.avg_len
                } else {
                    0.0
                };
                query
                    .iter()
                    .zip(&idf)
                    .filter_map(|(term, &idf)| {
                        let f = f64::from(*tf.get(term)?);
                        Some(
                            idf * f * (self.k1 + 1.0)
                                / (f + self.k1 * (1.0 - self.b + self.b * norm)),
                        )
                    })
                    .sum()
            })
            .collect()
    }
}

/// Ranks items by descending BM25 score, ties and zero scores in index order.
pub fn bm25_rank(index: &Bm25Index, query: &[String], excluded: &[bool]) -> Result<RankedList> {
    if query.is_empty() {
        log::warn!("empty BM25 query; falling back to index order");
    }
    let scores = index.scores(query);
    if !query.is_empty() && scores.iter().all(|&s| s == 0.0) {
        log::warn!("BM25 query {:?} matches no title", query.join(" "));
    }
    let keys: Vec<f64> = scores.iter().map(|&s| 0.0 - s).collect();
    rank_by_keys(&keys, &scores, excluded, Strategy::Bm25)
}

/// Descending-score ranking keys for [`crate::ground::target_position`].
pub fn bm25_keys(index: &Bm25Index, query: &[String]) -> Vec<f64> {
    index.scores(query).into_iter().map(|s| 0.0 - s).collect()
}

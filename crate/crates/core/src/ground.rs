//! Grounding: ranks every catalog item against an oracle embedding by L2
//! distance, optionally reweighted by popularity or collaborative scores.
//!
//! For item `i` with raw distance `D_i`, the min-max normalized distance
//! `D^_i` is divided by `(1 + w_i)^gamma`, where `w_i` is the item's
//! normalized popularity or prediction score. Smaller adjusted distance
//! ranks higher; ties go to the lower canonical index.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::pop::min_max;

/// Above this exponent ranking keys are computed in log space, so the order
/// of items whose adjusted distances would underflow stays exact.
pub const LOG_SPACE_GAMMA: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Injection {
    None,
    #[serde(rename = "pop")]
    Popularity,
    #[serde(rename = "collab")]
    Collaborative,
}

impl fmt::Display for Injection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Injection::None => "none",
            Injection::Popularity => "pop",
            Injection::Collaborative => "collab",
        })
    }
}

impl FromStr for Injection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Injection::None),
            "pop" | "popularity" => Ok(Injection::Popularity),
            "collab" | "collaborative" => Ok(Injection::Collaborative),
            _ => Err(Error::Invalid(format!("unknown injection mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    L2,
    Bm25,
    MostPop,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::L2 => "l2",
            Strategy::Bm25 => "bm25",
            Strategy::MostPop => "most-pop",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Strategy::L2),
            "bm25" => Ok(Strategy::Bm25),
            "most-pop" => Ok(Strategy::MostPop),
            _ => Err(Error::Invalid(format!("unknown strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundingConfig {
    pub injection: Injection,
    pub gamma: f64,
    /// Scale item rows and the oracle to unit norm before measuring distance.
    pub normalize_embeddings: bool,
}

impl GroundingConfig {
    pub fn new(injection: Injection, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(GroundingConfig {
            injection,
            gamma,
            normalize_embeddings: false,
        })
    }

    /// The exponent actually applied; `none` behaves as gamma = 0.
    pub fn effective_gamma(&self) -> f64 {
        match self.injection {
            Injection::None => 0.0,
            _ => self.gamma,
        }
    }
}

impl Default for GroundingConfig {
    fn default() -> Self {
        GroundingConfig {
            injection: Injection::None,
            gamma: 0.0,
            normalize_embeddings: false,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

/// Euclidean distance from `oracle` to every row of `matrix`.
pub fn l2_distances(matrix: &EmbeddingMatrix, oracle: &[f32]) -> Result<Vec<f64>> {
    if oracle.len() != matrix.dim() {
        return Err(Error::DimMismatch {
            expected: matrix.dim(),
            actual: oracle.len(),
            context: "oracle embedding".into(),
        });
    }
    // f64 accumulation keeps |x| <= 1e3, dim <= 1e5 far from overflow
    Ok(matrix
        .rows()
        .map(|row| {
            row.iter()
                .zip(oracle)
                .map(|(&a, &b)| {
                    let d = f64::from(a) - f64::from(b);
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Min-max normalization; all-equal input maps to all zeros.
pub fn normalize_distances(raw: &[f64]) -> Vec<f64> {
    min_max(raw)
}

/// Reweighted distances plus the keys used to order them.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjusted {
    /// `D^_i / (1 + w_i)^gamma`.
    pub values: Vec<f64>,
    /// Equal to `values` for gamma <= [`LOG_SPACE_GAMMA`], otherwise
    /// `ln D^_i - gamma * ln(1 + w_i)`. Same order either way.
    pub keys: Vec<f64>,
}

impl Adjusted {
    /// Unweighted distances ranked as they are.
    pub fn plain(values: Vec<f64>) -> Self {
        Adjusted {
            keys: values.clone(),
            values,
        }
    }
}

/// Divides each normalized distance by `(1 + w_i)^gamma`.
pub fn inject(normalized: &[f64], weights: &[f64], gamma: f64) -> Result<Adjusted> {
    check_gamma(gamma)?;
    if weights.len() != normalized.len() {
        return Err(Error::DimMismatch {
            expected: normalized.len(),
            actual: weights.len(),
            context: "injection weights".into(),
        });
    }
    if let Some((index, &value)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(0.0..=1.0).contains(*w))
    {
        return Err(Error::WeightOutOfRange { index, value });
    }
    let values: Vec<f64> = normalized
        .iter()
        .zip(weights)
        .map(|(&d, &w)| d / (1.0 + w).powf(gamma))
        .collect();
    let keys = if gamma > LOG_SPACE_GAMMA {
        normalized
            .iter()
            .zip(weights)
            .map(|(&d, &w)| adjusted_key(d, w, gamma))
            .collect()
    } else {
        values.clone()
    };
    Ok(Adjusted { values, keys })
}

/// Ranking key of one item, identical to the entry [`inject`] produces.
/// Inputs are assumed validated.
#[inline]
pub fn adjusted_key(normalized: f64, weight: f64, gamma: f64) -> f64 {
    if gamma > LOG_SPACE_GAMMA {
        normalized.ln() - gamma * weight.ln_1p()
    } else {
        normalized / (1.0 + weight).powf(gamma)
    }
}

/// A full ranking of the non-excluded items, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub items: Vec<usize>,
    /// Adjusted distance (l2), BM25 score (bm25) or count (most-pop) per entry.
    pub scores: Vec<f64>,
    pub strategy: Strategy,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// 1-based position of `item`.
    pub fn position(&self, item: usize) -> Option<usize> {
        self.items.iter().position(|&i| i == item).map(|p| p + 1)
    }
}

/// Boolean exclusion mask from a list of item indices.
pub fn exclusion_mask(n_items: usize, excluded: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n_items];
    for &i in excluded {
        if i >= n_items {
            return Err(Error::Invalid(format!(
                "excluded index {i} outside 0..{n_items}"
            )));
        }
        mask[i] = true;
    }
    Ok(mask)
}

fn key_cmp(keys: &[f64], a: usize, b: usize) -> Ordering {
    keys[a].total_cmp(&keys[b]).then(a.cmp(&b))
}

/// Orders non-excluded items by ascending key, ties by ascending index.
/// `values` are reported alongside. Keys must be free of NaN and `-0.0`.
pub fn rank_by_keys(
    keys: &[f64],
    values: &[f64],
    excluded: &[bool],
    strategy: Strategy,
) -> Result<RankedList> {
    let mut items: Vec<usize> = (0..keys.len()).filter(|&i| !excluded[i]).collect();
    if items.is_empty() {
        return Err(Error::AllExcluded);
    }
    items.sort_unstable_by(|&a, &b| key_cmp(keys, a, b));
    let scores = items.iter().map(|&i| values[i]).collect();
    Ok(RankedList {
        items,
        scores,
        strategy,
    })
}

/// Ranks adjusted distances, skipping items flagged in `excluded`.
pub fn rank(adjusted: &Adjusted, excluded: &[bool]) -> Result<RankedList> {
    rank_by_keys(&adjusted.keys, &adjusted.values, excluded, Strategy::L2)
}

/// 1-based position `target` would take in [`rank_by_keys`], without sorting.
pub fn target_position(keys: &[f64], excluded: &[bool], target: usize) -> Result<usize> {
    if excluded[target] {
        return Err(Error::TargetExcluded(target));
    }
    let ahead = (0..keys.len())
        .filter(|&i| !excluded[i] && key_cmp(keys, i, target) == Ordering::Less)
        .count();
    Ok(ahead + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f32>>) -> EmbeddingMatrix {
        let dim = rows[0].len();
        EmbeddingMatrix::from_rows(dim, rows).unwrap()
    }

    #[test]
    fn three_four_five() {
        let d = l2_distances(&matrix(vec![vec![0.0, 0.0]]), &[3.0, 4.0]).unwrap();
        assert_eq!(d, vec![5.0]);
    }

    #[test]
    fn identical_vectors_have_zero_distance() {
        let d = l2_distances(&matrix(vec![vec![1.5, -2.0, 7.0]]), &[1.5, -2.0, 7.0]).unwrap();
        assert_eq!(d, vec![0.0]);
    }

    #[test]
    fn equidistant_rows_tie_on_index() {
        let m = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d = l2_distances(&m, &[1.0, 1.0]).unwrap();
        assert_eq!(d, vec![1.0, 1.0]);
        let r = rank(&Adjusted::plain(normalize_distances(&d)), &[false, false]).unwrap();
        assert_eq!(r.items, vec![0, 1]);
    }

    #[test]
    fn oracle_dimension_must_match() {
        let m = matrix(vec![vec![1.0, 0.0]]);
        assert!(matches!(
            l2_distances(&m, &[1.0]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn large_entries_do_not_overflow() {
        let dim = 100_000;
        let m = EmbeddingMatrix::from_rows(dim, vec![vec![1e3; dim]]).unwrap();
        let d = l2_distances(&m, &vec![-1e3; dim]).unwrap();
        let expected = 2e3 * (dim as f64).sqrt();
        assert!((d[0] - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn min_max_examples() {
        assert_eq!(normalize_distances(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_distances(&[3.0, 3.0]), vec![0.0, 0.0]);
        assert_eq!(normalize_distances(&[0.0, 1.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn injection_examples() {
        let d = [0.0, 0.5, 1.0];
        let w = [1.0, 0.3, 0.0];
        assert_eq!(inject(&d, &w, 0.0).unwrap().values, d.to_vec());
        assert_eq!(inject(&[0.5], &[1.0], 1.0).unwrap().values, vec![0.25]);
        for gamma in [0.5, 3.0, 80.0] {
            assert_eq!(inject(&[0.5], &[0.0], gamma).unwrap().values, vec![0.5]);
        }
    }

    #[test]
    fn injection_rejects_bad_inputs() {
        assert!(matches!(
            inject(&[0.1, 0.2], &[0.5, 1.5], 1.0),
            Err(Error::WeightOutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            inject(&[0.1], &[-0.1], 1.0),
            Err(Error::WeightOutOfRange { .. })
        ));
        assert!(matches!(
            inject(&[0.1], &[0.1], -1.0),
            Err(Error::InvalidGamma(_))
        ));
        assert!(matches!(
            inject(&[0.1], &[0.1], f64::NAN),
            Err(Error::InvalidGamma(_))
        ));
    }

    #[test]
    fn log_space_keys_keep_order_when_values_underflow() {
        let d = [1e-300, 2e-300, 0.5];
        let w = [0.0, 1.0, 1.0];
        let adj = inject(&d, &w, 100.0).unwrap();
        // 2e-300 / 2^100 is subnormal-or-zero territory, keys stay ordered
        let r = rank(&adj, &[false; 3]).unwrap();
        assert_eq!(r.items, vec![1, 0, 2]);
        assert_eq!(adj.keys[0], 1e-300f64.ln());
    }

    #[test]
    fn rank_examples() {
        let adj = Adjusted::plain(vec![0.2, 0.1, 0.3]);
        assert_eq!(rank(&adj, &[false; 3]).unwrap().items, vec![1, 0, 2]);
        let tie = Adjusted::plain(vec![0.1, 0.1]);
        assert_eq!(rank(&tie, &[false; 2]).unwrap().items, vec![0, 1]);
        let r = rank(&adj, &[false, true, false]).unwrap();
        assert_eq!(r.items, vec![0, 2]);
        assert_eq!(r.scores, vec![0.2, 0.3]);
        assert!(matches!(rank(&adj, &[true; 3]), Err(Error::AllExcluded)));
    }

    #[test]
    fn target_position_matches_full_rank() {
        let keys = vec![0.3, 0.1, 0.3, 0.0, 0.2];
        let excluded = vec![false, false, false, true, false];
        let r = rank_by_keys(&keys, &keys, &excluded, Strategy::L2).unwrap();
        for &t in &r.items {
            assert_eq!(
                target_position(&keys, &excluded, t).unwrap(),
                r.position(t).unwrap()
            );
        }
        assert!(matches!(
            target_position(&keys, &excluded, 3),
            Err(Error::TargetExcluded(3))
        ));
    }

    #[test]
    fn exclusion_mask_bounds() {
        assert_eq!(exclusion_mask(3, &[2]).unwrap(), vec![false, false, true]);
        assert!(exclusion_mask(3, &[3]).is_err());
    }

    #[test]
    fn none_injection_ignores_gamma() {
        let cfg = GroundingConfig::new(Injection::None, 5.0).unwrap();
        assert_eq!(cfg.effective_gamma(), 0.0);
        assert!(GroundingConfig::new(Injection::Popularity, -0.5).is_err());
    }
}

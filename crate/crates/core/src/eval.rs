//! All-ranking evaluation: every catalog item the user has not interacted
//! with is a candidate. Reports HR@K and NDCG@K with a single relevant item.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use crate::bm25::{bm25_keys, Bm25Index};
use crate::collab::{normalize_scores, CoScorer};
use crate::embed::{normalize_in_place, EmbeddingMatrix, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::generate::Generator;
use crate::ground::{
    adjusted_key, inject, l2_distances, normalize_distances, rank, rank_by_keys, target_position,
    GroundingConfig, Injection, RankedList, Strategy,
};
use crate::ingest::{ItemCatalog, SequenceSample};
use crate::pop::PopularityTable;

pub const DEFAULT_KS: [usize; 5] = [1, 3, 5, 10, 20];

/// 1 when the 1-based `rank` is within the top `k`.
pub fn hr_from_rank(rank: usize, k: usize) -> f64 {
    if rank >= 1 && rank <= k {
        1.0
    } else {
        0.0
    }
}

/// `1 / log2(rank + 1)` within the top `k`, else 0. IDCG is 1.
pub fn ndcg_from_rank(rank: usize, k: usize) -> f64 {
    if rank >= 1 && rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

pub fn hr_at_k(ranked: &RankedList, target: usize, k: usize) -> Result<f64> {
    let rank = ranked
        .position(target)
        .ok_or(Error::TargetExcluded(target))?;
    Ok(hr_from_rank(rank, k))
}

pub fn ndcg_at_k(ranked: &RankedList, target: usize, k: usize) -> Result<f64> {
    let rank = ranked
        .position(target)
        .ok_or(Error::TargetExcluded(target))?;
    Ok(ndcg_from_rank(rank, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Hr,
    Ndcg,
}

/// A metric at a cutoff, written `hr@10` or `ndcg@20`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Metric {
    pub kind: MetricKind,
    pub k: usize,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self.kind {
            MetricKind::Hr => "hr",
            MetricKind::Ndcg => "ndcg",
        };
        write!(f, "{name}@{}", self.k)
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("cannot parse metric {s:?}; expected e.g. ndcg@20"));
        let (name, k) = s.split_once('@').ok_or_else(bad)?;
        let kind = match name.to_ascii_lowercase().as_str() {
            "hr" => MetricKind::Hr,
            "ndcg" | "ng" => MetricKind::Ndcg,
            _ => return Err(bad()),
        };
        let k = k.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        Ok(Metric { kind, k })
    }
}

/// Identifies the configuration and the sample set behind a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub generator: String,
    pub strategy: String,
    pub injection: String,
    pub gamma: f64,
    pub seed: u64,
    /// Order-independent digest of the evaluated samples.
    pub samples: String,
    pub n_items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fingerprint: Fingerprint,
    pub ks: Vec<usize>,
    pub hr: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub n_samples: usize,
    /// Samples whose target the user had already consumed.
    pub n_skipped_repeat: usize,
    /// Samples whose target is missing from the catalog.
    pub n_skipped_unknown: usize,
}

impl MetricsReport {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        let pos = self.ks.iter().position(|&k| k == metric.k)?;
        Some(match metric.kind {
            MetricKind::Hr => self.hr[pos],
            MetricKind::Ndcg => self.ndcg[pos],
        })
    }

    /// All metrics in report order: every HR, then every NDCG.
    pub fn metrics(&self) -> Vec<(Metric, f64)> {
        let hr = self.ks.iter().zip(&self.hr).map(|(&k, &v)| {
            (
                Metric {
                    kind: MetricKind::Hr,
                    k,
                },
                v,
            )
        });
        let ndcg = self.ks.iter().zip(&self.ndcg).map(|(&k, &v)| {
            (
                Metric {
                    kind: MetricKind::Ndcg,
                    k,
                },
                v,
            )
        });
        hr.chain(ndcg).collect()
    }

    pub fn to_text(&self) -> String {
        let fp = &self.fingerprint;
        let mut out = String::new();
        for (key, value) in [
            ("generator", fp.generator.clone()),
            ("strategy", fp.strategy.clone()),
            ("injection", fp.injection.clone()),
            ("gamma", fp.gamma.to_string()),
            ("seed", fp.seed.to_string()),
            ("samples", fp.samples.clone()),
            ("n_items", fp.n_items.to_string()),
            ("n_samples", self.n_samples.to_string()),
            ("n_skipped_repeat", self.n_skipped_repeat.to_string()),
            ("n_skipped_unknown", self.n_skipped_unknown.to_string()),
        ] {
            let _ = writeln!(out, "# fingerprint: {key}={value}");
        }
        for (metric, value) in self.metrics() {
            let _ = writeln!(out, "{metric}\t{value}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes") + "\n"
    }

    /// Parses either the line format or the JSON form.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text)
                .map_err(|e| Error::Invalid(format!("report JSON: {e}")));
        }
        let mut header: BTreeMap<String, String> = BTreeMap::new();
        let mut hr: BTreeMap<usize, f64> = BTreeMap::new();
        let mut ndcg: BTreeMap<usize, f64> = BTreeMap::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# fingerprint:") {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    header.insert(k.to_owned(), v.to_owned());
                }
                continue;
            }
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, value) = line
                .split_once('\t')
                .ok_or_else(|| Error::Invalid(format!("bad report line {line:?}")))?;
            let metric: Metric = name.parse()?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("bad metric value in {line:?}")))?;
            match metric.kind {
                MetricKind::Hr => hr.insert(metric.k, value),
                MetricKind::Ndcg => ndcg.insert(metric.k, value),
            };
        }
        if hr.keys().ne(ndcg.keys()) {
            return Err(Error::Invalid(
                "report has HR and NDCG at different cutoffs".into(),
            ));
        }
        let get = |k: &str| header.get(k).cloned().unwrap_or_default();
        let num = |k: &str| -> Result<u64> {
            let v = get(k);
            if v.is_empty() {
                return Ok(0);
            }
            v.parse()
                .map_err(|_| Error::Invalid(format!("bad header value {k}={v}")))
        };
        Ok(MetricsReport {
            fingerprint: Fingerprint {
                generator: get("generator"),
                strategy: get("strategy"),
                injection: get("injection"),
                gamma: get("gamma").parse().unwrap_or(0.0),
                seed: num("seed")?,
                samples: get("samples"),
                n_items: num("n_items")? as usize,
            },
            ks: hr.keys().copied().collect(),
            hr: hr.values().copied().collect(),
            ndcg: ndcg.values().copied().collect(),
            n_samples: num("n_samples")? as usize,
            n_skipped_repeat: num("n_skipped_repeat")? as usize,
            n_skipped_unknown: num("n_skipped_unknown")? as usize,
        })
    }
}

/// Digest of a sample set that ignores sample order.
pub fn samples_digest(samples: &[SequenceSample]) -> String {
    let mut hashes: Vec<u64> = samples
        .iter()
        .map(|s| {
            xxh64(
                serde_json::to_string(s)
                    .expect("sample serializes")
                    .as_bytes(),
                0,
            )
        })
        .collect();
    hashes.sort_unstable();
    let bytes: Vec<u8> = hashes.iter().flat_map(|h| h.to_le_bytes()).collect();
    format!("{:016x}", xxh64(&bytes, 0))
}

/// Everything needed to turn a sample into a ranking.
pub struct Pipeline<'a> {
    pub catalog: &'a ItemCatalog,
    pub strategy: Strategy,
    pub grounding: GroundingConfig,
    /// Item embeddings (l2).
    pub matrix: Option<&'a EmbeddingMatrix>,
    /// Text generator (l2, bm25).
    pub generator: Option<&'a dyn Generator>,
    /// Embeds generated text into the item space (l2).
    pub provider: Option<&'a dyn EmbeddingProvider>,
    /// Required for popularity injection and most-pop.
    pub popularity: Option<&'a PopularityTable>,
    /// Required for collaborative injection.
    pub scorer: Option<&'a CoScorer>,
    /// Required for bm25.
    pub bm25: Option<&'a Bm25Index>,
    /// Recorded in the fingerprint.
    pub seed: u64,
}

impl<'a> Pipeline<'a> {
    /// An l2 pipeline without injection.
    pub fn l2(
        catalog: &'a ItemCatalog,
        matrix: &'a EmbeddingMatrix,
        generator: &'a dyn Generator,
        provider: &'a dyn EmbeddingProvider,
    ) -> Self {
        Pipeline {
            catalog,
            strategy: Strategy::L2,
            grounding: GroundingConfig::default(),
            matrix: Some(matrix),
            generator: Some(generator),
            provider: Some(provider),
            popularity: None,
            scorer: None,
            bm25: None,
            seed: 0,
        }
    }

    pub fn most_pop(catalog: &'a ItemCatalog, popularity: &'a PopularityTable) -> Self {
        Pipeline {
            catalog,
            strategy: Strategy::MostPop,
            grounding: GroundingConfig::default(),
            matrix: None,
            generator: None,
            provider: None,
            popularity: Some(popularity),
            scorer: None,
            bm25: None,
            seed: 0,
        }
    }

    fn missing(what: &str, strategy: Strategy) -> Error {
        Error::Invalid(format!("{strategy} pipeline needs {what}"))
    }

    fn validate(&self) -> Result<()> {
        let n = self.catalog.len();
        match self.strategy {
            Strategy::L2 => {
                let m = self
                    .matrix
                    .ok_or_else(|| Self::missing("an embedding matrix", self.strategy))?;
                let p = self
                    .provider
                    .ok_or_else(|| Self::missing("an embedding provider", self.strategy))?;
                self.generator
                    .ok_or_else(|| Self::missing("a generator", self.strategy))?;
                if m.len() != n {
                    return Err(Error::DimMismatch {
                        expected: n,
                        actual: m.len(),
                        context: "embedding rows vs catalog size".into(),
                    });
                }
                if p.dim() != m.dim() {
                    return Err(Error::DimMismatch {
                        expected: m.dim(),
                        actual: p.dim(),
                        context: "provider dimension vs item embeddings".into(),
                    });
                }
                match self.grounding.injection {
                    Injection::None => {}
                    Injection::Popularity => {
                        let t = self
                            .popularity
                            .ok_or_else(|| Self::missing("a popularity table", self.strategy))?;
                        if t.len() != n {
                            return Err(Error::Invalid(
                                "popularity table does not match the catalog".into(),
                            ));
                        }
                    }
                    Injection::Collaborative => {
                        let s = self.scorer.ok_or_else(|| {
                            Self::missing("a co-occurrence scorer", self.strategy)
                        })?;
                        if s.n_items() != n {
                            return Err(Error::Invalid("scorer does not match the catalog".into()));
                        }
                    }
                }
            }
            Strategy::Bm25 => {
                self.bm25
                    .ok_or_else(|| Self::missing("a BM25 index", self.strategy))?;
                self.generator
                    .ok_or_else(|| Self::missing("a generator", self.strategy))?;
                if self.grounding.injection != Injection::None {
                    return Err(Error::Invalid(
                        "injection applies to l2 grounding only".into(),
                    ));
                }
            }
            Strategy::MostPop => {
                self.popularity
                    .ok_or_else(|| Self::missing("a popularity table", self.strategy))?;
            }
        }
        Ok(())
    }

    fn generator_name(&self) -> String {
        match (self.strategy, self.generator) {
            (Strategy::MostPop, _) => "none".into(),
            (_, Some(g)) => g.name().to_owned(),
            (_, None) => "none".into(),
        }
    }

    pub fn fingerprint(&self, samples: &[SequenceSample]) -> Fingerprint {
        Fingerprint {
            generator: self.generator_name(),
            strategy: self.strategy.to_string(),
            injection: self.grounding.injection.to_string(),
            gamma: self.grounding.effective_gamma(),
            seed: self.seed,
            samples: samples_digest(samples),
            n_items: self.catalog.len(),
        }
    }
}

/// Per-sample state that does not depend on gamma.
pub enum Prepared {
    SkipRepeat,
    SkipUnknown,
    /// Ranking fixed up front (bm25, most-pop).
    Fixed {
        keys: Vec<f64>,
        values: Vec<f64>,
        excluded: Vec<bool>,
        target: usize,
        strategy: Strategy,
    },
    /// Normalized distances and injection weights; gamma applied later.
    Grounded {
        normalized: Vec<f64>,
        weights: Option<Vec<f64>>,
        excluded: Vec<bool>,
        target: usize,
    },
}

impl Prepared {
    /// 1-based target position at `gamma`, or `None` for skipped samples.
    pub fn position(&self, gamma: f64) -> Option<usize> {
        match self {
            Prepared::SkipRepeat | Prepared::SkipUnknown => None,
            Prepared::Fixed {
                keys,
                excluded,
                target,
                ..
            } => Some(target_position(keys, excluded, *target).expect("target is never excluded")),
            Prepared::Grounded {
                normalized,
                weights,
                excluded,
                target,
            } => {
                let key = |i: usize| {
                    let w = weights.as_ref().map_or(0.0, |w| w[i]);
                    adjusted_key(normalized[i], w, gamma)
                };
                let t = *target;
                let kt = key(t);
                let ahead = (0..normalized.len())
                    .filter(|&i| !excluded[i])
                    .filter(|&i| key(i).total_cmp(&kt).then(i.cmp(&t)).is_lt())
                    .count();
                Some(ahead + 1)
            }
        }
    }

    /// Full ranking at `gamma`.
    pub fn ranking(&self, gamma: f64) -> Result<Option<RankedList>> {
        match self {
            Prepared::SkipRepeat | Prepared::SkipUnknown => Ok(None),
            Prepared::Fixed {
                keys,
                values,
                excluded,
                strategy,
                ..
            } => rank_by_keys(keys, values, excluded, *strategy).map(Some),
            Prepared::Grounded {
                normalized,
                weights,
                excluded,
                ..
            } => {
                let zeros;
                let w = match weights {
                    Some(w) => w,
                    None => {
                        zeros = vec![0.0; normalized.len()];
                        &zeros
                    }
                };
                rank(&inject(normalized, w, gamma)?, excluded).map(Some)
            }
        }
    }
}

struct Prepper<'p, 'a> {
    pipeline: &'p Pipeline<'a>,
    matrix: Option<Cow<'p, EmbeddingMatrix>>,
    pop_keys: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'p, 'a> Prepper<'p, 'a> {
    fn new(pipeline: &'p Pipeline<'a>) -> Result<Self> {
        pipeline.validate()?;
        let matrix = pipeline.matrix.map(|m| {
            if pipeline.grounding.normalize_embeddings {
                Cow::Owned(m.normalized())
            } else {
                Cow::Borrowed(m)
            }
        });
        let pop_keys = match pipeline.strategy {
            Strategy::MostPop => {
                let t = pipeline.popularity.expect("validated");
                let values: Vec<f64> = t.counts().iter().map(|&c| c as f64).collect();
                let keys = values.iter().map(|&c| 0.0 - c).collect();
                Some((keys, values))
            }
            _ => None,
        };
        Ok(Prepper {
            pipeline,
            matrix,
            pop_keys,
        })
    }

    fn prepare(&self, sample: &SequenceSample) -> Result<Prepared> {
        let p = self.pipeline;
        let Some(target) = p.catalog.index_of(&sample.target) else {
            return Ok(Prepared::SkipUnknown);
        };
        if sample.known_items.contains(&sample.target) {
            return Ok(Prepared::SkipRepeat);
        }
        let mut excluded = vec![false; p.catalog.len()];
        for id in &sample.known_items {
            if let Some(i) = p.catalog.index_of(id) {
                excluded[i] = true;
            }
        }
        match p.strategy {
            Strategy::MostPop => {
                let (keys, values) = self.pop_keys.clone().expect("built for most-pop");
                Ok(Prepared::Fixed {
                    keys,
                    values,
                    excluded,
                    target,
                    strategy: Strategy::MostPop,
                })
            }
            Strategy::Bm25 => {
                let text = p.generator.expect("validated").generate(sample)?;
                let index = p.bm25.expect("validated");
                let keys = bm25_keys(index, &text.tokens);
                let values = keys.iter().map(|&k| 0.0 - k).collect();
                Ok(Prepared::Fixed {
                    keys,
                    values,
                    excluded,
                    target,
                    strategy: Strategy::Bm25,
                })
            }
            Strategy::L2 => {
                let text = p.generator.expect("validated").generate(sample)?;
                let mut oracle = p.provider.expect("validated").embed(&text.tokens)?;
                if p.grounding.normalize_embeddings {
                    normalize_in_place(&mut oracle);
                }
                let matrix = self.matrix.as_deref().expect("validated");
                let normalized = normalize_distances(&l2_distances(matrix, &oracle)?);
                let weights = match p.grounding.injection {
                    Injection::None => None,
                    Injection::Popularity => {
                        Some(p.popularity.expect("validated").normalized().to_vec())
                    }
                    Injection::Collaborative => {
                        let raw = p.scorer.expect("validated").score(sample, p.catalog);
                        Some(normalize_scores(&raw))
                    }
                };
                Ok(Prepared::Grounded {
                    normalized,
                    weights,
                    excluded,
                    target,
                })
            }
        }
    }
}

/// Prepares every sample in parallel; output order follows `samples`.
pub fn prepare_all(samples: &[SequenceSample], pipeline: &Pipeline) -> Result<Vec<Prepared>> {
    let prepper = Prepper::new(pipeline)?;
    samples.par_iter().map(|s| prepper.prepare(s)).collect()
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(format!(
            "cutoffs must be positive and increasing, got {ks:?}"
        )));
    }
    Ok(())
}

/// Averages HR and NDCG over ranked samples. Summation follows slice order,
/// so the result does not depend on how positions were computed.
pub fn aggregate(positions: &[Option<usize>], ks: &[usize]) -> (Vec<f64>, Vec<f64>, usize) {
    let ranked: Vec<usize> = positions.iter().flatten().copied().collect();
    let n = ranked.len();
    let mean = |f: fn(usize, usize) -> f64, k: usize| {
        if n == 0 {
            0.0
        } else {
            ranked.iter().map(|&r| f(r, k)).sum::<f64>() / n as f64
        }
    };
    let hr = ks.iter().map(|&k| mean(hr_from_rank, k)).collect();
    let ndcg = ks.iter().map(|&k| mean(ndcg_from_rank, k)).collect();
    (hr, ndcg, n)
}

fn report_from(
    prepared: &[Prepared],
    positions: &[Option<usize>],
    ks: &[usize],
    fingerprint: Fingerprint,
) -> MetricsReport {
    let (hr, ndcg, n_samples) = aggregate(positions, ks);
    let n_skipped_repeat = prepared
        .iter()
        .filter(|p| matches!(p, Prepared::SkipRepeat))
        .count();
    let n_skipped_unknown = prepared
        .iter()
        .filter(|p| matches!(p, Prepared::SkipUnknown))
        .count();
    if n_skipped_repeat + n_skipped_unknown > 0 {
        log::warn!(
            "skipped {n_skipped_repeat} repeat-consumption and {n_skipped_unknown} unknown-target samples"
        );
    }
    MetricsReport {
        fingerprint,
        ks: ks.to_vec(),
        hr,
        ndcg,
        n_samples,
        n_skipped_repeat,
        n_skipped_unknown,
    }
}

/// One ranked list per sample, truncated to `top_k`; `None` for skipped samples.
pub type RankDump = Vec<Option<RankedList>>;

pub fn evaluate(
    samples: &[SequenceSample],
    pipeline: &Pipeline,
    ks: &[usize],
) -> Result<MetricsReport> {
    evaluate_with_ranks(samples, pipeline, ks, None).map(|(r, _)| r)
}

pub fn evaluate_with_ranks(
    samples: &[SequenceSample],
    pipeline: &Pipeline,
    ks: &[usize],
    dump_top_k: Option<usize>,
) -> Result<(MetricsReport, RankDump)> {
    check_ks(ks)?;
    let gamma = pipeline.grounding.effective_gamma();
    let prepared = prepare_all(samples, pipeline)?;
    let positions: Vec<Option<usize>> = prepared.par_iter().map(|p| p.position(gamma)).collect();
    let dump = match dump_top_k {
        None => Vec::new(),
        Some(k) => prepared
            .par_iter()
            .map(|p| {
                p.ranking(gamma).map(|r| {
                    r.map(|mut r| {
                        r.items.truncate(k);
                        r.scores.truncate(k);
                        r
                    })
                })
            })
            .collect::<Result<_>>()?,
    };
    let report = report_from(&prepared, &positions, ks, pipeline.fingerprint(samples));
    Ok((report, dump))
}

/// Ranks items by training popularity for every sample.
pub fn most_pop_baseline(
    table: &PopularityTable,
    catalog: &ItemCatalog,
    samples: &[SequenceSample],
    ks: &[usize],
) -> Result<MetricsReport> {
    evaluate(samples, &Pipeline::most_pop(catalog, table), ks)
}

/// Relative improvement of a combined model over the better of its parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Improvement {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    pub combined: f64,
    /// `None` when both parts score zero.
    pub value: Option<f64>,
}

fn check_comparable(reports: &[&MetricsReport], force: bool) -> Result<()> {
    let first = reports[0];
    for r in &reports[1..] {
        if r.ks != first.ks {
            return Err(Error::ReportMismatch(format!(
                "cutoffs {:?} vs {:?}",
                first.ks, r.ks
            )));
        }
        if r.fingerprint.samples != first.fingerprint.samples {
            if force {
                log::warn!("comparing reports over different sample sets");
            } else {
                return Err(Error::ReportMismatch(format!(
                    "sample sets differ ({} vs {})",
                    first.fingerprint.samples, r.fingerprint.samples
                )));
            }
        }
    }
    Ok(())
}

pub fn improve2lv(
    a: &MetricsReport,
    b: &MetricsReport,
    combined: &MetricsReport,
    force: bool,
) -> Result<Vec<Improvement>> {
    check_comparable(&[a, b, combined], force)?;
    let out = a
        .metrics()
        .into_iter()
        .zip(b.metrics())
        .zip(combined.metrics())
        .map(|(((m, va), (_, vb)), (_, vc))| {
            let larger = va.max(vb);
            let value = if larger > 0.0 {
                Some((vc - larger) / larger)
            } else {
                log::warn!("{m}: both component models score 0; improvement undefined");
                None
            };
            Improvement {
                metric: m.to_string(),
                a: va,
                b: vb,
                combined: vc,
                value,
            }
        })
        .collect();
    Ok(out)
}

/// Side-by-side metrics; deltas are relative to the first report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub values: Vec<f64>,
    pub deltas: Vec<f64>,
}

pub fn compare(reports: &[MetricsReport], force: bool) -> Result<Vec<ComparisonRow>> {
    if reports.len() < 2 {
        return Err(Error::Invalid("compare needs at least two reports".into()));
    }
    let refs: Vec<&MetricsReport> = reports.iter().collect();
    check_comparable(&refs, force)?;
    let per_report: Vec<Vec<(Metric, f64)>> = reports.iter().map(MetricsReport::metrics).collect();
    Ok((0..per_report[0].len())
        .map(|j| {
            let values: Vec<f64> = per_report.iter().map(|m| m[j].1).collect();
            let deltas = values[1..].iter().map(|v| v - values[0]).collect();
            ComparisonRow {
                metric: per_report[0][j].0.to_string(),
                values,
                deltas,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::embed::{embed_catalog, HashEmbedder};
    use crate::generate::OracleEcho;
    use crate::ingest::{PAD, WINDOW};

    fn list(items: Vec<usize>) -> RankedList {
        let scores = vec![0.0; items.len()];
        RankedList {
            items,
            scores,
            strategy: Strategy::L2,
        }
    }

    fn sample(target: &str, known: &[&str]) -> SequenceSample {
        SequenceSample {
            user_id: "u".into(),
            history: vec![PAD.to_owned(); WINDOW],
            target: target.into(),
            target_timestamp: 0,
            known_items: known
                .iter()
                .map(|s| (*s).to_owned())
                .collect::<BTreeSet<_>>(),
        }
    }

    fn report(ks: Vec<usize>, hr: Vec<f64>, ndcg: Vec<f64>, samples: &str) -> MetricsReport {
        MetricsReport {
            fingerprint: Fingerprint {
                generator: "g".into(),
                strategy: "l2".into(),
                injection: "none".into(),
                gamma: 0.0,
                seed: 0,
                samples: samples.into(),
                n_items: 3,
            },
            ks,
            hr,
            ndcg,
            n_samples: 1,
            n_skipped_repeat: 0,
            n_skipped_unknown: 0,
        }
    }

    #[test]
    fn hit_ratio_examples() {
        let r = list((0..10).collect());
        assert_eq!(hr_at_k(&r, 0, 1).unwrap(), 1.0);
        assert_eq!(hr_at_k(&r, 5, 5).unwrap(), 0.0);
        assert_eq!(hr_at_k(&r, 4, 5).unwrap(), 1.0);
        let short = list(vec![0, 2]);
        assert!(matches!(
            hr_at_k(&short, 1, 5),
            Err(Error::TargetExcluded(1))
        ));
    }

    #[test]
    fn ndcg_examples() {
        for k in [1, 3, 20] {
            assert_eq!(ndcg_from_rank(1, k), 1.0);
        }
        assert_eq!(ndcg_from_rank(3, 5), 0.5);
        assert_eq!(ndcg_from_rank(7, 5), 0.0);
        let r = list(vec![4, 1, 9]);
        assert_eq!(ndcg_at_k(&r, 9, 5).unwrap(), 0.5);
    }

    #[test]
    fn single_sample_at_rank_three() {
        let (hr, ndcg, n) = aggregate(&[Some(3)], &[1, 5]);
        assert_eq!(n, 1);
        assert_eq!(hr, vec![0.0, 1.0]);
        assert_eq!(ndcg, vec![0.0, 0.5]);
    }

    #[test]
    fn oracle_echo_hits_first() {
        let cat = ItemCatalog::new([
            ("a", "Alpha Centauri"),
            ("b", "Beta Blocker"),
            ("c", "Gamma Ray Burst"),
        ])
        .unwrap();
        let provider = HashEmbedder::new(64, 3).unwrap();
        let m = embed_catalog(&cat, &provider).unwrap();
        let gen = OracleEcho::new(&cat);
        let p = Pipeline::l2(&cat, &m, &gen, &provider);
        let samples = vec![sample("a", &[]), sample("b", &["a"]), sample("c", &[])];
        let r = evaluate(&samples, &p, &DEFAULT_KS).unwrap();
        assert_eq!(r.hr[0], 1.0);
        assert_eq!(r.ndcg[0], 1.0);
        assert_eq!(r.n_samples, 3);
    }

    #[test]
    fn repeat_and_unknown_targets_are_skipped() {
        let cat = ItemCatalog::new([("a", "A"), ("b", "B")]).unwrap();
        let t = PopularityTable::from_counts(vec![1, 5]).unwrap();
        let samples = vec![sample("a", &["a"]), sample("zz", &[]), sample("a", &["b"])];
        let r = most_pop_baseline(&t, &cat, &samples, &[1]).unwrap();
        assert_eq!(
            (r.n_samples, r.n_skipped_repeat, r.n_skipped_unknown),
            (1, 1, 1)
        );
        assert_eq!(r.hr, vec![1.0]);
    }

    #[test]
    fn most_pop_examples() {
        let ids: Vec<String> = (0..20).map(|i| format!("i{i:02}")).collect();
        let cat = ItemCatalog::new(ids.iter().map(|i| (i.clone(), i.clone()))).unwrap();
        let t = PopularityTable::from_counts((1..=20).rev().collect()).unwrap();
        // target is the most popular unseen item
        let r = most_pop_baseline(&t, &cat, &[sample("i01", &["i00"])], &[1]).unwrap();
        assert_eq!(r.hr, vec![1.0]);
        // least popular of 20
        let r = most_pop_baseline(&t, &cat, &[sample("i19", &[])], &[10]).unwrap();
        assert_eq!(r.hr, vec![0.0]);
    }

    #[test]
    fn most_pop_uniform_fixture_by_hand() {
        // uniform popularity: ranking is index order minus exclusions
        let cat =
            ItemCatalog::new([("a", "A"), ("b", "B"), ("c", "C"), ("d", "D"), ("e", "E")]).unwrap();
        let t = PopularityTable::from_counts(vec![2; 5]).unwrap();
        let samples = vec![
            sample("a", &[]),         // rank 1
            sample("c", &["a"]),      // b, c -> rank 2
            sample("e", &["b", "d"]), // a, c, e -> rank 3
            sample("d", &[]),         // rank 4
        ];
        let r = most_pop_baseline(&t, &cat, &samples, &[1, 3]).unwrap();
        assert_eq!(r.hr, vec![0.25, 0.75]);
        let ndcg3 = (1.0 + 1.0 / 3f64.log2() + 0.5) / 4.0;
        assert!((r.ndcg[1] - ndcg3).abs() < 1e-15);
        assert_eq!(r.ndcg[0], 0.25);
    }

    #[test]
    fn improve2lv_examples() {
        let a = report(vec![10], vec![0.02], vec![0.0], "s");
        let b = report(vec![10], vec![0.03], vec![0.0], "s");
        let c = report(vec![10], vec![0.036], vec![0.0], "s");
        let imp = improve2lv(&a, &b, &c, false).unwrap();
        assert_eq!(imp[0].metric, "hr@10");
        assert!((imp[0].value.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(imp[1].value, None);
        let same = improve2lv(&a, &b, &b, false).unwrap();
        assert_eq!(same[0].value, Some(0.0));
    }

    #[test]
    fn improve2lv_rejects_mismatch() {
        let a = report(vec![10], vec![0.02], vec![0.0], "s");
        let b = report(vec![5], vec![0.03], vec![0.0], "s");
        assert!(matches!(
            improve2lv(&a, &b, &a, false),
            Err(Error::ReportMismatch(_))
        ));
        let other = report(vec![10], vec![0.02], vec![0.0], "t");
        assert!(improve2lv(&a, &other, &a, false).is_err());
        assert!(improve2lv(&a, &other, &a, true).is_ok());
    }

    #[test]
    fn report_text_and_json_roundtrip() {
        let r = report(
            vec![1, 20],
            vec![0.125, 0.75],
            vec![0.125, 0.3333333333333333],
            "abc",
        );
        let text = r.to_text();
        assert!(text.contains("# fingerprint: samples=abc\n"));
        assert!(text.contains("ndcg@20\t0.3333333333333333\n"));
        assert_eq!(MetricsReport::parse(&text).unwrap(), r);
        assert_eq!(MetricsReport::parse(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn compare_identical_reports() {
        let r = report(vec![1], vec![0.5], vec![0.5], "s");
        let rows = compare(&[r.clone(), r], false).unwrap();
        assert!(rows.iter().all(|row| row.deltas == vec![0.0]));
    }

    #[test]
    fn metric_names_parse() {
        let m: Metric = "ndcg@20".parse().unwrap();
        assert_eq!(
            m,
            Metric {
                kind: MetricKind::Ndcg,
                k: 20
            }
        );
        assert_eq!(m.to_string(), "ndcg@20");
        assert!("mrr@3".parse::<Metric>().is_err());
        assert!("hr@0".parse::<Metric>().is_err());
    }

    #[test]
    fn digest_ignores_order() {
        let a = vec![sample("a", &[]), sample("b", &[])];
        let b = vec![sample("b", &[]), sample("a", &[])];
        assert_eq!(samples_digest(&a), samples_digest(&b));
        assert_ne!(samples_digest(&a), samples_digest(&a[..1]));
    }
}

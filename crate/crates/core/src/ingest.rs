//! Interaction logs, item catalogs, the temporal 10-period split and
//! sliding-window next-item samples.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved history filler. No catalog or log item may use this id.
pub const PAD: &str = "<PAD>";

/// Number of history positions in every sample.
pub const WINDOW: usize = 10;

/// Number of temporal periods the log is cut into.
pub const PERIODS: usize = 10;

/// Name of the generator behind [`sample_eval`], recorded in run manifests.
pub const SAMPLER_NAME: &str = "chacha8-seed_from_u64/index-sample";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<String>,
}

/// Interactions in non-decreasing timestamp order, ties kept in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionLog {
    records: Vec<Interaction>,
}

impl InteractionLog {
    /// Builds a log from records in input order.
    pub fn from_records(mut records: Vec<Interaction>) -> Self {
        // stable: equal timestamps keep input position order
        records.sort_by_key(|r| r.timestamp);
        InteractionLog { records }
    }

    pub fn records(&self) -> &[Interaction] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interaction> {
        self.records.iter()
    }

    pub fn max_timestamp(&self) -> Option<i64> {
        self.records.last().map(|r| r.timestamp)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = write!(out, "{}\t{}\t{}", r.user_id, r.item_id, r.timestamp);
            if let Some(tag) = &r.domain_tag {
                let _ = write!(out, "\t{tag}");
            }
            out.push('\n');
        }
        out
    }
}

/// Result of parsing an interactions file.
#[derive(Debug, Clone)]
pub struct ParsedInteractions {
    pub log: InteractionLog,
    pub rejected: usize,
    /// Data lines seen (comments and blank lines excluded).
    pub lines: usize,
}

/// Parses a `user \t item \t timestamp [\t domain]` file.
pub fn parse_interactions(path: &Path) -> Result<ParsedInteractions> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_interactions_str(&text, path)
}

pub fn parse_interactions_str(text: &str, path: &Path) -> Result<ParsedInteractions> {
    let mut records = Vec::new();
    let mut rejected = 0;
    let mut lines = 0;
    let mut first_problem = None;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        lines += 1;
        match parse_interaction_line(line) {
            Ok(rec) => {
                if rec.item_id == PAD {
                    return Err(Error::PadCollision(rec.item_id));
                }
                records.push(rec);
            }
            Err(msg) => {
                rejected += 1;
                log::debug!("{}:{}: rejected: {}", path.display(), lineno + 1, msg);
                first_problem.get_or_insert_with(|| format!("line {}: {}", lineno + 1, msg));
            }
        }
    }

    if rejected * 10 > lines {
        return Err(Error::TooManyRejects {
            path: path.to_path_buf(),
            rejected,
            total: lines,
            first: first_problem.unwrap_or_default(),
        });
    }
    if rejected > 0 {
        log::warn!("{}: rejected {rejected} of {lines} lines", path.display());
    }

    Ok(ParsedInteractions {
        log: InteractionLog::from_records(records),
        rejected,
        lines,
    })
}

fn parse_interaction_line(line: &str) -> std::result::Result<Interaction, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 3 {
        return Err(format!("expected at least 3 fields, got {}", fields.len()));
    }
    let (user, item) = (fields[0].trim(), fields[1].trim());
    if user.is_empty() || item.is_empty() {
        return Err("empty user or item id".into());
    }
    let timestamp = fields[2]
        .trim()
        .parse::<i64>()
        .map_err(|_| format!("non-integer timestamp {:?}", fields[2]))?;
    let domain_tag = fields
        .get(3)
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(str::to_owned);
    Ok(Interaction {
        user_id: user.to_owned(),
        item_id: item.to_owned(),
        timestamp,
        domain_tag,
    })
}

/// Item id to title mapping. The canonical index of an item is its position
/// in sorted id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemCatalog {
    ids: Vec<String>,
    titles: Vec<String>,
    index: HashMap<String, usize>,
    domain_tag: Option<String>,
}

impl ItemCatalog {
    pub fn new<I, S, T>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut pairs: Vec<(String, String)> = entries
            .into_iter()
            .map(|(id, title)| (id.into(), title.into()))
            .collect();
        if pairs.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateItem(w[0].0.clone()));
            }
        }
        for (id, title) in &pairs {
            if id.is_empty() {
                return Err(Error::Invalid("empty item id in catalog".into()));
            }
            if id == PAD {
                return Err(Error::PadCollision(id.clone()));
            }
            if title.trim().is_empty() {
                return Err(Error::Invalid(format!("item {id:?} has an empty title")));
            }
        }
        let index = pairs
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (id.clone(), i))
            .collect();
        let (ids, titles) = pairs.into_iter().unzip();
        Ok(ItemCatalog {
            ids,
            titles,
            index,
            domain_tag: None,
        })
    }

    pub fn with_domain_tag(mut self, tag: Option<String>) -> Self {
        self.domain_tag = tag;
        self
    }

    pub fn domain_tag(&self) -> Option<&str> {
        self.domain_tag.as_deref()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, item_id: &str) -> Option<usize> {
        self.index.get(item_id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn title(&self, index: usize) -> &str {
        &self.titles[index]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn titles(&self) -> &[String] {
        &self.titles
    }

    /// Title of an item looked up by id.
    pub fn title_of(&self, item_id: &str) -> Option<&str> {
        self.index_of(item_id).map(|i| self.title(i))
    }
}

/// Parses an `item_id \t title [\t domain]` file. Any malformed line is fatal.
pub fn parse_catalog(path: &Path) -> Result<ItemCatalog> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    let mut tag = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields[0].trim().is_empty() || fields[1].trim().is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: "expected `item_id \\t title`".into(),
            });
        }
        if tag.is_none() {
            tag = fields
                .get(2)
                .map(|s| s.trim().to_owned())
                .filter(|s| !s.is_empty());
        }
        entries.push((fields[0].trim().to_owned(), fields[1].trim().to_owned()));
    }
    Ok(ItemCatalog::new(entries)?.with_domain_tag(tag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for Partition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "valid" => Ok(Partition::Valid),
            "test" => Ok(Partition::Test),
            _ => Err(Error::Invalid(format!("unknown partition {s:?}"))),
        }
    }
}

/// Train (periods 1-8), valid (9) and test (10) partitions of a log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitLog {
    pub train: InteractionLog,
    pub valid: InteractionLog,
    pub test: InteractionLog,
    /// Record count of each of the ten periods.
    pub period_sizes: [usize; PERIODS],
    /// Exclusive end index of periods 1..=9 in the sorted log.
    pub period_boundaries: [usize; PERIODS - 1],
}

/// Cuts the log into ten contiguous equal-count periods. The remainder goes
/// one record per period starting from the earliest.
pub fn temporal_split(log: &InteractionLog) -> Result<SplitLog> {
    let n = log.len();
    if n < PERIODS {
        return Err(Error::TooFewInteractions(n));
    }
    let (base, rem) = (n / PERIODS, n % PERIODS);
    let mut period_sizes = [base; PERIODS];
    for size in period_sizes.iter_mut().take(rem) {
        *size += 1;
    }
    let mut period_boundaries = [0; PERIODS - 1];
    let mut end = 0;
    for (k, size) in period_sizes.iter().take(PERIODS - 1).enumerate() {
        end += size;
        period_boundaries[k] = end;
    }
    let train_end = period_boundaries[7];
    let valid_end = period_boundaries[8];
    let recs = log.records();
    Ok(SplitLog {
        train: InteractionLog {
            records: recs[..train_end].to_vec(),
        },
        valid: InteractionLog {
            records: recs[train_end..valid_end].to_vec(),
        },
        test: InteractionLog {
            records: recs[valid_end..].to_vec(),
        },
        period_sizes,
        period_boundaries,
    })
}

impl SplitLog {
    pub fn partition(&self, which: Partition) -> &InteractionLog {
        match which {
            Partition::Train => &self.train,
            Partition::Valid => &self.valid,
            Partition::Test => &self.test,
        }
    }

    /// All records in global temporal order with their partition.
    pub fn iter_all(&self) -> impl Iterator<Item = (Partition, &Interaction)> {
        self.train
            .iter()
            .map(|r| (Partition::Train, r))
            .chain(self.valid.iter().map(|r| (Partition::Valid, r)))
            .chain(self.test.iter().map(|r| (Partition::Test, r)))
    }

    /// `key=value` lines describing the split.
    pub fn meta(&self) -> String {
        let mut out = String::new();
        let total = self.train.len() + self.valid.len() + self.test.len();
        let _ = writeln!(out, "total={total}");
        let _ = writeln!(out, "periods={PERIODS}");
        let _ = writeln!(out, "train_count={}", self.train.len());
        let _ = writeln!(out, "valid_count={}", self.valid.len());
        let _ = writeln!(out, "test_count={}", self.test.len());
        let sizes: Vec<String> = self.period_sizes.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "period_sizes={}", sizes.join(","));
        let bounds: Vec<String> = self
            .period_boundaries
            .iter()
            .map(|s| s.to_string())
            .collect();
        let _ = writeln!(out, "period_boundaries={}", bounds.join(","));
        let ts = |log: &InteractionLog| {
            log.records()
                .first()
                .zip(log.records().last())
                .map(|(a, b)| format!("{},{}", a.timestamp, b.timestamp))
                .unwrap_or_default()
        };
        let _ = writeln!(out, "train_time_range={}", ts(&self.train));
        let _ = writeln!(out, "valid_time_range={}", ts(&self.valid));
        let _ = writeln!(out, "test_time_range={}", ts(&self.test));
        out
    }
}

/// One next-item prediction instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub user_id: String,
    /// Exactly [`WINDOW`] ids, oldest first, left-padded with [`PAD`].
    pub history: Vec<String>,
    pub target: String,
    pub target_timestamp: i64,
    /// Items the user interacted with strictly before `target_timestamp`.
    pub known_items: BTreeSet<String>,
}

impl SequenceSample {
    /// History without padding, oldest first.
    pub fn real_history(&self) -> impl DoubleEndedIterator<Item = &str> {
        self.history
            .iter()
            .map(String::as_str)
            .filter(|h| *h != PAD)
    }

    pub fn last_item(&self) -> Option<&str> {
        self.real_history().next_back()
    }
}

/// Builds one sample per interaction in `partition` that has at least one
/// predecessor in its user's full timeline. Histories cross partition
/// boundaries.
pub fn build_samples(split: &SplitLog, partition: Partition) -> Vec<SequenceSample> {
    let mut timelines: HashMap<&str, Vec<(&str, i64)>> = HashMap::new();
    let mut samples = Vec::new();

    for (part, rec) in split.iter_all() {
        let timeline = timelines.entry(rec.user_id.as_str()).or_default();
        if part == partition && !timeline.is_empty() {
            let start = timeline.len().saturating_sub(WINDOW);
            let mut history = vec![PAD.to_owned(); WINDOW - (timeline.len() - start)];
            history.extend(timeline[start..].iter().map(|(item, _)| (*item).to_owned()));
            let known_items = timeline
                .iter()
                .take_while(|(_, ts)| *ts < rec.timestamp)
                .map(|(item, _)| (*item).to_owned())
                .collect();
            samples.push(SequenceSample {
                user_id: rec.user_id.clone(),
                history,
                target: rec.item_id.clone(),
                target_timestamp: rec.timestamp,
                known_items,
            });
        }
        timeline.push((rec.item_id.as_str(), rec.timestamp));
    }
    samples
}

/// Deterministic uniform subsample without replacement. Selected samples
/// keep their original relative order.
pub fn sample_eval(samples: &[SequenceSample], n: usize, seed: u64) -> Vec<SequenceSample> {
    if n >= samples.len() {
        return samples.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, samples.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| samples[i].clone()).collect()
}

/// Writes samples as JSON lines.
pub fn write_samples(path: &Path, samples: &[SequenceSample]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        let line = serde_json::to_string(s).map_err(|e| Error::Invalid(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_samples(path: &Path) -> Result<Vec<SequenceSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sample: SequenceSample = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if sample.history.len() != WINDOW {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!(
                    "history has {} entries, expected {WINDOW}",
                    sample.history.len()
                ),
            });
        }
        out.push(sample);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(user: &str, item: &str, ts: i64) -> Interaction {
        Interaction {
            user_id: user.into(),
            item_id: item.into(),
            timestamp: ts,
            domain_tag: None,
        }
    }

    fn parse(text: &str) -> Result<ParsedInteractions> {
        parse_interactions_str(text, Path::new("mem.tsv"))
    }

    fn numbered(n: usize) -> InteractionLog {
        InteractionLog::from_records(
            (0..n)
                .map(|i| rec("u", &format!("i{i}"), i as i64))
                .collect(),
        )
    }

    #[test]
    fn parse_sorts_by_timestamp() {
        let p = parse("u\ta\t5\nu\tb\t1\nu\tc\t3\n").unwrap();
        let ts: Vec<i64> = p.log.iter().map(|r| r.timestamp).collect();
        assert_eq!(ts, vec![1, 3, 5]);
        assert_eq!(p.rejected, 0);
    }

    #[test]
    fn parse_empty_file() {
        let p = parse("").unwrap();
        assert!(p.log.is_empty());
        assert_eq!(p.rejected, 0);
    }

    #[test]
    fn parse_ties_keep_file_order() {
        let p = parse("u\tA\t7\nu\tB\t7\n").unwrap();
        let items: Vec<&str> = p.log.iter().map(|r| r.item_id.as_str()).collect();
        assert_eq!(items, vec!["A", "B"]);
    }

    #[test]
    fn parse_counts_and_limits_rejects() {
        let mut text = String::from("# header comment\n");
        for i in 0..19 {
            text.push_str(&format!("u\ti{i}\t{i}\n"));
        }
        text.push_str("u\tbad\tnoon\n");
        let p = parse(&text).unwrap();
        assert_eq!(p.rejected, 1);
        assert_eq!(p.log.len(), 19);

        let err = parse("u\ta\t1\nu\tb\tx\nshort\n").unwrap_err();
        assert!(matches!(err, Error::TooManyRejects { rejected: 2, .. }));
    }

    #[test]
    fn parse_keeps_negative_timestamps_and_domain() {
        let p = parse("u\ta\t-4\tmovies\n").unwrap();
        assert_eq!(p.log.records()[0].timestamp, -4);
        assert_eq!(p.log.records()[0].domain_tag.as_deref(), Some("movies"));
    }

    #[test]
    fn pad_item_is_fatal() {
        assert!(matches!(
            parse("u\t<PAD>\t1\n"),
            Err(Error::PadCollision(_))
        ));
        assert!(matches!(
            ItemCatalog::new([("<PAD>", "x")]),
            Err(Error::PadCollision(_))
        ));
    }

    #[test]
    fn catalog_index_is_sorted_id_order() {
        let cat = ItemCatalog::new([("b", "Bee"), ("a", "Ay"), ("c", "See")]).unwrap();
        assert_eq!(cat.index_of("a"), Some(0));
        assert_eq!(cat.index_of("c"), Some(2));
        assert_eq!(cat.title(1), "Bee");
        assert!(matches!(
            ItemCatalog::new([("a", "x"), ("a", "y")]),
            Err(Error::DuplicateItem(_))
        ));
        assert!(ItemCatalog::new([("a", " ")]).is_err());
        assert!(matches!(
            ItemCatalog::new(Vec::<(String, String)>::new()),
            Err(Error::EmptyCatalog)
        ));
    }

    #[test]
    fn split_twenty() {
        let s = temporal_split(&numbered(20)).unwrap();
        assert_eq!(s.train.len(), 16);
        assert_eq!(s.valid.records()[0].item_id, "i16");
        assert_eq!(s.valid.len(), 2);
        assert_eq!(s.test.records()[0].item_id, "i18");
        assert_eq!(s.test.len(), 2);
    }

    #[test]
    fn split_ten() {
        let s = temporal_split(&numbered(10)).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (8, 1, 1));
        assert_eq!(s.test.records()[0].item_id, "i9");
    }

    #[test]
    fn split_remainder_goes_to_earliest_periods() {
        let s = temporal_split(&numbered(23)).unwrap();
        assert_eq!(s.period_sizes, [3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
        assert_eq!(s.train.len(), 19);
        assert_eq!(s.period_boundaries, [3, 6, 9, 11, 13, 15, 17, 19, 21]);
    }

    #[test]
    fn split_needs_ten_records() {
        assert!(matches!(
            temporal_split(&numbered(9)),
            Err(Error::TooFewInteractions(9))
        ));
    }

    fn split_of(records: Vec<Interaction>, train: usize, valid: usize) -> SplitLog {
        let log = InteractionLog::from_records(records);
        let r = log.records();
        SplitLog {
            train: InteractionLog::from_records(r[..train].to_vec()),
            valid: InteractionLog::from_records(r[train..train + valid].to_vec()),
            test: InteractionLog::from_records(r[train + valid..].to_vec()),
            period_sizes: [0; PERIODS],
            period_boundaries: [0; PERIODS - 1],
        }
    }

    fn pads(n: usize) -> Vec<String> {
        vec![PAD.to_owned(); n]
    }

    #[test]
    fn two_item_user_gets_padded_history() {
        let split = split_of(vec![rec("u", "a", 1), rec("u", "b", 2)], 1, 0);
        let samples = build_samples(&split, Partition::Test);
        assert_eq!(samples.len(), 1);
        let mut expected = pads(9);
        expected.push("a".into());
        assert_eq!(samples[0].history, expected);
        assert_eq!(samples[0].target, "b");
        assert_eq!(samples[0].known_items, BTreeSet::from(["a".to_owned()]));
    }

    #[test]
    fn window_keeps_ten_most_recent() {
        let recs: Vec<_> = (1..=12).map(|i| rec("u", &format!("i{i}"), i)).collect();
        let split = split_of(recs, 11, 0);
        let samples = build_samples(&split, Partition::Test);
        assert_eq!(samples.len(), 1);
        let expected: Vec<String> = (2..=11).map(|i| format!("i{i}")).collect();
        assert_eq!(samples[0].history, expected);
        assert_eq!(samples[0].target, "i12");
    }

    #[test]
    fn history_crosses_partitions() {
        // a, b in train; c in test
        let split = split_of(
            vec![rec("u", "a", 1), rec("u", "b", 2), rec("u", "c", 3)],
            2,
            0,
        );
        let samples = build_samples(&split, Partition::Test);
        assert_eq!(samples.len(), 1);
        let mut expected = pads(8);
        expected.extend(["a".to_owned(), "b".to_owned()]);
        assert_eq!(samples[0].history, expected);
        assert_eq!(samples[0].target, "c");
        // train samples: only b has a predecessor
        let train = build_samples(&split, Partition::Train);
        assert_eq!(train.len(), 1);
        assert_eq!(train[0].target, "b");
    }

    #[test]
    fn known_items_exclude_same_timestamp() {
        let split = split_of(
            vec![rec("u", "a", 1), rec("u", "b", 2), rec("u", "c", 2)],
            1,
            0,
        );
        let samples = build_samples(&split, Partition::Test);
        let last = samples.last().unwrap();
        assert_eq!(last.target, "c");
        assert_eq!(last.known_items, BTreeSet::from(["a".to_owned()]));
        assert_eq!(last.last_item(), Some("b"));
    }

    #[test]
    fn single_interaction_users_yield_nothing() {
        let split = split_of(vec![rec("u", "a", 1), rec("v", "b", 2)], 1, 0);
        assert!(build_samples(&split, Partition::Test).is_empty());
    }

    fn many_samples(n: usize) -> Vec<SequenceSample> {
        (0..n)
            .map(|i| SequenceSample {
                user_id: format!("u{i}"),
                history: pads(WINDOW),
                target: format!("t{i}"),
                target_timestamp: i as i64,
                known_items: BTreeSet::new(),
            })
            .collect()
    }

    #[test]
    fn sample_eval_returns_all_when_n_is_large() {
        let s = many_samples(5);
        assert_eq!(sample_eval(&s, 5, 3), s);
        assert_eq!(sample_eval(&s, 50, 3), s);
    }

    #[test]
    fn sample_eval_is_deterministic_per_seed() {
        let s = many_samples(100);
        let a = sample_eval(&s, 10, 1);
        assert_eq!(a, sample_eval(&s, 10, 1));
        assert_eq!(a.len(), 10);
        let b = sample_eval(&s, 10, 2);
        assert_eq!(b, sample_eval(&s, 10, 2));
        // distinct and in original order
        let ts: Vec<i64> = a.iter().map(|x| x.target_timestamp).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn samples_roundtrip_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut s = many_samples(3);
        s[1].known_items.insert("x".into());
        write_samples(&path, &s).unwrap();
        assert_eq!(read_samples(&path).unwrap(), s);
    }
}

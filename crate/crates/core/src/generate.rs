//! Toy generators that turn a user history into a free-form item description.
//! They stand in for an instruction-tuned language model.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{ItemCatalog, SequenceSample};
use crate::pop::PopularityTable;
use crate::text::tokenize;

/// Generation stops after this many tokens.
pub const MAX_TOKENS: usize = 16;

/// End-of-text marker inside n-gram transition tables.
const END: &str = "</s>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedText {
    pub tokens: Vec<String>,
    pub source: String,
}

impl GeneratedText {
    pub fn new(tokens: Vec<String>, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        if tokens.is_empty() {
            return Err(Error::Invalid(format!(
                "generator {source} produced no tokens"
            )));
        }
        Ok(GeneratedText { tokens, source })
    }

    /// Tokenizes free text, e.g. a line read back from a generation file.
    pub fn from_text(text: &str, source: impl Into<String>) -> Result<Self> {
        Self::new(tokenize(text), source)
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

pub trait Generator: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, sample: &SequenceSample) -> Result<GeneratedText>;
}

/// Echoes the target's own title. Perfect generation, for sanity checks.
pub struct OracleEcho<'a> {
    catalog: &'a ItemCatalog,
}

impl<'a> OracleEcho<'a> {
    pub fn new(catalog: &'a ItemCatalog) -> Self {
        OracleEcho { catalog }
    }
}

impl Generator for OracleEcho<'_> {
    fn name(&self) -> &str {
        "oracle"
    }

    fn generate(&self, sample: &SequenceSample) -> Result<GeneratedText> {
        let title = self
            .catalog
            .title_of(&sample.target)
            .ok_or_else(|| Error::UnknownItem(sample.target.clone()))?;
        GeneratedText::from_text(title, self.name())
    }
}

/// Emits the title of the most popular item the user has not seen yet.
pub struct PopTitle<'a> {
    catalog: &'a ItemCatalog,
    order: Vec<usize>,
}

impl<'a> PopTitle<'a> {
    pub fn new(table: &PopularityTable, catalog: &'a ItemCatalog) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        Ok(PopTitle {
            catalog,
            order: table.by_popularity(),
        })
    }
}

impl Generator for PopTitle<'_> {
    fn name(&self) -> &str {
        "pop"
    }

    fn generate(&self, sample: &SequenceSample) -> Result<GeneratedText> {
        let pick = self
            .order
            .iter()
            .copied()
            .find(|&i| !sample.known_items.contains(self.catalog.id(i)))
            .unwrap_or(self.order[0]);
        GeneratedText::from_text(self.catalog.title(pick), self.name())
    }
}

/// Token n-gram transition counts with backoff to shorter contexts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramModel {
    order: usize,
    /// Context (1..=order tokens) to successor counts. The empty context
    /// holds title-initial tokens.
    table: HashMap<Vec<String>, BTreeMap<String, u64>>,
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn successors(&self, context: &[String]) -> Option<&BTreeMap<String, u64>> {
        self.table.get(context)
    }
}

pub fn train_ngram(titles: &[Vec<String>], order: usize) -> Result<NGramModel> {
    if order == 0 {
        return Err(Error::Invalid("n-gram order must be >= 1".into()));
    }
    let mut table: HashMap<Vec<String>, BTreeMap<String, u64>> = HashMap::new();
    for title in titles.iter().filter(|t| !t.is_empty()) {
        *table
            .entry(Vec::new())
            .or_default()
            .entry(title[0].clone())
            .or_default() += 1;
        for j in 1..=title.len() {
            let next = title.get(j).map_or(END, String::as_str);
            for len in 1..=order.min(j) {
                let ctx = title[j - len..j].to_vec();
                *table
                    .entry(ctx)
                    .or_default()
                    .entry(next.to_owned())
                    .or_default() += 1;
            }
        }
    }
    Ok(NGramModel { order, table })
}

/// Greedy walk from the leading tokens of the user's last history item.
/// Equal-count successors are chosen by a generator seeded with `seed`.
pub fn ngram_generate(start: &[String], model: &NGramModel, seed: u64) -> Result<Vec<String>> {
    if model.is_empty() {
        return Err(Error::EmptyModel);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<String> = start.iter().take(model.order).cloned().collect();
    if out.is_empty() {
        match pick(model.successors(&[]), &mut rng) {
            Some(tok) if tok != END => out.push(tok),
            _ => return Err(Error::EmptyModel),
        }
    }
    while out.len() < MAX_TOKENS {
        let longest = model.order.min(out.len());
        let next = (1..=longest)
            .rev()
            .find_map(|len| model.successors(&out[out.len() - len..]))
            .and_then(|succ| pick(Some(succ), &mut rng));
        match next {
            Some(tok) if tok != END => out.push(tok),
            _ => break,
        }
    }
    Ok(out)
}

fn pick(successors: Option<&BTreeMap<String, u64>>, rng: &mut ChaCha8Rng) -> Option<String> {
    let succ = successors?;
    let best = *succ.values().max()?;
    let tied: Vec<&String> = succ
        .iter()
        .filter(|(_, &c)| c == best)
        .map(|(t, _)| t)
        .collect();
    let i = if tied.len() == 1 {
        0
    } else {
        rng.gen_range(0..tied.len())
    };
    Some(tied[i].clone())
}

pub struct NGramGenerator<'a> {
    model: NGramModel,
    catalog: &'a ItemCatalog,
    seed: u64,
}

impl<'a> NGramGenerator<'a> {
    /// Trains on every catalog title.
    pub fn from_catalog(catalog: &'a ItemCatalog, order: usize, seed: u64) -> Result<Self> {
        let titles: Vec<Vec<String>> = catalog.titles().iter().map(|t| tokenize(t)).collect();
        Ok(NGramGenerator {
            model: train_ngram(&titles, order)?,
            catalog,
            seed,
        })
    }

    pub fn model(&self) -> &NGramModel {
        &self.model
    }
}

impl Generator for NGramGenerator<'_> {
    fn name(&self) -> &str {
        "ngram"
    }

    fn generate(&self, sample: &SequenceSample) -> Result<GeneratedText> {
        let start = sample
            .last_item()
            .and_then(|id| self.catalog.title_of(id))
            .map(tokenize)
            .unwrap_or_default();
        let tokens = ngram_generate(&start, &self.model, self.seed)?;
        GeneratedText::new(tokens, self.name())
    }
}

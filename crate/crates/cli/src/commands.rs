use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use groundrec_core::bm25::{bm25_rank, Bm25Index, DEFAULT_B, DEFAULT_K1};
use groundrec_core::collab::{fit_cooccurrence, normalize_scores, CoScorer};
use groundrec_core::embed::{
    embed_catalog, load_embeddings, normalize_in_place, EmbeddingProvider, HashEmbedder,
};
use groundrec_core::eval::{
    compare, evaluate_with_ranks, improve2lv, Metric, MetricsReport, Pipeline, DEFAULT_KS,
};
use groundrec_core::generate::{GeneratedText, Generator, NGramGenerator, OracleEcho, PopTitle};
use groundrec_core::ground::{
    inject, l2_distances, normalize_distances, rank, GroundingConfig, Injection, RankedList,
    Strategy,
};
use groundrec_core::ingest::{
    build_samples, parse_catalog, parse_interactions, read_samples, sample_eval, temporal_split,
    ItemCatalog, Partition, SequenceSample, SAMPLER_NAME,
};
use groundrec_core::pop::{compute_popularity, decile_report, PopularityTable};
use groundrec_core::tune::tune_gamma;
use groundrec_core::Error;

use crate::manifest::{beside, RunManifest};

/// A flag combination that cannot run; maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(
    name = "groundrec",
    version,
    about = "Grounding and evaluation for generative recommendation"
)]
pub struct Cli {
    /// Worker threads for parallel stages (0 = one per core).
    #[arg(long, global = true, env = "GROUNDREC_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Split an interaction log into train/valid/test by time.
    Split(SplitArgs),
    /// Item popularity from the training partition.
    Popularity(PopularityArgs),
    /// Embed every catalog title.
    Embed(EmbedArgs),
    /// Generate item descriptions for samples.
    Generate(GenerateArgs),
    /// Fit the co-occurrence scorer on the training partition.
    CollabFit(CollabFitArgs),
    /// Rank catalog items against generated texts.
    Ground(GroundArgs),
    /// Full-catalog HR and NDCG over a sample file.
    Eval(EvalArgs),
    /// Grid-search the injection exponent on validation samples.
    TuneGamma(TuneArgs),
    /// Compare metric reports.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long)]
    interactions: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed for subsampling the valid and test sample files.
    #[arg(long)]
    seed: u64,
    /// Samples kept per evaluation partition.
    #[arg(long, default_value_t = 5000)]
    sample_n: usize,
}

#[derive(Args)]
pub struct PopularityArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write interaction share per popularity decile.
    #[arg(long)]
    deciles: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Hash,
}

#[derive(Args)]
pub struct EmbedArgs {
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long, value_enum, default_value = "hash")]
    provider: ProviderKind,
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Binary unless the path ends in `.tsv`.
    #[arg(long)]
    out: PathBuf,
    /// Scale rows to unit length.
    #[arg(long)]
    normalize: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeneratorKind {
    Oracle,
    Pop,
    Ngram,
}

#[derive(Args)]
struct GeneratorArgs {
    #[arg(long, value_enum)]
    generator: GeneratorKind,
    /// Context length of the n-gram generator.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Generator seed.
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    /// Training partition; needed by the pop generator.
    #[arg(long)]
    train: Option<PathBuf>,
    #[command(flatten)]
    gen: GeneratorArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct CollabFitArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long, default_value = "none")]
    inject: Injection,
    /// Training partition; needed for pop injection, the pop generator and most-pop.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Co-occurrence scorer from collab-fit; needed for collab injection.
    #[arg(long)]
    scorer: Option<PathBuf>,
    /// Smoothing added to every collaborative score.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Seed of the hash embedder applied to generated text.
    #[arg(long, default_value_t = 17)]
    embed_seed: u64,
    /// Unit-normalize item rows and generated embeddings.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = DEFAULT_K1)]
    k1: f64,
    #[arg(long, default_value_t = DEFAULT_B)]
    b: f64,
}

#[derive(Args)]
pub struct GroundArgs {
    #[arg(long)]
    emb: Option<PathBuf>,
    /// Generated texts from `generate`.
    #[arg(long)]
    gen: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    /// Sample file the texts were generated from; supplies exclusions and histories.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, default_value = "l2")]
    strategy: Strategy,
    #[command(flatten)]
    inject: InjectArgs,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 20)]
    topk: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    emb: Option<PathBuf>,
    #[arg(long, default_value = "l2")]
    strategy: Strategy,
    #[command(flatten)]
    gen: GeneratorArgs,
    #[command(flatten)]
    inject: InjectArgs,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Write each sample's top-20 ranking as TSV.
    #[arg(long)]
    dump_ranks: Option<PathBuf>,
    /// Report file; the report always goes to stdout too.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
pub struct TuneArgs {
    #[arg(long)]
    valid: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value = "ndcg@20")]
    metric: Metric,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportMode {
    Compare,
    Improve2lv,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Report files written by `eval`.
    #[arg(required = true, num_args = 2..)]
    reports: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "compare")]
    mode: ReportMode,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow reports computed over different sample sets.
    #[arg(long)]
    force: bool,
}

pub fn run(command: Command, args: &[String]) -> Result<()> {
    match command {
        Command::Split(a) => split(a, args),
        Command::Popularity(a) => popularity(a, args),
        Command::Embed(a) => embed(a, args),
        Command::Generate(a) => generate(a, args),
        Command::CollabFit(a) => collab_fit(a, args),
        Command::Ground(a) => ground(a, args),
        Command::Eval(a) => eval(a, args),
        Command::TuneGamma(a) => tune(a, args),
        Command::Report(a) => report(a, args),
    }
}

fn samples_jsonl(samples: &[SequenceSample]) -> Result<String> {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    Ok(out)
}

fn split(a: SplitArgs, args: &[String]) -> Result<()> {
    let mut m = RunManifest::new("split", args);
    m.input(&a.interactions)?;
    m.seed("seed", a.seed);
    let parsed = parse_interactions(&a.interactions)?;
    if parsed.rejected > 0 {
        log::warn!("{} of {} lines rejected", parsed.rejected, parsed.lines);
    }
    let split = temporal_split(&parsed.log)?;
    let dir = &a.out;
    m.write(&dir.join("train.tsv"), split.train.to_tsv().as_bytes())?;
    m.write(&dir.join("valid.tsv"), split.valid.to_tsv().as_bytes())?;
    m.write(&dir.join("test.tsv"), split.test.to_tsv().as_bytes())?;

    let valid = sample_eval(&build_samples(&split, Partition::Valid), a.sample_n, a.seed);
    let test = sample_eval(&build_samples(&split, Partition::Test), a.sample_n, a.seed);
    let mut meta = split.meta();
    let _ = writeln!(meta, "rejected={}", parsed.rejected);
    let _ = writeln!(meta, "sampler={SAMPLER_NAME}");
    let _ = writeln!(meta, "seed={}", a.seed);
    let _ = writeln!(meta, "valid_samples={}", valid.len());
    let _ = writeln!(meta, "test_samples={}", test.len());
    m.write(&dir.join("split.meta"), meta.as_bytes())?;
    m.write(
        &dir.join("valid.samples.jsonl"),
        samples_jsonl(&valid)?.as_bytes(),
    )?;
    m.write(
        &dir.join("test.samples.jsonl"),
        samples_jsonl(&test)?.as_bytes(),
    )?;
    m.save(&dir.join("manifest.json"))?;
    log::info!(
        "split {} interactions: train {}, valid {}, test {}",
        parsed.log.len(),
        split.train.len(),
        split.valid.len(),
        split.test.len()
    );
    Ok(())
}

fn load_popularity(
    train: &Path,
    catalog: &ItemCatalog,
    m: &mut RunManifest,
) -> Result<PopularityTable> {
    m.input(train)?;
    let parsed = parse_interactions(train)?;
    let table = compute_popularity(&parsed.log, catalog)?;
    if table.rejected > 0 {
        log::warn!(
            "{} training interactions reference items outside the catalog",
            table.rejected
        );
    }
    Ok(table)
}

fn load_catalog(path: &Path, m: &mut RunManifest) -> Result<ItemCatalog> {
    m.input(path)?;
    Ok(parse_catalog(path)?)
}

fn popularity(a: PopularityArgs, args: &[String]) -> Result<()> {
    let mut m = RunManifest::new("popularity", args);
    let catalog = load_catalog(&a.catalog, &mut m)?;
    let table = load_popularity(&a.train, &catalog, &mut m)?;
    m.write(&a.out, table.to_tsv(&catalog).as_bytes())?;
    if let Some(path) = &a.deciles {
        let report = decile_report(&table);
        if report.small_catalog {
            log::warn!("fewer than ten items; some deciles are empty");
        }
        m.write(path, report.to_tsv().as_bytes())?;
        m.save(&beside(path))?;
    }
    m.save(&beside(&a.out))
}

fn embed(a: EmbedArgs, args: &[String]) -> Result<()> {
    let mut m = RunManifest::new("embed", args);
    let catalog = load_catalog(&a.catalog, &mut m)?;
    m.seed("seed", a.seed);
    let provider = match a.provider {
        ProviderKind::Hash => HashEmbedder::new(a.dim, a.seed).map_err(|e| usage(e.to_string()))?,
    };
    let mut matrix = embed_catalog(&catalog, &provider)?;
    if a.normalize {
        matrix = matrix.normalized();
    }
    let bytes = if a.out.extension().is_some_and(|e| e == "tsv") {
        matrix.to_tsv(&catalog).into_bytes()
    } else {
        matrix.to_binary()
    };
    m.write(&a.out, &bytes)?;
    m.save(&beside(&a.out))
}

fn build_generator<'a>(
    g: &GeneratorArgs,
    catalog: &'a ItemCatalog,
    popularity: Option<&PopularityTable>,
) -> Result<Box<dyn Generator + 'a>> {
    Ok(match g.generator {
        GeneratorKind::Oracle => Box::new(OracleEcho::new(catalog)),
        GeneratorKind::Pop => {
            let table = popularity.ok_or_else(|| usage("the pop generator needs --train"))?;
            Box::new(PopTitle::new(table, catalog)?)
        }
        GeneratorKind::Ngram => {
            if g.order == 0 {
                return Err(usage("--order must be at least 1"));
            }
            Box::new(NGramGenerator::from_catalog(catalog, g.order, g.seed)?)
        }
    })
}

fn load_samples(path: &Path, m: &mut RunManifest) -> Result<Vec<SequenceSample>> {
    m.input(path)?;
    Ok(read_samples(path)?)
}

fn generate(a: GenerateArgs, args: &[String]) -> Result<()> {
    let mut m = RunManifest::new("generate", args);
    let catalog = load_catalog(&a.catalog, &mut m)?;
    let samples = load_samples(&a.samples, &mut m)?;
    m.seed("seed", a.gen.seed);
    let table = match &a.train {
        Some(path) => Some(load_popularity(path, &catalog, &mut m)?),
        None => None,
    };
    let generator = build_generator(&a.gen, &catalog, table.as_ref())?;
    let mut out = String::from("index\ttext\tsource\n");
    for (i, sample) in samples.iter().enumerate() {
        match generator.generate(sample) {
            Ok(text) => {
                let _ = writeln!(out, "{i}\t{}\t{}", text.text(), text.source);
            }
            Err(Error::UnknownItem(id)) => {
                log::warn!("sample {i}: target {id:?} is not in the catalog; skipped")
            }
            Err(e) => return Err(e.into()),
        }
    }
    m.write(&a.out, out.as_bytes())?;
    m.save(&beside(&a.out))
}

fn collab_fit(a: CollabFitArgs, args: &[String]) -> Result<()> {
    let mut m = RunManifest::new("collab-fit", args);
    let catalog = load_catalog(&a.catalog, &mut m)?;
    m.input(&a.train)?;
    let train = parse_interactions(&a.train)?;
    let scorer = fit_cooccurrence(&train.log, &catalog);
    log::info!("{} distinct transitions", scorer.pairs().count());
    m.write(&a.out, &scorer.to_bytes())?;
    m.save(&beside(&a.out))
}

fn read_generations(path: &Path) -> Result<Vec<(usize, GeneratedText)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && line.starts_with("index\t") || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            bail!(
                "{}:{}: expected index, text and source",
                path.display(),
                lineno + 1
            );
        }
        let index: usize = fields[0]
            .parse()
            .with_context(|| format!("{}:{}: bad sample index", path.display(), lineno + 1))?;
        out.push((index, GeneratedText::from_text(fields[1], fields[2])?));
    }
    Ok(out)
}

fn load_scorer(
    inject: &InjectArgs,
    catalog: &ItemCatalog,
    m: &mut RunManifest,
) -> Result<Option<CoScorer>> {
    if inject.inject != Injection::Collaborative {
        return Ok(None);
    }
    let path = inject
        .scorer
        .as_ref()
        .ok_or_else(|| usage("collab injection needs --scorer"))?;
    m.input(path)?;
    Ok(Some(
        CoScorer::load(path, catalog.len())?.with_alpha(inject.alpha)?,
    ))
}

fn load_matrix_for(
    strategy: Strategy,
    emb: Option<&PathBuf>,
    catalog: &ItemCatalog,
    m: &mut RunManifest,
) -> Result<Option<groundrec_core::embed::EmbeddingMatrix>> {
    if strategy != Strategy::L2 {
        return Ok(None);
    }
    let path = emb.ok_or_else(|| usage("l2 grounding needs --emb"))?;
    m.input(path)?;
    Ok(Some(load_embeddings(path, catalog)?))
}

fn check_injection(strategy: Strategy, inject: &InjectArgs) -> Result<()> {
    if strategy != Strategy::L2 && inject.inject != Injection::None {
        return Err(usage("--inject applies to l2 grounding only"));
    }
    if inject.inject == Injection::Popularity && inject.train.is_none() {
        return Err(usage("pop injection needs --train"));
    }
    Ok(())
}

fn ground(a: GroundArgs, args: &[String]) -> Result<()> {
    if a.strategy == Strategy::MostPop {
        return Err(usage("ground supports l2 and bm25"));
    }
    check_injection(a.strategy, &a.inject)?;
    let config =
        GroundingConfig::new(a.inject.inject, a.gamma).map_err(|e| usage(e.to_string()))?;
    let mut m = RunManifest::new("ground", args);
    m.seed("embed_seed", a.inject.embed_seed);
    let catalog = load_catalog(&a.catalog, &mut m)?;
    m.input(&a.gen)?;
    let gens = read_generations(&a.gen)?;
    let samples = match &a.samples {
        Some(path) => Some(load_samples(path, &mut m)?),
        None => None,
    };
    if a.inject.inject == Injection::Collaborative && samples.is_none() {
        return Err(usage("collab injection needs --samples for user histories"));
    }
    let table = match (&a.inject.train, a.inject.inject) {
        (Some(path), Injection::Popularity) => Some(load_popularity(path, &catalog, &mut m)?),
        _ => None,
    };
    let scorer = load_scorer(&a.inject, &catalog, &mut m)?;
    let mut matrix = load_matrix_for(a.strategy, a.emb.as_ref(), &catalog, &mut m)?;
    if a.inject.normalize {
        matrix = matrix.map(|mx| mx.normalized());
    }
    let provider = match &matrix {
        Some(mx) => Some(HashEmbedder::new(mx.dim(), a.inject.embed_seed)?),
        None => None,
    };
    let bm25 =
        (a.strategy == Strategy::Bm25).then(|| Bm25Index::new(&catalog, a.inject.k1, a.inject.b));

    let mut out = String::from("index\trank\titem_id\tscore\n");
    for (index, text) in &gens {
        let sample = match &samples {
            Some(s) => Some(s.get(*index).ok_or_else(|| {
                anyhow::anyhow!("generation index {index} is beyond the sample file")
            })?),
            None => None,
        };
        let mut excluded = vec![false; catalog.len()];
        if let Some(s) = sample {
            for id in &s.known_items {
                if let Some(i) = catalog.index_of(id) {
                    excluded[i] = true;
                }
            }
        }
        if excluded.iter().all(|&e| e) {
            log::warn!("sample {index}: every item is excluded; skipped");
            continue;
        }
        let ranked: RankedList = match a.strategy {
            Strategy::Bm25 => bm25_rank(
                bm25.as_ref().expect("built for bm25"),
                &text.tokens,
                &excluded,
            )?,
            _ => {
                let mx = matrix.as_ref().expect("loaded for l2");
                let mut oracle = provider
                    .as_ref()
                    .expect("built with matrix")
                    .embed(&text.tokens)?;
                if a.inject.normalize {
                    normalize_in_place(&mut oracle);
                }
                let normalized = normalize_distances(&l2_distances(mx, &oracle)?);
                let weights = match config.injection {
                    Injection::None => vec![0.0; catalog.len()],
                    Injection::Popularity => table
                        .as_ref()
                        .expect("loaded for pop")
                        .normalized()
                        .to_vec(),
                    Injection::Collaborative => {
                        let raw = scorer
                            .as_ref()
                            .expect("loaded for collab")
                            .score(sample.expect("checked above"), &catalog);
                        normalize_scores(&raw)
                    }
                };
                rank(
                    &inject(&normalized, &weights, config.effective_gamma())?,
                    &excluded,
                )?
            }
        };
        for (pos, (&item, score)) in ranked
            .items
            .iter()
            .zip(&ranked.scores)
            .take(a.topk)
            .enumerate()
        {
            let _ = writeln!(out, "{index}\t{}\t{}\t{score}", pos + 1, catalog.id(item));
        }
    }
    m.write(&a.out, out.as_bytes())?;
    m.save(&beside(&a.out))
}

/// Loads everything `p` names and hands the assembled pipeline to `f`.
fn with_pipeline<T>(
    p: &PipelineArgs,
    gamma: f64,
    m: &mut RunManifest,
    f: impl FnOnce(&Pipeline, &mut RunManifest) -> Result<T>,
) -> Result<T> {
    check_injection(p.strategy, &p.inject)?;
    let mut grounding =
        GroundingConfig::new(p.inject.inject, gamma).map_err(|e| usage(e.to_string()))?;
    grounding.normalize_embeddings = p.inject.normalize;
    if p.strategy == Strategy::MostPop && p.inject.train.is_none() {
        return Err(usage("most-pop needs --train"));
    }
    m.seed("seed", p.gen.seed);
    m.seed("embed_seed", p.inject.embed_seed);

    let catalog = load_catalog(&p.catalog, m)?;
    let table = match &p.inject.train {
        Some(path) => Some(load_popularity(path, &catalog, m)?),
        None => None,
    };
    let scorer = load_scorer(&p.inject, &catalog, m)?;
    let matrix = load_matrix_for(p.strategy, p.emb.as_ref(), &catalog, m)?;
    let provider = match &matrix {
        Some(mx) => Some(HashEmbedder::new(mx.dim(), p.inject.embed_seed)?),
        None => None,
    };
    let bm25 =
        (p.strategy == Strategy::Bm25).then(|| Bm25Index::new(&catalog, p.inject.k1, p.inject.b));
    let generator = match p.strategy {
        Strategy::MostPop => None,
        _ => Some(build_generator(&p.gen, &catalog, table.as_ref())?),
    };

    let pipeline = Pipeline {
        catalog: &catalog,
        strategy: p.strategy,
        grounding,
        matrix: matrix.as_ref(),
        generator: generator.as_deref(),
        provider: provider.as_ref().map(|h| h as &dyn EmbeddingProvider),
        popularity: table.as_ref(),
        scorer: scorer.as_ref(),
        bm25: bm25.as_ref(),
        seed: p.gen.seed,
    };
    f(&pipeline, m)
}

const DUMP_TOP_K: usize = 20;

fn eval(a: EvalArgs, args: &[String]) -> Result<()> {
    let mut m = RunManifest::new("eval", args);
    let samples = load_samples(&a.test, &mut m)?;
    let (report, dump, catalog_ids) =
        with_pipeline(&a.pipeline, a.gamma, &mut m, |pipeline, _| {
            let top_k = a.dump_ranks.as_ref().map(|_| DUMP_TOP_K);
            let (report, dump) = evaluate_with_ranks(&samples, pipeline, &DEFAULT_KS, top_k)?;
            Ok((report, dump, pipeline.catalog.ids().to_vec()))
        })?;
    let text = if a.json {
        report.to_json()
    } else {
        report.to_text()
    };
    print!("{text}");

    let mut written = Vec::new();
    if let Some(path) = &a.out {
        m.write(path, text.as_bytes())?;
        written.push(path.clone());
    }
    if let Some(path) = &a.dump_ranks {
        let mut out = String::from("index\trank\titem_id\tscore\n");
        for (i, ranked) in dump.iter().enumerate() {
            let Some(ranked) = ranked else { continue };
            for (pos, (&item, score)) in ranked.items.iter().zip(&ranked.scores).enumerate() {
                let _ = writeln!(out, "{i}\t{}\t{}\t{score}", pos + 1, catalog_ids[item]);
            }
        }
        m.write(path, out.as_bytes())?;
        written.push(path.clone());
    }
    for path in &written {
        m.save(&beside(path))?;
    }
    Ok(())
}

fn tune(a: TuneArgs, args: &[String]) -> Result<()> {
    if a.pipeline.inject.inject == Injection::None {
        log::warn!("no injection: every gamma gives the same ranking");
    }
    if !DEFAULT_KS.contains(&a.metric.k) {
        return Err(usage(format!(
            "{} is not among the cutoffs {DEFAULT_KS:?}",
            a.metric
        )));
    }
    let mut m = RunManifest::new("tune-gamma", args);
    let samples = load_samples(&a.valid, &mut m)?;
    let sweep = with_pipeline(&a.pipeline, 0.0, &mut m, |pipeline, _| {
        Ok(tune_gamma(&samples, pipeline, a.metric)?)
    })?;
    println!(
        "best_gamma={}\t{}={}",
        sweep.best_gamma, sweep.metric, sweep.best_value
    );
    m.write(&a.out, sweep.to_tsv().as_bytes())?;
    m.save(&beside(&a.out))
}

fn report(a: ReportArgs, args: &[String]) -> Result<()> {
    if a.mode == ReportMode::Improve2lv && a.reports.len() != 3 {
        return Err(usage(
            "improve2lv takes exactly three reports: a, b, combined",
        ));
    }
    let mut m = RunManifest::new("report", args);
    let mut reports = Vec::with_capacity(a.reports.len());
    for path in &a.reports {
        m.input(path)?;
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        reports.push(
            MetricsReport::parse(&text).with_context(|| format!("parsing {}", path.display()))?,
        );
    }
    let mut out = String::new();
    match a.mode {
        ReportMode::Compare => {
            let rows = compare(&reports, a.force)?;
            out.push_str("metric");
            for i in 1..=reports.len() {
                let _ = write!(out, "\treport{i}");
            }
            for i in 2..=reports.len() {
                let _ = write!(out, "\tdelta{i}");
            }
            out.push('\n');
            for row in rows {
                out.push_str(&row.metric);
                for v in row.values.iter().chain(&row.deltas) {
                    let _ = write!(out, "\t{v}");
                }
                out.push('\n');
            }
        }
        ReportMode::Improve2lv => {
            let rows = improve2lv(&reports[0], &reports[1], &reports[2], a.force)?;
            out.push_str("metric\ta\tb\tcombined\timprove2lv\n");
            for r in rows {
                let value = r.value.map_or("NA".to_owned(), |v| v.to_string());
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{value}",
                    r.metric, r.a, r.b, r.combined
                );
            }
        }
    }
    print!("{out}");
    if let Some(path) = &a.out {
        m.write(path, out.as_bytes())?;
        m.save(&beside(path))?;
    }
    Ok(())
}

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use salesdialog::annotate::{annotate_store, import_annotations, merge_spans, ExtractConfig, Lexicons};
use salesdialog::assembly::{builtin_templates, check_run, generate_dataset, load_templates, ConversationTemplate};
use salesdialog::corpus::{
    ingest_metadata, ingest_reviews, CorpusSnapshot, IngestOptions, ProductCatalog, ReviewStore,
};
use salesdialog::dataset::{read_dataset, stats, validate, write_dataset};
use salesdialog::dialog::DATASET_SCHEMA_VERSION;
use salesdialog::negotiation::{Phrasebank, Resources};
use salesdialog::OpinionIndex;
use serde::Serialize;

use config::{RunConfig, Settings};

#[derive(Parser)]
#[command(
    name = "salesdialog",
    version,
    about = "Generate grounded customer / sales-assistant conversations from product reviews"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read product metadata and reviews into a corpus snapshot.
    Ingest(IngestArgs),
    /// Annotate the corpus, index opinions and generate a dataset.
    Generate(GenerateArgs),
    /// Check a dataset against the corpus; exits 1 when violations exist.
    Validate(ValidateArgs),
    /// Summarize a dataset.
    Stats(StatsArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving every output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Product metadata, one JSON record per line.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Reviews, one JSON record per line.
    #[arg(long)]
    reviews: Option<PathBuf>,
    /// Fail on the first malformed record instead of skipping it.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct AnnotationArgs {
    /// Corpus snapshot (default: <out>/corpus.json).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Lexicon file replacing the built-in one.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Externally produced opinion annotations merged over the lexicon's.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Conversation templates replacing the built-in fourteen.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    positive_threshold: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    negative_threshold: Option<f64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    annotation: AnnotationArgs,
    /// Master seed; required, there is no clock-based default.
    #[arg(long)]
    seed: Option<u64>,
    /// Conversations attempted per template.
    #[arg(long)]
    per_template: Option<usize>,
    /// Phrasebank replacing the built-in one.
    #[arg(long)]
    phrasebank: Option<PathBuf>,
    /// Probability that the customer declines a search question.
    #[arg(long)]
    p_skip: Option<f64>,
    /// Unsatisfiable pair attempts allowed per conversation.
    #[arg(long)]
    retry_budget: Option<usize>,
    /// Breadth of the seeded choice among best-ranked opinions.
    #[arg(long)]
    top_k: Option<usize>,
    /// Non-neutral opinions a seed product needs.
    #[arg(long)]
    min_opinions: Option<usize>,
    /// Unsatisfiable attempts spent on one seed product before re-rolling it.
    #[arg(long)]
    local_retries: Option<usize>,
    /// Fail on malformed annotation records instead of skipping them.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    annotation: AnnotationArgs,
    /// Dataset to check.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset to summarize.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

fn flag(set: bool) -> Option<bool> {
    set.then_some(true)
}

impl CommonArgs {
    fn settings(&self, flags: RunConfig) -> Result<Settings> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig { out: self.out.clone(), workers: self.workers, ..flags };
        file.overlay(flags).resolve()
    }
}

impl AnnotationArgs {
    fn flags(&self) -> RunConfig {
        RunConfig {
            corpus: self.corpus.clone(),
            lexicon: self.lexicon.clone(),
            annotations: self.annotations.clone(),
            templates: self.templates.clone(),
            positive_threshold: self.positive_threshold,
            negative_threshold: self.negative_threshold,
            ..Default::default()
        }
    }
}

fn schema_help() -> String {
    format!(
        "Dataset files hold one conversation per line (schema_version {DATASET_SCHEMA_VERSION}):\n  \
         {{schema_version, id, template_id, master_seed, turns: [{{speaker, stage, act, text, product_id,\n  \
         feature, value, pair_index, pair_kind, grounding: [{{review_id, sentence_ordinal, feature, score,\n  \
         label}}]}}], pair_trace, product_trajectory, alternatives}}"
    )
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn prepare_out(settings: &Settings) -> Result<()> {
    fs::create_dir_all(&settings.out).with_context(|| format!("cannot create {}", settings.out.display()))?;
    if let Some(n) = settings.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<ExitCode> {
    let settings = args.common.settings(RunConfig {
        meta: args.meta.clone(),
        reviews: args.reviews.clone(),
        strict: flag(args.strict),
        ..Default::default()
    })?;
    let (Some(meta), Some(reviews)) = (&settings.meta, &settings.reviews) else {
        bail!("ingest needs --meta and --reviews");
    };
    prepare_out(&settings)?;
    let options = IngestOptions { strict: settings.strict };
    let (catalog, meta_report) = ingest_metadata(meta, options)?;
    let (store, review_report) = ingest_reviews(reviews, &catalog, options)?;
    let snapshot_path = settings.out.join("corpus.json");
    CorpusSnapshot::from_parts(&catalog, &store).save(&snapshot_path)?;

    #[derive(Serialize)]
    struct IngestSummary<'a, R> {
        settings: &'a Settings,
        metadata: R,
        reviews: R,
    }
    write_json(
        &settings.out.join("ingest_report.json"),
        &IngestSummary { settings: &settings, metadata: &meta_report, reviews: &review_report },
    )?;
    println!(
        "ingested {} products and {} reviews ({} malformed, {} orphan reviews) into {}",
        catalog.len(),
        store.len(),
        meta_report.malformed.len() + review_report.malformed.len(),
        review_report.orphans.len(),
        snapshot_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

struct Loaded {
    catalog: ProductCatalog,
    store: ReviewStore,
    index: OpinionIndex,
    templates: Vec<ConversationTemplate>,
}

/// Loads the snapshot, annotates it and builds the opinion index.
fn load_corpus(settings: &Settings) -> Result<Loaded> {
    let snapshot = CorpusSnapshot::load(&settings.corpus)
        .with_context(|| format!("cannot load corpus snapshot {}", settings.corpus.display()))?;
    let (catalog, store) = snapshot.into_parts()?;
    let lexicons = match &settings.lexicon {
        Some(path) => Lexicons::load(path)?,
        None => Lexicons::builtin(),
    };
    let config = ExtractConfig { thresholds: settings.thresholds()?, ..ExtractConfig::default() };
    let mut spans = annotate_store(&store, &lexicons, &config);
    if let Some(path) = &settings.annotations {
        let options = IngestOptions { strict: settings.strict };
        let (imported, _) = import_annotations(path, &store, &lexicons, &config.thresholds, options)?;
        spans = merge_spans(spans, imported);
    }
    let index = OpinionIndex::build(&catalog, &store, &spans)?;
    let templates = match &settings.templates {
        Some(path) => load_templates(path)?,
        None => builtin_templates(),
    };
    Ok(Loaded { catalog, store, index, templates })
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let settings = args.common.settings(RunConfig {
        seed: args.seed,
        per_template: args.per_template,
        phrasebank: args.phrasebank.clone(),
        p_skip: args.p_skip,
        retry_budget: args.retry_budget,
        top_k: args.top_k,
        min_opinions: args.min_opinions,
        local_retries: args.local_retries,
        strict: flag(args.strict),
        ..args.annotation.flags()
    })?;
    let Some(seed) = settings.seed else { bail!("generate needs an explicit --seed") };
    prepare_out(&settings)?;
    let loaded = load_corpus(&settings)?;
    check_run(&loaded.templates, settings.per_template)?;
    let phrasebank = match &settings.phrasebank {
        Some(path) => Phrasebank::load(path)?,
        None => Phrasebank::builtin(),
    };
    loaded.index.save(&settings.out.join("index.jsonl"))?;

    let res =
        Resources { catalog: &loaded.catalog, store: &loaded.store, index: &loaded.index, phrasebank: &phrasebank };
    let (conversations, report) =
        generate_dataset(&loaded.templates, settings.per_template, seed, &res, &settings.params)?;
    write_dataset(&conversations, &settings.out.join("dataset.jsonl"))?;

    #[derive(Serialize)]
    struct RunReport<'a, R> {
        settings: &'a Settings,
        dataset_schema_version: u32,
        indexed_spans: usize,
        generation: R,
    }
    write_json(
        &settings.out.join("generation_report.json"),
        &RunReport {
            settings: &settings,
            dataset_schema_version: DATASET_SCHEMA_VERSION,
            indexed_spans: loaded.index.span_count(),
            generation: &report,
        },
    )?;
    println!(
        "generated {} of {} conversations ({} exhausted, {} retries) into {}",
        report.succeeded,
        report.attempted,
        report.exhausted.len(),
        report.retries,
        settings.out.display()
    );
    for e in &report.exhausted {
        println!("  exhausted: template {} instance {}: {}", e.template_id, e.ordinal, e.reason);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let settings = args.common.settings(RunConfig { dataset: args.dataset.clone(), ..args.annotation.flags() })?;
    let Some(dataset) = settings.dataset.clone() else { bail!("validate needs --dataset") };
    prepare_out(&settings)?;
    let loaded = load_corpus(&settings)?;
    let report = validate(&dataset, &loaded.templates, &loaded.catalog, &loaded.store, &loaded.index)?;

    let path = settings.out.join("validation_report.jsonl");
    let mut lines = String::new();
    for v in &report.violations {
        lines.push_str(&serde_json::to_string(v)?);
        lines.push('\n');
    }
    fs::write(&path, lines).with_context(|| format!("cannot write {}", path.display()))?;
    print!("{}", report.summary());
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_stats(args: StatsArgs) -> Result<ExitCode> {
    let settings = args.common.settings(RunConfig { dataset: args.dataset.clone(), ..Default::default() })?;
    let Some(dataset) = settings.dataset.clone() else { bail!("stats needs --dataset") };
    prepare_out(&settings)?;
    let summary = stats(&read_dataset(&dataset)?);
    write_json(&settings.out.join("stats.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(schema_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Stats(a) => cmd_stats(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

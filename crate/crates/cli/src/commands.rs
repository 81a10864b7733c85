use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use dialex_core::baselines::{
    predict_ld_threshold, predict_majority, predict_random, train_logreg,
};
use dialex_core::corpus::{
    ingest_dialect_corpus, ingest_tagged_corpus, write_tagged_corpus, DialectFormat,
    SentenceRecord, TaggedToken,
};
use dialex_core::dataset::{
    adjudicate_items, items_from_candidates, read_dataset_tsv, split_dev_test, translation_slice,
    write_dataset_tsv, AnnotationStore, DatasetItem, Gold, Label, Split,
};
use dialex_core::index::IndexKind;
use dialex_core::llm::{
    load_prompt_pool, read_predictions_jsonl, run_task, select_best_prompt,
    write_predictions_jsonl, ChatClient, ModelEndpointConfig, Prediction, ResponseCache, RunStatus,
    Variant,
};
use dialex_core::matcher::{
    build_candidate_table, read_candidates_jsonl, write_candidates_jsonl, CorpusIndex,
};
use dialex_core::metrics::{
    delta_report, deltas_csv, groups_csv, ld_histogram, ld_histogram_csv, render_text,
    score_judgment, score_translation, EvaluationReport, IfErrorPolicy,
};
use dialex_core::outcome::{JudgmentOutcome, Task, TranslationOutcome};
use dialex_core::vocab::{
    build_dialect_vocab, build_standard_vocab, filter_shared, read_dialect_tsv, read_standard_tsv,
    write_dialect_tsv, write_standard_tsv, PipelineConfig,
};

use crate::config::AppConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::ManifestBuilder;
use crate::service::{router, ServiceState};

#[derive(Debug, Parser)]
#[command(
    name = "dialex",
    version,
    about = "Build and evaluate dialect variation dictionaries"
)]
pub struct Cli {
    /// Seed for every randomized stage; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// TOML config file with [pipeline], [baselines], [service] and [endpoints.*] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus and write it in normalized form.
    Ingest(IngestArgs),
    /// Build the standard and dialect vocabularies.
    Vocab(VocabArgs),
    /// Pair every lemma with its k nearest dialect terms.
    Match(MatchArgs),
    /// Turn a candidate table into an annotation task list.
    ExportTasks(ExportArgs),
    /// Run the annotation API.
    Serve(ServeArgs),
    /// Fold annotations into gold labels.
    Adjudicate(AdjudicateArgs),
    /// Assign dev/test splits.
    Split(SplitArgs),
    /// Run the reference systems on the judgment task.
    Baselines(BaselinesArgs),
    /// Pick the best prompt per model on the dev split.
    LlmSelect(LlmSelectArgs),
    /// Run one prompt over a split.
    LlmRun(LlmRunArgs),
    /// Score predictions against gold labels.
    Score(ScoreArgs),
    /// Render reports and compare runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CorpusKind {
    Tagged,
    Dialect,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, value_enum)]
    pub kind: CorpusKind,
    #[arg(long)]
    pub input: PathBuf,
    /// Dialect corpus layout: plain-lines or wiki-extract.
    #[arg(long, default_value = "plain-lines")]
    pub format: String,
    /// Document id for inputs without document markers; defaults to the file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Tagged TSV (tagged) or sentence JSONL (dialect).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    /// Normalized tagged corpus from `ingest --kind tagged`.
    #[arg(long)]
    pub tokens: PathBuf,
    /// Sentence JSONL from `ingest --kind dialect`.
    #[arg(long)]
    pub sentences: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    /// Treat dialect tokens as shared when they match a lemma ignoring case.
    #[arg(long)]
    pub fold_case_filter: bool,
    #[arg(long)]
    pub out_standard: PathBuf,
    #[arg(long)]
    pub out_dialect: PathBuf,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub standard_vocab: PathBuf,
    #[arg(long)]
    pub dialect_vocab: PathBuf,
    #[arg(long)]
    pub sentences: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub contexts: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Neighbor index: band or bktree.
    #[arg(long, default_value = "band")]
    pub index: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    /// Append-only annotation log; replayed on start.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub bind: Option<String>,
}

#[derive(Debug, Args)]
pub struct AdjudicateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub dev_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitFilter {
    Dev,
    Test,
    All,
}

impl SplitFilter {
    fn keep(self, item: &DatasetItem) -> bool {
        match self {
            SplitFilter::Dev => item.split == Split::Dev,
            SplitFilter::Test => item.split == Split::Test,
            SplitFilter::All => true,
        }
    }
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory for predictions, reports and the fitted model.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "separate")]
    pub if_policy: String,
}

#[derive(Debug, Args)]
pub struct EndpointArgs {
    /// Endpoint name from the config file.
    #[arg(long, conflicts_with_all = ["base_url", "model"])]
    pub endpoint: Option<String>,
    #[arg(long, requires = "model")]
    pub base_url: Option<String>,
    #[arg(long, requires = "base_url")]
    pub model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub concurrency: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LlmSelectArgs {
    #[arg(value_parser = parse_task)]
    pub task: Task,
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
    #[arg(long, default_value = default_prompts_dir())]
    pub prompts: PathBuf,
    /// Response cache; rerunning with the same cache resumes.
    #[arg(long)]
    pub cache: PathBuf,
    /// Per-template dev scores and the chosen id.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LlmRunArgs {
    #[arg(value_parser = parse_task)]
    pub task: Task,
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
    #[arg(long)]
    pub template: u32,
    /// en, en+ctx, de or de+ctx.
    #[arg(long, default_value = "en")]
    pub variant: String,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitFilter,
    #[arg(long, default_value = default_prompts_dir())]
    pub prompts: PathBuf,
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(value_parser = parse_task)]
    pub task: Task,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Built-in system (random, ld-threshold, majority) or a label for --predictions.
    #[arg(long)]
    pub system: Option<String>,
    /// Predictions JSONL from `llm-run` or `baselines`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitFilter,
    #[arg(long, default_value = "separate")]
    pub if_policy: String,
    /// Report JSON; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for per-POS, per-LD and LD histogram CSVs.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(subcommand)]
    pub command: ReportCommand,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Aligned text table for one report.
    Text {
        #[arg(long)]
        input: PathBuf,
    },
    /// Metric and IF-error deltas of each --compare report against --base.
    Delta {
        #[arg(long)]
        base: PathBuf,
        #[arg(long, required = true)]
        compare: Vec<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn default_prompts_dir() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../core/prompts")
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: dialex_core::Error| e.to_string())
}

fn parse_policy(s: &str) -> CliResult<IfErrorPolicy> {
    s.parse()
        .map_err(|e: dialex_core::Error| CliError::Usage(e.to_string()))
}

// ------------------------------------------------------------------ helpers

fn require(path: &Path, stage: &'static str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Dependency {
            path: path.to_path_buf(),
            stage,
        })
    }
}

fn open(path: &Path, stage: &'static str) -> CliResult<BufReader<File>> {
    require(path, stage)?;
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Checks every input exists, naming the stage that produces it, then
/// starts the manifest.
fn start(
    stage: &str,
    config: serde_json::Value,
    inputs: &[(&Path, &'static str)],
) -> CliResult<ManifestBuilder> {
    for (path, upstream) in inputs {
        require(path, upstream)?;
    }
    let paths: Vec<&Path> = inputs.iter().map(|(p, _)| *p).collect();
    ManifestBuilder::new(stage, config, &paths)
}

fn emit(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_sentences(path: &Path) -> CliResult<Vec<SentenceRecord>> {
    let mut out = Vec::new();
    for (i, line) in open(path, "`dialex ingest --kind dialect`")?
        .lines()
        .enumerate()
    {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| dialex_core::Error::parse(i + 1, e.to_string()))?,
        );
    }
    Ok(out)
}

fn read_tokens(path: &Path) -> CliResult<Vec<TaggedToken>> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    Ok(
        ingest_tagged_corpus(open(path, "`dialex ingest --kind tagged`")?, &name)
            .collect::<Result<_, _>>()?,
    )
}

fn read_dataset(path: &Path) -> CliResult<Vec<DatasetItem>> {
    require(path, "`dialex export-tasks`")?;
    Ok(read_dataset_tsv(File::open(path)?)?)
}

fn write_dataset(path: &Path, items: &[DatasetItem]) -> CliResult<()> {
    let mut w = create(path)?;
    write_dataset_tsv(&mut w, items)?;
    w.flush()?;
    Ok(())
}

pub struct Context {
    pub config: AppConfig,
    pub seed_override: Option<u64>,
}

impl Context {
    fn pipeline(&self) -> PipelineConfig {
        let mut p = self.config.pipeline.clone();
        if let Some(seed) = self.seed_override {
            p.seed = seed;
        }
        p
    }

    fn seed(&self) -> u64 {
        self.pipeline().seed
    }

    fn endpoint(&self, args: &EndpointArgs) -> CliResult<ModelEndpointConfig> {
        let mut cfg = match (&args.endpoint, &args.base_url, &args.model) {
            (Some(name), _, _) => self.config.endpoint(name)?,
            (None, Some(url), Some(model)) => ModelEndpointConfig::new(url, model),
            _ => {
                return Err(CliError::Usage(
                    "pass --endpoint NAME or --base-url with --model".into(),
                ))
            }
        };
        if let Some(var) = &args.api_key_env {
            cfg.api_key_env = Some(var.clone());
        }
        if let Some(c) = args.concurrency {
            cfg.concurrency = c;
        }
        Ok(cfg)
    }
}

fn runtime() -> CliResult<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

// ------------------------------------------------------------------ commands

pub fn run(cli: Cli) -> CliResult<()> {
    let ctx = Context {
        config: AppConfig::load(cli.config.as_deref())?,
        seed_override: cli.seed,
    };
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Vocab(a) => vocab(&ctx, a),
        Command::Match(a) => match_cmd(&ctx, a),
        Command::ExportTasks(a) => export_tasks(a),
        Command::Serve(a) => serve(&ctx, a),
        Command::Adjudicate(a) => adjudicate(a),
        Command::Split(a) => split(&ctx, a),
        Command::Baselines(a) => baselines(&ctx, a),
        Command::LlmSelect(a) => llm_select(&ctx, a),
        Command::LlmRun(a) => llm_run(&ctx, a),
        Command::Score(a) => score(&ctx, a),
        Command::Report(a) => report(a),
    }
}

fn ingest(_ctx: &Context, a: IngestArgs) -> CliResult<()> {
    let name = a
        .name
        .clone()
        .or_else(|| {
            a.input
                .file_stem()
                .and_then(|s| s.to_str())
                .map(str::to_string)
        })
        .unwrap_or_else(|| "corpus".into());
    let manifest = start(
        "ingest",
        json!({"kind": format!("{:?}", a.kind).to_lowercase(), "format": a.format, "name": name}),
        &[(&a.input, "the raw corpus")],
    )?;
    let reader = BufReader::new(File::open(&a.input)?);
    let summary = match a.kind {
        CorpusKind::Dialect => {
            let format: DialectFormat = a.format.parse().map_err(CliError::Usage)?;
            let mut w = create(&a.out)?;
            let mut sentences = 0;
            let mut docs = std::collections::BTreeSet::new();
            for rec in ingest_dialect_corpus(reader, format, &name) {
                let rec = rec?;
                docs.insert(rec.doc_id.clone());
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n")?;
                sentences += 1;
            }
            w.flush()?;
            json!({"kind": "dialect", "documents": docs.len(), "sentences": sentences})
        }
        CorpusKind::Tagged => {
            let tokens: Vec<TaggedToken> =
                ingest_tagged_corpus(reader, &name).collect::<Result<_, _>>()?;
            let mut w = create(&a.out)?;
            write_tagged_corpus(&mut w, &tokens)?;
            w.flush()?;
            let lemmas: std::collections::HashSet<&str> =
                tokens.iter().map(|t| t.lemma.as_str()).collect();
            json!({"kind": "tagged", "tokens": tokens.len(), "lemmas": lemmas.len()})
        }
    };
    manifest.finish(&[&a.out])?;
    print_json(&summary)
}

fn vocab(ctx: &Context, a: VocabArgs) -> CliResult<()> {
    let mut config = ctx.pipeline();
    if let Some(n) = a.n {
        config.n = n;
    }
    config.validate()?;
    let manifest = start(
        "vocab",
        json!({"n": config.n, "fold_case_filter": a.fold_case_filter}),
        &[
            (&a.tokens, "`dialex ingest --kind tagged`"),
            (&a.sentences, "`dialex ingest --kind dialect`"),
        ],
    )?;
    let standard = build_standard_vocab(read_tokens(&a.tokens)?, config.n);
    let sentences = read_sentences(&a.sentences)?;
    let lemmas = standard.iter().map(|e| e.lemma.clone()).collect();
    let all = build_dialect_vocab(&sentences);
    let total = all.len();
    let dialect = filter_shared(all, &lemmas, a.fold_case_filter);

    let mut w = create(&a.out_standard)?;
    write_standard_tsv(&mut w, &standard)?;
    w.flush()?;
    let mut w = create(&a.out_dialect)?;
    write_dialect_tsv(&mut w, &dialect)?;
    w.flush()?;
    manifest.finish(&[&a.out_standard, &a.out_dialect])?;
    print_json(&json!({
        "standard_lemmas": standard.len(),
        "dialect_terms": dialect.len(),
        "shared_removed": total - dialect.len(),
    }))
}

fn match_cmd(ctx: &Context, a: MatchArgs) -> CliResult<()> {
    let mut config = ctx.pipeline();
    if let Some(k) = a.k {
        config.k = k;
    }
    if let Some(c) = a.contexts {
        config.c = c;
    }
    if let Some(w) = a.window {
        config.window = w;
    }
    config.validate()?;
    let index: IndexKind = a.index.parse().map_err(CliError::Usage)?;
    let manifest = start(
        "match",
        json!({"k": config.k, "c": config.c, "window": config.window, "seed": config.seed, "index": a.index}),
        &[
            (&a.standard_vocab, "`dialex vocab`"),
            (&a.dialect_vocab, "`dialex vocab`"),
            (&a.sentences, "`dialex ingest --kind dialect`"),
        ],
    )?;
    let standard = read_standard_tsv(open(&a.standard_vocab, "`dialex vocab`")?)?;
    let dialect = read_dialect_tsv(open(&a.dialect_vocab, "`dialex vocab`")?)?;
    let corpus = CorpusIndex::new(read_sentences(&a.sentences)?);
    let rows = build_candidate_table(&standard, &dialect, &corpus, &config, index)?;
    let mut w = create(&a.out)?;
    write_candidates_jsonl(&mut w, &rows)?;
    w.flush()?;
    manifest.finish(&[&a.out])?;
    print_json(&json!({
        "lemmas": rows.len(),
        "pairs": rows.iter().map(|r| r.candidates.len()).sum::<usize>(),
        "short_rows": rows.iter().filter(|r| r.short).count(),
    }))
}

fn export_tasks(a: ExportArgs) -> CliResult<()> {
    let manifest = start(
        "export-tasks",
        json!({}),
        &[(&a.candidates, "`dialex match`")],
    )?;
    let records = read_candidates_jsonl(open(&a.candidates, "`dialex match`")?)?;
    let items = items_from_candidates(&records);
    write_dataset(&a.out, &items)?;
    manifest.finish(&[&a.out])?;
    print_json(&json!({"pairs": items.len()}))
}

fn serve(ctx: &Context, a: ServeArgs) -> CliResult<()> {
    let records = read_candidates_jsonl(open(&a.candidates, "`dialex match`")?)?;
    let store = AnnotationStore::open(ServiceState::pair_ids(&records), &a.log)?;
    let state = Arc::new(ServiceState::new(&records, store, ctx.pipeline().c));
    let bind = a.bind.unwrap_or_else(|| ctx.config.service.bind.clone());
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await?;
        eprintln!(
            "annotation API listening on http://{}",
            listener.local_addr()?
        );
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}

fn adjudicate(a: AdjudicateArgs) -> CliResult<()> {
    let manifest = start(
        "adjudicate",
        json!({}),
        &[
            (&a.dataset, "`dialex export-tasks`"),
            (&a.log, "`dialex serve`"),
        ],
    )?;
    let mut items = read_dataset(&a.dataset)?;
    let store = AnnotationStore::open(items.iter().map(|i| i.pair_id.clone()), &a.log)?;
    adjudicate_items(&mut items, &store);
    write_dataset(&a.out, &items)?;
    manifest.finish(&[&a.out])?;
    let count = |g: Gold| items.iter().filter(|i| i.gold == g).count();
    print_json(&json!({
        "pairs": items.len(),
        "yes": count(Gold::Label(Label::Yes)),
        "inflected": count(Gold::Label(Label::Inflected)),
        "no": count(Gold::Label(Label::No)),
        "unresolved": count(Gold::Unresolved),
        "pending": count(Gold::Pending),
        "agreement": store.agreement(),
    }))
}

fn split(ctx: &Context, a: SplitArgs) -> CliResult<()> {
    let seed = ctx.seed();
    let manifest = start(
        "split",
        json!({"dev_size": a.dev_size, "seed": seed}),
        &[(&a.dataset, "`dialex export-tasks`")],
    )?;
    let mut items = read_dataset(&a.dataset)?;
    split_dev_test(&mut items, a.dev_size, seed)?;
    write_dataset(&a.out, &items)?;
    manifest.finish(&[&a.out])?;
    let dev = items.iter().filter(|i| i.split == Split::Dev).count();
    print_json(&json!({"dev": dev, "test": items.len() - dev}))
}

fn label_predictions(
    system: &str,
    items: &[&DatasetItem],
    f: impl FnMut(&DatasetItem) -> Label,
) -> Vec<Prediction> {
    let mut f = f;
    items
        .iter()
        .map(|item| {
            let label = f(item).as_str().to_string();
            Prediction {
                pair_id: item.pair_id.clone(),
                model: system.to_string(),
                template_id: 0,
                variant: String::new(),
                raw: Some(label.clone()),
                outcome: Some(label),
                latency_ms: None,
            }
        })
        .collect()
}

fn builtin_predictions(
    system: &str,
    items: &[&DatasetItem],
    seed: u64,
) -> CliResult<Vec<Prediction>> {
    Ok(match system {
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            label_predictions(system, items, |_| predict_random(&mut rng))
        }
        "ld-threshold" => label_predictions(system, items, predict_ld_threshold),
        "majority" => label_predictions(system, items, predict_majority),
        other => {
            return Err(CliError::Usage(format!(
                "unknown system `{other}`; built-ins are random, ld-threshold, majority (logreg needs `baselines`)"
            )))
        }
    })
}

fn judgment_map_strict(predictions: &[Prediction]) -> CliResult<HashMap<String, JudgmentOutcome>> {
    let pending: Vec<&str> = predictions
        .iter()
        .filter(|p| p.raw.is_none())
        .map(|p| p.pair_id.as_str())
        .collect();
    if !pending.is_empty() {
        return Err(CliError::Partial {
            pending: pending.len(),
        });
    }
    Ok(dialex_core::llm::judgment_map(predictions))
}

fn write_predictions(path: &Path, predictions: &[Prediction]) -> CliResult<()> {
    let mut w = create(path)?;
    write_predictions_jsonl(&mut w, predictions)?;
    Ok(())
}

fn baselines(ctx: &Context, a: BaselinesArgs) -> CliResult<()> {
    let policy = parse_policy(&a.if_policy)?;
    let seed = ctx.seed();
    let hp = ctx.config.baselines;
    let manifest = start(
        "baselines",
        json!({"seed": seed, "hyperparams": hp, "if_policy": a.if_policy}),
        &[(&a.dataset, "`dialex export-tasks`")],
    )?;
    let items = read_dataset(&a.dataset)?;
    let dev: Vec<DatasetItem> = items
        .iter()
        .filter(|i| i.split == Split::Dev)
        .cloned()
        .collect();
    let test: Vec<&DatasetItem> = items
        .iter()
        .filter(|i| i.split == Split::Test && i.gold.label().is_some())
        .collect();
    if dev.is_empty() || test.is_empty() {
        return Err(CliError::Dependency {
            path: a.dataset.clone(),
            stage: "`dialex split`",
        });
    }
    let test_owned: Vec<DatasetItem> = test.iter().map(|i| (*i).clone()).collect();
    let model = train_logreg(&dev, hp)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let model_path = a.out_dir.join("logreg.model.json");
    write_json(&model_path, &model)?;

    let mut outputs = vec![model_path.clone()];
    let mut summary = Vec::new();
    for system in ["random", "ld-threshold", "majority", "logreg"] {
        let preds = if system == "logreg" {
            label_predictions(system, &test, |i| model.predict(i))
        } else {
            builtin_predictions(system, &test, seed)?
        };
        let map = judgment_map_strict(&preds)?;
        let report = score_judgment(system, &map, &test_owned, policy)?;
        let pred_path = a.out_dir.join(format!("{system}.predictions.jsonl"));
        let report_path = a.out_dir.join(format!("{system}.report.json"));
        write_predictions(&pred_path, &preds)?;
        write_json(&report_path, &report)?;
        outputs.push(pred_path);
        outputs.push(report_path);
        summary.push(json!({
            "system": system,
            "macro_f1": report.overall,
            "per_pos_mean": report.per_pos_mean,
        }));
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    manifest.finish(&refs)?;
    print_json(&json!({"train_items": dev.len(), "test_items": test.len(), "systems": summary}))
}

fn select_items(items: &[DatasetItem], split: SplitFilter) -> Vec<DatasetItem> {
    items.iter().filter(|i| split.keep(i)).cloned().collect()
}

fn llm_select(ctx: &Context, a: LlmSelectArgs) -> CliResult<()> {
    let endpoint = ctx.endpoint(&a.endpoint)?;
    let manifest = start(
        "llm-select",
        json!({"task": a.task, "endpoint": endpoint, "prompts": a.prompts}),
        &[(&a.dataset, "`dialex export-tasks`")],
    )?;
    let items = read_dataset(&a.dataset)?;
    let dev = select_items(&items, SplitFilter::Dev);
    if dev.is_empty() {
        return Err(CliError::Dependency {
            path: a.dataset.clone(),
            stage: "`dialex split`",
        });
    }
    let pool = load_prompt_pool(&a.prompts)?;
    let base = pool.base(a.task);
    let client = ChatClient::new(endpoint)?;
    let mut cache = ResponseCache::open(&a.cache)?;
    let selection =
        runtime()?.block_on(select_best_prompt(&base, &dev, &client, a.task, &mut cache))?;
    write_json(&a.out, &selection)?;
    manifest.finish(&[&a.out])?;
    print_json(&json!({"best_id": selection.best_id, "templates": selection.scores.len()}))
}

fn llm_run(ctx: &Context, a: LlmRunArgs) -> CliResult<()> {
    let endpoint = ctx.endpoint(&a.endpoint)?;
    let variant: Variant = a
        .variant
        .parse()
        .map_err(|e: dialex_core::Error| CliError::Usage(e.to_string()))?;
    let manifest = start(
        "llm-run",
        json!({"task": a.task, "endpoint": endpoint, "template": a.template, "variant": a.variant,
               "split": format!("{:?}", a.split).to_lowercase()}),
        &[(&a.dataset, "`dialex export-tasks`")],
    )?;
    let items = read_dataset(&a.dataset)?;
    let selected = select_items(&items, a.split);
    let targets: Vec<&DatasetItem> = match a.task {
        Task::Judge => selected
            .iter()
            .filter(|i| i.gold.label().is_some())
            .collect(),
        Task::Translate => translation_slice(&selected),
    };
    let pool = load_prompt_pool(&a.prompts)?;
    let template = pool.get(a.task, a.template, variant).ok_or_else(|| {
        CliError::Usage(format!(
            "no {} template {} with variant {}",
            a.task, a.template, variant
        ))
    })?;
    let client = ChatClient::new(endpoint)?;
    let mut cache = ResponseCache::open(&a.cache)?;
    let run = runtime()?.block_on(run_task(a.task, &targets, template, &client, &mut cache))?;
    write_predictions(&a.out, &run.predictions)?;
    manifest.finish(&[&a.out])?;
    print_json(&json!({
        "items": run.predictions.len(),
        "status": run.status,
        "pending": run.pending.len(),
        "if_errors": run.if_errors,
        "cache_hits": run.cache_hits,
        "network_calls": run.network_calls,
    }))?;
    match run.status {
        RunStatus::Complete => Ok(()),
        RunStatus::Partial => Err(CliError::Partial {
            pending: run.pending.len(),
        }),
    }
}

fn score(ctx: &Context, a: ScoreArgs) -> CliResult<()> {
    let policy = parse_policy(&a.if_policy)?;
    let items = read_dataset(&a.dataset)?;
    let selected = select_items(&items, a.split);
    let mut inputs: Vec<(&Path, &'static str)> = vec![(&a.dataset, "`dialex export-tasks`")];
    if let Some(p) = &a.predictions {
        inputs.push((p, "`dialex llm-run`"));
    }
    let manifest = start(
        "score",
        json!({"task": a.task, "system": a.system, "split": format!("{:?}", a.split).to_lowercase(),
               "if_policy": a.if_policy, "seed": ctx.seed()}),
        &inputs,
    )?;
    let predictions = match (&a.predictions, &a.system) {
        (Some(path), _) => read_predictions_jsonl(open(path, "`dialex llm-run`")?)?,
        (None, Some(system)) if a.task == Task::Judge => {
            let refs: Vec<&DatasetItem> = selected
                .iter()
                .filter(|i| i.gold.label().is_some())
                .collect();
            builtin_predictions(system, &refs, ctx.seed())?
        }
        (None, Some(_)) => {
            return Err(CliError::Usage(
                "translation scoring needs --predictions".into(),
            ))
        }
        (None, None) => return Err(CliError::Usage("pass --system or --predictions".into())),
    };
    let system = a
        .system
        .clone()
        .or_else(|| predictions.first().map(|p| p.model.clone()))
        .unwrap_or_else(|| "unknown".into());
    let report: EvaluationReport = match a.task {
        Task::Judge => score_judgment(
            &system,
            &judgment_map_strict(&predictions)?,
            &selected,
            policy,
        )?,
        Task::Translate => {
            if predictions.iter().any(|p| p.raw.is_none()) {
                return Err(CliError::Partial {
                    pending: predictions.iter().filter(|p| p.raw.is_none()).count(),
                });
            }
            let map: HashMap<String, TranslationOutcome> =
                dialex_core::llm::translation_map(&predictions);
            score_translation(&system, &map, &translation_slice(&selected))?
        }
    };
    if let Some(dir) = &a.csv_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("per_pos.csv"), groups_csv(&report.per_pos, "pos"))?;
        std::fs::write(
            dir.join("per_ld.csv"),
            groups_csv(&report.per_ld, "distance"),
        )?;
        std::fs::write(
            dir.join("ld_histogram.csv"),
            ld_histogram_csv(&ld_histogram(&selected)),
        )?;
    }
    match &a.out {
        Some(out) => {
            write_json(out, &report)?;
            manifest.finish(&[out])?;
            emit(&render_text(&report))
        }
        None => print_json(&report),
    }
}

fn read_report(path: &Path) -> CliResult<EvaluationReport> {
    Ok(serde_json::from_reader(open(path, "`dialex score`")?)?)
}

fn report(a: ReportArgs) -> CliResult<()> {
    match a.command {
        ReportCommand::Text { input } => emit(&render_text(&read_report(&input)?)),
        ReportCommand::Delta {
            base,
            compare,
            csv,
            json,
        } => {
            let base_report = read_report(&base)?;
            let deltas = compare
                .iter()
                .map(|p| Ok(delta_report(&base_report, &read_report(p)?)?))
                .collect::<CliResult<Vec<_>>>()?;
            let mut text = format!(
                "{:<24} {:<24} {:>10} {:>12} {:>10}\n",
                "base", "compare", "d_metric", "d_pos_mean", "d_if_rate"
            );
            for d in &deltas {
                text += &format!(
                    "{:<24} {:<24} {:>+10.4} {:>+12.4} {:>+10.4}\n",
                    d.base_system,
                    d.compare_system,
                    d.delta_metric,
                    d.delta_per_pos_mean,
                    d.delta_if_error_rate
                );
            }
            emit(&text)?;
            if let Some(path) = csv {
                std::fs::write(path, deltas_csv(&deltas))?;
            }
            if let Some(path) = json {
                write_json(&path, &deltas)?;
            }
            Ok(())
        }
    }
}

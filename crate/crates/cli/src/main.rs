//! Command-line interface to the syntax-aware coreference resolver.
//!
//! One binary, six subcommands: `ingest` validates and normalizes JSONL
//! corpora, `build-graph` compiles constituent trees into typed graph dumps,
//! `train` fits a model and writes a checkpoint, `evaluate` scores a
//! checkpoint on a corpus and emits predictions, `score` compares two
//! cluster files, and `analyze` produces diagnostic breakdowns.
//!
//! Configuration comes from an optional JSON file plus repeatable
//! `--set key=value` overrides; unknown keys and invalid values are
//! rejected before any work starts. Every report artifact embeds the
//! configuration that produced it, and every subcommand is deterministic
//! for a fixed seed. Exit codes: 0 success, 2 configuration error, 3 data
//! error, 4 numeric failure.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coref_core::analysis::{
    breakdown_report, mention_filter, BreakdownReport, PhraseFilterSet, PronounLexicon,
};
use coref_core::config::{Config, ConfigError};
use coref_core::corpus::{read_jsonl, write_jsonl, CorpusError, Document};
use coref_core::metrics::{Cluster, MetricAccumulator, MetricsReport, Score};
use coref_core::model::{build_vocabs, CorefModel, ModelError};
use coref_core::syntax_graph::{build_graph, GraphOptions, SyntaxGraph};
use coref_core::tensor::TensorError;
use coref_core::train::{train, TrainReport};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numeric: {0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        match e {
            ModelError::Config(inner) => CliError::Config(inner.to_string()),
            ModelError::Numeric(inner) => CliError::Numeric(inner.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "coref",
    version,
    about = "Constituent-syntax-enhanced neural coreference resolver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration source shared by config-bearing subcommands.
#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration file; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. --set steps=500 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FilterLang {
    En,
    Zh,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a JSONL corpus and report its composition.
    Ingest {
        /// Input corpus (JSONL, one document per line).
        #[arg(long)]
        input: PathBuf,
        /// Write the validated corpus back out in normalized form.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the ingest report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Compile each document's constituent trees into a typed graph dump.
    BuildGraph {
        #[arg(long)]
        input: PathBuf,
        /// Write the graph dump as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        json: bool,
    },
    /// Train a model and write a checkpoint.
    Train {
        /// Training corpus (JSONL).
        #[arg(long)]
        train: PathBuf,
        /// Development corpus for periodic evaluation and early stopping.
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Where to write the trained checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Write the training report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a checkpoint on a corpus and emit predictions.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluation corpus with gold clusters (JSONL).
        #[arg(long)]
        input: PathBuf,
        /// Write predicted clusters as a JSONL corpus.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Write the evaluation report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Worker threads for document-parallel evaluation.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Score system clusters against gold clusters.
    Score {
        /// Gold corpus (JSONL).
        #[arg(long)]
        gold: PathBuf,
        /// System corpus (JSONL, clusters are the predictions).
        #[arg(long)]
        sys: PathBuf,
        /// Write the score report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        json: bool,
    },
    /// Break resolution quality down by mention class and length buckets.
    Analyze {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        sys: PathBuf,
        /// Take constituent trees from this corpus instead (matched by doc_key).
        #[arg(long)]
        trees: Option<PathBuf>,
        /// Apply the phrase-label mention filter for this language and
        /// report gold-mention retention.
        #[arg(long, value_enum)]
        filter: Option<FilterLang>,
        /// Write the analysis report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        json: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    // Non-finite values raised deep inside tensor ops arrive as panics
    // carrying a TensorError payload; keep the default hook quiet for those
    // so the user sees one clean error line instead of a backtrace banner.
    let default_hook = panic::take_hook();
    panic::set_hook(Box::new(move |info| {
        if info.payload().downcast_ref::<TensorError>().is_none() {
            default_hook(info);
        }
    }));
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| run(cli.command)));
    let code = match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(err)) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
        Err(payload) => match payload.downcast_ref::<TensorError>() {
            Some(err) => {
                eprintln!("error: numeric failure: {err}");
                4
            }
            None => panic::resume_unwind(payload),
        },
    };
    std::process::exit(code);
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { input, output, report, config, json } => {
            cmd_ingest(&input, output.as_deref(), report.as_deref(), &config, json)
        }
        Command::BuildGraph { input, output, config, json } => {
            cmd_build_graph(&input, output.as_deref(), &config, json)
        }
        Command::Train { train, dev, checkpoint, report, config, json } => {
            cmd_train(&train, dev.as_deref(), &checkpoint, report.as_deref(), &config, json)
        }
        Command::Evaluate { checkpoint, input, predictions, report, workers, json } => cmd_evaluate(
            &checkpoint,
            &input,
            predictions.as_deref(),
            report.as_deref(),
            workers,
            json,
        ),
        Command::Score { gold, sys, report, config, json } => {
            cmd_score(&gold, &sys, report.as_deref(), &config, json)
        }
        Command::Analyze { gold, sys, trees, filter, report, config, json } => cmd_analyze(
            &gold,
            &sys,
            trees.as_deref(),
            filter,
            report.as_deref(),
            &config,
            json,
        ),
    }
}

/// Resolve the effective configuration: defaults, then the file, then
/// `--set` overrides, then full validation.
fn resolve_config(args: &ConfigArgs) -> Result<Config, CliError> {
    let mut value = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            serde_json::from_str::<serde_json::Value>(&text).map_err(|e| {
                CliError::Config(format!("{} is not valid JSON: {e}", path.display()))
            })?
        }
        None => serde_json::to_value(Config::default())
            .expect("default configuration serializes"),
    };
    let map = value.as_object_mut().ok_or_else(|| {
        CliError::Config("configuration file must hold a JSON object".into())
    })?;
    for entry in &args.set {
        let (key, raw) = entry.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--set takes KEY=VALUE, got {entry:?}"))
        })?;
        // Values parse as JSON where possible (numbers, booleans, null),
        // falling back to a bare string.
        let parsed = serde_json::from_str::<serde_json::Value>(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        map.insert(key.to_string(), parsed);
    }
    let config: Config = serde_json::from_value(value)
        .map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Write a report artifact as pretty JSON with a trailing newline.
fn write_artifact<T: Serialize>(path: &Path, artifact: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(artifact)
        .map_err(|e| CliError::Data(format!("serializing report: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn print_json<T: Serialize>(artifact: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(artifact).expect("report serializes")
    );
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Serialize)]
struct IngestReport {
    config: Config,
    documents: usize,
    sentences: usize,
    tokens: usize,
    clusters: usize,
    mentions: usize,
    genres: Vec<String>,
}

fn cmd_ingest(
    input: &Path,
    output: Option<&Path>,
    report_path: Option<&Path>,
    config_args: &ConfigArgs,
    json: bool,
) -> Result<(), CliError> {
    let config = resolve_config(config_args)?;
    let docs = read_jsonl(input)?;
    let mut genres: Vec<String> = docs.iter().map(|d| d.genre.clone()).collect();
    genres.sort();
    genres.dedup();
    let report = IngestReport {
        config,
        documents: docs.len(),
        sentences: docs.iter().map(|d| d.sentences.len()).sum(),
        tokens: docs.iter().map(|d| d.n_tokens()).sum(),
        clusters: docs.iter().map(|d| d.clusters.len()).sum(),
        mentions: docs
            .iter()
            .map(|d| d.clusters.iter().map(|c| c.len()).sum::<usize>())
            .sum(),
        genres,
    };
    if let Some(path) = output {
        write_jsonl(path, &docs)?;
    }
    if let Some(path) = report_path {
        write_artifact(path, &report)?;
    }
    if json {
        print_json(&report);
    } else {
        println!(
            "{} documents, {} sentences, {} tokens, {} clusters, {} mentions",
            report.documents, report.sentences, report.tokens, report.clusters, report.mentions
        );
        println!("genres: {}", report.genres.join(" "));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// build-graph

#[derive(Serialize)]
struct GraphDump {
    config: Config,
    documents: Vec<DocumentGraph>,
}

#[derive(Serialize)]
struct DocumentGraph {
    doc_key: String,
    n_tokens: usize,
    n_constituents: usize,
    n_edges: usize,
    graph: SyntaxGraph,
}

fn cmd_build_graph(
    input: &Path,
    output: Option<&Path>,
    config_args: &ConfigArgs,
    json: bool,
) -> Result<(), CliError> {
    let config = resolve_config(config_args)?;
    let docs = read_jsonl(input)?;
    let options = GraphOptions { use_two_hop: !config.vanilla_tree };
    let mut documents = Vec::with_capacity(docs.len());
    for doc in &docs {
        let graph = build_graph(doc, options)?;
        documents.push(DocumentGraph {
            doc_key: doc.doc_key.clone(),
            n_tokens: graph.n_tokens,
            n_constituents: graph.n_constituents(),
            n_edges: graph.edges.len(),
            graph,
        });
    }
    let dump = GraphDump { config, documents };
    if let Some(path) = output {
        write_artifact(path, &dump)?;
    }
    if json {
        print_json(&dump);
    } else {
        for d in &dump.documents {
            println!(
                "{}: {} tokens, {} constituents, {} edges",
                d.doc_key, d.n_tokens, d.n_constituents, d.n_edges
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Serialize)]
struct TrainArtifact {
    config: Config,
    train_documents: usize,
    dev_documents: usize,
    label_vocab: Vec<String>,
    genre_vocab: Vec<String>,
    #[serde(flatten)]
    report: TrainReport,
}

fn cmd_train(
    train_path: &Path,
    dev_path: Option<&Path>,
    checkpoint: &Path,
    report_path: Option<&Path>,
    config_args: &ConfigArgs,
    json: bool,
) -> Result<(), CliError> {
    let config = resolve_config(config_args)?;
    let train_docs = read_jsonl(train_path)?;
    let dev_docs = match dev_path {
        Some(path) => read_jsonl(path)?,
        None => Vec::new(),
    };
    let (labels, genres) = build_vocabs(&train_docs)?;
    let mut model = CorefModel::new(config.clone(), labels, genres)?;
    let report = train(&mut model, &train_docs, &dev_docs, |line| eprintln!("{line}"))?;
    model.save(checkpoint)?;
    let artifact = TrainArtifact {
        config,
        train_documents: train_docs.len(),
        dev_documents: dev_docs.len(),
        label_vocab: model.label_vocab.clone(),
        genre_vocab: model.genre_vocab.clone(),
        report,
    };
    if let Some(path) = report_path {
        write_artifact(path, &artifact)?;
    }
    if json {
        print_json(&artifact);
    } else {
        println!(
            "trained {} steps, final loss {:.6}, checkpoint {}",
            artifact.report.steps_run,
            artifact.report.final_loss,
            checkpoint.display()
        );
        if let Some(eval) = artifact.report.evals.last() {
            println!("dev avg F1 {:.4} at step {}", eval.avg_f1, eval.step);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Serialize)]
struct EvaluateReport {
    config: Config,
    documents: usize,
    metrics: MetricsReport,
}

fn cmd_evaluate(
    checkpoint: &Path,
    input: &Path,
    predictions: Option<&Path>,
    report_path: Option<&Path>,
    workers: Option<usize>,
    json: bool,
) -> Result<(), CliError> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    let model = CorefModel::load(checkpoint)?;
    let docs = read_jsonl(input)?;
    let preps = docs
        .iter()
        .map(|d| model.prepare(d))
        .collect::<Result<Vec<_>, _>>()?;
    let (metrics, predicted) = model.evaluate_corpus(&preps);
    if let Some(path) = predictions {
        let out_docs: Vec<Document> = docs
            .iter()
            .zip(&predicted)
            .map(|(doc, clusters)| {
                let mut out = doc.clone();
                out.clusters = clusters.clone();
                out
            })
            .collect();
        write_jsonl(path, &out_docs)?;
    }
    let report = EvaluateReport {
        config: model.config.clone(),
        documents: docs.len(),
        metrics,
    };
    if let Some(path) = report_path {
        write_artifact(path, &report)?;
    }
    if json {
        print_json(&report);
    } else {
        print_metrics_table(&report.metrics);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// score

#[derive(Serialize)]
struct ScoreReport {
    config: Config,
    documents: usize,
    metrics: MetricsReport,
}

/// Pair system documents with gold documents by doc_key; the two corpora
/// must describe exactly the same documents.
fn align_by_key(gold: &[Document], sys: &[Document]) -> Result<Vec<Vec<Cluster>>, CliError> {
    let mut by_key: std::collections::HashMap<&str, &Document> =
        std::collections::HashMap::with_capacity(sys.len());
    for doc in sys {
        if by_key.insert(doc.doc_key.as_str(), doc).is_some() {
            return Err(CliError::Data(format!("duplicate doc_key {:?} in system file", doc.doc_key)));
        }
    }
    if sys.len() != gold.len() {
        return Err(CliError::Data(format!(
            "gold has {} documents but system has {}",
            gold.len(),
            sys.len()
        )));
    }
    gold.iter()
        .map(|doc| {
            by_key
                .get(doc.doc_key.as_str())
                .map(|sys_doc| sys_doc.clusters.clone())
                .ok_or_else(|| {
                    CliError::Data(format!("doc_key {:?} missing from system file", doc.doc_key))
                })
        })
        .collect()
}

fn cmd_score(
    gold_path: &Path,
    sys_path: &Path,
    report_path: Option<&Path>,
    config_args: &ConfigArgs,
    json: bool,
) -> Result<(), CliError> {
    let config = resolve_config(config_args)?;
    let gold = read_jsonl(gold_path)?;
    let sys = read_jsonl(sys_path)?;
    let predictions = align_by_key(&gold, &sys)?;
    let mut acc = MetricAccumulator::new();
    for (doc, clusters) in gold.iter().zip(&predictions) {
        acc.add(&doc.clusters, clusters);
    }
    let report = ScoreReport { config, documents: gold.len(), metrics: acc.report() };
    if let Some(path) = report_path {
        write_artifact(path, &report)?;
    }
    if json {
        print_json(&report);
    } else {
        print_metrics_table(&report.metrics);
    }
    Ok(())
}

fn print_metrics_table(metrics: &MetricsReport) {
    fn row(name: &str, score: &Score) {
        println!(
            "{name:<8} {:>8.4} {:>8.4} {:>8.4}",
            score.precision, score.recall, score.f1
        );
    }
    println!("{:<8} {:>8} {:>8} {:>8}", "metric", "P", "R", "F1");
    row("MUC", &metrics.muc);
    row("B3", &metrics.b_cubed);
    row("CEAF4", &metrics.ceaf_phi4);
    println!("Avg F1   {:.4}", metrics.avg_f1);
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Serialize)]
struct FilterReport {
    language: String,
    gold_mentions: usize,
    retained: usize,
    retention: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    config: Config,
    documents: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    filter: Option<FilterReport>,
    #[serde(flatten)]
    breakdown: BreakdownReport,
}

fn cmd_analyze(
    gold_path: &Path,
    sys_path: &Path,
    trees_path: Option<&Path>,
    filter: Option<FilterLang>,
    report_path: Option<&Path>,
    config_args: &ConfigArgs,
    json: bool,
) -> Result<(), CliError> {
    let config = resolve_config(config_args)?;
    let mut gold = read_jsonl(gold_path)?;
    let sys = read_jsonl(sys_path)?;
    let predictions = align_by_key(&gold, &sys)?;
    if let Some(path) = trees_path {
        let tree_docs = read_jsonl(path)?;
        let mut trees: std::collections::HashMap<&str, &Vec<String>> =
            std::collections::HashMap::with_capacity(tree_docs.len());
        for doc in &tree_docs {
            trees.insert(doc.doc_key.as_str(), &doc.trees);
        }
        for doc in &mut gold {
            match trees.get(doc.doc_key.as_str()) {
                Some(t) => doc.trees = (*t).clone(),
                None => {
                    return Err(CliError::Data(format!(
                        "doc_key {:?} missing from trees file",
                        doc.doc_key
                    )))
                }
            }
        }
        for doc in &gold {
            doc.validate("trees substitution")?;
        }
    }
    let (lexicon, filter_set) = match filter {
        Some(FilterLang::En) => (PronounLexicon::english(), Some(PhraseFilterSet::english())),
        Some(FilterLang::Zh) => (PronounLexicon::chinese(), Some(PhraseFilterSet::chinese())),
        None => (PronounLexicon::english(), None),
    };
    let filter_report = match &filter_set {
        Some(set) => {
            let mut total = 0usize;
            let mut retained = 0usize;
            for doc in &gold {
                let mentions: Vec<(usize, usize)> =
                    doc.clusters.iter().flatten().copied().collect();
                let kept = mention_filter(&mentions, doc, set)?;
                total += mentions.len();
                retained += kept.len();
            }
            Some(FilterReport {
                language: set.language.clone(),
                gold_mentions: total,
                retained,
                retention: if total == 0 { 0.0 } else { retained as f64 / total as f64 },
            })
        }
        None => None,
    };
    let breakdown = breakdown_report(&gold, &predictions, &lexicon)?;
    let report = AnalyzeReport {
        config,
        documents: gold.len(),
        filter: filter_report,
        breakdown,
    };
    if let Some(path) = report_path {
        write_artifact(path, &report)?;
    }
    if json {
        print_json(&report);
    } else {
        print_breakdown(&report);
    }
    Ok(())
}

fn print_breakdown(report: &AnalyzeReport) {
    if let Some(f) = &report.filter {
        println!(
            "filter {}: {}/{} gold mentions retained ({:.1}%)",
            f.language,
            f.retained,
            f.gold_mentions,
            100.0 * f.retention
        );
        println!();
    }
    println!("{:<8} {:>6} {:>9} {:>8} {:>8}", "class", "size", "detected", "MD", "RA");
    for row in &report.breakdown.classes {
        let ra = if row.ra_defined { format!("{:.4}", row.ra) } else { "-".to_string() };
        println!(
            "{:<8} {:>6} {:>9} {:>8.4} {:>8}",
            row.label, row.size, row.detected, row.md_recall, ra
        );
    }
    println!();
    println!("{:<8} {:>6} {:>9} {:>8} {:>8}", "length", "size", "detected", "MD", "RA");
    for row in &report.breakdown.mention_length {
        let ra = if row.ra_defined { format!("{:.4}", row.ra) } else { "-".to_string() };
        println!(
            "{:<8} {:>6} {:>9} {:>8.4} {:>8}",
            row.label, row.size, row.detected, row.md_recall, ra
        );
    }
    println!();
    println!("{:<10} {:>6} {:>8}", "doc len", "docs", "avg F1");
    for row in &report.breakdown.doc_length {
        println!("{:<10} {:>6} {:>8.4}", row.label, row.n_docs, row.avg_f1);
    }
}

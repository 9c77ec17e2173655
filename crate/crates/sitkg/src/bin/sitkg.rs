//! `sitkg`: situational knowledge graphs of household activities.
//!
//! Subcommands cover the full pipeline: synthesize or ingest recordings,
//! compute graph statistics, produce the repetition split, fit baselines,
//! train embedding models, evaluate any predictor, run the offline or live
//! LLM evaluation, and render saved reports.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use sitkg::baselines::{self, PredictionTask, Variant};
use sitkg::embed::{self, EmbeddingConfig, LossKind, ModelKind};
use sitkg::eval::{
    self, BaselinePredictor, EmbedPredictor, MetricsTable, RandomRanker, ReportFormat,
};
use sitkg::graph::SituationalGraph;
use sitkg::ingest::{self, AssociationPolicy};
use sitkg::llm::{self, ChatTransport, HttpTransport, LlmPredictor, MockTransport, PromptConfig};
use sitkg::runcfg::{KvConfig, RunRecord};
use sitkg::split::{self, Split};
use sitkg::stats;
use sitkg::synth::{self, SynthConfig};
use sitkg::tsv;
use sitkg::vocab::Vocabulary;

#[derive(Parser)]
#[command(name = "sitkg", version, about = "Situational knowledge graph toolkit")]
struct Cli {
    /// key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic recording corpus and its graph.
    Synth(SynthArgs),
    /// Parse annotation JSON files into a graph.
    Ingest(IngestArgs),
    /// Print the graph statistics panel.
    Stats(StatsArgs),
    /// Produce the repetition-based train/test split.
    Split(SplitArgs),
    /// Fit a frequency baseline and dump its table.
    Baseline(BaselineArgs),
    /// Train an embedding model and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a predictor on the held-out components.
    Evaluate(EvaluateArgs),
    /// Evaluate the LLM bridge (mock transport or live endpoint).
    LlmEval(LlmEvalArgs),
    /// Render a saved CSV report.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    takes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed shared template, no insertions or clutter.
    #[arg(long)]
    deterministic: bool,
    /// Association threshold used when building the graph.
    #[arg(long)]
    min_overlap: Option<f64>,
    /// Skip writing per-recording annotation JSON files.
    #[arg(long)]
    no_annotations: bool,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Annotation JSON files or directories containing them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    min_overlap: Option<f64>,
    /// Vocabulary file overriding the built-in label sets.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    graph: PathBuf,
    /// Print CSV instead of the aligned text panel.
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SplitArgs {
    graph: PathBuf,
    /// Held-out takes per (task, subject).
    #[arg(long)]
    test_takes: Option<usize>,
    /// Apply a published manifest instead of splitting by take.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Split manifest; fits on its train side (whole graph when omitted).
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    task: String,
    #[arg(long)]
    variant: String,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Table TSV destination (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct EmbedOpts {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    /// margin | softplus (defaults per model).
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    reg: Option<f64>,
    #[arg(long)]
    feature_dim: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    test_takes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[command(flatten)]
    embed: EmbedOpts,
    /// Checkpoint destination.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// b1 | b2 | transe | transr | distmult | complex | rotate |
    /// distmult-lit | complex-lit | llm | random
    #[arg(long)]
    predictor: String,
    #[arg(long)]
    task: String,
    #[arg(long)]
    graph: PathBuf,
    /// Split manifest (split-by-take when omitted).
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    test_takes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Reuse a trained checkpoint instead of training now.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Mock transport script for the llm predictor.
    #[arg(long)]
    mock: Option<PathBuf>,
    #[command(flatten)]
    embed: EmbedOpts,
    #[command(flatten)]
    llm: LlmOpts,
    /// Also write the metrics as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct LlmOpts {
    #[arg(long)]
    examples_per_class: Option<usize>,
    #[arg(long)]
    max_triples: Option<usize>,
    /// Endpoint model name.
    #[arg(long)]
    model_name: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Concurrent in-flight requests.
    #[arg(long)]
    in_flight: Option<usize>,
}

#[derive(Args)]
struct LlmEvalArgs {
    #[arg(long)]
    task: String,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    test_takes: Option<usize>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Mock transport script (omit to call the configured endpoint).
    #[arg(long)]
    mock: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV report produced by evaluate/llm-eval.
    input: PathBuf,
    /// text | csv | markdown
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Debug)]
enum AppError {
    Usage(String),
    Data(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Data(m) => m,
        }
    }
}

macro_rules! data_error_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for AppError {
            fn from(e: $ty) -> Self {
                AppError::Data(e.to_string())
            }
        })*
    };
}

data_error_from!(
    sitkg::graph::BuildError,
    sitkg::graph::GraphError,
    sitkg::ingest::IngestError,
    sitkg::synth::SynthError,
    sitkg::split::SplitError,
    sitkg::tsv::TsvError,
    sitkg::baselines::BaselineError,
    sitkg::embed::EmbedError,
    sitkg::eval::EvalError,
    sitkg::llm::LlmError,
    sitkg::vocab::VocabError,
    sitkg::runcfg::ConfigError,
    std::io::Error
);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = match &cli.config {
        Some(path) => match KvConfig::load(path) {
            Ok(config) => config,
            Err(e) => {
                eprintln!("sitkg: {e}");
                return ExitCode::from(1);
            }
        },
        None => KvConfig::default(),
    };
    match run(cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sitkg: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Flag value, then config-file value, then the built-in default.
fn pick<T: Copy + std::str::FromStr>(
    flag: Option<T>,
    config: &KvConfig,
    key: &str,
    default: T,
) -> Result<T, AppError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    config
        .get_parsed::<T>(key)
        .map_err(|e| AppError::Usage(e.to_string()))
        .map(|v| v.unwrap_or(default))
}

fn load_vocab(path: &Option<PathBuf>) -> Result<Vocabulary, AppError> {
    match path {
        Some(path) => Ok(Vocabulary::from_file(path)?),
        None => Ok(Vocabulary::default()),
    }
}

fn load_split(
    graph: &SituationalGraph,
    manifest_path: &Option<PathBuf>,
    test_takes: usize,
) -> Result<Split, AppError> {
    match manifest_path {
        Some(path) => {
            let manifest = split::read_manifest(path)?;
            Ok(split::apply_manifest(graph, manifest)?)
        }
        None => Ok(split::split_by_take(graph, test_takes)?),
    }
}

fn run(command: Command, config: &KvConfig) -> Result<(), AppError> {
    match command {
        Command::Synth(args) => run_synth(args, config),
        Command::Ingest(args) => run_ingest(args, config),
        Command::Stats(args) => run_stats(args, config),
        Command::Split(args) => run_split(args, config),
        Command::Baseline(args) => run_baseline(args, config),
        Command::Train(args) => run_train(args, config),
        Command::Evaluate(args) => run_evaluate(args, config),
        Command::LlmEval(args) => run_llm_eval(args, config),
        Command::Report(args) => run_report(args),
    }
}

fn run_synth(args: SynthArgs, config: &KvConfig) -> Result<(), AppError> {
    let tasks = pick(args.tasks, config, "tasks", 9)?;
    let subjects = pick(args.subjects, config, "subjects", 6)?;
    let takes = pick(args.takes, config, "takes", 10)?;
    let seed = pick(args.seed, config, "seed", 1u64)?;
    let min_overlap = pick(args.min_overlap, config, "min_overlap", 0.5)?;

    let mut synth_config = SynthConfig::new(tasks, subjects, takes);
    synth_config.deterministic = args.deterministic;
    let annotations = synth::generate_synthetic(&synth_config, seed)?;
    let policy = AssociationPolicy::new(min_overlap)?;
    let components = synth::components_from_annotations(&annotations, &policy);
    let vocab = Vocabulary::default();
    let graph = SituationalGraph::build_graph(&components, &vocab)?;

    std::fs::create_dir_all(&args.out)?;
    let mut record = RunRecord::new("synth");
    record.set("tasks", tasks);
    record.set("subjects", subjects);
    record.set("takes", takes);
    record.set("seed", seed);
    record.set("deterministic", args.deterministic);
    record.set("min_overlap", min_overlap);

    if !args.no_annotations {
        let annotation_dir = args.out.join("annotations");
        std::fs::create_dir_all(&annotation_dir)?;
        for annotation in &annotations {
            let name = format!(
                "{}_{}_{}.json",
                annotation.task, annotation.subject, annotation.take
            );
            let path = annotation_dir.join(name);
            std::fs::write(&path, ingest::render_recording(annotation))?;
            record.add_output(path);
        }
    }
    let graph_path = args.out.join("graph.tsv");
    tsv::write_graph(&graph, &graph_path)?;
    record.add_output(&graph_path);
    record.add_output(tsv::nodes_path(&graph_path));
    record.persist(&args.out)?;
    eprintln!(
        "sitkg: synthesized {} recordings ({} nodes, {} edges) into {}",
        annotations.len(),
        graph.node_count(),
        graph.triple_count(),
        args.out.display()
    );
    Ok(())
}

fn run_ingest(args: IngestArgs, config: &KvConfig) -> Result<(), AppError> {
    let min_overlap = pick(args.min_overlap, config, "min_overlap", 0.5)?;
    let policy = AssociationPolicy::new(min_overlap)?;
    let vocab = load_vocab(&args.vocab)?;

    let mut files: Vec<PathBuf> = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(input)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "json"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(AppError::Usage("no annotation files found".to_string()));
    }

    let mut annotations = Vec::with_capacity(files.len());
    let mut repair_count = 0usize;
    for file in &files {
        let text = std::fs::read_to_string(file)?;
        let (annotation, repairs) = ingest::parse_recording(&text)
            .map_err(|e| AppError::Data(format!("{}: {e}", file.display())))?;
        if !repairs.is_empty() {
            eprintln!(
                "sitkg: {}: applied {} repair(s)",
                file.display(),
                repairs.len()
            );
            repair_count += repairs.len();
        }
        annotations.push(annotation);
    }
    let components = synth::components_from_annotations(&annotations, &policy);
    let graph = SituationalGraph::build_graph(&components, &vocab)?;

    std::fs::create_dir_all(&args.out)?;
    let graph_path = args.out.join("graph.tsv");
    tsv::write_graph(&graph, &graph_path)?;
    let mut record = RunRecord::new("ingest");
    record.set("min_overlap", min_overlap);
    record.set("inputs", files.len());
    record.set("repairs", repair_count);
    record.add_output(&graph_path);
    record.add_output(tsv::nodes_path(&graph_path));
    record.persist(&args.out)?;
    eprintln!(
        "sitkg: ingested {} recordings into {} ({} nodes, {} edges)",
        annotations.len(),
        graph_path.display(),
        graph.node_count(),
        graph.triple_count()
    );
    Ok(())
}

fn run_stats(args: StatsArgs, config: &KvConfig) -> Result<(), AppError> {
    let threads = pick(args.threads, config, "threads", 1usize)?;
    let graph = tsv::read_graph(&args.graph)?;
    let stats = stats::compute_stats_threaded(&graph, threads);
    if args.csv {
        print!("{}", stats::render_csv(&stats));
    } else {
        print!("{}", stats::render_text(&stats));
    }
    Ok(())
}

fn run_split(args: SplitArgs, config: &KvConfig) -> Result<(), AppError> {
    let test_takes = pick(args.test_takes, config, "test_takes", 2usize)?;
    let graph = tsv::read_graph(&args.graph)?;
    let split = load_split(&graph, &args.manifest, test_takes)?;

    std::fs::create_dir_all(&args.out)?;
    let manifest_path = args.out.join("manifest.tsv");
    split::write_manifest(&split.manifest, &manifest_path)?;
    let train_path = args.out.join("train.tsv");
    tsv::write_graph(&split.train, &train_path)?;
    let test_keys: BTreeSet<_> = split.test_keys().cloned().collect();
    let test_graph = graph.subgraph(test_keys.iter());
    let test_path = args.out.join("test.tsv");
    tsv::write_graph(&test_graph, &test_path)?;

    let mut record = RunRecord::new("split");
    record.set("test_takes", test_takes);
    record.set(
        "manifest_source",
        args.manifest
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "split-by-take".to_string()),
    );
    for path in [&manifest_path, &train_path, &test_path] {
        record.add_output(path);
    }
    record.add_output(tsv::nodes_path(&train_path));
    record.add_output(tsv::nodes_path(&test_path));
    record.persist(&args.out)?;
    eprintln!(
        "sitkg: split {} recordings into {} train / {} test components",
        split.manifest.len(),
        split.manifest.len() - split.test_components.len(),
        split.test_components.len()
    );
    Ok(())
}

fn parse_task(s: &str) -> Result<PredictionTask, AppError> {
    PredictionTask::parse(s)
        .ok_or_else(|| AppError::Usage(format!("unknown task {s:?} (parent | next)")))
}

fn run_baseline(args: BaselineArgs, config: &KvConfig) -> Result<(), AppError> {
    let task = parse_task(&args.task)?;
    let variant = Variant::parse(&args.variant)
        .ok_or_else(|| AppError::Usage(format!("unknown variant {:?} (b1 | b2)", args.variant)))?;
    let vocab = load_vocab(&args.vocab)?;
    let graph = tsv::read_graph(&args.graph)?;
    let train = match &args.split {
        Some(path) => {
            let test_takes = pick(None, config, "test_takes", 2usize)?;
            load_split(&graph, &Some(path.clone()), test_takes)?.train
        }
        None => graph,
    };
    let table = match task {
        PredictionTask::Parent => baselines::fit_parent(&train, variant, &vocab)?,
        PredictionTask::Next => baselines::fit_next(&train, variant, &vocab)?,
    };
    match &args.out {
        Some(path) => {
            baselines::write_table(&table, path)?;
            eprintln!("sitkg: wrote {} table to {}", variant.name(), path.display());
        }
        None => print!("{}", baselines::render_table(&table)?),
    }
    Ok(())
}

fn embedding_config(
    model: ModelKind,
    opts: &EmbedOpts,
    seed: u64,
    threads: usize,
    config: &KvConfig,
) -> Result<EmbeddingConfig, AppError> {
    let mut out = EmbeddingConfig::new(model);
    out.dim = pick(opts.dim, config, "dim", out.dim)?;
    out.epochs = pick(opts.epochs, config, "epochs", out.epochs)?;
    out.learning_rate = pick(opts.lr, config, "lr", out.learning_rate)?;
    out.batch_size = pick(opts.batch, config, "batch", out.batch_size)?;
    out.negatives = pick(opts.negatives, config, "negatives", out.negatives)?;
    out.margin = pick(opts.margin, config, "margin", out.margin)?;
    out.reg_weight = pick(opts.reg, config, "reg", out.reg_weight)?;
    out.feature_dim = pick(opts.feature_dim, config, "feature_dim", out.feature_dim)?;
    out.seed = seed;
    out.threads = threads;
    let loss_name = match &opts.loss {
        Some(name) => Some(name.clone()),
        None => config.get("loss").map(str::to_string),
    };
    if let Some(name) = loss_name {
        out.loss = Some(
            LossKind::parse(&name)
                .ok_or_else(|| AppError::Usage(format!("unknown loss {name:?}")))?,
        );
    }
    Ok(out)
}

fn run_train(args: TrainArgs, config: &KvConfig) -> Result<(), AppError> {
    let model = ModelKind::parse(&args.model)
        .ok_or_else(|| AppError::Usage(format!("unknown model {:?}", args.model)))?;
    let seed = pick(args.seed, config, "seed", 0u64)?;
    let threads = pick(args.threads, config, "threads", 1usize)?;
    let test_takes = pick(args.test_takes, config, "test_takes", 2usize)?;
    let vocab = load_vocab(&args.vocab)?;
    let graph = tsv::read_graph(&args.graph)?;
    let train_graph = match &args.split {
        Some(_) => load_split(&graph, &args.split, test_takes)?.train,
        None => graph,
    };
    let embed_config = embedding_config(model, &args.embed, seed, threads, config)?;
    let projection = train_graph.label_projection();
    let outcome = embed::train(&projection, &embed_config, &vocab)?;
    embed::write_checkpoint(&outcome.params, &args.out)?;
    let first = outcome.epoch_losses.first().copied().unwrap_or(0.0);
    let last = outcome.epoch_losses.last().copied().unwrap_or(0.0);
    eprintln!(
        "sitkg: trained {} for {} epochs (mean pair loss {first:.4} -> {last:.4}), checkpoint {}",
        model.name(),
        embed_config.epochs,
        args.out.display()
    );
    Ok(())
}

fn build_llm_predictor(
    transport_script: &Option<PathBuf>,
    llm_opts: &LlmOpts,
    train: &SituationalGraph,
    manifest: &split::Manifest,
    vocab: &Vocabulary,
    config: &KvConfig,
) -> Result<LlmPredictor<Box<dyn ChatTransport>>, AppError> {
    let mut prompt_config = PromptConfig::default();
    prompt_config.examples_per_class = pick(
        llm_opts.examples_per_class,
        config,
        "examples_per_class",
        prompt_config.examples_per_class,
    )?;
    prompt_config.max_triples_per_example = pick(
        llm_opts.max_triples,
        config,
        "max_triples",
        prompt_config.max_triples_per_example,
    )?;
    prompt_config.temperature = pick(
        llm_opts.temperature,
        config,
        "temperature",
        prompt_config.temperature,
    )?;
    if let Some(ms) = llm_opts.timeout_ms {
        prompt_config.timeout = Duration::from_millis(ms);
    }
    if let Some(name) = &llm_opts.model_name {
        prompt_config.model = name.clone();
    } else if let Some(name) = config.get("model_name") {
        prompt_config.model = name.to_string();
    }
    if let Some(endpoint) = config.get("endpoint") {
        prompt_config.endpoint.get_or_insert(endpoint.to_string());
    }

    let transport: Box<dyn ChatTransport> = match transport_script {
        Some(path) => Box::new(MockTransport::from_file(path)?),
        None => Box::new(HttpTransport::new(&prompt_config)?),
    };

    let parent_examples =
        llm::select_parent_examples(train, manifest, prompt_config.examples_per_class, vocab)?;
    let next_examples =
        llm::select_next_examples(train, manifest, prompt_config.examples_per_class)?;
    let parent_fallback = baselines::fit_parent(train, Variant::B1, vocab)?.global_ranking();
    let next_fallback = baselines::fit_next(train, Variant::B1, vocab)?.global_ranking();
    Ok(LlmPredictor::new(
        transport,
        prompt_config,
        vocab.clone(),
        parent_examples,
        next_examples,
        parent_fallback,
        next_fallback,
    ))
}

fn print_and_save(table: &MetricsTable, out: &Option<PathBuf>) -> Result<(), AppError> {
    print!("{}", eval::report(table, ReportFormat::Text));
    if let Some(path) = out {
        eval::write_report(table, ReportFormat::Csv, path)?;
        eprintln!("sitkg: wrote report to {}", path.display());
    }
    Ok(())
}

fn run_evaluate(args: EvaluateArgs, config: &KvConfig) -> Result<(), AppError> {
    let task = parse_task(&args.task)?;
    let seed = pick(args.seed, config, "seed", 0u64)?;
    let threads = pick(args.threads, config, "threads", 1usize)?;
    let test_takes = pick(args.test_takes, config, "test_takes", 2usize)?;
    let vocab = load_vocab(&args.vocab)?;
    let graph = tsv::read_graph(&args.graph)?;
    let split = load_split(&graph, &args.split, test_takes)?;
    let (parent_queries, next_queries) = eval::build_queries(&split.test_components, &vocab)?;

    let row = match args.predictor.as_str() {
        "random" => {
            let ranker = RandomRanker { seed };
            match task {
                PredictionTask::Parent => eval::evaluate_parent(&ranker, &parent_queries, threads)?,
                PredictionTask::Next => eval::evaluate_next(&ranker, &next_queries, threads)?,
            }
        }
        "b1" | "b2" => {
            let variant = Variant::parse(&args.predictor).expect("checked");
            let table = match task {
                PredictionTask::Parent => baselines::fit_parent(&split.train, variant, &vocab)?,
                PredictionTask::Next => baselines::fit_next(&split.train, variant, &vocab)?,
            };
            let predictor = BaselinePredictor { table };
            match task {
                PredictionTask::Parent => {
                    eval::evaluate_parent(&predictor, &parent_queries, threads)?
                }
                PredictionTask::Next => eval::evaluate_next(&predictor, &next_queries, threads)?,
            }
        }
        "llm" => {
            let predictor = build_llm_predictor(
                &args.mock,
                &args.llm,
                &split.train,
                &split.manifest,
                &vocab,
                config,
            )?;
            let in_flight = pick(args.llm.in_flight, config, "in_flight", 1usize)?;
            let row = match task {
                PredictionTask::Parent => {
                    eval::evaluate_parent(&predictor, &parent_queries, in_flight)?
                }
                PredictionTask::Next => eval::evaluate_next(&predictor, &next_queries, in_flight)?,
            };
            report_unparseable(&predictor);
            row
        }
        name => {
            let model = ModelKind::parse(name)
                .ok_or_else(|| AppError::Usage(format!("unknown predictor {name:?}")))?;
            let params = match &args.checkpoint {
                Some(path) => embed::read_checkpoint(path)?,
                None => {
                    let embed_config = embedding_config(model, &args.embed, seed, 1, config)?;
                    eprintln!(
                        "sitkg: training {} on the split's train side (seed {seed})",
                        model.name()
                    );
                    embed::train(&split.train.label_projection(), &embed_config, &vocab)?.params
                }
            };
            let predictor = EmbedPredictor { params };
            match task {
                PredictionTask::Parent => {
                    eval::evaluate_parent(&predictor, &parent_queries, threads)?
                }
                PredictionTask::Next => eval::evaluate_next(&predictor, &next_queries, threads)?,
            }
        }
    };
    print_and_save(&MetricsTable { rows: vec![row] }, &args.out)
}

fn report_unparseable<T: ChatTransport>(predictor: &LlmPredictor<T>) {
    let unparseable = predictor.unparseable_answers();
    if !unparseable.is_empty() {
        eprintln!(
            "sitkg: {} answer(s) were unparseable and scored as incorrect",
            unparseable.len()
        );
    }
}

fn run_llm_eval(args: LlmEvalArgs, config: &KvConfig) -> Result<(), AppError> {
    let task = parse_task(&args.task)?;
    let test_takes = pick(args.test_takes, config, "test_takes", 2usize)?;
    let vocab = load_vocab(&args.vocab)?;
    let graph = tsv::read_graph(&args.graph)?;
    let split = load_split(&graph, &args.split, test_takes)?;
    let (parent_queries, next_queries) = eval::build_queries(&split.test_components, &vocab)?;
    let predictor = build_llm_predictor(
        &args.mock,
        &args.llm,
        &split.train,
        &split.manifest,
        &vocab,
        config,
    )?;
    let in_flight = pick(args.llm.in_flight, config, "in_flight", 1usize)?;
    let row = match task {
        PredictionTask::Parent => eval::evaluate_parent(&predictor, &parent_queries, in_flight)?,
        PredictionTask::Next => eval::evaluate_next(&predictor, &next_queries, in_flight)?,
    };
    report_unparseable(&predictor);
    print_and_save(&MetricsTable { rows: vec![row] }, &args.out)
}

fn run_report(args: ReportArgs) -> Result<(), AppError> {
    let format = ReportFormat::parse(&args.format)
        .ok_or_else(|| AppError::Usage(format!("unknown format {:?}", args.format)))?;
    let table = eval::read_csv(&args.input)?;
    print!("{}", eval::report(&table, format));
    Ok(())
}

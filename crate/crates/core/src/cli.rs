//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code:
//! 0 success, 1 usage, 2 input, 3 remote endpoint, 4 internal invariant.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde_json::json;

use crate::embedding::{EmbedderConfig, EmbedderKind};
use crate::error::{Error, Result};
use crate::eval::{self, read_accuracy_csv, stability_top_k};
use crate::export::{export_dot, export_graphml, ColorScale, Report, RunManifest};
use crate::generator::{GeneratorConfig, GeneratorKind};
use crate::kg::{
    connected_components, filter_graph, parse_qa_items, parse_triples, partition, select_top_components,
    FilterConfig, InputFormat, KnowledgeGraph, MatchMode, QaItem,
};
use crate::metrics::composite_similarity;
use crate::perturbation::PerturbationConfig;
use crate::pipeline::{explain, DesignMode, ExplainConfig, SurrogateMethod};
use crate::reasoning::{self, PrePromptConfig};
use crate::similarity::{KernelMode, SimilarityConfig, TextMetric};

pub const ENDPOINT_VAR: &str = "KGSMILE_ENDPOINT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_REMOTE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) => EXIT_USAGE,
        Error::Parse { .. }
        | Error::Field { .. }
        | Error::EmptyGraph(_)
        | Error::UnknownEntity(_)
        | Error::TooSmallGraph(_)
        | Error::Undefined(_)
        | Error::Io(_) => EXIT_INPUT,
        Error::Remote { .. } => EXIT_REMOTE,
        Error::Shape(_) | Error::Contract(_) | Error::Sample { .. } => EXIT_INTERNAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "kgrag-explain", version, about = "Perturbation-based attribution for graph-grounded question answering")]
struct Cli {
    /// TOML file with default flag values; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Write the run manifest, including wall times, to this file.
    #[arg(long, global = true, value_name = "FILE")]
    out_manifest: Option<PathBuf>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, filter and split a triple file.
    Ingest(IngestArgs),
    /// Attribute an answer to the triples it was generated from.
    Explain(ExplainArgs),
    /// Run an evaluation.
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
    /// Build an entity-linked reasoning chain and answer from it.
    Cot(CotArgs),
    /// Answer through rephrasing, refusal filtering and medoid selection.
    Preprompt(PrepromptArgs),
    /// Time the pipeline across perturbation counts.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Triples JSON file.
    #[arg(long, value_name = "FILE")]
    kg: PathBuf,
}

fn parse_metric(s: &str) -> Result<TextMetric> {
    s.parse()
}

fn parse_surrogate(s: &str) -> Result<SurrogateMethod> {
    s.parse()
}

fn parse_scale(s: &str) -> Result<ColorScale> {
    s.parse()
}

fn parse_kernel_mode(s: &str) -> Result<KernelMode> {
    match s {
        "distance" => Ok(KernelMode::Distance),
        "literal" => Ok(KernelMode::Literal),
        other => Err(Error::Config(format!("unknown kernel mode {other:?}"))),
    }
}

fn parse_design(s: &str) -> Result<DesignMode> {
    match s {
        "standard" => Ok(DesignMode::Standard),
        "literal" => Ok(DesignMode::Literal),
        other => Err(Error::Config(format!("unknown design mode {other:?}"))),
    }
}

fn parse_generator(s: &str) -> Result<GeneratorKind> {
    match s {
        "mock" => Ok(GeneratorKind::Mock),
        "remote" => Ok(GeneratorKind::Remote),
        other => Err(Error::Config(format!("unknown generator {other:?}"))),
    }
}

fn parse_embedder(s: &str) -> Result<EmbedderKind> {
    match s {
        "deterministic" => Ok(EmbedderKind::Deterministic),
        "remote" => Ok(EmbedderKind::Remote),
        other => Err(Error::Config(format!("unknown embedder {other:?}"))),
    }
}

#[derive(Debug, Args, Clone)]
struct PipelineArgs {
    /// Number of perturbed graphs.
    #[arg(long, default_value_t = 20)]
    perturbations: usize,
    /// Regression target: cosine, wd, inv_wd, inv_wd_cosine or wd_cosine.
    #[arg(long, default_value = "inv_wd", value_parser = parse_metric)]
    metric: TextMetric,
    /// wls or bayes.
    #[arg(long, default_value = "wls", value_parser = parse_surrogate)]
    surrogate: SurrogateMethod,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Seeds both the masks and the mock generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// mock or remote.
    #[arg(long, default_value = "mock", value_parser = parse_generator)]
    generator: GeneratorKind,
    /// Chat-completions URL; the KGSMILE_ENDPOINT variable overrides it.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// deterministic or remote.
    #[arg(long, default_value = "deterministic", value_parser = parse_embedder)]
    embedder: EmbedderKind,
    #[arg(long)]
    embedding_endpoint: Option<String>,
    #[arg(long)]
    embedding_model: Option<String>,
    #[arg(long, default_value_t = 256)]
    embedding_dim: usize,
    /// distance or literal.
    #[arg(long, default_value = "distance", value_parser = parse_kernel_mode)]
    kernel_mode: KernelMode,
    #[arg(long, default_value_t = 0.25)]
    kernel_sigma: f64,
    /// standard or literal.
    #[arg(long, default_value = "standard", value_parser = parse_design)]
    design: DesignMode,
    #[arg(long, default_value_t = 0.5)]
    removal_prob: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Per-request timeout for remote backends, in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

impl PipelineArgs {
    fn to_config(&self) -> Result<ExplainConfig> {
        let timeout = Duration::from_secs(self.timeout);
        let endpoint = std::env::var(ENDPOINT_VAR)
            .ok()
            .filter(|v| !v.trim().is_empty())
            .or_else(|| self.endpoint.clone());
        let generator = GeneratorConfig {
            kind: self.generator,
            temperature: self.temperature,
            model_id: self.model.clone(),
            endpoint,
            seed: self.seed,
            timeout,
            ..GeneratorConfig::default()
        };
        let embedder = EmbedderConfig {
            kind: self.embedder,
            dim: self.embedding_dim,
            endpoint: self.embedding_endpoint.clone(),
            model_id: self.embedding_model.clone(),
            timeout,
            ..EmbedderConfig::default()
        };
        let cfg = ExplainConfig {
            generator,
            embedder,
            perturbation: PerturbationConfig {
                num_samples: self.perturbations,
                removal_prob: self.removal_prob,
                seed: self.seed,
                workers: self.workers.max(1),
                ..PerturbationConfig::default()
            },
            similarity: SimilarityConfig {
                text_metric: self.metric,
                kernel_sigma: self.kernel_sigma,
                kernel_mode: self.kernel_mode,
                ..SimilarityConfig::default()
            },
            surrogate: self.surrogate,
            design_mode: self.design,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Comma-separated core filter terms.
    #[arg(long, value_delimiter = ',')]
    core_terms: Vec<String>,
    /// Comma-separated secondary filter terms.
    #[arg(long, value_delimiter = ',')]
    secondary_terms: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    min_score: f64,
    /// Match terms on word boundaries instead of substrings.
    #[arg(long)]
    whole_word: bool,
    /// Keep only the k largest connected components.
    #[arg(long)]
    top_components: Option<usize>,
    /// Report index ranges for this many equal parts.
    #[arg(long)]
    partitions: Option<usize>,
    /// Output triples JSON; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    question: String,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// sequential or diverging.
    #[arg(long, default_value = "sequential", value_parser = parse_scale)]
    color_scale: ColorScale,
    #[arg(long, value_name = "FILE")]
    out_dot: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out_graphml: Option<PathBuf>,
    /// JSON report; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out_report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum EvaluateCommand {
    /// Surrogate fit quality for every metric and surrogate.
    Fidelity(FidelityArgs),
    /// Node ROC-AUC against ground-truth nodes, per temperature.
    Accuracy(AccuracyArgs),
    /// Top-k Jaccard before and after injecting a triple.
    Stability(StabilityArgs),
    /// Spread of answers and attributions across repeated runs.
    Consistency(ConsistencyArgs),
    /// Pearson correlation of node AUC with external accuracies.
    Faithfulness(FaithfulnessArgs),
    /// Composite similarity of two answers.
    Composite(CompositeArgs),
}

#[derive(Debug, Args)]
struct FidelityArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    question: String,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_name = "FILE")]
    out_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AccuracyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// QA JSON with ground-truth nodes.
    #[arg(long, value_name = "FILE")]
    qa: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    temperatures: Vec<f64>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Per-question CSV: question_id,temperature,auc.
    #[arg(long, value_name = "FILE")]
    out_csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Single question; alternative to --qa.
    #[arg(long, conflicts_with = "qa")]
    question: Option<String>,
    #[arg(long, value_name = "FILE")]
    qa: Option<PathBuf>,
    /// Triple to inject, as subject|predicate|object.
    #[arg(long)]
    inject: String,
    /// Defaults to the ground-truth size, else 5.
    #[arg(long)]
    top_k: Option<usize>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_name = "FILE")]
    out_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConsistencyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    question: String,
    #[arg(long, default_value_t = 50)]
    runs: usize,
    /// Split the graph into this many index ranges and evaluate each.
    #[arg(long, default_value_t = 1)]
    parts: usize,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_name = "FILE")]
    out_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FaithfulnessArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_name = "FILE")]
    qa: PathBuf,
    /// CSV with header question_id,accuracy.
    #[arg(long, value_name = "FILE")]
    accuracy: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_name = "FILE")]
    out_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompositeArgs {
    #[arg(long, required_unless_present = "a_file")]
    a: Option<String>,
    #[arg(long, required_unless_present = "b_file")]
    b: Option<String>,
    #[arg(long, value_name = "FILE", conflicts_with = "a")]
    a_file: Option<PathBuf>,
    #[arg(long, value_name = "FILE", conflicts_with = "b")]
    b_file: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    embedding_dim: usize,
}

#[derive(Debug, Args)]
struct CotArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    question: String,
    #[arg(long, default_value_t = reasoning::DEFAULT_MAX_DEPTH)]
    max_depth: usize,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct PrepromptArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    question: String,
    #[arg(long, default_value_t = 5)]
    rephrases: usize,
    /// Extra refusal substrings, comma-separated.
    #[arg(long, value_delimiter = ',')]
    refusal_patterns: Vec<String>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    question: String,
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,60,120")]
    counts: Vec<usize>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

/// The clap command tree with repeated flags resolving to the last value.
fn command() -> clap::Command {
    fn overriding(cmd: clap::Command) -> clap::Command {
        cmd.args_override_self(true).mut_subcommands(overriding)
    }
    overriding(Cli::command())
}

fn toml_to_arg(value: &toml::Value) -> Option<String> {
    match value {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Array(items) => Some(
            items
                .iter()
                .filter_map(toml_to_arg)
                .collect::<Vec<_>>()
                .join(","),
        ),
        _ => None,
    }
}

/// Inserts `--key value` pairs from a TOML file right after the subcommand
/// path, so explicit flags that follow override them. Top-level keys apply
/// to every subcommand that accepts them; a `[explain]`-style table applies
/// to that subcommand only.
fn inject_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let path = strs.iter().enumerate().find_map(|(i, a)| {
        a.strip_prefix("--config=")
            .map(str::to_owned)
            .or_else(|| (a == "--config").then(|| strs.get(i + 1).cloned()).flatten())
    });
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path)?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        offset: e.span().map_or(0, |s| s.start),
        message: format!("{path}: {}", e.message()),
    })?;

    let root = command();
    let mut leaf = &root;
    let mut names = Vec::new();
    let mut insert_at = 1;
    for (i, a) in strs.iter().enumerate().skip(1) {
        if let Some(sub) = leaf.find_subcommand(a) {
            leaf = sub;
            names.push(a.clone());
            insert_at = i + 1;
        }
    }
    if names.is_empty() {
        return Ok(argv);
    }

    let accepts = |key: &str| leaf.get_arguments().any(|arg| arg.get_long() == Some(key));
    let mut extra: Vec<OsString> = Vec::new();
    let mut push = |key: &str, value: &toml::Value| {
        let flag = key.replace('_', "-");
        if !accepts(&flag) {
            return;
        }
        match value {
            toml::Value::Boolean(true) => extra.push(format!("--{flag}").into()),
            toml::Value::Boolean(false) => {}
            other => {
                if let Some(v) = toml_to_arg(other) {
                    extra.push(format!("--{flag}").into());
                    extra.push(v.into());
                }
            }
        }
    };
    for (key, value) in &table {
        if !value.is_table() {
            push(key, value);
        }
    }
    for name in &names {
        if let Some(toml::Value::Table(section)) = table.get(name) {
            for (key, value) in section {
                push(key, value);
            }
        }
    }
    let mut out = argv;
    out.splice(insert_at..insert_at, extra);
    Ok(out)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match inject_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: config file: {e}");
            return exit_code(&e);
        }
    };
    let cli = match command()
        .try_get_matches_from(argv)
        .and_then(|m: ArgMatches| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn read_graph(path: &Path) -> Result<KnowledgeGraph> {
    let bytes = fs::read(path)?;
    parse_triples(&bytes, InputFormat::TriplesJson)
}

fn read_qa(path: &Path) -> Result<Vec<QaItem>> {
    parse_qa_items(&fs::read(path)?)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn json_bytes(value: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Contract(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn seeds(cfg: &ExplainConfig) -> BTreeMap<String, u64> {
    BTreeMap::from([
        ("generator".to_owned(), cfg.generator.seed),
        ("perturbation".to_owned(), cfg.perturbation.seed),
    ])
}

fn finish_manifest(cli: &Cli, manifest: &mut RunManifest) -> Result<()> {
    manifest.finish();
    if let Some(path) = &cli.out_manifest {
        fs::write(path, manifest.to_json()?)?;
    }
    log::info!("wall times\n{}", manifest.timing_table());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Explain(a) => explain_cmd(cli, a),
        Command::Evaluate(e) => match e {
            EvaluateCommand::Fidelity(a) => fidelity_cmd(cli, a),
            EvaluateCommand::Accuracy(a) => accuracy_cmd(cli, a),
            EvaluateCommand::Stability(a) => stability_cmd(cli, a),
            EvaluateCommand::Consistency(a) => consistency_cmd(cli, a),
            EvaluateCommand::Faithfulness(a) => faithfulness_cmd(cli, a),
            EvaluateCommand::Composite(a) => composite_cmd(a),
        },
        Command::Cot(a) => cot_cmd(a),
        Command::Preprompt(a) => preprompt_cmd(a),
        Command::Bench(a) => bench_cmd(cli, a),
    }
}

fn ingest(cli: &Cli, a: &IngestArgs) -> Result<()> {
    let t0 = Instant::now();
    let mut manifest = RunManifest::start(json!({ "command": "ingest" }), BTreeMap::new());
    let mut kg = read_graph(&a.graph.kg)?;
    eprintln!(
        "parsed {} triples, {} entities ({} duplicates dropped)",
        kg.len(),
        kg.entities().len(),
        kg.duplicates_dropped()
    );
    if !a.core_terms.is_empty() || !a.secondary_terms.is_empty() {
        let mode = if a.whole_word { MatchMode::WholeWord } else { MatchMode::Substring };
        let cfg = FilterConfig::new(&a.core_terms, &a.secondary_terms)
            .with_min_score(a.min_score)
            .with_match_mode(mode);
        kg = filter_graph(&kg, &cfg)?;
        eprintln!("filter kept {} triples", kg.len());
    }
    let components = connected_components(&kg);
    eprintln!("{} connected component(s)", components.len());
    if let Some(k) = a.top_components {
        kg = select_top_components(&components, k)?;
        eprintln!("top {k} component(s) hold {} triples", kg.len());
    }
    if let Some(parts) = a.partitions {
        for p in partition(&kg, parts)? {
            eprintln!("part {}: triples {}..{}", p.part_id, p.range.start, p.range.end);
        }
    }
    emit(a.out.as_deref(), (kg.to_triples_json() + "\n").as_bytes())?;
    manifest.record("ingest", t0.elapsed());
    finish_manifest(cli, &mut manifest)
}

fn explain_cmd(cli: &Cli, a: &ExplainArgs) -> Result<()> {
    let cfg = a.pipeline.to_config()?;
    let mut manifest = RunManifest::start(cfg.snapshot(), seeds(&cfg));
    let t0 = Instant::now();
    let kg = read_graph(&a.graph.kg)?;
    manifest.record("ingest", t0.elapsed());

    let ex = explain(&kg, &a.question, &cfg)?;
    manifest.record("perturb_generate", ex.timings.perturb_generate);
    manifest.record("fit", ex.timings.fit);

    let t1 = Instant::now();
    let report = Report::new(&manifest).explanation(&kg, &a.question, &ex)?;
    if let Some(p) = &a.out_dot {
        fs::write(p, export_dot(&kg, &ex.report, a.color_scale)?)?;
    }
    if let Some(p) = &a.out_graphml {
        fs::write(p, export_graphml(&kg, &ex.report)?)?;
    }
    emit(a.out_report.as_deref(), &report.to_bytes()?)?;
    manifest.record("evaluate", ex.timings.evaluate + t1.elapsed());
    finish_manifest(cli, &mut manifest)
}

fn fidelity_cmd(cli: &Cli, a: &FidelityArgs) -> Result<()> {
    let base = a.pipeline.to_config()?;
    let mut manifest = RunManifest::start(base.snapshot(), seeds(&base));
    let kg = read_graph(&a.graph.kg)?;
    let mut rows = Vec::new();
    println!("{:<14} {:<15} {:>12} {:>12} {:>12}", "metric", "surrogate", "r2w", "adj_r2w", "weighted_l2");
    for metric in TextMetric::ALL {
        for method in [SurrogateMethod::Wls, SurrogateMethod::BayesianRidge] {
            let mut cfg = base.clone();
            cfg.similarity.text_metric = metric;
            cfg.surrogate = method;
            let ex = explain(&kg, &a.question, &cfg)?;
            manifest.record(&format!("{metric}/{method}"), ex.timings.perturb_generate + ex.timings.fit);
            let f = &ex.fit.fidelity;
            let show = |v: Option<f64>| v.map_or("undefined".to_owned(), |x| format!("{x:.8}"));
            println!(
                "{:<14} {:<15} {:>12} {:>12} {:>12.3e}",
                metric.name(),
                method.to_string(),
                show(f.r2w),
                show(f.adj_r2w),
                f.weighted_l2
            );
            rows.push(json!({
                "metric": metric.name(),
                "surrogate": method,
                "metrics": crate::export::fidelity_metrics(f),
            }));
        }
    }
    if let Some(p) = &a.out_report {
        let report = Report::new(&manifest).section("fidelity", rows)?;
        fs::write(p, report.to_bytes()?)?;
    }
    finish_manifest(cli, &mut manifest)
}

fn accuracy_cmd(cli: &Cli, a: &AccuracyArgs) -> Result<()> {
    let cfg = a.pipeline.to_config()?;
    let mut manifest = RunManifest::start(cfg.snapshot(), seeds(&cfg));
    let kg = read_graph(&a.graph.kg)?;
    let items = read_qa(&a.qa)?;
    let t0 = Instant::now();
    let report = eval::accuracy(&kg, &items, &a.temperatures, &cfg)?;
    manifest.record("evaluate", t0.elapsed());
    for t in &report.temperatures {
        match t.mean_auc {
            Some(m) => println!("temperature {}: mean AUC {m:.4}", t.temperature),
            None => println!("temperature {}: mean AUC undefined", t.temperature),
        }
    }
    if let Some(p) = &a.out_csv {
        let mut w = csv::Writer::from_path(p).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["question_id", "temperature", "auc"]).map_err(io)?;
        for t in &report.temperatures {
            for (i, q) in t.per_question.iter().enumerate() {
                let auc = q.auc.map_or(String::new(), |v| v.to_string());
                w.write_record([i.to_string(), t.temperature.to_string(), auc]).map_err(io)?;
            }
        }
        w.flush()?;
    }
    if let Some(p) = &a.out_report {
        fs::write(p, Report::new(&manifest).section("accuracy", &report)?.to_bytes()?)?;
    }
    finish_manifest(cli, &mut manifest)
}

fn parse_inject(s: &str) -> Result<(String, String, String)> {
    let parts: Vec<&str> = s.split('|').collect();
    match parts.as_slice() {
        [subject, predicate, object] => Ok((subject.to_string(), predicate.to_string(), object.to_string())),
        _ => Err(Error::Config(format!("--inject expects subject|predicate|object, got {s:?}"))),
    }
}

fn stability_cmd(cli: &Cli, a: &StabilityArgs) -> Result<()> {
    let cfg = a.pipeline.to_config()?;
    let mut manifest = RunManifest::start(cfg.snapshot(), seeds(&cfg));
    let kg = read_graph(&a.graph.kg)?;
    let items = match (&a.question, &a.qa) {
        (Some(q), _) => vec![QaItem::new(q.clone())],
        (None, Some(path)) => read_qa(path)?,
        (None, None) => return Err(Error::Config("stability needs --question or --qa".into())),
    };
    let (s, p, o) = parse_inject(&a.inject)?;
    let t0 = Instant::now();
    let mut reports = Vec::new();
    for item in &items {
        let k = a.top_k.unwrap_or_else(|| stability_top_k(Some(item)));
        let r = eval::stability_run(&kg, &item.question, (&s, &p, &o), &cfg, k)?;
        println!("{:.4}  {}", r.jaccard, item.question);
        reports.push(r);
    }
    manifest.record("evaluate", t0.elapsed());
    if let Some(path) = &a.out_report {
        let jaccards: Vec<f64> = reports.iter().map(|r| r.jaccard).collect();
        let mean = jaccards.iter().sum::<f64>() / jaccards.len().max(1) as f64;
        let report = Report::new(&manifest)
            .section("stability", &reports)?
            .metric("jaccard", Some(mean));
        fs::write(path, report.to_bytes()?)?;
    }
    finish_manifest(cli, &mut manifest)
}

fn consistency_cmd(cli: &Cli, a: &ConsistencyArgs) -> Result<()> {
    let cfg = a.pipeline.to_config()?;
    let mut manifest = RunManifest::start(cfg.snapshot(), seeds(&cfg));
    let kg = read_graph(&a.graph.kg)?;
    let parts: Vec<KnowledgeGraph> = partition(&kg, a.parts)?
        .into_iter()
        .map(|p| kg.subgraph(p.range))
        .collect();
    let t0 = Instant::now();
    let report = eval::consistency(&parts, &a.question, a.runs, &cfg)?;
    manifest.record("evaluate", t0.elapsed());
    for p in &report.parts {
        println!(
            "part {}: answer cosine std {:.6e}, max attribution std {:.6e}",
            p.part_id, p.answer_cosine_std, p.max_attribution_std
        );
    }
    emit(
        a.out_report.as_deref(),
        &Report::new(&manifest).section("consistency", &report)?.to_bytes()?,
    )?;
    finish_manifest(cli, &mut manifest)
}

fn faithfulness_cmd(cli: &Cli, a: &FaithfulnessArgs) -> Result<()> {
    let cfg = a.pipeline.to_config()?;
    let mut manifest = RunManifest::start(cfg.snapshot(), seeds(&cfg));
    let kg = read_graph(&a.graph.kg)?;
    let items = read_qa(&a.qa)?;
    let rows = read_accuracy_csv(&fs::read(&a.accuracy)?)?;
    let t0 = Instant::now();
    let acc = eval::accuracy(&kg, &items, &[cfg.generator.temperature], &cfg)?;
    let quality: Vec<(String, Option<f64>)> = acc.temperatures[0]
        .per_question
        .iter()
        .map(|q| (q.question.clone(), q.auc))
        .collect();
    let report = eval::faithfulness(&quality, &rows)?;
    manifest.record("evaluate", t0.elapsed());
    match report.pearson {
        Some(r) => println!("pearson r = {r:.6} over {} questions", report.pairs.len()),
        None => println!(
            "pearson r undefined over {} questions: {}",
            report.pairs.len(),
            report.note.as_deref().unwrap_or("")
        ),
    }
    emit(
        a.out_report.as_deref(),
        &Report::new(&manifest)
            .section("faithfulness", &report)?
            .metric("pearson", report.pearson)
            .to_bytes()?,
    )?;
    finish_manifest(cli, &mut manifest)
}

fn composite_cmd(a: &CompositeArgs) -> Result<()> {
    let text = |inline: &Option<String>, file: &Option<PathBuf>| -> Result<String> {
        match (inline, file) {
            (Some(t), _) => Ok(t.clone()),
            (None, Some(p)) => Ok(fs::read_to_string(p)?),
            (None, None) => Err(Error::Config("missing answer text".into())),
        }
    };
    let embedder = crate::embedding::Embedder::deterministic(a.embedding_dim);
    let result = composite_similarity(&text(&a.a, &a.a_file)?, &text(&a.b, &a.b_file)?, &embedder)?;
    emit(None, &json_bytes(&result)?)
}

fn cot_cmd(a: &CotArgs) -> Result<()> {
    let cfg = a.pipeline.to_config()?;
    let kg = read_graph(&a.graph.kg)?;
    let (entities, relations) = reasoning::extract_entities_relations(&a.question, &kg);
    let chain = reasoning::generate_chain_of_thought(&kg, &a.question, a.max_depth);
    chain.validate(&kg)?;
    let prompt = reasoning::format_triples_for_prompt(&chain);
    let context = if chain.is_empty() {
        kg.clone()
    } else {
        KnowledgeGraph::from_facts(
            chain
                .triples
                .iter()
                .map(|t| (t.subject.clone(), t.predicate.clone(), t.object.clone())),
        )
    };
    let mut gen_cfg = cfg.generator.clone();
    gen_cfg.preamble = Some(prompt.clone());
    let answer = gen_cfg.build()?.generate(&a.question, &context)?;
    emit(
        None,
        &json_bytes(&json!({
            "entities": entities,
            "relations": relations,
            "chain": chain,
            "prompt": prompt,
            "answer": answer.text,
        }))?,
    )
}

fn preprompt_cmd(a: &PrepromptArgs) -> Result<()> {
    let cfg = a.pipeline.to_config()?;
    let kg = read_graph(&a.graph.kg)?;
    let mut pp = PrePromptConfig {
        num_rephrases: a.rephrases,
        ..PrePromptConfig::default()
    };
    pp.refusal_patterns.extend(a.refusal_patterns.iter().cloned());
    let out = reasoning::preprompt_answer(&a.question, &kg, &cfg.generator, &cfg.embedder, &pp)?;
    emit(
        None,
        &json_bytes(&json!({
            "variants": out.variants,
            "kept": out.kept,
            "dropped": out.dropped,
            "chosen_variant": out.chosen_variant,
            "answer": out.final_answer.text,
        }))?,
    )
}

fn bench_cmd(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let base = a.pipeline.to_config()?;
    let mut manifest = RunManifest::start(base.snapshot(), seeds(&base));
    let kg = read_graph(&a.graph.kg)?;
    println!("{:>13} {:>10} {:>12} {:>12}", "perturbations", "seconds", "r2w", "weighted_l2");
    for &count in &a.counts {
        let mut cfg = base.clone();
        cfg.perturbation.num_samples = count;
        let t0 = Instant::now();
        let ex = explain(&kg, &a.question, &cfg)?;
        let elapsed = t0.elapsed();
        manifest.record(&format!("perturbations={count}"), elapsed);
        let r2w = ex.fit.fidelity.r2w.map_or("undefined".to_owned(), |v| format!("{v:.8}"));
        println!(
            "{count:>13} {:>10.4} {r2w:>12} {:>12.3e}",
            elapsed.as_secs_f64(),
            ex.fit.fidelity.weighted_l2
        );
    }
    finish_manifest(cli, &mut manifest)
}

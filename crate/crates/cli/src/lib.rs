//! The `synspace` command: generate → build → classify → tta → analyze, plus
//! synthetic benchmarks and persistence dumps.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, bad config
//! values), 2 on data errors (unreadable or inconsistent inputs).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use synspace::analysis::{
    compare_populations, load_groups, CompactnessReport, PopulationComparison,
};
use synspace::classifier::{build_catalog, predict, ClassCatalog, DirectoryProvider, EvalReport};
use synspace::embedding::EmbeddingSet;
use synspace::format::load_embeddings;
use synspace::llm::{DecodingParams, LlmClient};
use synspace::synth::{generate as synth_generate, SynthConfig};
use synspace::textgen::{
    combine, load_lexicon_cache, render_descriptor_prompt, render_synonym_prompt,
    save_lexicon_cache, ClassLexicon, LexiconMap,
};
use synspace::topology::{build_similarity_graph, persistence_0d, CoreMode};
use synspace::tta::{episode_label, run_episode, EpisodeOutcome};
use synspace::{MetricKind, PipelineConfig};

mod output;

static QUIET: AtomicBool = AtomicBool::new(false);

macro_rules! say {
    ($($arg:tt)*) => {
        if !QUIET.load(Ordering::Relaxed) {
            println!($($arg)*);
        }
    };
}

use output::{hash_file, write_report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] synspace::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(
                synspace::Error::InvalidParameter { .. } | synspace::Error::InvalidRate(_),
            ) => 1,
            CliError::Data(_) => 2,
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "synspace",
    version,
    about = "Zero-shot classification with synonymous semantic spaces"
)]
struct Cli {
    /// Suppress progress summaries on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Query (or replay from cache) synonyms and descriptors into a lexicon file.
    Generate(GenerateArgs),
    /// Filter each class's text embeddings and write a catalog.
    Build(BuildArgs),
    /// Classify labeled query embeddings against a catalog.
    Classify(ClassifyArgs),
    /// One-step test-time adaptation over a directory of view stacks.
    Tta(TtaArgs),
    /// Per-group compactness of embedding sets.
    Analyze(AnalyzeArgs),
    /// Write a deterministic synthetic benchmark.
    Synth(SynthArgs),
    /// Write persistence bars and merges of every class in a catalog.
    DumpPersistence(DumpArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Class names, one per line.
    #[arg(long)]
    classes: PathBuf,
    /// Dataset name used in the synonym prompt.
    #[arg(long)]
    dataset: String,
    /// Output lexicon file. Classes already present are kept unchanged.
    #[arg(long)]
    lexicon: PathBuf,
    /// Response cache; defaults to `<lexicon>.llm-cache.json`.
    #[arg(long)]
    llm_cache: Option<PathBuf>,
    /// Live endpoint. Without it every prompt must already be cached.
    #[arg(long)]
    llm_endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[arg(long)]
    llm_key_env: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    #[arg(long, default_value_t = 0.7)]
    temperature: f64,
    #[arg(long)]
    max_synonyms: Option<usize>,
    #[arg(long)]
    max_descriptors: Option<usize>,
    /// Also write the rendered texts of class k to `<dir>/<k>.txt`.
    #[arg(long)]
    texts_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EpsilonMode {
    Fixed,
    Auto,
    /// No filtering (ablation).
    None,
}

#[derive(Args, Debug, Default)]
struct MetricArgs {
    #[arg(long, value_parser = parse_metric)]
    metric: Option<MetricKind>,
    #[arg(long)]
    local_n: Option<usize>,
    #[arg(long)]
    subspace_d: Option<usize>,
}

fn parse_metric(s: &str) -> Result<MetricKind, String> {
    s.parse().map_err(|e: synspace::Error| e.to_string())
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Directory holding `<class_id>.s3em`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Output catalog.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, value_enum)]
    epsilon_mode: Option<EpsilonMode>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long)]
    dump_persistence: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    metric: MetricArgs,
}

#[derive(Args, Debug)]
struct TtaArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Directory of `.s3em` files, one per sample; row 0 is the original view.
    #[arg(long)]
    episodes: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    local_n: Option<usize>,
    /// Use only the first M views of each episode (default: all).
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Manifest of `group_id,path` lines.
    #[arg(long)]
    groups: PathBuf,
    /// Second manifest to compare against.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// TOML file with generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    synonyms: Option<usize>,
    #[arg(long)]
    outlier_rate: Option<f64>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    views: Option<usize>,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    dir: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    QUIET.store(cli.quiet, Ordering::Relaxed);
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Build(a) => cmd_build(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Tta(a) => cmd_tta(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Synth(a) => cmd_synth(a),
        Command::DumpPersistence(a) => cmd_dump_persistence(a),
    }
}

fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    })
}

fn apply_metric(config: &mut PipelineConfig, args: &MetricArgs) {
    if let Some(kind) = args.metric {
        config.metric.kind = kind;
    }
    if let Some(n) = args.local_n {
        config.metric.neighborhood_n = n;
    }
    if let Some(d) = args.subspace_d {
        config.metric.subspace_dims = Some(d);
    }
}

/// Flag value if given, else the config value; records the result in the config.
fn resolve(flag: Option<PathBuf>, slot: &mut Option<PathBuf>, name: &str) -> CliResult<PathBuf> {
    if let Some(p) = flag {
        *slot = Some(p);
    }
    slot.clone().ok_or_else(|| {
        CliError::Usage(format!(
            "--{name} is required (or set paths.{name} in the config)"
        ))
    })
}

fn cmd_generate(a: GenerateArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.classes).map_err(|e| synspace::Error::Io {
        path: a.classes.clone(),
        source: e,
    })?;
    let names: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    if names.is_empty() {
        return Err(synspace::Error::EmptyCatalog.into());
    }
    let api_key = match &a.llm_key_env {
        Some(var) => Some(
            std::env::var(var)
                .map_err(|_| CliError::Usage(format!("environment variable {var} is not set")))?,
        ),
        None => None,
    };
    let cache = a
        .llm_cache
        .clone()
        .unwrap_or_else(|| sibling(&a.lexicon, ".llm-cache.json"));
    let client = LlmClient::new(a.llm_endpoint.clone(), Some(cache))?.with_api_key(api_key);
    let params = DecodingParams {
        model: a.llm_model.clone(),
        temperature: a.temperature,
        ..DecodingParams::default()
    };

    let existing = if a.lexicon.exists() {
        load_lexicon_cache(&a.lexicon)?
    } else {
        LexiconMap::new()
    };
    let mut lexicons = LexiconMap::new();
    for (id, name) in names.iter().enumerate() {
        if let Some(known) = existing.values().find(|l| l.class_name == *name) {
            lexicons.insert(id, known.clone());
            continue;
        }
        let mut synonyms = client.query(&render_synonym_prompt(name, &a.dataset)?, &params)?;
        let mut descriptors = client.query(&render_descriptor_prompt(name)?, &params)?;
        if let Some(max) = a.max_synonyms {
            synonyms.truncate(max);
        }
        if let Some(max) = a.max_descriptors {
            descriptors.truncate(max);
        }
        lexicons.insert(
            id,
            ClassLexicon::new(*name, a.dataset.as_str(), synonyms, descriptors)?,
        );
    }
    save_lexicon_cache(&lexicons, &a.lexicon)?;
    if let Some(dir) = &a.texts_out {
        std::fs::create_dir_all(dir).map_err(|e| synspace::Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        for (&id, lex) in &lexicons {
            let texts = combine(id, lex)?;
            let mut body = texts.texts.join("\n");
            body.push('\n');
            output::write_file(&dir.join(format!("{id}.txt")), body.as_bytes())?;
        }
    }
    say!(
        "wrote {} classes to {} ({} network calls)",
        lexicons.len(),
        a.lexicon.display(),
        client.network_calls()
    );
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_build(a: BuildArgs) -> CliResult {
    let mut config = load_config(a.config.as_deref())?;
    match a.epsilon_mode {
        Some(EpsilonMode::Fixed) => config.topology.mode = CoreMode::FixedThreshold,
        Some(EpsilonMode::Auto) => config.topology.mode = CoreMode::AutoPersistence,
        Some(EpsilonMode::None) => config.topology.mode = CoreMode::Unfiltered,
        None => {}
    }
    if let Some(eps) = a.epsilon {
        config.topology.fixed_epsilon = eps;
    }
    apply_metric(&mut config, &a.metric);
    let lexicon = resolve(a.lexicon, &mut config.paths.lexicon, "lexicon")?;
    let embeddings = resolve(a.embeddings, &mut config.paths.embeddings, "embeddings")?;
    let catalog_path = resolve(a.catalog, &mut config.paths.catalog, "catalog")?;
    config.validate()?;

    let lexicons = load_lexicon_cache(&lexicon)?;
    let catalog = build_catalog(
        &lexicons,
        &DirectoryProvider::new(embeddings),
        config.topology,
        config.metric,
    )?;
    catalog.save(&catalog_path)?;
    for c in catalog.classes() {
        say!(
            "{:>4} {:<24} kept {:>4} / {:<4} epsilon {}",
            c.class_id,
            c.name,
            c.core.member_indices.len(),
            c.embeddings.len(),
            c.core.epsilon_used
        );
    }
    if let Some(dir) = &a.dump_persistence {
        dump_persistence(&catalog, dir)?;
    }
    say!(
        "catalog {} ({})",
        catalog_path.display(),
        catalog.input_hash()
    );
    Ok(())
}

fn dump_persistence(catalog: &ClassCatalog, dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| synspace::Error::Io {
        path: dir.to_owned(),
        source: e,
    })?;
    for c in catalog.classes() {
        let record = persistence_0d(&build_similarity_graph(&c.embeddings));
        output::write_file(
            &dir.join(format!("{}.txt", c.class_id)),
            record.to_text().as_bytes(),
        )?;
    }
    Ok(())
}

fn cmd_dump_persistence(a: DumpArgs) -> CliResult {
    let catalog = ClassCatalog::load(&a.catalog)?;
    dump_persistence(&catalog, &a.dir)
}

#[derive(Serialize)]
struct ClassRow<'a> {
    class_id: usize,
    name: &'a str,
    queries: usize,
    correct: usize,
    accuracy: Option<f64>,
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    command: &'static str,
    config: &'a PipelineConfig,
    catalog_input_hash: &'a str,
    queries_sha256: String,
    top1_accuracy: f64,
    total: usize,
    correct: usize,
    per_class: Vec<ClassRow<'a>>,
    confusion: &'a [Vec<usize>],
    predictions: &'a [usize],
}

fn load_catalog_with(path: &Path, config: &PipelineConfig) -> CliResult<ClassCatalog> {
    let catalog = ClassCatalog::load(path)?;
    Ok(catalog.with_metric(config.metric)?)
}

/// Config starting from the catalog's own build settings, then the config
/// file, then flags.
fn config_for_catalog(
    config_path: Option<&Path>,
    catalog_flag: &Option<PathBuf>,
) -> CliResult<PipelineConfig> {
    let mut config = load_config(config_path)?;
    if config_path.is_none() {
        if let Some(p) = catalog_flag {
            let catalog = ClassCatalog::load(p)?;
            config.topology = *catalog.topology();
            config.metric = *catalog.metric();
        }
    }
    Ok(config)
}

fn cmd_classify(a: ClassifyArgs) -> CliResult {
    let mut config = config_for_catalog(a.config.as_deref(), &a.catalog)?;
    apply_metric(&mut config, &a.metric);
    let catalog_path = resolve(a.catalog, &mut config.paths.catalog, "catalog")?;
    let queries_path = resolve(a.queries, &mut config.paths.queries, "queries")?;
    let report_dir = resolve(a.report, &mut config.paths.reports, "report")?;
    config.validate()?;

    let catalog = load_catalog_with(&catalog_path, &config)?;
    let queries = load_embeddings(&queries_path)?.normalized()?;
    let eval = match queries.labels() {
        Some(_) => synspace::evaluate(&queries, &catalog)?,
        None => unlabeled_report(&queries, &catalog)?,
    };
    let names: Vec<String> = catalog.classes().iter().map(|c| c.name.clone()).collect();
    let report = ClassifyReport {
        command: "classify",
        config: &config,
        catalog_input_hash: catalog.input_hash(),
        queries_sha256: hash_file(&queries_path)?,
        top1_accuracy: eval.top1_accuracy,
        total: eval.total,
        correct: eval.correct,
        per_class: names
            .iter()
            .enumerate()
            .map(|(k, name)| ClassRow {
                class_id: k,
                name,
                queries: eval.per_class_counts[k],
                correct: eval.confusion[k][k],
                accuracy: eval.per_class_accuracy[k],
            })
            .collect(),
        confusion: &eval.confusion,
        predictions: &eval.predictions,
    };
    write_report(&report_dir, "classify.json", &report)?;
    output::write_file(
        &report_dir.join("per_class.csv"),
        eval.to_csv(&names).as_bytes(),
    )?;
    say!(
        "top-1 {:.4} ({}/{}) -> {}",
        eval.top1_accuracy,
        eval.correct,
        eval.total,
        report_dir.display()
    );
    Ok(())
}

/// Predictions without ground truth: counts and accuracies stay empty.
fn unlabeled_report(queries: &EmbeddingSet, catalog: &ClassCatalog) -> CliResult<EvalReport> {
    if queries.is_empty() {
        return Err(synspace::Error::EmptyQuerySet.into());
    }
    let predictions = queries
        .items()
        .par_iter()
        .map(|g| predict(g, catalog).map(|p| p.class_id))
        .collect::<synspace::Result<Vec<_>>>()?;
    let k = catalog.len();
    Ok(EvalReport {
        total: 0,
        correct: 0,
        top1_accuracy: f64::NAN,
        per_class_counts: vec![0; k],
        per_class_accuracy: vec![None; k],
        confusion: vec![vec![0; k]; k],
        predictions,
    })
}

#[derive(Serialize)]
struct EpisodeRow {
    file: String,
    label: Option<usize>,
    #[serde(flatten)]
    outcome: EpisodeOutcome,
}

#[derive(Serialize)]
struct TtaSummary {
    episodes: usize,
    labeled: usize,
    baseline_correct: usize,
    adapted_correct: usize,
    baseline_accuracy: Option<f64>,
    adapted_accuracy: Option<f64>,
    changed: usize,
}

#[derive(Serialize)]
struct TtaReport<'a> {
    command: &'static str,
    config: &'a PipelineConfig,
    catalog_input_hash: &'a str,
    episodes_sha256: String,
    summary: TtaSummary,
    episodes: Vec<EpisodeRow>,
}

fn first_views(views: EmbeddingSet, m: Option<usize>) -> synspace::Result<EmbeddingSet> {
    match m {
        None => Ok(views),
        Some(m) if m > views.len() => Err(synspace::Error::TooFewViews {
            expected: m,
            actual: views.len(),
        }),
        Some(m) if m == views.len() => Ok(views),
        Some(m) => Ok(views.subset(&(0..m).collect::<Vec<_>>())),
    }
}

fn cmd_tta(a: TtaArgs) -> CliResult {
    let mut config = config_for_catalog(a.config.as_deref(), &a.catalog)?;
    if let Some(t) = a.tau {
        config.tta.temperature = t;
    }
    if let Some(r) = a.rho {
        config.tta.selection_ratio = r;
    }
    if let Some(lr) = a.lr {
        config.tta.learning_rate = lr;
    }
    if let Some(n) = a.local_n {
        config.metric.neighborhood_n = n;
    }
    if a.views.is_some() {
        config.views = a.views;
    }
    let catalog_path = resolve(a.catalog, &mut config.paths.catalog, "catalog")?;
    let episodes_dir = resolve(a.episodes, &mut config.paths.episodes, "episodes")?;
    let report_dir = resolve(a.report, &mut config.paths.reports, "report")?;
    config.validate()?;

    let catalog = load_catalog_with(&catalog_path, &config)?;
    let files = episode_files(&episodes_dir)?;
    if files.is_empty() {
        return Err(synspace::Error::EmptyQuerySet.into());
    }
    let mut digest = Sha256::new();
    for f in &files {
        digest.update(f.file_name().unwrap_or_default().as_encoded_bytes());
        digest.update([0u8]);
        digest.update(hash_file(f)?.as_bytes());
    }
    let rows = files
        .par_iter()
        .map(|f| {
            let views = first_views(load_embeddings(f)?, config.views)?.normalized()?;
            let label = episode_label(&views);
            let outcome = run_episode(views, &catalog, &config.tta)?;
            Ok(EpisodeRow {
                file: f
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
                label,
                outcome,
            })
        })
        .collect::<synspace::Result<Vec<_>>>()?;

    let labeled: Vec<&EpisodeRow> = rows.iter().filter(|r| r.label.is_some()).collect();
    let baseline_correct = labeled
        .iter()
        .filter(|r| r.label == Some(r.outcome.baseline))
        .count();
    let adapted_correct = labeled
        .iter()
        .filter(|r| r.label == Some(r.outcome.adapted))
        .count();
    let rate = |c: usize| (!labeled.is_empty()).then(|| c as f64 / labeled.len() as f64);
    let summary = TtaSummary {
        episodes: rows.len(),
        labeled: labeled.len(),
        baseline_correct,
        adapted_correct,
        baseline_accuracy: rate(baseline_correct),
        adapted_accuracy: rate(adapted_correct),
        changed: rows
            .iter()
            .filter(|r| r.outcome.baseline != r.outcome.adapted)
            .count(),
    };
    say!(
        "{} episodes: baseline {}/{} adapted {}/{} ({} changed) -> {}",
        summary.episodes,
        baseline_correct,
        summary.labeled,
        adapted_correct,
        summary.labeled,
        summary.changed,
        report_dir.display()
    );

    let mut csv = String::from("file,label,baseline,adapted,entropy_before,entropy_after\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.file,
            r.label.map(|l| l.to_string()).unwrap_or_default(),
            r.outcome.baseline,
            r.outcome.adapted,
            r.outcome.entropy_before,
            r.outcome.entropy_after
        ));
    }
    let report = TtaReport {
        command: "tta",
        config: &config,
        catalog_input_hash: catalog.input_hash(),
        episodes_sha256: hex::encode(digest.finalize()),
        summary,
        episodes: rows,
    };
    write_report(&report_dir, "tta.json", &report)?;
    output::write_file(&report_dir.join("tta_episodes.csv"), csv.as_bytes())?;
    Ok(())
}

fn episode_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let io = |e| synspace::Error::Io {
        path: dir.to_owned(),
        source: e,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "s3em") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    command: &'static str,
    groups: &'a Path,
    compare: Option<&'a Path>,
    groups_sha256: String,
    compare_sha256: Option<String>,
    result: &'a PopulationComparison,
}

fn cmd_analyze(a: AnalyzeArgs) -> CliResult {
    let groups = load_groups(&a.groups)?;
    let comparison = match &a.compare {
        Some(other) => compare_populations(&groups, &load_groups(other)?)?,
        None => PopulationComparison {
            a: CompactnessReport::from_groups(&groups)?,
            b: None,
        },
    };
    output::write_file(&a.out, comparison.to_csv().as_bytes())?;
    let report = AnalyzeReport {
        command: "analyze",
        groups: &a.groups,
        compare: a.compare.as_deref(),
        groups_sha256: hash_file(&a.groups)?,
        compare_sha256: a.compare.as_deref().map(hash_file).transpose()?,
        result: &comparison,
    };
    let json_path = a.out.with_extension("json");
    output::write_json(&json_path, &report)?;
    say!("mean compactness {:.6}", comparison.a.mean_compactness);
    if let Some(b) = &comparison.b {
        say!("mean compactness (compare) {:.6}", b.mean_compactness);
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> CliResult {
    let mut config = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| synspace::Error::Io {
                path: p.clone(),
                source: e,
            })?;
            toml_synth(&text)?
        }
        None => SynthConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag { config.$field = v; })*
        };
    }
    set!(seed => seed, classes => classes, synonyms => synonyms_per_class,
         outlier_rate => outlier_rate, queries => queries, dim => dim,
         episodes => episodes, views => views);
    let bench = synth_generate(&config)?;
    bench.write(&a.out)?;
    say!(
        "{} classes, {} outliers, {} queries, {} episodes -> {}",
        config.classes,
        bench.manifest.total_outliers,
        config.queries,
        config.episodes,
        a.out.display()
    );
    Ok(())
}

fn toml_synth(text: &str) -> CliResult<SynthConfig> {
    synspace::synth::SynthConfig::from_toml_str(text).map_err(CliError::from)
}

//! The `casum` command line: argument parsing, the resolved run
//! configuration, and one function per subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstractive::{train_abstract, AbstractConfig, AbstractModel, PreparedCluster, DEFAULT_BEAM, DEFAULT_K, DEFAULT_MAX_LEN};
use crate::condense::{train_condense, CondenseConfig, CondenseModel};
use crate::customization::{build_query, BackgroundSet};
use crate::data::{detokenize, generate_background, generate_toy_corpus, load_corpus, ToySpec, Vocabulary};
use crate::error::Error;
use crate::evaluation::{evaluate_corpus, MetricReport};
use crate::extractive::{select_top_k, CondenseEmbedder, Distance};
use crate::pipeline::{condense_instances, load_models, prepare_corpus, save_models, Stage, Summarizer};
use crate::selfcheck;
use crate::tensor_core::{Precision, Tensor, DEFAULT_DROPOUT};
use crate::training::{TrainConfig, TrainReport};

pub const DEFAULT_MIN_FREQUENCY: usize = 2;
pub const DEFAULT_BACKGROUND_SIZE: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Help or version text that was asked for.
    #[error("{0}")]
    Help(String),

    #[error("{0}")]
    Usage(String),

    #[error("{stage} stage needs a {needs} checkpoint: {detail}")]
    MissingPrerequisite {
        stage: &'static str,
        needs: &'static str,
        detail: String,
    },

    #[error(transparent)]
    Data(#[from] Error),

    #[error("self-check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 1 usage, 2 data, 3 failed check.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Help(_) => 0,
            CliError::Usage(_) => 1,
            CliError::MissingPrerequisite { .. } | CliError::Data(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "casum", version, about = "Opinion summarization with Condense and Abstract models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageArg {
    Condense,
    Abstract,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random draw of the run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Threads for per-cluster inference.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the Condense model, or the Abstract model on top of a Condense checkpoint.
    Train {
        #[arg(long, value_enum)]
        stage: StageArg,
        #[arg(long)]
        corpus: PathBuf,
        /// Development corpus for early stopping.
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Condense checkpoint (required for the abstract stage).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_BEAM)]
        beam: usize,
        #[arg(long)]
        no_extracts: bool,
        /// Disable the fusion loss (abstract stage).
        #[arg(long)]
        no_fusion: bool,
        #[arg(long, default_value_t = 128)]
        embedding_dim: usize,
        /// Per-direction hidden size; encodings are twice as wide.
        #[arg(long, default_value_t = 128)]
        hidden_dim: usize,
        #[arg(long, default_value_t = DEFAULT_MIN_FREQUENCY)]
        min_frequency: usize,
        /// Plain-text word vectors for the condense embedding table.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        patience: usize,
        #[arg(long, default_value = "f32")]
        precision: Precision,
        #[command(flatten)]
        common: Common,
    },
    /// Write one general-purpose summary per cluster.
    Summarize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BEAM)]
        beam: usize,
        #[arg(long)]
        no_extracts: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Summarize with a query built from background reviews expressing a need.
    Customize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Corpus whose reviews express the need.
        #[arg(long)]
        background: Option<PathBuf>,
        /// Label of the need; without --background it must name a toy aspect.
        #[arg(long)]
        need: Option<String>,
        /// Background reviews used to build the query.
        #[arg(long, default_value_t = DEFAULT_BACKGROUND_SIZE)]
        background_size: usize,
        #[arg(long, default_value_t = DEFAULT_BEAM)]
        beam: usize,
        #[arg(long)]
        no_extracts: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Write the reviews nearest to each cluster centroid.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Score predicted summaries against gold summaries.
    Evaluate {
        /// Corpus with gold summaries.
        #[arg(long)]
        corpus: PathBuf,
        /// Output of `summarize`, `customize` or `extract`.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic review corpus.
    Gentoy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        clusters: usize,
        #[arg(long, default_value_t = 6)]
        reviews: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run the gradient and oracle suites.
    Selfcheck {
        #[command(flatten)]
        common: Common,
    },
}

/// Everything a run depends on, logged at start and stored with outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub stage: Option<StageArg>,
    pub corpus: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub background: Option<PathBuf>,
    pub need: Option<String>,
    pub background_size: usize,
    pub embeddings: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub beam: usize,
    pub k: usize,
    pub dropout: f64,
    pub max_summary_len: usize,
    pub min_frequency: usize,
    pub use_extracts: bool,
    pub fusion_loss: bool,
    pub precision: Precision,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            stage: None,
            corpus: None,
            dev: None,
            background: None,
            need: None,
            background_size: DEFAULT_BACKGROUND_SIZE,
            embeddings: None,
            checkpoint: None,
            out: None,
            seed: 0,
            embedding_dim: 128,
            hidden_dim: 128,
            batch_size: 8,
            epochs: 10,
            patience: 3,
            beam: DEFAULT_BEAM,
            k: DEFAULT_K,
            dropout: DEFAULT_DROPOUT,
            max_summary_len: DEFAULT_MAX_LEN,
            min_frequency: DEFAULT_MIN_FREQUENCY,
            use_extracts: true,
            fusion_loss: true,
            precision: Precision::F32,
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn resolve(command: &Command) -> Self {
        let d = RunConfig::default();
        match command {
            Command::Train {
                stage,
                corpus,
                dev,
                checkpoint,
                out,
                epochs,
                batch,
                k,
                beam,
                no_extracts,
                no_fusion,
                embedding_dim,
                hidden_dim,
                min_frequency,
                embeddings,
                patience,
                precision,
                common,
            } => RunConfig {
                command: "train".into(),
                stage: Some(*stage),
                corpus: Some(corpus.clone()),
                dev: dev.clone(),
                checkpoint: checkpoint.clone(),
                out: Some(out.clone()),
                seed: common.seed,
                embedding_dim: *embedding_dim,
                hidden_dim: *hidden_dim,
                batch_size: *batch,
                epochs: *epochs,
                patience: *patience,
                beam: *beam,
                k: *k,
                min_frequency: *min_frequency,
                embeddings: embeddings.clone(),
                use_extracts: !no_extracts,
                fusion_loss: !no_fusion,
                precision: *precision,
                workers: common.workers,
                ..d
            },
            Command::Summarize {
                corpus,
                checkpoint,
                out,
                beam,
                no_extracts,
                common,
            } => RunConfig {
                command: "summarize".into(),
                corpus: Some(corpus.clone()),
                checkpoint: Some(checkpoint.clone()),
                out: Some(out.clone()),
                seed: common.seed,
                beam: *beam,
                use_extracts: !no_extracts,
                workers: common.workers,
                ..d
            },
            Command::Customize {
                corpus,
                checkpoint,
                out,
                background,
                need,
                background_size,
                beam,
                no_extracts,
                common,
            } => RunConfig {
                command: "customize".into(),
                background_size: *background_size,
                corpus: Some(corpus.clone()),
                checkpoint: Some(checkpoint.clone()),
                out: Some(out.clone()),
                background: background.clone(),
                need: need.clone(),
                seed: common.seed,
                beam: *beam,
                use_extracts: !no_extracts,
                workers: common.workers,
                ..d
            },
            Command::Extract {
                corpus,
                checkpoint,
                out,
                k,
                common,
            } => RunConfig {
                command: "extract".into(),
                corpus: Some(corpus.clone()),
                checkpoint: Some(checkpoint.clone()),
                out: Some(out.clone()),
                seed: common.seed,
                k: *k,
                workers: common.workers,
                ..d
            },
            Command::Evaluate { corpus, out, .. } => RunConfig {
                command: "evaluate".into(),
                corpus: Some(corpus.clone()),
                out: Some(out.clone()),
                ..d
            },
            Command::Gentoy { out, common, .. } => RunConfig {
                command: "gentoy".into(),
                out: Some(out.clone()),
                seed: common.seed,
                ..d
            },
            Command::Selfcheck { common } => RunConfig {
                command: "selfcheck".into(),
                seed: common.seed,
                workers: common.workers,
                ..d
            },
        }
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            seed,
            precision: self.precision,
            ..TrainConfig::default()
        }
    }
}

/// The per-epoch record written next to a trained checkpoint.
#[derive(Debug, Clone, Serialize)]
pub struct TrainingLog<'a> {
    pub config: &'a RunConfig,
    pub report: &'a TrainReport,
}

/// Path of the training log for checkpoint `out`.
pub fn log_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".log.json");
    PathBuf::from(s)
}

/// One output line of `summarize`, `customize` and `extract`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected: Vec<usize>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Help(e.to_string()),
        _ => CliError::Usage(e.to_string().trim_start_matches("error: ").trim_end().to_string()),
    })?;
    run(&cli.command)
}

pub fn run(command: &Command) -> CliResult<()> {
    let config = RunConfig::resolve(command);
    log::info!(
        "resolved config: {}",
        serde_json::to_string(&config).expect("config serializes")
    );
    if config.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    match command {
        Command::Train { stage: StageArg::Condense, .. } => cmd_train_condense(&config),
        Command::Train { stage: StageArg::Abstract, .. } => cmd_train_abstract(&config),
        Command::Summarize { .. } => cmd_summarize(&config, None),
        Command::Customize { .. } => cmd_customize(&config),
        Command::Extract { .. } => cmd_extract(&config),
        Command::Evaluate { predictions, .. } => cmd_evaluate(&config, predictions),
        Command::Gentoy { clusters, reviews, .. } => cmd_gentoy(&config, *clusters, *reviews),
        Command::Selfcheck { .. } => cmd_selfcheck(&config),
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing required flag {flag}")))
}

fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))
}

fn write_training_log(out: &Path, config: &RunConfig, report: &TrainReport) -> CliResult<()> {
    let text = serde_json::to_string_pretty(&TrainingLog { config, report }).expect("log serializes");
    fs::write(log_path(out), text)?;
    Ok(())
}

fn run_value(config: &RunConfig) -> serde_json::Value {
    serde_json::to_value(config).expect("config serializes")
}

pub fn cmd_train_condense(config: &RunConfig) -> CliResult<()> {
    let corpus = load_corpus(required(&config.corpus, "--corpus")?)?;
    let out = required(&config.out, "--out")?;
    let vocab = Vocabulary::build(&corpus, config.min_frequency)?;
    let dev = match &config.dev {
        Some(p) => condense_instances(&load_corpus(p)?, &vocab),
        None => Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model_config = CondenseConfig {
        vocab_size: vocab.len(),
        embedding_dim: config.embedding_dim,
        hidden_dim: config.hidden_dim,
        dropout: config.dropout,
    };
    let mut model = CondenseModel::init(model_config, rng.gen());
    if let Some(path) = &config.embeddings {
        let replaced = model.load_embeddings(&vocab, path)?;
        log::info!("loaded {replaced} embedding rows from {}", path.display());
    }
    let report = train_condense(
        &mut model,
        &condense_instances(&corpus, &vocab),
        &dev,
        &config.train_config(rng.gen()),
    )?;
    save_models(out, &vocab, &model, None, run_value(config))?;
    write_training_log(out, config, &report)
}

fn decode_all(
    summarizer: &Summarizer,
    prepared: &[PreparedCluster],
    query: Option<&Tensor>,
    config: &RunConfig,
) -> CliResult<Vec<Vec<String>>> {
    let work = || {
        prepared
            .par_iter()
            .map(|p| {
                summarizer
                    .summarize(p, query, config.beam, config.max_summary_len, config.use_extracts)
                    .map(|s| s.tokens)
            })
            .collect::<crate::Result<Vec<_>>>()
    };
    Ok(pool(config.workers)?.install(work)?)
}

pub fn cmd_train_abstract(config: &RunConfig) -> CliResult<()> {
    let ckpt = config.checkpoint.as_deref().ok_or_else(|| CliError::MissingPrerequisite {
        stage: "abstract",
        needs: "condense",
        detail: "pass --checkpoint from `casum train --stage condense`".into(),
    })?;
    if !ckpt.exists() {
        return Err(CliError::MissingPrerequisite {
            stage: "abstract",
            needs: "condense",
            detail: format!("{} does not exist", ckpt.display()),
        });
    }
    let corpus = load_corpus(required(&config.corpus, "--corpus")?)?;
    let out = required(&config.out, "--out")?;
    let loaded = load_models(ckpt)?;
    let (vocab, condense) = (loaded.vocab, loaded.condense);
    let prepared = prepare_corpus(&vocab, &condense, &corpus, config.k)?;
    let dev = match &config.dev {
        Some(p) => {
            let dev = load_corpus(p)?;
            let prepared = prepare_corpus(&vocab, &condense, &dev, config.k)?;
            Some((dev, prepared))
        }
        None => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model_config = AbstractConfig::for_condense(&condense);
    model_config.use_extracts = config.use_extracts;
    model_config.fusion_loss = config.fusion_loss;
    model_config.k = config.k;
    model_config.dropout = config.dropout;
    let mut model = AbstractModel::init(model_config, Some(&condense), rng.gen())?;
    let train_config = config.train_config(rng.gen());

    let mut summarizer = Summarizer {
        vocab,
        condense,
        model: AbstractModel {
            config: model_config,
            params: Default::default(),
        },
    };
    let report = train_abstract(&mut model, &prepared, &train_config, |candidate| {
        let Some((dev, dev_prepared)) = &dev else {
            return Ok(None);
        };
        summarizer.model = candidate.clone();
        let predictions = decode_all(&summarizer, dev_prepared, None, config).map_err(|e| match e {
            CliError::Data(e) => e,
            other => Error::InvalidArgument(other.to_string()),
        })?;
        Ok(Some(evaluate_corpus(&predictions, dev)?.rouge_l_f1))
    })?;
    save_models(out, &summarizer.vocab, &summarizer.condense, Some(&model), run_value(config))?;
    write_training_log(out, config, &report)
}

fn load_summarizer(config: &RunConfig) -> CliResult<Summarizer> {
    let loaded = load_models(required(&config.checkpoint, "--checkpoint")?)?;
    if loaded.meta.stage != Stage::Abstract {
        return Err(CliError::MissingPrerequisite {
            stage: "summarize",
            needs: "abstract",
            detail: "the given checkpoint holds only a condense model".into(),
        });
    }
    Ok(Summarizer::from_loaded(loaded)?)
}

fn write_records(path: &Path, records: &[SummaryRecord]) -> CliResult<()> {
    let text: String = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect();
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_summarize(config: &RunConfig, query_source: Option<&BackgroundSet>) -> CliResult<()> {
    let corpus = load_corpus(required(&config.corpus, "--corpus")?)?;
    let out = required(&config.out, "--out")?;
    let summarizer = load_summarizer(config)?;
    let prepared = corpus
        .clusters
        .iter()
        .map(|c| summarizer.prepare(c))
        .collect::<crate::Result<Vec<_>>>()?;
    let query = query_source
        .map(|bg| build_query(bg, &summarizer.condense))
        .transpose()?;
    let outputs = decode_all(&summarizer, &prepared, query.as_ref(), config)?;
    let records: Vec<SummaryRecord> = corpus
        .clusters
        .iter()
        .zip(outputs)
        .map(|(c, tokens)| SummaryRecord {
            id: c.id.clone(),
            summary: detokenize(&tokens),
            selected: Vec::new(),
        })
        .collect();
    write_records(out, &records)
}

pub fn cmd_customize(config: &RunConfig) -> CliResult<()> {
    let checkpoint = required(&config.checkpoint, "--checkpoint")?;
    let vocab = Vocabulary::load(&crate::pipeline::vocab_path(checkpoint))?;
    let background = match (&config.background, &config.need) {
        (Some(path), need) => {
            let corpus = load_corpus(path)?;
            BackgroundSet::from_corpus(
                need.as_deref().unwrap_or("background"),
                &corpus,
                &vocab,
                Some(config.background_size),
            )?
        }
        (None, Some(need)) => {
            let spec = ToySpec::standard(1, 1, config.seed);
            let aspect = spec.aspect_index(need).ok_or_else(|| {
                CliError::Usage(format!(
                    "--need `{need}` is not a toy aspect; pass --background with reviews expressing it"
                ))
            })?;
            let reviews = generate_background(&spec, aspect, config.background_size, config.seed)?;
            let ids = reviews.iter().map(|r| vocab.encode(&r.tokens)).collect();
            BackgroundSet::new(need, ids)?
        }
        (None, None) => return Err(CliError::Usage("customize needs --background or --need".into())),
    };
    cmd_summarize(config, Some(&background))
}

pub fn cmd_extract(config: &RunConfig) -> CliResult<()> {
    let corpus = load_corpus(required(&config.corpus, "--corpus")?)?;
    let out = required(&config.out, "--out")?;
    let loaded = load_models(required(&config.checkpoint, "--checkpoint")?)?;
    let (vocab, condense) = (&loaded.vocab, &loaded.condense);
    let embedder = CondenseEmbedder(condense);
    let work = || {
        corpus
            .clusters
            .par_iter()
            .map(|c| {
                let reviews: Vec<Vec<usize>> = c.reviews.iter().map(|r| vocab.encode(&r.tokens)).collect();
                let k = config.k.min(reviews.len());
                let selection = select_top_k(&reviews, k, &embedder, Distance::Euclidean)?;
                let text: Vec<&str> = selection
                    .selected
                    .iter()
                    .map(|&i| c.reviews[i].raw_text.as_str())
                    .collect();
                Ok(SummaryRecord {
                    id: c.id.clone(),
                    summary: text.join(" "),
                    selected: selection.selected,
                })
            })
            .collect::<crate::Result<Vec<_>>>()
    };
    let records = pool(config.workers)?.install(work)?;
    write_records(out, &records)
}

/// Reads `summarize`-style output lines.
pub fn read_records(path: &Path) -> CliResult<Vec<SummaryRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                CliError::Data(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
        })
        .collect()
}

pub fn cmd_evaluate(config: &RunConfig, predictions: &Path) -> CliResult<()> {
    let corpus = load_corpus(required(&config.corpus, "--corpus")?)?;
    let out = required(&config.out, "--out")?;
    let records = read_records(predictions)?;
    let mut tokens = Vec::new();
    for cluster in corpus.clusters.iter().filter(|c| c.summary.is_some()) {
        let record = records.iter().find(|r| r.id == cluster.id).ok_or_else(|| {
            CliError::Data(Error::InvalidArgument(format!("no prediction for cluster `{}`", cluster.id)))
        })?;
        tokens.push(crate::data::tokenize(&record.summary));
    }
    let report: MetricReport = evaluate_corpus(&tokens, &corpus)?;
    fs::write(out, serde_json::to_string_pretty(&report).expect("report serializes"))?;
    print!("{}", report.to_text());
    Ok(())
}

pub fn cmd_gentoy(config: &RunConfig, clusters: usize, reviews: usize) -> CliResult<()> {
    let out = required(&config.out, "--out")?;
    let toy = generate_toy_corpus(&ToySpec::standard(clusters, reviews, config.seed))?;
    toy.corpus.save(out)?;
    Ok(())
}

pub fn cmd_selfcheck(config: &RunConfig) -> CliResult<()> {
    let outcomes = selfcheck::run_all(config.seed)?;
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> CliResult<Cli> {
        Cli::try_parse_from(std::iter::once("casum").chain(args.iter().copied()))
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    #[test]
    fn defaults_follow_the_reference_settings() {
        let cli = parse(&["train", "--stage", "condense", "--corpus", "c.jsonl", "--out", "m"]).unwrap();
        let config = RunConfig::resolve(&cli.command);
        assert_eq!(config.batch_size, 8);
        assert_eq!(config.beam, 5);
        assert_eq!(config.k, 5);
        assert_eq!(config.embedding_dim, 128);
        assert_eq!(2 * config.hidden_dim, 256);
        assert_eq!(config.dropout, 0.5);
        assert!(config.use_extracts);
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let err = run_from(["casum", "summarize", "--bogus"]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn abstract_without_condense_names_the_prerequisite() {
        let cli = parse(&["train", "--stage", "abstract", "--corpus", "c.jsonl", "--out", "m"]).unwrap();
        let err = run(&cli.command).unwrap_err();
        assert!(matches!(err, CliError::MissingPrerequisite { needs: "condense", .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_corpus_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let cli = parse(&[
            "train",
            "--stage",
            "condense",
            "--corpus",
            dir.path().join("absent.jsonl").to_str().unwrap(),
            "--out",
            dir.path().join("m").to_str().unwrap(),
        ])
        .unwrap();
        assert_eq!(run(&cli.command).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn precision_flag_parses() {
        let cli = parse(&[
            "train", "--stage", "condense", "--corpus", "c", "--out", "m", "--precision", "f64",
        ])
        .unwrap();
        assert_eq!(RunConfig::resolve(&cli.command).precision, Precision::F64);
        assert!(parse(&["train", "--stage", "condense", "--corpus", "c", "--out", "m", "--precision", "f16"]).is_err());
    }
}

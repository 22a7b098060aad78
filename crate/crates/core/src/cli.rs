//! The `skipgram` command line: `build-vocab`, `count`, `train` and
//! `validate`.
//!
//! Settings resolve as flag > `--config` file > built-in default. Every
//! command writes a JSON run manifest next to its artifacts recording the
//! resolved settings, input digests and artifact paths.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::analysis::{self, DEFAULT_PROBES, DEFAULT_TOP_N};
use crate::cooccur::{CooccurrenceTable, ProbMode};
use crate::corpus::{read_corpus, tokenize, Vocabulary};
use crate::embedding::EmbeddingSet;
use crate::error::Error;
use crate::sgns::{self, SgnsConfig};
use crate::softmax::{self, LrSchedule, TrainConfig, UpdateMode};

/// Environment variable holding the default for `--threads`.
pub const THREADS_ENV: &str = "SKIPGRAM_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "skipgram", version, about = "Skip-gram embedding laboratory")]
pub struct Cli {
    /// Worker threads for opt-in parallel modes (sharded counting,
    /// asynchronous SGNS). Defaults to $SKIPGRAM_THREADS, else 1.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a frequency-ordered vocabulary TSV.
    BuildVocab(BuildVocabArgs),
    /// Count window co-occurrences into a TSV.
    Count(CountArgs),
    /// Train embeddings; writes <out>.in.vec and <out>.out.vec.
    Train(TrainArgs),
    /// Compare trained probabilities with corpus co-occurrence probabilities.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Plain UTF-8 text file.
    pub corpus: PathBuf,
    #[arg(long)]
    pub min_count: Option<u64>,
    /// Read only this many leading bytes of the corpus.
    #[arg(long)]
    pub max_bytes: Option<u64>,
    /// key = value settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Existing vocabulary TSV; built from the corpus when omitted.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Window radius.
    #[arg(long = "c")]
    pub radius: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainMode {
    /// Full-softmax gradient ascent.
    Exact,
    /// Negative sampling.
    Sgns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UpdateArg {
    FullBatch,
    PerPosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Constant,
    LinearDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbModeArg {
    FullWindow,
    Normalized,
}

impl From<ProbModeArg> for ProbMode {
    fn from(arg: ProbModeArg) -> Self {
        match arg {
            ProbModeArg::FullWindow => ProbMode::FullWindow,
            ProbModeArg::Normalized => ProbMode::Normalized,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub mode: TrainMode,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Output prefix.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "c")]
    pub radius: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// exact: update granularity.
    #[arg(long)]
    pub update: Option<UpdateArg>,
    /// exact: learning-rate schedule.
    #[arg(long)]
    pub schedule: Option<ScheduleArg>,
    /// exact: denominator in the update rule.
    #[arg(long)]
    pub gradient: Option<ProbModeArg>,
    /// exact: accept steps that lower the objective.
    #[arg(long)]
    pub no_guard: bool,

    /// sgns: negatives per slot.
    #[arg(long)]
    pub k: Option<usize>,
    /// sgns: frequent-word subsampling threshold (off by default).
    #[arg(long)]
    pub subsample: Option<f64>,
    /// sgns: noise distribution exponent.
    #[arg(long)]
    pub power: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Prefix of the <prefix>.in.vec / <prefix>.out.vec pair.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Probe word; repeatable. Defaults to the standard 18 probes present
    /// in the vocabulary.
    #[arg(long = "probe")]
    pub probes: Vec<String>,
    /// Most frequent words compared in the correlation.
    #[arg(long)]
    pub n: Option<usize>,
    /// Window radius; defaults to the value recorded in the training manifest.
    #[arg(long = "c")]
    pub radius: Option<usize>,
    /// Denominator for the reported ground-truth probabilities.
    #[arg(long)]
    pub prob_mode: Option<ProbModeArg>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// What went wrong, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    /// Inputs that are individually valid but inconsistent with each other.
    Data(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Core(Error::InvalidParameter(_)) => EXIT_USAGE,
            Failure::Core(Error::Diverged { .. }) => EXIT_NUMERICAL,
            Failure::Data(_) | Failure::Core(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "usage error: {msg}"),
            Failure::Data(msg) => write!(f, "{msg}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parse and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let threads = match cli.threads {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .parse()
                .map_err(|_| Failure::Usage(format!("{THREADS_ENV}={v:?} is not a number")))?,
            Err(_) => 1,
        },
    }
    .max(1);
    match cli.command {
        Command::BuildVocab(args) => build_vocab(args),
        Command::Count(args) => count(args, threads),
        Command::Train(args) => train(args, threads),
        Command::Validate(args) => validate(args),
    }
}

/// Settings loaded from a `key = value` file.
#[derive(Debug, Default)]
struct ConfigFile {
    table: toml::Table,
    origin: Option<PathBuf>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Failure::Core(Error::Parse {
                path: path.to_owned(),
                line: 0,
                message: e.message().to_owned(),
            })
        })?;
        Ok(ConfigFile {
            table,
            origin: Some(path.to_owned()),
        })
    }

    fn raw(&self, key: &str) -> Option<&toml::Value> {
        self.table
            .get(key)
            .or_else(|| self.table.get(&key.replace('_', "-")))
    }

    fn bad(&self, key: &str) -> Failure {
        let origin = self.origin.as_deref().unwrap_or(Path::new("config"));
        Failure::Usage(format!("{}: bad value for `{key}`", origin.display()))
    }

    fn int(&self, key: &str) -> CliResult<Option<u64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .as_integer()
                .and_then(|i| u64::try_from(i).ok())
                .map(Some)
                .ok_or_else(|| self.bad(key)),
        }
    }

    fn float(&self, key: &str) -> CliResult<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .map(Some)
                .ok_or_else(|| self.bad(key)),
        }
    }

    fn string(&self, key: &str) -> CliResult<Option<String>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.as_str().map(|s| Some(s.to_owned())).ok_or_else(|| self.bad(key)),
        }
    }

    fn flag(&self, key: &str) -> CliResult<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.as_bool().map(Some).ok_or_else(|| self.bad(key)),
        }
    }

    fn choice<E: ValueEnum>(&self, key: &str) -> CliResult<Option<E>> {
        match self.string(key)? {
            None => Ok(None),
            Some(s) => E::from_str(&s, true).map(Some).map_err(|_| self.bad(key)),
        }
    }
}

#[derive(Debug, Serialize)]
struct InputDigest {
    path: PathBuf,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    command: String,
    config: BTreeMap<String, Value>,
    inputs: Vec<InputDigest>,
    seed: Option<u64>,
    artifacts: Vec<PathBuf>,
    duration_secs: f64,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_owned(),
            config: BTreeMap::new(),
            inputs: Vec::new(),
            seed: None,
            artifacts: Vec::new(),
            duration_secs: 0.0,
        }
    }

    fn set(&mut self, key: &str, value: impl Serialize) {
        self.config
            .insert(key.to_owned(), serde_json::to_value(value).expect("serializable"));
    }

    fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputDigest {
            path: path.to_owned(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }

    fn write(mut self, path: &Path, started: Instant) -> CliResult<()> {
        self.duration_secs = started.elapsed().as_secs_f64();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &self)
            .map_err(|e| Error::io(path, e.into()))?;
        Ok(())
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

struct LoadedCorpus {
    tokens: Vec<String>,
    vocab: Vocabulary,
}

fn load_corpus(
    args: &CorpusArgs,
    config: &ConfigFile,
    default_min_count: u64,
    manifest: &mut RunManifest,
) -> CliResult<LoadedCorpus> {
    let max_bytes = args.max_bytes.or(config.int("max_bytes")?);
    let min_count = args.min_count.or(config.int("min_count")?).unwrap_or(default_min_count);
    if min_count == 0 {
        return Err(Failure::Usage("--min-count must be at least 1".into()));
    }
    let text = read_corpus(&args.corpus, max_bytes)?;
    manifest.input(&args.corpus, text.as_bytes());
    manifest.set("corpus", &args.corpus);
    manifest.set("max_bytes", max_bytes);
    manifest.set("min_count", min_count);
    let tokens = tokenize(&text);
    let vocab = Vocabulary::build(&tokens, min_count)?;
    Ok(LoadedCorpus { tokens, vocab })
}

fn build_vocab(args: BuildVocabArgs) -> CliResult<()> {
    let started = Instant::now();
    let config = ConfigFile::load(args.corpus.config.as_deref())?;
    let mut manifest = RunManifest::new("build-vocab");
    let corpus = load_corpus(&args.corpus, &config, 1, &mut manifest)?;
    if corpus.vocab.is_empty() {
        log::warn!("{}: no tokens retained, writing an empty vocabulary", args.corpus.corpus.display());
    }
    corpus.vocab.save(&args.out)?;
    manifest.artifacts.push(args.out.clone());
    println!("{} words, {} tokens -> {}", corpus.vocab.len(), corpus.vocab.total_tokens(), args.out.display());
    manifest.write(&with_suffix(&args.out, ".manifest.json"), started)
}

fn count(args: CountArgs, threads: usize) -> CliResult<()> {
    let started = Instant::now();
    let config = ConfigFile::load(args.corpus.config.as_deref())?;
    let mut manifest = RunManifest::new("count");
    let radius = args.radius.or(config.int("c")?.map(|c| c as usize)).unwrap_or(2);
    if radius == 0 {
        return Err(Failure::Usage("--c must be at least 1".into()));
    }
    manifest.set("c", radius);
    let corpus = load_corpus(&args.corpus, &config, 1, &mut manifest)?;
    let vocab = match &args.vocab {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            manifest.input(path, &bytes);
            Vocabulary::load(path)?
        }
        None => corpus.vocab,
    };
    let ids = vocab.encode(&corpus.tokens);
    let table = if threads > 1 {
        CooccurrenceTable::count_sharded(&ids, vocab.len(), radius, threads)?
    } else {
        CooccurrenceTable::count(&ids, vocab.len(), radius)?
    };
    table.save(&vocab, &args.out)?;
    manifest.artifacts.push(args.out.clone());
    println!(
        "{} nonzero pairs over {} slots -> {}",
        table.pairs().count(),
        table.total_slots(),
        args.out.display()
    );
    manifest.write(&with_suffix(&args.out, ".manifest.json"), started)
}

fn train(args: TrainArgs, threads: usize) -> CliResult<()> {
    let started = Instant::now();
    let config = ConfigFile::load(args.corpus.config.as_deref())?;
    let exact_only = [
        ("--update", args.update.is_some()),
        ("--schedule", args.schedule.is_some()),
        ("--gradient", args.gradient.is_some()),
        ("--no-guard", args.no_guard),
    ];
    let sgns_only = [
        ("--k", args.k.is_some()),
        ("--subsample", args.subsample.is_some()),
        ("--power", args.power.is_some()),
    ];
    let (conflicts, mode_name) = match args.mode {
        TrainMode::Exact => (&sgns_only[..], "exact"),
        TrainMode::Sgns => (&exact_only[..], "sgns"),
    };
    if let Some((flag, _)) = conflicts.iter().find(|(_, set)| *set) {
        return Err(Failure::Usage(format!("{flag} does not apply to `train {mode_name}`")));
    }

    let mut manifest = RunManifest::new(&format!("train {mode_name}"));
    let default_min_count = if args.mode == TrainMode::Exact { 1 } else { 5 };
    let corpus = load_corpus(&args.corpus, &config, default_min_count, &mut manifest)?;
    if corpus.vocab.is_empty() {
        return Err(Error::InvalidParameter("no tokens survive the min-count filter".into()).into());
    }
    let ids = corpus.vocab.encode(&corpus.tokens);

    let radius = args.radius.or(config.int("c")?.map(|c| c as usize));
    let epochs = args.epochs.or(config.int("epochs")?.map(|e| e as usize));
    let dim = args.dim.or(config.int("dim")?.map(|d| d as usize));
    let lr = args.lr.or(config.float("lr")?);
    let seed = args.seed.or(config.int("seed")?);

    let log_path = with_suffix(&args.out, ".log.csv");
    let embeddings = match args.mode {
        TrainMode::Exact => {
            let defaults = TrainConfig::default();
            let update = args.update.or(config.choice("update")?);
            let schedule = args.schedule.or(config.choice("schedule")?);
            let gradient = args.gradient.or(config.choice("gradient")?);
            let guard = !(args.no_guard || config.flag("no_guard")?.unwrap_or(false));
            let cfg = TrainConfig {
                learning_rate: lr.unwrap_or(defaults.learning_rate),
                epochs: epochs.unwrap_or(defaults.epochs),
                radius: radius.unwrap_or(defaults.radius),
                dim: dim.unwrap_or(defaults.dim),
                seed: seed.unwrap_or(defaults.seed),
                mode: match update {
                    Some(UpdateArg::PerPosition) => UpdateMode::PerPosition,
                    Some(UpdateArg::FullBatch) | None => defaults.mode,
                },
                schedule: match schedule {
                    Some(ScheduleArg::Constant) => LrSchedule::Constant,
                    Some(ScheduleArg::LinearDecay) | None => defaults.schedule,
                },
                gradient: gradient.map_or(defaults.gradient, Into::into),
                divergence_guard: guard,
            };
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            manifest.set("c", cfg.radius);
            manifest.set("epochs", cfg.epochs);
            manifest.set("dim", cfg.dim);
            manifest.set("lr", cfg.learning_rate);
            manifest.set("seed", cfg.seed);
            manifest.set("update", format!("{:?}", cfg.mode));
            manifest.set("schedule", format!("{:?}", cfg.schedule));
            manifest.set("gradient", format!("{:?}", cfg.gradient));
            manifest.set("divergence_guard", cfg.divergence_guard);
            manifest.seed = Some(cfg.seed);
            let run = softmax::train_exact(&ids, corpus.vocab.len(), &cfg)?;
            let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
            run.write_log(BufWriter::new(file)).map_err(|e| Error::io(&log_path, e))?;
            if let Some(last) = run.log.last() {
                println!("epoch {} E = {:.6}", last.epoch, last.objective);
            }
            run.embeddings
        }
        TrainMode::Sgns => {
            let defaults = SgnsConfig::for_corpus_len(ids.len());
            let cfg = SgnsConfig {
                negatives: args.k.or(config.int("k")?.map(|k| k as usize)).unwrap_or(defaults.negatives),
                learning_rate: lr.unwrap_or(defaults.learning_rate),
                epochs: epochs.unwrap_or(defaults.epochs),
                radius: radius.unwrap_or(defaults.radius),
                dim: dim.unwrap_or(defaults.dim),
                seed: seed.unwrap_or(defaults.seed),
                subsample_threshold: args.subsample.or(config.float("subsample")?),
                power: args.power.or(config.float("power")?).unwrap_or(defaults.power),
                threads,
                log_every: defaults.log_every,
            };
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            if cfg.subsample_threshold.is_some() {
                log::warn!("subsampling enabled: the trained objective no longer matches the plain skip-gram average");
            }
            if cfg.threads > 1 {
                log::warn!("{} threads: asynchronous updates, results are not reproducible", cfg.threads);
            }
            manifest.set("c", cfg.radius);
            manifest.set("epochs", cfg.epochs);
            manifest.set("dim", cfg.dim);
            manifest.set("lr", cfg.learning_rate);
            manifest.set("seed", cfg.seed);
            manifest.set("k", cfg.negatives);
            manifest.set("subsample", cfg.subsample_threshold);
            manifest.set("power", cfg.power);
            manifest.set("threads", cfg.threads);
            manifest.seed = Some(cfg.seed);
            let run = sgns::train_sgns(&ids, &corpus.vocab, &cfg)?;
            let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
            run.write_log(BufWriter::new(file)).map_err(|e| Error::io(&log_path, e))?;
            for (epoch, mean) in run.epoch_means.iter().enumerate() {
                println!("epoch {} mean objective = {:.6}", epoch + 1, mean);
            }
            run.embeddings
        }
    };

    let (in_path, out_path) = embeddings.save(&args.out, corpus.vocab.words())?;
    let vocab_path = with_suffix(&args.out, ".vocab.tsv");
    corpus.vocab.save(&vocab_path)?;
    manifest.artifacts.extend([in_path, out_path, vocab_path, log_path]);
    manifest.write(&with_suffix(&args.out, ".manifest.json"), started)
}

fn validate(args: ValidateArgs) -> CliResult<()> {
    let started = Instant::now();
    let config = ConfigFile::load(args.corpus.config.as_deref())?;
    let mut manifest = RunManifest::new("validate");

    let (words, emb) = EmbeddingSet::load(&args.embeddings)?;
    let training_manifest = with_suffix(&args.embeddings, ".manifest.json");
    let recorded_radius = std::fs::read(&training_manifest)
        .ok()
        .and_then(|bytes| serde_json::from_slice::<Value>(&bytes).ok())
        .and_then(|v| v["config"]["c"].as_u64());
    let radius = args
        .radius
        .or(config.int("c")?.map(|c| c as usize))
        .or(recorded_radius.map(|c| c as usize))
        .ok_or_else(|| Failure::Usage("--c is required (no training manifest found)".into()))?;
    if radius == 0 {
        return Err(Failure::Usage("--c must be at least 1".into()));
    }
    // Rebuild the vocabulary the same way training did.
    let recorded_min_count = std::fs::read(&training_manifest)
        .ok()
        .and_then(|bytes| serde_json::from_slice::<Value>(&bytes).ok())
        .and_then(|v| v["config"]["min_count"].as_u64());
    let corpus_args = CorpusArgs {
        corpus: args.corpus.corpus.clone(),
        min_count: args.corpus.min_count.or(recorded_min_count),
        max_bytes: args.corpus.max_bytes,
        config: None,
    };
    let corpus = load_corpus(&corpus_args, &config, 1, &mut manifest)?;
    if corpus.vocab.words() != words.as_slice() {
        return Err(Failure::Data(format!(
            "{}: embedding vocabulary ({} words) does not match the corpus vocabulary ({} words); \
             use the same --min-count and --max-bytes as training",
            args.embeddings.display(),
            words.len(),
            corpus.vocab.len()
        )));
    }
    let vocab = corpus.vocab;
    let ids = vocab.encode(&corpus.tokens);
    let table = CooccurrenceTable::count(&ids, vocab.len(), radius)?;
    let mode: ProbMode = args
        .prob_mode
        .or(config.choice("prob_mode")?)
        .map_or(ProbMode::FullWindow, Into::into);
    let n = args
        .n
        .or(config.int("n")?.map(|n| n as usize))
        .unwrap_or(DEFAULT_TOP_N.min(vocab.len()));
    if n > vocab.len() {
        return Err(Failure::Usage(format!("--n {n} exceeds the vocabulary size {}", vocab.len())));
    }
    manifest.set("embeddings", &args.embeddings);
    manifest.set("c", radius);
    manifest.set("n", n);
    manifest.set("prob_mode", format!("{mode:?}"));

    let probes: Vec<String> = if args.probes.is_empty() {
        DEFAULT_PROBES
            .iter()
            .filter(|p| vocab.id(p).is_some())
            .map(|p| p.to_string())
            .collect()
    } else {
        args.probes.clone()
    };
    if probes.is_empty() {
        log::warn!("none of the default probe words are in the vocabulary; pass --probe");
    }
    manifest.set("probes", &probes);

    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let create = |name: String| -> CliResult<(PathBuf, BufWriter<File>)> {
        let path = args.out_dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok((path, BufWriter::new(file)))
    };

    let objective = softmax::grouped_log_prob(&emb, &table);
    let optimum = analysis::optimal_objective(&table);
    let (path, mut out) = create("objective.tsv".into())?;
    use std::io::Write;
    writeln!(out, "E\tE_star\tgap\n{objective}\t{optimum}\t{}", optimum - objective)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&path, e))?;
    manifest.artifacts.push(path);
    println!("E = {objective:.6}, E* = {optimum:.6}");

    let mut correlations = Vec::new();
    for probe in &probes {
        let report = analysis::optimality_report(&emb, &table, &vocab, probe, mode)?;
        let (path, out) = create(format!("{probe}.optimality.tsv"))?;
        analysis::write_report_tsv(&report, out).map_err(|e| Error::io(&path, e))?;
        manifest.artifacts.push(path);
        let (path, out) = create(format!("{probe}.figure.csv"))?;
        analysis::write_figure_csv(&report, out).map_err(|e| Error::io(&path, e))?;
        manifest.artifacts.push(path);
        println!(
            "{probe}: max |p_c - p^| on context words {:.4}, max p^ elsewhere {:.4}",
            report.summary.max_context_deviation, report.summary.max_non_context_estimate
        );

        match analysis::correlation(&emb, &table, &vocab, probe, n) {
            Ok(result) => {
                println!("{probe}: corr over top {n} = {:.4}", result.corr);
                correlations.push(result);
            }
            Err(Error::DegenerateCorrelation(which)) => {
                log::warn!("{probe}: {which} probabilities have zero variance, skipping correlation")
            }
            Err(e) => return Err(e.into()),
        }
    }
    let (path, out) = create("correlation.tsv".into())?;
    analysis::write_correlation_tsv(&correlations, out).map_err(|e| Error::io(&path, e))?;
    manifest.artifacts.push(path);

    manifest.write(&args.out_dir.join("manifest.json"), started)
}

//! Command-line front end: `ingest`, `reduce`, `predict`, `evaluate`,
//! `analyze` and `synth`.
//!
//! Exit codes: 0 on success, 2 on data errors, 64 on usage errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Deserialize;

use crate::consistency::{
    consistency_points, emit_scatter, parse_pairing, si_predictor_eval,
};
use crate::error::{Error, Result};
use crate::evaluation::{config_hash, per_distortion_breakdown, run_protocol, srocc, ProtocolParams};
use crate::evaluation::protocol::store_snapshot;
use crate::prediction::{predict, Aggregator};
use crate::retrieval::{Query, RetrievalConfig};
use crate::store::{
    load_store, parse_store, reduce_features, save_store, FeatureStore, StoreMode, FORMAT_VERSION,
};
use crate::synth::{authentic_store, interpolated_store, planted_store, PlantedSpec};
use crate::Strategies;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable overriding the number of evaluation worker threads.
pub const WORKERS_ENV: &str = "RFIQA_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "rfiqa", version, about = "Regression-free blind image quality prediction over feature stores")]
pub struct Cli {
    /// Print progress and timings to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate an exported manifest/vectors pair and write a canonical store.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Max-pool every feature vector by a factor and write a new store.
    Reduce {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        factor: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score one query and print the retrieved instances as CSV.
    Predict(PredictArgs),
    /// Run the repeated split protocol and write a report CSV.
    Evaluate(EvaluateArgs),
    /// Emit semantic similarity vs aligned quality correlation scatter data.
    Analyze {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long)]
        out: PathBuf,
        /// CSV of `group,partner` rows for the similar-instance predictor.
        #[arg(long)]
        si_pairing: Option<PathBuf>,
    },
    /// Generate a planted synthetic store.
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::Toy)]
        kind: SynthKind,
        #[arg(long)]
        seed: Option<u64>,
        /// Group count (record count for `authentic`).
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum SynthKind {
    Toy,
    Planted,
    Interpolated,
    Authentic,
}

#[derive(Args, Debug)]
pub struct RetrievalArgs {
    #[arg(long)]
    pub k_prime: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub k_double_prime: usize,
    /// cosine, euclidean, manhattan or js.
    #[arg(long, default_value = "cosine")]
    pub metric: String,
    /// hierarchical or flat; defaults to hierarchical for synthetic stores
    /// and flat for authentic ones.
    #[arg(long)]
    pub mode: Option<String>,
    /// simple or weighted.
    #[arg(long, default_value = "weighted")]
    pub aggregate: String,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("query").required(true).args(["query_id", "query_features"]))]
pub struct PredictArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Use a record of the store as the query.
    #[arg(long)]
    pub query_id: Option<String>,
    /// JSON file `{"semantic": [...], "distortion": [...]}`.
    #[arg(long)]
    pub query_features: Option<PathBuf>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    /// Group left out of retrieval; defaults to the query's own group with
    /// `--query-id`.
    #[arg(long)]
    pub exclude_group: Option<String>,
    /// Do not exclude the query's own group.
    #[arg(long, conflicts_with = "exclude_group")]
    pub include_own_group: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[arg(long, default_value_t = 15)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Fraction of the training pool kept as the retrieval store.
    #[arg(long, default_value_t = 1.0)]
    pub pool_fraction: f64,
    #[arg(long)]
    pub fit_logistic: bool,
    #[arg(long)]
    pub per_distortion: bool,
    #[arg(long)]
    pub out: PathBuf,
}

const DEFAULT_K_PRIME: usize = 10;

fn command() -> clap::Command {
    Cli::command().after_help(format!(
        "Stores are directories holding manifest.json and vectors.bin (store format version {FORMAT_VERSION}).\n\
         Set {WORKERS_ENV} to fix the number of evaluation worker threads.\n\
         Exit codes: 0 ok, 2 data error, 64 usage error."
    ))
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}

/// Usage errors are problems with the requested configuration; everything
/// else is a problem with the data.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownStrategy { .. }
        | Error::InvalidConfig(_)
        | Error::InvalidFactor(_)
        | Error::InvalidFraction(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

struct Resolved {
    config: RetrievalConfig,
    aggregator: Arc<dyn Aggregator>,
}

/// Resolves strategy names before any store is read, so a bad flag never
/// costs a load.
fn resolve(args: &RetrievalArgs, mode_hint: Option<StoreMode>) -> Result<Resolved> {
    let strategies = Strategies::builtin();
    let metric = strategies.metrics.get(&args.metric)?;
    let aggregator = strategies.aggregators.get(&args.aggregate)?;
    let mode_name = match (&args.mode, mode_hint) {
        (Some(m), _) => m.as_str(),
        (None, Some(StoreMode::Authentic)) => "flat",
        (None, _) => "hierarchical",
    };
    let mode = strategies.modes.get(mode_name)?;
    let k_prime = args.k_prime.unwrap_or(DEFAULT_K_PRIME);
    let config = RetrievalConfig::new(k_prime, args.k_double_prime)?
        .with_metric(metric)
        .with_mode(mode);
    Ok(Resolved { config, aggregator })
}

fn check_names(args: &RetrievalArgs) -> Result<()> {
    resolve(args, None).map(|_| ())
}

struct Log {
    level: u8,
    start: Instant,
}

impl Log {
    fn info(&self, msg: impl AsRef<str>) {
        if self.level > 0 {
            eprintln!("[{:>8.3}s] {}", self.start.elapsed().as_secs_f64(), msg.as_ref());
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let log = Log {
        level: cli.verbose,
        start: Instant::now(),
    };
    match cli.command {
        Command::Ingest { manifest, vectors, out } => ingest(&manifest, &vectors, &out, &log),
        Command::Reduce { store, factor, out } => {
            if factor == 0 {
                return Err(Error::InvalidFactor(factor));
            }
            let source = load_store(&store)?;
            let reduced = reduce_features(&source, factor)?;
            write_new_store(&reduced, &store, &out)?;
            println!("{}", summary(&reduced));
            Ok(())
        }
        Command::Predict(args) => predict_cmd(args, &log),
        Command::Evaluate(args) => evaluate_cmd(args, &log),
        Command::Analyze {
            store,
            top_n,
            out,
            si_pairing,
        } => analyze_cmd(&store, top_n, &out, si_pairing.as_deref(), &log),
        Command::Synth { kind, seed, size, out } => {
            let store = match kind {
                SynthKind::Toy => planted_store(&with_overrides(PlantedSpec::toy(), seed, size)),
                SynthKind::Planted => planted_store(&with_overrides(PlantedSpec::acceptance(), seed, size)),
                SynthKind::Interpolated => interpolated_store(size.unwrap_or(25), seed.unwrap_or(0)),
                SynthKind::Authentic => authentic_store(size.unwrap_or(500), seed.unwrap_or(0)),
            };
            save_store(&store, &out)?;
            println!("{}", summary(&store));
            Ok(())
        }
    }
}

fn with_overrides(mut spec: PlantedSpec, seed: Option<u64>, size: Option<usize>) -> PlantedSpec {
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(n) = size {
        spec.n_groups = n;
    }
    spec
}

fn summary(store: &FeatureStore) -> String {
    let m = store.manifest();
    format!(
        "dataset={} mode={} records={} groups={} distorted={} semantic_dim={} distortion_dim={} reduction_factor={}",
        m.dataset_name,
        m.mode.as_str(),
        store.len(),
        store.groups().len(),
        store.distorted_count(),
        m.semantic_dim,
        m.distortion_dim,
        m.reduction_factor
    )
}

/// Refuses to overwrite the input directory.
fn write_new_store(store: &FeatureStore, input: &Path, out: &Path) -> Result<()> {
    if let (Ok(a), Ok(b)) = (input.canonicalize(), out.canonicalize()) {
        if a == b {
            return Err(Error::InvalidConfig("output directory must differ from the input store".into()));
        }
    }
    save_store(store, out)
}

fn ingest(manifest: &Path, vectors: &Path, out: &Path, log: &Log) -> Result<()> {
    let text = fs::read_to_string(manifest)?;
    let bytes = fs::read(vectors)?;
    log.info(format!("read {} manifest bytes, {} vector bytes", text.len(), bytes.len()));
    let store = parse_store(&text, &bytes)?;
    let same_dir = match (manifest.parent().map(Path::canonicalize), out.canonicalize()) {
        (Some(Ok(a)), Ok(b)) => a == b,
        _ => false,
    };
    if same_dir {
        return Err(Error::InvalidConfig("output directory must differ from the input store".into()));
    }
    save_store(&store, out)?;
    println!("{}", summary(&store));
    Ok(())
}

#[derive(Deserialize)]
struct QueryFeatures {
    semantic: Vec<f32>,
    distortion: Vec<f32>,
}

fn predict_cmd(args: PredictArgs, log: &Log) -> Result<()> {
    check_names(&args.retrieval)?;
    let store = load_store(&args.store)?;
    log.info(summary(&store));
    let Resolved { config, aggregator } = resolve(&args.retrieval, Some(store.mode()))?;

    let external;
    let (query, query_id, own_group) = match (&args.query_id, &args.query_features) {
        (Some(id), _) => {
            let record = store
                .record(id)
                .ok_or_else(|| Error::UnknownRecord(id.clone()))?;
            (Query::from_record(record), id.clone(), Some(record.group_id.clone()))
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)?;
            external = serde_json::from_str::<QueryFeatures>(&text)
                .map_err(|e| Error::InvalidManifest(format!("query features: {e}")))?;
            let id = path.display().to_string();
            (Query::new(&external.semantic, &external.distortion), id, None)
        }
        (None, None) => unreachable!("clap requires one query source"),
    };
    let exclude = if args.include_own_group {
        None
    } else {
        args.exclude_group.clone().or(own_group)
    };
    let config = config.excluding(exclude);
    let result = predict(&store, &query, &config, aggregator.as_ref())?;

    let config_text = format!("{};aggregate={};{}", config.describe(), aggregator.name(), store_snapshot(&store));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} {} seed=none config_hash={}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        config_hash(&config_text)
    );
    let _ = writeln!(out, "# config={config_text}");
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidConfig(e.to_string());
    w.write_record(["kind", "id", "group", "d_s", "d_d", "mos"]).map_err(csv_err)?;
    w.write_record(["score", &query_id, "", "", "", &format!("{:.6}", result.score)])
        .map_err(csv_err)?;
    for inst in &result.instances {
        w.write_record([
            "instance",
            &inst.record_id,
            &inst.group_id,
            &format!("{:.6}", inst.d_s),
            &format!("{:.6}", inst.d_d),
            &format!("{:.6}", inst.mos),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    print!("{out}");
    Ok(())
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(WORKERS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{WORKERS_ENV} must be a positive integer, got {value:?}")))?;
        if n == 0 {
            return Err(Error::InvalidConfig(format!("{WORKERS_ENV} must be >= 1")));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))
}

fn evaluate_cmd(args: EvaluateArgs, log: &Log) -> Result<()> {
    check_names(&args.retrieval)?;
    if args.repeats == 0 {
        return Err(Error::InvalidConfig("--repeats must be >= 1".into()));
    }
    if !(args.train_fraction > 0.0 && args.train_fraction < 1.0) {
        return Err(Error::InvalidFraction(args.train_fraction));
    }
    if !(args.pool_fraction > 0.0 && args.pool_fraction <= 1.0) {
        return Err(Error::InvalidFraction(args.pool_fraction));
    }
    let pool = worker_pool()?;
    let store = load_store(&args.store)?;
    log.info(summary(&store));
    let Resolved { config, aggregator } = resolve(&args.retrieval, Some(store.mode()))?;
    let params = ProtocolParams {
        train_fraction: args.train_fraction,
        n_repeats: args.repeats,
        base_seed: args.seed,
        pool_fraction: args.pool_fraction,
        fit_logistic: args.fit_logistic,
    };
    let report = pool.install(|| -> Result<_> {
        let mut report = run_protocol(&store, &config, aggregator.as_ref(), &params)?;
        if args.per_distortion {
            report.per_distortion =
                per_distortion_breakdown(&store, &config, aggregator.as_ref(), args.train_fraction, args.seed)?;
        }
        Ok(report)
    })?;
    log.info(format!(
        "{} repeats, {} failed, median srocc {:.4}",
        report.repeats.len(),
        report.failed_repeats,
        report.median_srocc
    ));
    fs::write(&args.out, report.to_csv())?;
    println!(
        "median_srocc={:.6} median_plcc={:.6} median_rmse={:.6} failed={}",
        report.median_srocc, report.median_plcc, report.median_rmse, report.failed_repeats
    );
    Ok(())
}

fn analyze_cmd(store_dir: &Path, top_n: usize, out: &Path, pairing: Option<&Path>, log: &Log) -> Result<()> {
    if top_n == 0 {
        return Err(Error::InvalidConfig("--top-n must be >= 1".into()));
    }
    let pairing = pairing
        .map(|p| fs::read_to_string(p).map_err(Error::from).and_then(|t| parse_pairing(&t)))
        .transpose()?;
    let store = load_store(store_dir)?;
    log.info(summary(&store));
    let points = consistency_points(&store, top_n)?;
    let config_text = format!("top_n={top_n};{}", store_snapshot(&store));
    let comment = format!(
        "{} {} seed=none config_hash={} config={}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        config_hash(&config_text),
        config_text
    );
    emit_scatter(&points, out, &comment)?;
    let sim: Vec<f64> = points.iter().map(|p| p.semantic_similarity).collect();
    let corr: Vec<f64> = points.iter().map(|p| p.aligned_srocc).collect();
    let trend = srocc(&sim, &corr).map(|s| format!("{s:.6}")).unwrap_or_else(|_| "nan".into());
    println!("points={} similarity_vs_quality_srocc={trend}", points.len());
    if let Some(pairing) = pairing {
        let si = si_predictor_eval(&store, &pairing)?;
        println!(
            "si_predictor n={} srocc={:.6} plcc={:.6} rmse={:.6}",
            si.n, si.srocc, si.plcc, si.rmse
        );
    }
    Ok(())
}

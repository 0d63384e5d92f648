//! `vlq` command-line pipeline: synth, gt, train, build, query, eval, stats.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use vlq_adc::eval::{build_ivf_baseline, evaluate_baseline, evaluate_index, ReportRow};
use vlq_adc::quantizers::train_residual_pq;
use vlq_adc::{
    brute_force_gt, deserialize_index, gen_synthetic, memory_report, peek_dim, read_ground_truth,
    read_vecs, region_histogram, run_experiment, search_batch, serialize_index,
    train_quantizers, write_ground_truth, write_vecs, ExperimentConfig, ExperimentReport,
    GroundTruth, Index32, QueryParams, TrainParams, VecsKind, VectorSet32,
};

#[derive(Debug, Parser)]
#[command(name = "vlq", version, about = "VLQ-ADC approximate nearest neighbor index")]
pub struct Cli {
    /// Cap on worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a clustered Gaussian vector set
    Synth(SynthArgs),
    /// Brute-force ground truth for a query set
    Gt(GtArgs),
    /// Train codebook, centroid graph and PQ; writes an empty index as the model
    Train(TrainArgs),
    /// Encode a base set into an index
    Build(BuildArgs),
    /// Search an index
    Query(QueryArgs),
    /// Recall and timing over a parameter grid
    Eval(EvalArgs),
    /// Region occupancy histogram and memory report
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of vectors
    #[arg(long = "n", default_value_t = 100_000)]
    pub count: usize,
    /// Dimension
    #[arg(long = "d", default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 200)]
    pub clusters: usize,
    /// Per-coordinate standard deviation around each cluster center
    #[arg(long, default_value_t = 0.1)]
    pub spread: f64,
    /// Output file (.fvecs, .bvecs or .ivecs)
    #[arg(long)]
    pub out: PathBuf,
    /// Extra vectors drawn from the same mixture, written to --queries-out
    #[arg(long, default_value_t = 0, requires = "queries_out")]
    pub queries: usize,
    #[arg(long)]
    pub queries_out: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GtArgs {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Output .ivecs file
    #[arg(long)]
    pub out: PathBuf,
    /// Neighbors stored per query
    #[arg(long = "K", default_value_t = 100)]
    pub top: usize,
}

#[derive(Debug, Args, Clone)]
pub struct TrainFlags {
    /// First-level regions
    #[arg(long, default_value_t = 1024)]
    pub k: usize,
    /// Neighbor edges per centroid
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    /// PQ sub-quantizers (bytes per code)
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Clamp edge positions to the segment
    #[arg(long = "clamp-lambda", default_value_t = true, action = clap::ArgAction::Set)]
    pub clamp_lambda: bool,
    /// Train on the leading N vectors only (0 = all)
    #[arg(long, default_value_t = 0)]
    pub train_size: usize,
}

impl TrainFlags {
    fn params(&self) -> TrainParams {
        TrainParams {
            k: self.k,
            n: self.n,
            m: self.m,
            iters: self.iters,
            seed: self.seed,
            clamp_lambda: self.clamp_lambda,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training vectors
    #[arg(long)]
    pub input: PathBuf,
    /// Output model file
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub base: PathBuf,
    /// Model from `train`; when absent, quantizers are trained on the base set
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output index file
    #[arg(long)]
    pub out: PathBuf,
    /// Points encoded per batch
    #[arg(long, default_value_t = 100_000)]
    pub batch: usize,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args, Clone)]
pub struct SearchFlags {
    /// First-level regions visited
    #[arg(long, default_value_t = 64)]
    pub w1: usize,
    /// Fraction of the w1*n sub-regions kept
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    /// Results per query
    #[arg(long = "K", default_value_t = 100)]
    pub top: usize,
    /// Stop scanning after this many codes (0 = no cutoff)
    #[arg(long, default_value_t = 0)]
    pub max_codes: usize,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[command(flatten)]
    pub search: SearchFlags,
    /// Text results, one line per query (default stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Result ids as .ivecs
    #[arg(long)]
    pub ids_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// TOML experiment description; runs the full train/build/search grid
    #[arg(long, conflicts_with_all = ["index", "queries", "gt"])]
    pub config: Option<PathBuf>,
    /// Index to score
    #[arg(long, required_unless_present = "config")]
    pub index: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub queries: Option<PathBuf>,
    /// Ground truth .ivecs; computed by brute force from --base when absent
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Base vectors, for brute-force ground truth or --baseline
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Comma-separated w1 values
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub w1: Vec<usize>,
    /// Comma-separated alpha values
    #[arg(long, value_delimiter = ',', default_value = "0.25")]
    pub alpha: Vec<f64>,
    /// Comma-separated recall cutoffs
    #[arg(long = "recall-k", value_delimiter = ',', default_value = "1,10,100")]
    pub recall_ks: Vec<usize>,
    /// Also score IVFADC with a residual PQ trained on the leading --train-size base vectors
    #[arg(long, requires = "base")]
    pub baseline: bool,
    #[arg(long, default_value_t = 0)]
    pub train_size: usize,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Untimed warm-up queries per grid cell
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    /// Delimited report
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Plain-text table (default stdout)
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub index: PathBuf,
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit status: 0 success, 1 usage error, 2 runtime error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        // Fails only if a pool already exists, e.g. when called twice in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Gt(a) => gt(a),
        Command::Train(a) => train(a),
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Eval(a) => eval(a),
        Command::Stats(a) => stats(a),
    }
}

fn kind_of(path: &Path) -> anyhow::Result<VecsKind> {
    VecsKind::from_path(path).with_context(|| {
        format!(
            "{}: unknown vector format (expected .fvecs, .bvecs or .ivecs)",
            path.display()
        )
    })
}

fn load(path: &Path) -> anyhow::Result<VectorSet32> {
    let kind = kind_of(path)?;
    read_vecs(path, kind).with_context(|| format!("reading {}", path.display()))
}

fn load_index(path: &Path) -> anyhow::Result<Index32> {
    deserialize_index(path).with_context(|| format!("reading index {}", path.display()))
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let kind = kind_of(&a.out)?;
    let mut set: VectorSet32 =
        gen_synthetic(a.count + a.queries, a.dim, a.clusters, a.spread, a.seed)?;
    let queries = set.split_off(a.count);
    write_vecs(&set, &a.out, kind).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("wrote {} x {} to {}", set.len(), set.dim(), a.out.display());
    if let Some(p) = &a.queries_out {
        write_vecs(&queries, p, kind_of(p)?).with_context(|| format!("writing {}", p.display()))?;
        eprintln!("wrote {} x {} to {}", queries.len(), queries.dim(), p.display());
    }
    Ok(())
}

fn gt(a: GtArgs) -> anyhow::Result<()> {
    let base = load(&a.base)?;
    let queries = load(&a.queries)?;
    let gt = brute_force_gt(&base, &queries, a.top)?;
    write_ground_truth(&gt, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("wrote {} x {} neighbors to {}", gt.num_queries(), gt.k(), a.out.display());
    Ok(())
}

fn train_model(t: &TrainFlags, data: &VectorSet32) -> anyhow::Result<Index32> {
    let train = if t.train_size > 0 {
        data.head(t.train_size)
    } else {
        data.clone()
    };
    eprintln!(
        "training k={} n={} m={} on {} vectors",
        t.k,
        t.n,
        t.m,
        train.len()
    );
    let q = train_quantizers(&train, &t.params())?;
    Ok(Index32::empty(&q)?)
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let dim = peek_dim(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    a.train.params().validate(dim, usize::MAX)?;
    let data = load(&a.input)?;
    let model = train_model(&a.train, &data)?;
    serialize_index(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("wrote model to {}", a.out.display());
    Ok(())
}

fn build(a: BuildArgs) -> anyhow::Result<()> {
    if a.batch == 0 {
        bail!("batch must be positive");
    }
    let model = match &a.model {
        Some(p) => {
            let model = load_index(p)?;
            let dim = peek_dim(&a.base)?;
            if dim != model.dim() {
                bail!("base dimension {dim} does not match model dimension {}", model.dim());
            }
            Some(model)
        }
        None => {
            let dim = peek_dim(&a.base).with_context(|| format!("reading {}", a.base.display()))?;
            a.train.params().validate(dim, usize::MAX)?;
            None
        }
    };
    let base = load(&a.base)?;
    let model = match model {
        Some(m) => m,
        None => train_model(&a.train, &base)?,
    };
    let index = Index32::build(&base, &model.quantizers(), a.batch)?;
    serialize_index(&index, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "indexed {} points into {} cells, wrote {}",
        index.base_count(),
        index.num_cells(),
        a.out.display()
    );
    Ok(())
}

fn query_params(s: &SearchFlags) -> QueryParams {
    QueryParams {
        w1: s.w1,
        alpha: s.alpha,
        k: s.top,
        max_codes: (s.max_codes > 0).then_some(s.max_codes),
    }
}

fn query(a: QueryArgs) -> anyhow::Result<()> {
    let qp = query_params(&a.search);
    let index = load_index(&a.index)?;
    qp.validate(index.k())?;
    let queries = load(&a.queries)?;
    let results = search_batch(&index, &queries, &qp)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    for (q, r) in results.iter().enumerate() {
        write!(out, "{q}:")?;
        for (id, d) in r.ids.iter().zip(&r.dists) {
            write!(out, " {id}:{d}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    if let Some(p) = &a.ids_out {
        let ids = GroundTruth::new(qp.k, padded_ids(&results, qp.k))?;
        write_ground_truth(&ids, p).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// Result ids with short rows padded by repeating the last id (or 0).
fn padded_ids(results: &[vlq_adc::SearchResult32], k: usize) -> Vec<u32> {
    let mut ids = Vec::with_capacity(results.len() * k);
    for r in results {
        let pad = r.ids.last().copied().unwrap_or(0);
        ids.extend(r.ids.iter().copied().chain(std::iter::repeat(pad)).take(k));
    }
    ids
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let report = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let mut config: ExperimentConfig =
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            if a.csv.is_some() {
                config.out_csv = a.csv.clone();
            }
            if a.table.is_some() {
                config.out_table = a.table.clone();
            }
            let report = run_experiment(&config)?;
            if config.out_table.is_none() {
                print!("{}", report.to_table());
            }
            return Ok(());
        }
        None => eval_index(&a)?,
    };
    if let Some(p) = &a.csv {
        report.write_csv(p)?;
    }
    match &a.table {
        Some(p) => std::fs::write(p, report.to_table())?,
        None => print!("{}", report.to_table()),
    }
    Ok(())
}

fn eval_index(a: &EvalArgs) -> anyhow::Result<ExperimentReport> {
    let index_path = a.index.as_deref().context("--index is required")?;
    let query_path = a.queries.as_deref().context("--queries is required")?;
    if a.recall_ks.is_empty() || a.recall_ks.contains(&0) {
        bail!("recall cutoffs must be positive");
    }
    let index = load_index(index_path)?;
    for &w1 in &a.w1 {
        for &alpha in &a.alpha {
            QueryParams { w1, alpha, ..Default::default() }.validate(index.k())?;
        }
    }
    let queries = load(query_path)?;
    let base = a.base.as_deref().map(load).transpose()?;
    let gt = match (&a.gt, &base) {
        (Some(p), _) => read_ground_truth(p).with_context(|| format!("reading {}", p.display()))?,
        (None, Some(b)) => brute_force_gt(b, &queries, 100.min(b.len()))?,
        (None, None) => bail!("either --gt or --base is required"),
    };
    let mut rows = evaluate_index(&index, &queries, &gt, &a.w1, &a.alpha, &a.recall_ks, a.warmup)?;
    if a.baseline {
        let base = base.as_ref().context("--baseline needs --base")?;
        rows.extend(baseline_rows(a, &index, base, &queries, &gt)?);
    }
    Ok(ExperimentReport { rows })
}

fn baseline_rows(
    a: &EvalArgs,
    index: &Index32,
    base: &VectorSet32,
    queries: &VectorSet32,
    gt: &GroundTruth,
) -> anyhow::Result<Vec<ReportRow>> {
    let train = if a.train_size > 0 { base.head(a.train_size) } else { base.clone() };
    let pq = train_residual_pq(&train, index.codebook(), index.m(), a.iters, a.seed.wrapping_add(1))?;
    let ivf = build_ivf_baseline(base, index.codebook(), &pq)?;
    Ok(evaluate_baseline(&ivf, queries, gt, &a.w1, &a.recall_ks, a.warmup)?)
}

fn stats(a: StatsArgs) -> anyhow::Result<()> {
    let index = load_index(&a.index)?;
    let hist = region_histogram(&index);
    let mem = memory_report(
        index.base_count() as u64,
        index.dim() as u64,
        index.k() as u64,
        index.n() as u64,
        index.m() as u64,
    );
    println!(
        "index: N={} D={} k={} n={} m={} clamp_lambda={}",
        index.base_count(),
        index.dim(),
        index.k(),
        index.n(),
        index.m(),
        index.clamp_lambda()
    );
    println!("{hist}");
    println!("{mem}");
    Ok(())
}

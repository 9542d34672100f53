//! `rca` — causal-discovery toolkit for root-cause analysis on binary
//! manufacturing-quality data.
//!
//! Subcommands: `simulate` (tiered ground truth + binary samples),
//! `preprocess` (relational join/aggregate/bin/filter pipeline),
//! `discover` (PC / NOTEARS / DAGMA), `evaluate` (graph-recovery metrics),
//! `bench` (the full comparison study), and `report` (re-aggregate a
//! records CSV).
//!
//! Exit codes: 0 success, 1 runtime or partial-cell failures,
//! 2 configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rca_core::bench::{self, Algorithm, BenchConfig, PAPER_M_GRID, PAPER_TRIALS};
use rca_core::dagma::{dagma, DagmaConfig};
use rca_core::graph::{threshold, BinaryGraph, MixedGraph, UndirectedSidecar};
use rca_core::metrics;
use rca_core::notears::{notears, LossKind, NotearsConfig};
use rca_core::pc::{pc, CiTestKind, PcConfig};
use rca_core::preprocess::{
    build_binary_table, filter_attributes, interval_labels, read_subops_csv_path,
    read_vehicles_csv_path,
};
use rca_core::simulate::{generate_ground_truth, sample_dataset, TierSpec};
use rca_core::{BinaryDataset, Error};

#[derive(Parser)]
#[command(name = "rca", version, about = "Causal discovery for root-cause analysis on binary manufacturing data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a tiered ground-truth DAG and sample a binary dataset from it.
    Simulate(SimulateArgs),
    /// Join vehicles with sub-operations, aggregate, bin, one-hot encode,
    /// and filter properties by phi correlation.
    Preprocess(PreprocessArgs),
    /// Learn a causal structure from a binary dataset.
    Discover(DiscoverArgs),
    /// Score a learned adjacency against a ground-truth adjacency.
    Evaluate(EvaluateArgs),
    /// Run the algorithm comparison over an m-grid with repeated trials.
    Bench(BenchArgs),
    /// Re-aggregate a records CSV into aggregate tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Comma-separated node counts per tier, e.g. 25,8,1.
    #[arg(long, default_value = "25,8,1")]
    tiers: String,
    /// Comma-separated tier names; defaults to FaE,ErPz,Fe for three tiers.
    #[arg(long)]
    tier_names: Option<String>,
    #[arg(long, default_value_t = 0.3)]
    edge_prob: f64,
    /// Allow edges that skip tiers instead of connecting consecutive ones.
    #[arg(long)]
    skip_edges: bool,
    /// Edge-weight magnitude range "low,high".
    #[arg(long, default_value = "1.0,3.0")]
    weight_range: String,
    /// Number of samples.
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_data: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
    /// Sidecar with weights/biases/tiers; defaults to <out-truth>.meta.json.
    #[arg(long)]
    out_meta: Option<PathBuf>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    vehicles: PathBuf,
    #[arg(long)]
    subops: PathBuf,
    #[arg(long, default_value_t = 4)]
    bins: usize,
    /// Interval construction; only equal-width binning is implemented.
    #[arg(long, value_enum, default_value_t = BinMode::EqualWidth)]
    bin_mode: BinMode,
    #[arg(long, default_value_t = 0.7)]
    phi_cutoff: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BinMode {
    EqualWidth,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Pc,
    Notears,
    Dagma,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Ls,
    Logistic,
}

#[derive(Args)]
struct DiscoverArgs {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long = "in")]
    input: PathBuf,
    /// Binarized adjacency CSV (for PC: symmetric CSV plus sidecar).
    #[arg(long)]
    out: PathBuf,
    /// Raw weighted adjacency CSV (NOTEARS/DAGMA only).
    #[arg(long)]
    out_weights: Option<PathBuf>,
    /// Solver diagnostics JSON (NOTEARS/DAGMA only).
    #[arg(long)]
    diag: Option<PathBuf>,
    /// Undirected-pairs sidecar (PC only); defaults to
    /// <out>.undirected.json.
    #[arg(long)]
    sidecar: Option<PathBuf>,

    // PC options
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Cap on the conditioning-set size.
    #[arg(long, default_value_t = 3)]
    max_cond: usize,
    /// Order-dependent skeleton phase (stable mode is the default).
    #[arg(long)]
    unstable: bool,
    /// Pearson chi-square statistic instead of the G² likelihood ratio.
    #[arg(long)]
    pearson: bool,
    /// Keep edges whose tests are underpowered instead of removing them.
    #[arg(long)]
    no_lowpower_delete: bool,

    // NOTEARS/DAGMA options
    #[arg(long, default_value_t = 0.025)]
    lambda1: f64,
    #[arg(long, default_value_t = 1e-8)]
    h_tol: f64,
    #[arg(long, default_value_t = 1e16)]
    rho_max: f64,
    #[arg(long, default_value_t = 0.1)]
    omega: f64,
    #[arg(long, value_enum, default_value_t = LossArg::Ls)]
    loss: LossArg,
    /// Fit on raw 0/1 columns instead of mean-centered ones.
    #[arg(long)]
    no_center: bool,

    // DAGMA options
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Comma-separated central-path coefficients.
    #[arg(long, default_value = "1.0,0.1,0.01,0.001")]
    mu: String,
    #[arg(long, default_value_t = 3e-4)]
    lr: f64,
    #[arg(long, default_value_t = 4000)]
    max_inner: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    learned: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Undirected-pairs sidecar of a PC result; undirected edges are
    /// oriented to match the truth where possible.
    #[arg(long)]
    undirected: Option<PathBuf>,
    /// Count the diagonal cells as true negatives.
    #[arg(long)]
    include_diagonal: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON file mirroring the benchmark configuration; CLI flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of pc,notears,dagma.
    #[arg(long)]
    algos: Option<String>,
    /// Comma-separated sample counts.
    #[arg(long)]
    m_grid: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated node counts per tier.
    #[arg(long)]
    tiers: Option<String>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long)]
    skip_edges: bool,
    #[arg(long)]
    weight_range: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Use the full study grid: m in {500,...,100000}, 25 trials.
    #[arg(long)]
    paper_grid: bool,
    /// Draw an independent dataset per m instead of nested prefixes.
    #[arg(long)]
    independent_datasets: bool,
    /// Also render a Markdown table.
    #[arg(long)]
    markdown: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    markdown: bool,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| Error::Parameter(format!("bad {what} entry '{p}'")))
        })
        .collect()
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64), Error> {
    let parts: Vec<f64> = parse_list(s, what)?;
    if parts.len() != 2 {
        return Err(Error::Parameter(format!(
            "{what} needs two values, got '{s}'"
        )));
    }
    Ok((parts[0], parts[1]))
}

fn tier_spec_from_parts(
    tiers: &str,
    tier_names: Option<&str>,
    edge_prob: f64,
    skip_edges: bool,
    weight_range: (f64, f64),
    seed: u64,
) -> Result<TierSpec, Error> {
    let counts: Vec<usize> = parse_list(tiers, "tiers")?;
    if counts.is_empty() {
        return Err(Error::Parameter("tier list is empty".into()));
    }
    let names: Vec<String> = match tier_names {
        Some(list) => {
            let names: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
            if names.len() != counts.len() {
                return Err(Error::Parameter(format!(
                    "{} tier names for {} tiers",
                    names.len(),
                    counts.len()
                )));
            }
            names
        }
        None if counts.len() == 3 => vec!["FaE".into(), "ErPz".into(), "Fe".into()],
        None => (1..=counts.len()).map(|i| format!("c{i}")).collect(),
    };
    Ok(TierSpec {
        tiers: names.into_iter().zip(counts).collect(),
        edge_probability: edge_prob,
        allow_skip_edges: skip_edges,
        weight_range,
        seed,
    })
}

fn run_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let spec = tier_spec_from_parts(
        &args.tiers,
        args.tier_names.as_deref(),
        args.edge_prob,
        args.skip_edges,
        parse_pair(&args.weight_range, "weight range")?,
        args.seed,
    )?;
    let gt = generate_ground_truth(&spec)?;
    let data = sample_dataset(&gt, args.m, args.seed.wrapping_add(1))?;
    data.write_csv_path(&args.out_data)?;
    gt.graph.write_csv_path(&args.out_truth)?;
    let meta_path = args
        .out_meta
        .clone()
        .unwrap_or_else(|| sibling_path(&args.out_truth, ".meta.json"));
    let f = std::fs::File::create(meta_path)?;
    serde_json::to_writer_pretty(f, &gt.to_meta())?;
    log::info!(
        "simulated {} samples over {} nodes ({} edges)",
        data.m(),
        gt.d(),
        gt.graph.edge_count()
    );
    Ok(())
}

fn sibling_path(base: &std::path::Path, suffix: &str) -> PathBuf {
    let mut os = base.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}

#[derive(serde::Serialize)]
struct PreprocessReport {
    table: rca_core::preprocess::TableReport,
    filter: rca_core::preprocess::FilterReport,
}

fn run_preprocess(args: &PreprocessArgs) -> Result<(), Error> {
    let BinMode::EqualWidth = args.bin_mode;
    let vehicles = read_vehicles_csv_path(&args.vehicles)?;
    let subops = read_subops_csv_path(&args.subops)?;
    let (table, table_report) = build_binary_table(&vehicles, &subops, args.bins)?;
    let features: Vec<String> = table
        .labels()
        .iter()
        .filter(|l| l.starts_with("FaE_"))
        .cloned()
        .collect();
    let targets = interval_labels(args.bins);
    let (filtered, filter_report) =
        filter_attributes(&table, &features, &targets, args.phi_cutoff)?;
    filtered.write_csv_path(&args.out)?;
    let kept = filter_report.kept.len();
    let report = PreprocessReport {
        table: table_report,
        filter: filter_report,
    };
    serde_json::to_writer_pretty(std::fs::File::create(&args.report)?, &report)?;
    log::info!(
        "preprocessed {} rows, kept {} of {} property columns",
        filtered.m(),
        kept,
        features.len()
    );
    Ok(())
}

fn run_discover(args: &DiscoverArgs) -> Result<(), Error> {
    let data = BinaryDataset::read_csv_path(&args.input)?;
    match args.algo {
        AlgoArg::Pc => {
            if args.out_weights.is_some() || args.diag.is_some() {
                return Err(Error::Parameter(
                    "--out-weights/--diag apply to notears and dagma only".into(),
                ));
            }
            let cfg = PcConfig {
                alpha: args.alpha,
                max_cond_set: Some(args.max_cond),
                stable: !args.unstable,
                test: if args.pearson {
                    CiTestKind::Pearson
                } else {
                    CiTestKind::G2
                },
                keep_underpowered: args.no_lowpower_delete,
                ..PcConfig::default()
            };
            let mg = pc(&data, &cfg)?;
            mg.write_csv_path(&args.out)?;
            let sidecar_path = args
                .sidecar
                .clone()
                .unwrap_or_else(|| sibling_path(&args.out, ".undirected.json"));
            serde_json::to_writer_pretty(std::fs::File::create(sidecar_path)?, &mg.sidecar())?;
        }
        AlgoArg::Notears => {
            if args.pearson || args.no_lowpower_delete || args.unstable {
                return Err(Error::Parameter("PC flags given for notears".into()));
            }
            let cfg = NotearsConfig {
                lambda1: args.lambda1,
                h_tol: args.h_tol,
                rho_max: args.rho_max,
                omega: args.omega,
                loss: match args.loss {
                    LossArg::Ls => LossKind::LeastSquares,
                    LossArg::Logistic => LossKind::Logistic,
                },
                center_data: !args.no_center,
                ..NotearsConfig::default()
            };
            let result = notears(&data, &cfg)?;
            finish_weighted(args, &result, cfg.omega)?;
        }
        AlgoArg::Dagma => {
            if args.loss == LossArg::Logistic {
                return Err(Error::Parameter(
                    "dagma uses the shared least-squares loss; --loss logistic is notears-only"
                        .into(),
                ));
            }
            let cfg = DagmaConfig {
                s: args.s,
                mu_schedule: parse_list(&args.mu, "mu schedule")?,
                lambda1: args.lambda1,
                lr: args.lr,
                max_inner_iter: args.max_inner,
                omega: args.omega,
                center_data: !args.no_center,
                ..DagmaConfig::default()
            };
            let result = dagma(&data, &cfg)?;
            finish_weighted(args, &result, cfg.omega)?;
        }
    }
    Ok(())
}

fn finish_weighted(
    args: &DiscoverArgs,
    result: &rca_core::notears::SolveResult,
    omega: f64,
) -> Result<(), Error> {
    let binary = threshold(&result.weights, omega)?;
    binary.write_csv_path(&args.out)?;
    if let Some(path) = &args.out_weights {
        result.weights.write_csv_path(path)?;
    }
    if let Some(path) = &args.diag {
        serde_json::to_writer_pretty(std::fs::File::create(path)?, &result.diagnostics)?;
    }
    if !result.diagnostics.converged {
        log::warn!(
            "solver did not converge: final h = {:.3e}",
            result.diagnostics.final_h
        );
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct Evaluation {
    counts: metrics::ConfusionCounts,
    shd: u64,
    precision: f64,
    recall: f64,
    f1: f64,
    flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    undirected_resolution: Option<metrics::OrientationResolution>,
}

fn run_evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    let truth = BinaryGraph::read_csv_path(&args.truth)?;
    let learned_raw = BinaryGraph::read_csv_path(&args.learned)?;
    let (learned, resolution) = match &args.undirected {
        Some(path) => {
            let sidecar: UndirectedSidecar = serde_json::from_reader(std::fs::File::open(path)?)?;
            let mg = MixedGraph::from_csv_and_sidecar(&learned_raw, &sidecar)?;
            let (bin, res) = metrics::mixed_to_binary(&mg, &truth)?;
            (bin, Some(res))
        }
        None => (learned_raw, None),
    };
    let counts = metrics::confusion_with(&learned, &truth, args.include_diagonal)?;
    let precision = metrics::precision(&counts);
    let recall = metrics::recall(&counts);
    let f1 = metrics::f1(&counts);
    let mut flags = Vec::new();
    for (name, flagged) in [("precision", &precision), ("recall", &recall), ("f1", &f1)] {
        if !flagged.defined {
            flags.push(format!("{name}_undefined"));
        }
    }
    let evaluation = Evaluation {
        counts,
        shd: metrics::shd(&counts),
        precision: precision.value,
        recall: recall.value,
        f1: f1.value,
        flags,
        undirected_resolution: resolution,
    };
    serde_json::to_writer_pretty(std::fs::File::create(&args.out)?, &evaluation)?;
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<bool, Error> {
    let mut cfg: BenchConfig = match &args.config {
        Some(path) => serde_json::from_reader(std::fs::File::open(path)?)?,
        None => BenchConfig::default(),
    };
    if let Some(algos) = &args.algos {
        cfg.algorithms = algos
            .split(',')
            .map(|a| a.trim().parse::<Algorithm>())
            .collect::<Result<Vec<_>, _>>()?;
    }
    if let Some(grid) = &args.m_grid {
        cfg.m_grid = parse_list(grid, "m grid")?;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(tiers) = &args.tiers {
        cfg.tier_spec = tier_spec_from_parts(
            tiers,
            None,
            cfg.tier_spec.edge_probability,
            cfg.tier_spec.allow_skip_edges,
            cfg.tier_spec.weight_range,
            cfg.tier_spec.seed,
        )?;
    }
    if let Some(p) = args.edge_prob {
        cfg.tier_spec.edge_probability = p;
    }
    if args.skip_edges {
        cfg.tier_spec.allow_skip_edges = true;
    }
    if let Some(range) = &args.weight_range {
        cfg.tier_spec.weight_range = parse_pair(range, "weight range")?;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    if args.independent_datasets {
        cfg.independent_datasets = true;
    }
    if args.paper_grid {
        cfg.m_grid = PAPER_M_GRID.to_vec();
        cfg.trials = PAPER_TRIALS;
    }
    cfg.validate()?;

    let output = bench::run_benchmark(&cfg)?;
    let written = bench::emit_report(&args.out_dir, &cfg, &output, args.markdown)?;
    for path in &written {
        log::info!("wrote {}", path.display());
    }
    if !output.failures.is_empty() {
        log::error!("{} cell(s) failed; see report.json", output.failures.len());
    }
    Ok(output.failures.is_empty())
}

fn run_report(args: &ReportArgs) -> Result<(), Error> {
    let records = bench::read_records_csv(std::fs::File::open(&args.records)?)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let rows = bench::aggregate(&records);
    bench::write_aggregates_csv(
        &rows,
        std::fs::File::create(args.out_dir.join("aggregates.csv"))?,
    )?;
    if args.markdown {
        std::fs::write(args.out_dir.join("report.md"), bench::render_markdown(&rows))?;
    }
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => run_simulate(args).map(|()| true),
        Command::Preprocess(args) => run_preprocess(args).map(|()| true),
        Command::Discover(args) => run_discover(args).map(|()| true),
        Command::Evaluate(args) => run_evaluate(args).map(|()| true),
        Command::Bench(args) => run_bench(args),
        Command::Report(args) => run_report(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

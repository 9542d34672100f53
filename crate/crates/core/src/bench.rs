//! Benchmark harness: run each algorithm over a grid of sample sizes with
//! repeated trials, score against the generating ground truth, aggregate
//! mean ± standard deviation, and emit CSV/JSON/Markdown reports.
//!
//! One ground truth is drawn per trial (seed = base_seed + trial) and shared
//! across algorithms and sample sizes, so comparisons are paired. Datasets
//! along the m-grid are nested by default (a smaller dataset is a bit-exact
//! prefix of the larger one), which keeps metric-vs-M curves free of
//! resampling noise; `independent_datasets` restores independent draws.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dagma::{dagma, DagmaConfig};
use crate::error::{Error, Result};
use crate::graph::threshold;
use crate::metrics;
use crate::notears::{notears, NotearsConfig};
use crate::pc::{pc, PcConfig};
use crate::simulate::{generate_ground_truth, sample_dataset, TierSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pc,
    Notears,
    Dagma,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Pc, Algorithm::Notears, Algorithm::Dagma];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Pc => write!(f, "pc"),
            Algorithm::Notears => write!(f, "notears"),
            Algorithm::Dagma => write!(f, "dagma"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pc" => Ok(Algorithm::Pc),
            "notears" => Ok(Algorithm::Notears),
            "dagma" => Ok(Algorithm::Dagma),
            other => Err(Error::Parameter(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub algorithms: Vec<Algorithm>,
    /// Strictly increasing sample counts.
    pub m_grid: Vec<usize>,
    pub trials: u64,
    pub base_seed: u64,
    /// Tier layout of the simulated ground truth; its `seed` field is
    /// overridden per trial.
    pub tier_spec: TierSpec,
    pub pc: PcConfig,
    pub notears: NotearsConfig,
    pub dagma: DagmaConfig,
    /// Draw a fresh dataset per m instead of nested prefixes.
    pub independent_datasets: bool,
    /// Worker threads; 0 means all available cores.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            m_grid: vec![500, 2000, 10_000],
            trials: 10,
            base_seed: 42,
            tier_spec: TierSpec::default(),
            pc: PcConfig::default(),
            notears: NotearsConfig::default(),
            dagma: DagmaConfig::default(),
            independent_datasets: false,
            jobs: 0,
        }
    }
}

/// The paper-scale grid and trial count.
pub const PAPER_M_GRID: [usize; 8] = [500, 1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000];
pub const PAPER_TRIALS: u64 = 25;

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Parameter("no algorithms selected".into()));
        }
        if self.m_grid.is_empty() {
            return Err(Error::Parameter("m grid is empty".into()));
        }
        if self.m_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("m grid must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be >= 1".into()));
        }
        self.tier_spec.validate()?;
        self.pc.validate()?;
        self.notears.validate()?;
        self.dagma.validate()
    }
}

/// One (algorithm, m, trial) cell of the benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub algorithm: Algorithm,
    pub m: usize,
    pub trial: u64,
    pub seed: u64,
    pub shd: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub runtime_seconds: f64,
    pub converged: bool,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailedCell {
    pub algorithm: Algorithm,
    pub m: usize,
    pub trial: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchOutput {
    pub records: Vec<EvalRecord>,
    pub failures: Vec<FailedCell>,
}

fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_cell(
    cfg: &BenchConfig,
    algorithm: Algorithm,
    m_index: usize,
    trial: u64,
) -> Result<EvalRecord> {
    let m = cfg.m_grid[m_index];
    let trial_seed = cfg.base_seed.wrapping_add(trial);
    let spec = TierSpec {
        seed: trial_seed,
        ..cfg.tier_spec.clone()
    };
    let gt = generate_ground_truth(&spec)?;
    let data_salt = if cfg.independent_datasets {
        1 + m_index as u64
    } else {
        0
    };
    let data = sample_dataset(&gt, m, derive_seed(trial_seed, data_salt))?;

    let mut flags: Vec<String> = Vec::new();
    let (learned, runtime, converged) = match algorithm {
        Algorithm::Pc => {
            let start = Instant::now();
            let mixed = pc(&data, &cfg.pc)?;
            let runtime = start.elapsed().as_secs_f64();
            let (bin, resolution) = metrics::mixed_to_binary(&mixed, &gt.graph)?;
            if resolution.arbitrary > 0 {
                flags.push(format!("arbitrary_orientations={}", resolution.arbitrary));
            }
            (bin, runtime, true)
        }
        Algorithm::Notears => {
            let start = Instant::now();
            let result = notears(&data, &cfg.notears)?;
            let runtime = start.elapsed().as_secs_f64();
            (
                threshold(&result.weights, cfg.notears.omega)?,
                runtime,
                result.diagnostics.converged,
            )
        }
        Algorithm::Dagma => {
            let start = Instant::now();
            let result = dagma(&data, &cfg.dagma)?;
            let runtime = start.elapsed().as_secs_f64();
            (
                threshold(&result.weights, cfg.dagma.omega)?,
                runtime,
                result.diagnostics.converged,
            )
        }
    };
    if !converged {
        flags.push("not_converged".into());
    }

    let counts = metrics::confusion(&learned, &gt.graph)?;
    let precision = metrics::precision(&counts);
    let recall = metrics::recall(&counts);
    let f1 = metrics::f1(&counts);
    for (name, flagged) in [
        ("precision", &precision),
        ("recall", &recall),
        ("f1", &f1),
    ] {
        if !flagged.defined {
            flags.push(format!("{name}_undefined"));
        }
    }

    Ok(EvalRecord {
        algorithm,
        m,
        trial,
        seed: trial_seed,
        shd: metrics::shd(&counts),
        precision: precision.value,
        recall: recall.value,
        f1: f1.value,
        runtime_seconds: runtime.max(1e-9),
        converged,
        flags,
    })
}

/// Execute every (algorithm, m, trial) cell. Cells are independent jobs on a
/// bounded worker pool; per-cell seeds are derived from indices, so the
/// metric fields do not depend on scheduling. Algorithm failures become
/// failed cells, not aborts.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for trial in 0..cfg.trials {
        for &algorithm in &cfg.algorithms {
            for m_index in 0..cfg.m_grid.len() {
                cells.push((algorithm, m_index, trial));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Parameter(format!("worker pool: {e}")))?;
    let results: Vec<std::result::Result<EvalRecord, FailedCell>> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|&(algorithm, m_index, trial)| {
                run_cell(cfg, algorithm, m_index, trial).map_err(|e| FailedCell {
                    algorithm,
                    m: cfg.m_grid[m_index],
                    trial,
                    error: e.to_string(),
                })
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    records.sort_by_key(|r| (r.algorithm, r.m, r.trial));
    failures.sort_by_key(|f| (f.algorithm, f.m, f.trial));
    Ok(BenchOutput { records, failures })
}

/// One aggregated metric for an (algorithm, m) cell group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    pub m: usize,
    pub metric: String,
    pub mean: f64,
    /// Sample (n-1) standard deviation; 0 for single-trial groups.
    pub std: f64,
    pub trials: usize,
    pub flags: Vec<String>,
}

const METRICS: [&str; 5] = ["shd", "precision", "recall", "f1", "runtime_seconds"];

fn metric_value(rec: &EvalRecord, metric: &str) -> f64 {
    match metric {
        "shd" => rec.shd as f64,
        "precision" => rec.precision,
        "recall" => rec.recall,
        "f1" => rec.f1,
        "runtime_seconds" => rec.runtime_seconds,
        _ => unreachable!("unknown metric {metric}"),
    }
}

/// Mean and sample standard deviation per (algorithm, m, metric).
pub fn aggregate(records: &[EvalRecord]) -> Vec<AggregateRow> {
    let mut groups: Vec<(Algorithm, usize)> = records.iter().map(|r| (r.algorithm, r.m)).collect();
    groups.sort();
    groups.dedup();

    let mut rows = Vec::new();
    for (algorithm, m) in groups {
        let members: Vec<&EvalRecord> = records
            .iter()
            .filter(|r| r.algorithm == algorithm && r.m == m)
            .collect();
        let n = members.len();
        for metric in METRICS {
            let values: Vec<f64> = members.iter().map(|r| metric_value(r, metric)).collect();
            let mean = values.iter().sum::<f64>() / n as f64;
            let (std, mut flags) = if n == 1 {
                (0.0, vec!["single_trial".to_string()])
            } else {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var.sqrt(), Vec::new())
            };
            if metric != "runtime_seconds" {
                let undefined = members
                    .iter()
                    .filter(|r| r.flags.iter().any(|f| f == &format!("{metric}_undefined")))
                    .count();
                if undefined > 0 {
                    flags.push(format!("{metric}_undefined_in_{undefined}_trials"));
                }
            }
            rows.push(AggregateRow {
                algorithm,
                m,
                metric: metric.to_string(),
                mean,
                std,
                trials: n,
                flags,
            });
        }
    }
    rows
}

pub fn write_records_csv<W: std::io::Write>(records: &[EvalRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "algorithm",
        "m",
        "trial",
        "seed",
        "shd",
        "precision",
        "recall",
        "f1",
        "runtime_seconds",
        "converged",
        "flags",
    ])?;
    for r in records {
        wtr.write_record([
            r.algorithm.to_string(),
            r.m.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.shd.to_string(),
            format!("{}", r.precision),
            format!("{}", r.recall),
            format!("{}", r.f1),
            format!("{}", r.runtime_seconds),
            r.converged.to_string(),
            r.flags.join(";"),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_records_csv<R: std::io::Read>(r: R) -> Result<Vec<EvalRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 11 {
            return Err(Error::Parse(format!(
                "records CSV needs 11 columns, got {}",
                rec.len()
            )));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad {what} value '{s}'")))
        };
        out.push(EvalRecord {
            algorithm: rec[0].parse()?,
            m: rec[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad m value '{}'", &rec[1])))?,
            trial: rec[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad trial value '{}'", &rec[2])))?,
            seed: rec[3]
                .parse()
                .map_err(|_| Error::Parse(format!("bad seed value '{}'", &rec[3])))?,
            shd: rec[4]
                .parse()
                .map_err(|_| Error::Parse(format!("bad shd value '{}'", &rec[4])))?,
            precision: parse_f(&rec[5], "precision")?,
            recall: parse_f(&rec[6], "recall")?,
            f1: parse_f(&rec[7], "f1")?,
            runtime_seconds: parse_f(&rec[8], "runtime_seconds")?,
            converged: rec[9]
                .parse()
                .map_err(|_| Error::Parse(format!("bad converged value '{}'", &rec[9])))?,
            flags: if rec[10].is_empty() {
                Vec::new()
            } else {
                rec[10].split(';').map(str::to_string).collect()
            },
        });
    }
    Ok(out)
}

pub fn write_aggregates_csv<W: std::io::Write>(rows: &[AggregateRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["algorithm", "m", "metric", "mean", "std"])?;
    for r in rows {
        wtr.write_record([
            r.algorithm.to_string(),
            r.m.to_string(),
            r.metric.clone(),
            format!("{}", r.mean),
            format!("{}", r.std),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Markdown tables, one per metric, mirroring the benchmark figures:
/// rows = m, columns = algorithms, cells = mean ± std.
pub fn render_markdown(rows: &[AggregateRow]) -> String {
    let mut algorithms: Vec<Algorithm> = rows.iter().map(|r| r.algorithm).collect();
    algorithms.sort();
    algorithms.dedup();
    let mut ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();

    let mut out = String::from("# Benchmark aggregates\n");
    for metric in METRICS {
        out.push_str(&format!("\n## {metric}\n\n| m |"));
        for a in &algorithms {
            out.push_str(&format!(" {a} |"));
        }
        out.push_str("\n|---|");
        for _ in &algorithms {
            out.push_str("---|");
        }
        out.push('\n');
        for &m in &ms {
            out.push_str(&format!("| {m} |"));
            for a in &algorithms {
                let cell = rows
                    .iter()
                    .find(|r| r.algorithm == *a && r.m == m && r.metric == metric);
                match cell {
                    Some(r) => out.push_str(&format!(" {:.4} ± {:.4} |", r.mean, r.std)),
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct ReportHeader<'a> {
    config: &'a BenchConfig,
    hardware: Hardware,
    record_count: usize,
    failure_count: usize,
    failures: &'a [FailedCell],
}

#[derive(Debug, Clone, Serialize)]
struct Hardware {
    os: &'static str,
    arch: &'static str,
    cores: usize,
}

/// Write records.csv, aggregates.csv, and report.json (plus report.md when
/// requested) into `out_dir`. Returns the paths written.
pub fn emit_report(
    out_dir: &Path,
    cfg: &BenchConfig,
    output: &BenchOutput,
    markdown: bool,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let records_path = out_dir.join("records.csv");
    write_records_csv(&output.records, std::fs::File::create(&records_path)?)?;
    written.push(records_path);

    let rows = aggregate(&output.records);
    let aggregates_path = out_dir.join("aggregates.csv");
    write_aggregates_csv(&rows, std::fs::File::create(&aggregates_path)?)?;
    written.push(aggregates_path);

    let header = ReportHeader {
        config: cfg,
        hardware: Hardware {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
        record_count: output.records.len(),
        failure_count: output.failures.len(),
        failures: &output.failures,
    };
    let report_path = out_dir.join("report.json");
    let mut f = std::fs::File::create(&report_path)?;
    serde_json::to_writer_pretty(&mut f, &header)?;
    f.write_all(b"\n")?;
    written.push(report_path);

    if markdown {
        let md_path = out_dir.join("report.md");
        std::fs::write(&md_path, render_markdown(&rows))?;
        written.push(md_path);
    }
    Ok(written)
}

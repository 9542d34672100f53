//! Acceptance suite: one test per acceptance criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`).
//!
//! Criteria 6-8 share one desk-scale benchmark run, computed once and
//! reused across tests via a process-wide cell.

use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rca_core::bench::{aggregate, run_benchmark, Algorithm, BenchConfig, BenchOutput};
use rca_core::dagma::h_logdet_mat;
use rca_core::dataset::BinaryDataset;
use rca_core::graph::{default_labels, BinaryGraph, WeightedAdjacency};
use rca_core::metrics::{confusion, f1, precision, recall, shd};
use rca_core::notears::{h_trexp_mat, loss_ls_mat};
use rca_core::pc::{learn_skeleton, orient, PcConfig};
use rca_core::preprocess::phi_coefficient;
use rca_core::simulate::{sample_dataset, GroundTruth, TierSpec};

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / 9007199254740992.0
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Random graphs for criterion 1: half DAGs (forward edges under a random
/// permutation), half with a short planted cycle. Weight magnitudes come in
/// one scale for h_trexp and a contracted scale that keeps the spectral
/// radius of A∘A below 1 for h_logdet.
struct AcyclicityCase {
    trexp: DMatrix<f64>,
    logdet: DMatrix<f64>,
    cyclic: bool,
}

fn acyclicity_cases(n: usize, d: usize, seed: u64) -> Vec<AcyclicityCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(n);
    for idx in 0..n {
        let cyclic = idx % 2 == 1;
        // random permutation = topological order of the DAG part
        let mut perm: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        let mut big = DMatrix::<f64>::zeros(d, d);
        let mut small = DMatrix::<f64>::zeros(d, d);
        for a in 0..d {
            for b in (a + 1)..d {
                if unit(&mut rng) < 0.25 {
                    let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
                    let (i, j) = (perm[a], perm[b]);
                    big[(i, j)] = sign * (0.8 + 1.2 * unit(&mut rng));
                    // row sums of A∘A stay below 1: d entries of at most
                    // (0.3)^2 each
                    small[(i, j)] = sign * (0.15 + 0.15 * unit(&mut rng));
                }
            }
        }
        if cyclic {
            // plant a 2-cycle between two random distinct nodes
            let u = (rng.next_u64() % d as u64) as usize;
            let v = (u + 1 + (rng.next_u64() % (d as u64 - 1)) as usize) % d;
            big[(u, v)] = 1.0 + unit(&mut rng);
            big[(v, u)] = 1.0 + unit(&mut rng);
            small[(u, v)] = 0.2 + 0.1 * unit(&mut rng);
            small[(v, u)] = 0.2 + 0.1 * unit(&mut rng);
        }
        cases.push(AcyclicityCase {
            trexp: big,
            logdet: small,
            cyclic,
        });
    }
    cases
}

#[test]
fn acceptance_01_acyclicity_functions() {
    let start = Instant::now();
    let cases = acyclicity_cases(200, 10, 20_240_801);
    let mut ok = true;
    let mut detail = String::new();
    for (idx, case) in cases.iter().enumerate() {
        let (h_te, _) = h_trexp_mat(&case.trexp).unwrap();
        let (h_ld, _) = h_logdet_mat(&case.logdet, 1.0).unwrap();
        let te_good = if case.cyclic { h_te > 1e-6 } else { h_te <= 1e-9 };
        let ld_good = if case.cyclic { h_ld > 1e-6 } else { h_ld <= 1e-9 };
        if !(te_good && ld_good) {
            ok = false;
            detail = format!(
                "case {idx} (cyclic = {}): h_trexp = {h_te:.3e}, h_logdet = {h_ld:.3e}",
                case.cyclic
            );
            break;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if ok && elapsed >= 10.0 {
        ok = false;
        detail = format!("runtime {elapsed:.2}s exceeds 10s");
    }
    if ok {
        detail = format!("200 graphs classified correctly in {elapsed:.2}s");
    }
    report("1 (acyclicity functions)", ok, &detail);
}

fn finite_difference_check<F>(point: &DMatrix<f64>, eval: F) -> f64
where
    F: Fn(&DMatrix<f64>) -> (f64, DMatrix<f64>),
{
    let d = point.nrows();
    let (_, grad) = eval(point);
    let step = 1e-6;
    let mut fd = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let mut plus = point.clone();
            let mut minus = point.clone();
            plus[(i, j)] += step;
            minus[(i, j)] -= step;
            fd[(i, j)] = (eval(&plus).0 - eval(&minus).0) / (2.0 * step);
        }
    }
    let mut masked = grad;
    for i in 0..d {
        masked[(i, i)] = 0.0;
    }
    (&masked - &fd).norm() / fd.norm().max(1.0)
}

#[test]
fn acceptance_02_gradient_checks() {
    let d = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    fn random_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    m[(i, j)] = scale * (2.0 * unit(rng) - 1.0);
                }
            }
        }
        m
    }
    let cols: Vec<Vec<bool>> = (0..d)
        .map(|_| (0..128).map(|_| rng.next_u64() & 1 == 1).collect())
        .collect();
    let x = BinaryDataset::from_columns(default_labels(d), cols)
        .unwrap()
        .to_matrix();

    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let p = random_point(&mut rng, d, 1.0);
        worst = worst.max(finite_difference_check(&p, |a| h_trexp_mat(a).unwrap()));
        // h_logdet needs spectral radius of A∘A below s = 1
        let p = random_point(&mut rng, d, 0.3);
        worst = worst.max(finite_difference_check(&p, |a| h_logdet_mat(a, 1.0).unwrap()));
        let p = random_point(&mut rng, d, 1.0);
        worst = worst.max(finite_difference_check(&p, |a| loss_ls_mat(a, &x)));
    }
    report(
        "2 (gradient checks)",
        worst < 1e-5,
        &format!("max relative error {worst:.3e} over 30 points"),
    );
}

#[test]
fn acceptance_03_metric_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(9090);
    let d = 6;
    let random_graph = |rng: &mut ChaCha8Rng| {
        let mut g = BinaryGraph::empty(d, default_labels(d)).unwrap();
        for i in 0..d {
            for j in 0..d {
                if i != j && rng.next_u64() % 3 == 0 {
                    g.set_edge(i, j).unwrap();
                }
            }
        }
        g
    };
    for pair_idx in 0..100 {
        let learned = random_graph(&mut rng);
        let truth = random_graph(&mut rng);
        let c = confusion(&learned, &truth).unwrap();
        // independent brute-force double loop
        let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                match (learned.edge(i, j), truth.edge(i, j)) {
                    (true, true) => tp += 1,
                    (false, false) => tn += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                }
            }
        }
        assert_eq!(
            (c.tp, c.tn, c.fp, c.fn_),
            (tp, tn, fp, fn_),
            "confusion mismatch at pair {pair_idx}"
        );
        assert_eq!(shd(&c), fp + fn_);
        let p = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let r = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        assert_eq!(precision(&c).value, p);
        assert_eq!(recall(&c).value, r);
        let f = f1(&c);
        if p > 0.0 && r > 0.0 {
            assert!(
                (f.value - 2.0 * p * r / (p + r)).abs() < 1e-12,
                "f1 deviates from 2PR/(P+R) at pair {pair_idx}"
            );
        }
    }
    report(
        "3 (metric oracle equivalence)",
        true,
        "100 random 6-node pairs match the brute-force oracle exactly",
    );
}

#[test]
fn acceptance_04_phi_coefficient() {
    // hand-computed contingency: n11=20, n00=30, n10=10, n01=40
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (count, xv, yv) in [(20, true, true), (30, false, false), (10, true, false), (40, false, true)] {
        for _ in 0..count {
            x.push(xv);
            y.push(yv);
        }
    }
    let phi = phi_coefficient(&x, &y).unwrap();
    let expected = (20.0_f64 * 30.0 - 10.0 * 40.0) / (30.0_f64 * 70.0 * 60.0 * 40.0).sqrt();
    let hand_ok = (phi - expected).abs() < 1e-12;

    // perfect and inverse association
    let a = vec![true, true, true, true, true, false, false, false, false, false];
    let b: Vec<bool> = a.iter().map(|v| !v).collect();
    let perfect_ok = (phi_coefficient(&a, &a).unwrap() - 1.0).abs() < 1e-12
        && (phi_coefficient(&a, &b).unwrap() + 1.0).abs() < 1e-12;

    // |phi| <= 1 on 1000 random pairs
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut bounded = true;
    for _ in 0..1000 {
        let m = 20 + (rng.next_u64() % 200) as usize;
        let x: Vec<bool> = (0..m).map(|_| rng.next_u64() & 1 == 1).collect();
        let y: Vec<bool> = (0..m).map(|_| rng.next_u64() & 1 == 1).collect();
        if let Ok(p) = phi_coefficient(&x, &y) {
            if p.abs() > 1.0 + 1e-12 {
                bounded = false;
                break;
            }
        }
    }
    report(
        "4 (phi coefficient)",
        hand_ok && perfect_ok && bounded,
        &format!("hand case {phi:.6} vs {expected:.6}; bounds hold on 1000 random pairs"),
    );
}

/// x -> z -> y chain with strong logistic weights.
fn chain_model(w: f64) -> GroundTruth {
    let labels = default_labels(3);
    let graph = BinaryGraph::from_edges(3, labels.clone(), [(0, 1), (1, 2)]).unwrap();
    let mut wm = DMatrix::zeros(3, 3);
    wm[(0, 1)] = w;
    wm[(1, 2)] = w;
    GroundTruth::new(
        graph,
        WeightedAdjacency::new(wm, labels).unwrap(),
        vec![0.0, -w / 2.0, -w / 2.0],
        vec![0, 1, 2],
        vec!["a".into(), "b".into(), "c".into()],
    )
    .unwrap()
}

/// x -> z <- y collider with strong logistic weights.
fn collider_model(w: f64) -> GroundTruth {
    let labels = default_labels(3);
    let graph = BinaryGraph::from_edges(3, labels.clone(), [(0, 2), (1, 2)]).unwrap();
    let mut wm = DMatrix::zeros(3, 3);
    wm[(0, 2)] = w;
    wm[(1, 2)] = -w;
    GroundTruth::new(
        graph,
        WeightedAdjacency::new(wm, labels).unwrap(),
        vec![0.0, 0.0, w / 2.0],
        vec![0, 0, 1],
        vec!["t0".into(), "t1".into()],
    )
    .unwrap()
}

#[test]
fn acceptance_05_pc_consistency_at_scale() {
    let cfg = PcConfig::default();
    let mut chain_exact = 0;
    let mut collider_exact = 0;
    let mut collider_oriented = 0;
    for seed in 0..10u64 {
        let chain = chain_model(4.0);
        let data = sample_dataset(&chain, 20_000, 42 + seed).unwrap();
        let (skel, _) = learn_skeleton(&data, &cfg).unwrap();
        if skel.adjacent(0, 1) && skel.adjacent(1, 2) && !skel.adjacent(0, 2) && skel.edge_count() == 2 {
            chain_exact += 1;
        }

        let collider = collider_model(4.0);
        let data = sample_dataset(&collider, 20_000, 142 + seed).unwrap();
        let (skel, seps) = learn_skeleton(&data, &cfg).unwrap();
        if skel.adjacent(0, 2) && skel.adjacent(1, 2) && !skel.adjacent(0, 1) && skel.edge_count() == 2 {
            collider_exact += 1;
            let mg = orient(&skel, &seps).unwrap();
            if mg.has_directed(0, 2) && mg.has_directed(1, 2) {
                collider_oriented += 1;
            }
        }
    }
    let pass = chain_exact >= 9 && collider_exact >= 9 && collider_oriented >= 9;
    report(
        "5 (PC consistency at scale)",
        pass,
        &format!(
            "chain skeletons {chain_exact}/10, collider skeletons {collider_exact}/10, orientations {collider_oriented}/10"
        ),
    );
}

fn desk_benchmark() -> &'static BenchOutput {
    static OUTPUT: OnceLock<BenchOutput> = OnceLock::new();
    OUTPUT.get_or_init(|| {
        let cfg = BenchConfig::default();
        assert_eq!(cfg.m_grid, vec![500, 2000, 10_000]);
        assert_eq!(cfg.trials, 10);
        run_benchmark(&cfg).expect("benchmark run")
    })
}

fn mean_of(output: &BenchOutput, algorithm: Algorithm, m: usize, metric: &str) -> f64 {
    let rows = aggregate(&output.records);
    rows.iter()
        .find(|r| r.algorithm == algorithm && r.m == m && r.metric == metric)
        .unwrap_or_else(|| panic!("missing aggregate for {algorithm} m={m} {metric}"))
        .mean
}

fn std_of(output: &BenchOutput, algorithm: Algorithm, m: usize, metric: &str) -> f64 {
    let rows = aggregate(&output.records);
    rows.iter()
        .find(|r| r.algorithm == algorithm && r.m == m && r.metric == metric)
        .unwrap()
        .std
}

const M_GRID: [usize; 3] = [500, 2000, 10_000];

#[test]
fn acceptance_06a_precision_ordering() {
    let out = desk_benchmark();
    let mut pass = true;
    let mut lines = Vec::new();
    for m in M_GRID {
        let da = mean_of(out, Algorithm::Dagma, m, "precision");
        let nt = mean_of(out, Algorithm::Notears, m, "precision");
        let pc = mean_of(out, Algorithm::Pc, m, "precision");
        if !(da > nt && da > pc) {
            pass = false;
        }
        lines.push(format!("m={m}: dagma {da:.3} notears {nt:.3} pc {pc:.3}"));
    }
    report(
        "6a (mean precision: DAGMA above NOTEARS and PC at every m)",
        pass,
        &lines.join("; "),
    );
}

#[test]
fn acceptance_06b_recall_ordering() {
    let out = desk_benchmark();
    let mut pass = true;
    let mut lines = Vec::new();
    for m in [2000usize, 10_000] {
        let pc = mean_of(out, Algorithm::Pc, m, "recall");
        let da = mean_of(out, Algorithm::Dagma, m, "recall");
        let nt = mean_of(out, Algorithm::Notears, m, "recall");
        if !(pc > da && da > nt) {
            pass = false;
        }
        lines.push(format!("m={m}: pc {pc:.3} dagma {da:.3} notears {nt:.3}"));
    }
    report(
        "6b (mean recall: PC > DAGMA > NOTEARS at m >= 2000)",
        pass,
        &lines.join("; "),
    );
}

#[test]
fn acceptance_06c_pc_recall_growth() {
    let out = desk_benchmark();
    let lo = mean_of(out, Algorithm::Pc, 500, "recall");
    let hi = mean_of(out, Algorithm::Pc, 10_000, "recall");
    let s_lo = std_of(out, Algorithm::Pc, 500, "recall");
    let s_hi = std_of(out, Algorithm::Pc, 10_000, "recall");
    let pooled = ((s_lo * s_lo + s_hi * s_hi) / 2.0).sqrt();
    let pass = hi >= lo - pooled;
    report(
        "6c (PC recall non-decreasing from m=500 to m=10000 within one pooled std)",
        pass,
        &format!("recall {lo:.3} -> {hi:.3}, pooled std {pooled:.3}"),
    );
}

#[test]
fn acceptance_06d_f1_ordering() {
    let out = desk_benchmark();
    let mut pass = true;
    let mut lines = Vec::new();
    for m in M_GRID {
        let da = mean_of(out, Algorithm::Dagma, m, "f1");
        let nt = mean_of(out, Algorithm::Notears, m, "f1");
        let pc = mean_of(out, Algorithm::Pc, m, "f1");
        if !(da > nt && da > pc) {
            pass = false;
        }
        lines.push(format!("m={m}: dagma {da:.3} notears {nt:.3} pc {pc:.3}"));
    }
    report(
        "6d (mean F1: DAGMA highest at every m)",
        pass,
        &lines.join("; "),
    );
}

#[test]
fn acceptance_07_runtime_ordering() {
    let out = desk_benchmark();
    let da = mean_of(out, Algorithm::Dagma, 10_000, "runtime_seconds");
    let nt = mean_of(out, Algorithm::Notears, 10_000, "runtime_seconds");
    let pc = mean_of(out, Algorithm::Pc, 10_000, "runtime_seconds");
    let mut pass = da > nt && da > pc;
    let mut lines = vec![format!(
        "at m=10000: dagma {da:.2}s notears {nt:.2}s pc {pc:.2}s"
    )];
    for algorithm in Algorithm::ALL {
        let series: Vec<f64> = M_GRID
            .iter()
            .map(|&m| mean_of(out, algorithm, m, "runtime_seconds"))
            .collect();
        let monotone = series.windows(2).all(|w| w[1] > w[0]);
        if !monotone {
            pass = false;
        }
        lines.push(format!(
            "{algorithm}: {:.3}s -> {:.3}s -> {:.3}s{}",
            series[0],
            series[1],
            series[2],
            if monotone { "" } else { " (not monotone)" }
        ));
    }
    report(
        "7 (runtime ordering: DAGMA slowest at m=10000; all monotone in m)",
        pass,
        &lines.join("; "),
    );
}

#[test]
fn acceptance_08_determinism() {
    // two full runs of a small config must agree bit-for-bit on the metric
    // columns (runtime excluded)
    let cfg = BenchConfig {
        algorithms: vec![Algorithm::Pc, Algorithm::Notears, Algorithm::Dagma],
        m_grid: vec![200, 500],
        trials: 2,
        base_seed: 9,
        tier_spec: TierSpec {
            tiers: vec![("FaE".into(), 6), ("ErPz".into(), 3), ("Fe".into(), 1)],
            ..TierSpec::default()
        },
        jobs: 0,
        ..BenchConfig::default()
    };
    let strip_runtime = |output: &BenchOutput| -> Vec<String> {
        let mut buf = Vec::new();
        rca_core::bench::write_records_csv(&output.records, &mut buf).unwrap();
        String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|line| {
                let cells: Vec<&str> = line.split(',').collect();
                cells
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != 8) // runtime_seconds column
                    .map(|(_, c)| *c)
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    };
    let a = run_benchmark(&cfg).unwrap();
    let b = run_benchmark(&cfg).unwrap();
    let pass = strip_runtime(&a) == strip_runtime(&b);
    report(
        "8 (determinism)",
        pass,
        "two runs produce bit-identical metric CSVs (runtime column excluded)",
    );
}

#[test]
fn acceptance_09_cli_pipeline_round_trip() {
    let bin = env!("CARGO_BIN_EXE_rca");
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);

    let status = Command::new(bin)
        .args([
            "simulate",
            "--tiers",
            "8,4,1",
            "--m",
            "1200",
            "--seed",
            "3",
            "--out-data",
        ])
        .arg(path("data.csv"))
        .arg("--out-truth")
        .arg(path("truth.csv"))
        .status()
        .unwrap();
    assert!(status.success(), "simulate failed");

    // schema checks: dataset and truth parse back, meta is valid JSON
    let data = BinaryDataset::read_csv_path(path("data.csv")).unwrap();
    assert_eq!((data.m(), data.n()), (1200, 13));
    let truth = BinaryGraph::read_csv_path(path("truth.csv")).unwrap();
    assert_eq!(truth.d(), 13);
    let meta: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(path("truth.csv.meta.json")).unwrap()).unwrap();
    assert!(meta.get("edges").is_some_and(|e| e.is_array()));

    for algo in ["pc", "notears", "dagma"] {
        let out = path(&format!("{algo}.csv"));
        let mut cmd = Command::new(bin);
        cmd.args(["discover", "--algo", algo, "--in"])
            .arg(path("data.csv"))
            .arg("--out")
            .arg(&out);
        if algo != "pc" {
            cmd.arg("--diag").arg(path(&format!("{algo}.diag.json")));
        }
        let status = cmd.status().unwrap();
        assert!(status.success(), "discover --algo {algo} failed");
        assert!(BinaryGraph::read_csv_path(&out).is_ok(), "{algo} output CSV malformed");

        let eval_out = path(&format!("{algo}.eval.json"));
        let mut cmd = Command::new(bin);
        cmd.args(["evaluate", "--learned"])
            .arg(&out)
            .arg("--truth")
            .arg(path("truth.csv"))
            .arg("--out")
            .arg(&eval_out);
        if algo == "pc" {
            cmd.arg("--undirected").arg(path("pc.csv.undirected.json"));
        }
        let status = cmd.status().unwrap();
        assert!(status.success(), "evaluate for {algo} failed");
        let eval: serde_json::Value =
            serde_json::from_reader(std::fs::File::open(&eval_out).unwrap()).unwrap();
        for key in ["counts", "shd", "precision", "recall", "f1"] {
            assert!(eval.get(key).is_some(), "{algo} evaluation lacks '{key}'");
        }
        if algo != "pc" {
            let diag: serde_json::Value = serde_json::from_reader(
                std::fs::File::open(path(&format!("{algo}.diag.json"))).unwrap(),
            )
            .unwrap();
            for key in ["converged", "final_h", "outer_iterations"] {
                assert!(diag.get(key).is_some(), "{algo} diagnostics lack '{key}'");
            }
        }
    }
    report(
        "9 (CLI pipeline round trip)",
        true,
        "simulate -> discover (pc, notears, dagma) -> evaluate all exited 0 with schema-valid outputs",
    );
}

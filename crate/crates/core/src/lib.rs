//! Causal discovery for root-cause analysis on binary manufacturing-quality data.
//!
//! The crate bundles three structure-learning algorithms (PC, NOTEARS, DAGMA),
//! a tiered synthetic-data simulator, a relational preprocessing pipeline,
//! graph-recovery metrics, and a benchmark harness that compares the
//! algorithms over a grid of sample sizes.
//!
//! Everything operates on two core representations:
//!
//! - [`BinaryDataset`] — an M×N matrix of booleans with named columns,
//! - adjacency matrices over d nodes, either weighted ([`WeightedAdjacency`]),
//!   binary ([`BinaryGraph`]), or partially directed ([`MixedGraph`]).
//!
//! Edge convention: entry (i, j) refers to the edge i → j — cause in the
//! row, effect in the column. All serializations follow this convention.

pub mod bench;
pub mod dagma;
pub mod dataset;
pub mod error;
pub mod expm;
pub mod graph;
pub mod metrics;
pub mod notears;
pub mod pc;
pub mod preprocess;
pub mod simulate;
pub mod solver;

pub use bench::{
    aggregate, emit_report, run_benchmark, Algorithm, BenchConfig, BenchOutput, EvalRecord,
};
pub use dagma::{dagma, h_logdet, DagmaConfig};
pub use dataset::BinaryDataset;
pub use error::{Error, Result};
pub use graph::{
    is_acyclic, threshold, topological_order, BinaryGraph, MixedGraph, UndirectedSidecar,
    WeightedAdjacency,
};
pub use metrics::{confusion, f1, mixed_to_binary, precision, recall, shd, ConfusionCounts};
pub use notears::{h_trexp, loss_ls, notears, LossKind, NotearsConfig, SolveResult};
pub use pc::{ci_test_g2, learn_skeleton, orient, pc, CiTestKind, CiTestResult, PcConfig};
pub use preprocess::{
    aggregate_ergonomics, aggregate_plan_time, bin_equal_width, build_binary_table,
    filter_attributes, match_subops, phi_coefficient, SubOpRecord, VehicleRecord,
};
pub use simulate::{generate_ground_truth, sample_dataset, GroundTruth, TierSpec};
pub use solver::SolveDiagnostics;

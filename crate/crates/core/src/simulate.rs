//! Tiered ground-truth generation and binary data sampling.
//!
//! The generative model mirrors the assumed causal structure of the
//! manufacturing data: an ordered list of tiers (vehicle properties,
//! ergonomics/plan-time intervals, fault) with forward-directed edges only.
//! Values are sampled per node as Bernoulli(sigmoid(bias + Σ parent
//! contributions)), i.e. a linear combination squashed back to a binary
//! value.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::graph::{is_acyclic, topological_order, BinaryGraph, WeightedAdjacency};

/// Tier layout and edge model for ground-truth generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TierSpec {
    /// Ordered (tier name, node count) pairs.
    pub tiers: Vec<(String, usize)>,
    /// Probability that a candidate forward pair becomes an edge.
    pub edge_probability: f64,
    /// When false, edges connect consecutive tiers only.
    pub allow_skip_edges: bool,
    /// Edge weight magnitudes are drawn uniformly from this range; the sign
    /// is a fair coin.
    pub weight_range: (f64, f64),
    pub seed: u64,
}

impl Default for TierSpec {
    fn default() -> Self {
        Self {
            tiers: vec![
                ("FaE".to_string(), 25),
                ("ErPz".to_string(), 8),
                ("Fe".to_string(), 1),
            ],
            edge_probability: 0.3,
            allow_skip_edges: false,
            weight_range: (1.0, 3.0),
            seed: 0,
        }
    }
}

impl TierSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() {
            return Err(Error::Parameter("tier list is empty".into()));
        }
        if self.tiers.iter().any(|(_, n)| *n == 0) {
            return Err(Error::Parameter("every tier needs at least one node".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_probability) {
            return Err(Error::Parameter(format!(
                "edge probability {} outside [0, 1]",
                self.edge_probability
            )));
        }
        let (lo, hi) = self.weight_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Parameter(format!(
                "weight range ({lo}, {hi}) must satisfy 0 < low <= high"
            )));
        }
        Ok(())
    }

    /// Total node count.
    pub fn d(&self) -> usize {
        self.tiers.iter().map(|(_, n)| n).sum()
    }

    /// Node labels: `{tier}_{index}`, 1-based within each tier.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.d());
        for (name, count) in &self.tiers {
            for k in 1..=*count {
                out.push(format!("{name}_{k:02}"));
            }
        }
        out
    }

    /// Tier index of every node, in node order.
    pub fn tier_of(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.d());
        for (t, (_, count)) in self.tiers.iter().enumerate() {
            out.extend(std::iter::repeat(t).take(*count));
        }
        out
    }
}

/// A tiered DAG with structural-equation parameters.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub graph: BinaryGraph,
    pub weights: WeightedAdjacency,
    pub biases: Vec<f64>,
    pub tier_of: Vec<usize>,
    pub tier_names: Vec<String>,
}

/// JSON sidecar carrying the generative parameters next to the binary
/// adjacency CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthMeta {
    pub labels: Vec<String>,
    pub tier_names: Vec<String>,
    pub tier_of: Vec<usize>,
    pub biases: Vec<f64>,
    pub edges: Vec<EdgeWeight>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeWeight {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl GroundTruth {
    pub fn new(
        graph: BinaryGraph,
        weights: WeightedAdjacency,
        biases: Vec<f64>,
        tier_of: Vec<usize>,
        tier_names: Vec<String>,
    ) -> Result<Self> {
        let d = graph.d();
        if weights.d() != d || biases.len() != d || tier_of.len() != d {
            return Err(Error::Mismatch("ground-truth component sizes differ".into()));
        }
        for (i, j) in graph.edges() {
            if tier_of[i] >= tier_of[j] {
                return Err(Error::Parameter(format!(
                    "edge {i} -> {j} is not forward-directed across tiers"
                )));
            }
            if weights.get(i, j) == 0.0 {
                return Err(Error::Parameter(format!("edge {i} -> {j} has zero weight")));
            }
        }
        if !is_acyclic(&graph) {
            return Err(Error::Parameter("ground-truth graph contains a cycle".into()));
        }
        Ok(Self {
            graph,
            weights,
            biases,
            tier_of,
            tier_names,
        })
    }

    pub fn d(&self) -> usize {
        self.graph.d()
    }

    pub fn to_meta(&self) -> GroundTruthMeta {
        GroundTruthMeta {
            labels: self.graph.labels().to_vec(),
            tier_names: self.tier_names.clone(),
            tier_of: self.tier_of.clone(),
            biases: self.biases.clone(),
            edges: self
                .graph
                .edges()
                .map(|(i, j)| EdgeWeight {
                    from: i,
                    to: j,
                    weight: self.weights.get(i, j),
                })
                .collect(),
        }
    }
}

/// Uniform double in [0, 1) from the top 53 bits of the stream.
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Draw a tiered DAG with edge weights and node biases. Deterministic for a
/// fixed spec: biases are drawn first in node order, then candidate forward
/// pairs are visited tier by tier, source then target in ascending order.
pub fn generate_ground_truth(spec: &TierSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let d = spec.d();
    let labels = spec.labels();
    let tier_of = spec.tier_of();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let biases: Vec<f64> = (0..d).map(|_| 2.0 * unit_f64(&mut rng) - 1.0).collect();

    let mut graph = BinaryGraph::empty(d, labels.clone())?;
    let mut weights = nalgebra::DMatrix::<f64>::zeros(d, d);
    let tier_count = spec.tiers.len();
    let (lo, hi) = spec.weight_range;
    for src_tier in 0..tier_count.saturating_sub(1) {
        let target_tiers: Vec<usize> = if spec.allow_skip_edges {
            (src_tier + 1..tier_count).collect()
        } else {
            vec![src_tier + 1]
        };
        for &dst_tier in &target_tiers {
            for u in 0..d {
                if tier_of[u] != src_tier {
                    continue;
                }
                for v in 0..d {
                    if tier_of[v] != dst_tier {
                        continue;
                    }
                    if unit_f64(&mut rng) < spec.edge_probability {
                        let magnitude = lo + unit_f64(&mut rng) * (hi - lo);
                        let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
                        graph.set_edge(u, v)?;
                        weights[(u, v)] = sign * magnitude;
                    }
                }
            }
        }
    }

    GroundTruth::new(
        graph,
        WeightedAdjacency::new(weights, labels)?,
        biases,
        tier_of,
        spec.tiers.iter().map(|(n, _)| n.clone()).collect(),
    )
}

/// Sample m rows from the structural model. Row r is drawn from its own
/// ChaCha stream derived from (seed, r), so a dataset is a bit-exact prefix
/// of any longer dataset with the same seed, and disjoint row blocks could
/// be sampled in parallel without changing the output.
pub fn sample_dataset(gt: &GroundTruth, m: usize, seed: u64) -> Result<BinaryDataset> {
    if m == 0 {
        return Err(Error::Parameter("sample count m must be >= 1".into()));
    }
    let d = gt.d();
    let order = topological_order(&gt.graph)?;
    let parents: Vec<Vec<(usize, f64)>> = (0..d)
        .map(|v| {
            gt.graph
                .parents_of(v)
                .into_iter()
                .map(|u| (u, gt.weights.get(u, v)))
                .collect()
        })
        .collect();

    let mut columns: Vec<Vec<bool>> = vec![vec![false; m]; d];
    let mut row = vec![false; d];
    for r in 0..m {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Stream 0 belongs to structure generation; rows use 1-based streams.
        rng.set_stream(r as u64 + 1);
        for &v in &order {
            let mut z = gt.biases[v];
            for &(u, w) in &parents[v] {
                if row[u] {
                    z += w;
                }
            }
            row[v] = unit_f64(&mut rng) < sigmoid(z);
        }
        for v in 0..d {
            columns[v][r] = row[v];
        }
    }
    BinaryDataset::from_columns(gt.graph.labels().to_vec(), columns)
}

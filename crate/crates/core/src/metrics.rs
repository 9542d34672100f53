//! Elementwise comparison of learned vs. true adjacency matrices and the
//! four graph-recovery metrics (SHD, precision, recall, F1).
//!
//! The diagonal is excluded by default: self-loops are structurally
//! impossible, and counting them would only inflate the true negatives.
//! [`confusion_with`] restores the literal all-cells reading.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BinaryGraph, MixedGraph};

/// Cell counts of the elementwise adjacency comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// A ratio metric whose denominator can be empty. The value defaults to 0
/// in that case so aggregation never divides by zero; `defined` records it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: f64,
    pub defined: bool,
}

impl Flagged {
    fn defined(value: f64) -> Self {
        Self {
            value,
            defined: true,
        }
    }

    fn undefined() -> Self {
        Self {
            value: 0.0,
            defined: false,
        }
    }
}

/// Per-cell comparison over the off-diagonal cells.
pub fn confusion(learned: &BinaryGraph, truth: &BinaryGraph) -> Result<ConfusionCounts> {
    confusion_with(learned, truth, false)
}

/// Per-cell comparison; `include_diagonal` restores the literal all-cells
/// reading where the d diagonal cells count as true negatives.
pub fn confusion_with(
    learned: &BinaryGraph,
    truth: &BinaryGraph,
    include_diagonal: bool,
) -> Result<ConfusionCounts> {
    if learned.d() != truth.d() {
        return Err(Error::Mismatch(format!(
            "graph sizes differ: {} vs {}",
            learned.d(),
            truth.d()
        )));
    }
    if learned.labels() != truth.labels() {
        return Err(Error::Mismatch(
            "graph labels differ; relabel before comparing".into(),
        ));
    }
    let d = learned.d();
    let mut c = ConfusionCounts {
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
    };
    for i in 0..d {
        for j in 0..d {
            if i == j && !include_diagonal {
                continue;
            }
            match (learned.edge(i, j), truth.edge(i, j)) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
    }
    Ok(c)
}

/// Structural Hamming distance: FP + FN.
pub fn shd(c: &ConfusionCounts) -> u64 {
    c.fp + c.fn_
}

/// TP / (TP + FP); undefined when nothing was predicted.
pub fn precision(c: &ConfusionCounts) -> Flagged {
    if c.tp + c.fp == 0 {
        Flagged::undefined()
    } else {
        Flagged::defined(c.tp as f64 / (c.tp + c.fp) as f64)
    }
}

/// TP / (TP + FN); undefined when the truth has no edges.
pub fn recall(c: &ConfusionCounts) -> Flagged {
    if c.tp + c.fn_ == 0 {
        Flagged::undefined()
    } else {
        Flagged::defined(c.tp as f64 / (c.tp + c.fn_) as f64)
    }
}

/// 2TP / (2TP + FP + FN); undefined when the denominator is empty.
pub fn f1(c: &ConfusionCounts) -> Flagged {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        Flagged::undefined()
    } else {
        Flagged::defined(2.0 * c.tp as f64 / denom as f64)
    }
}

/// How the undirected edges of a [`MixedGraph`] were resolved when
/// flattening to a directed binary graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientationResolution {
    /// Undirected pairs oriented to match an edge present in the truth.
    pub resolved_by_truth: usize,
    /// Undirected pairs with no counterpart in the truth, emitted as
    /// i → j with i < j.
    pub arbitrary: usize,
}

/// Flatten a partially directed graph for elementwise scoring: directed
/// edges are copied, and each undirected pair contributes exactly one
/// predicted edge, oriented to match the truth when possible.
pub fn mixed_to_binary(
    g: &MixedGraph,
    truth: &BinaryGraph,
) -> Result<(BinaryGraph, OrientationResolution)> {
    if g.d() != truth.d() {
        return Err(Error::Mismatch(format!(
            "graph sizes differ: {} vs {}",
            g.d(),
            truth.d()
        )));
    }
    if g.labels() != truth.labels() {
        return Err(Error::Mismatch(
            "graph labels differ; relabel before comparing".into(),
        ));
    }
    let mut out = BinaryGraph::empty(g.d(), g.labels().to_vec())?;
    for &(i, j) in g.directed_edges() {
        out.set_edge(i, j)?;
    }
    let mut resolution = OrientationResolution {
        resolved_by_truth: 0,
        arbitrary: 0,
    };
    for &(i, j) in g.undirected_edges() {
        if truth.edge(i, j) {
            out.set_edge(i, j)?;
            resolution.resolved_by_truth += 1;
        } else if truth.edge(j, i) {
            out.set_edge(j, i)?;
            resolution.resolved_by_truth += 1;
        } else {
            out.set_edge(i.min(j), i.max(j))?;
            resolution.arbitrary += 1;
        }
    }
    Ok((out, resolution))
}

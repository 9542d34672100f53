//! Graph and adjacency-matrix types shared by all algorithms.
//!
//! Entry (i, j) always means the edge i → j: cause in the row, effect in
//! the column. CSV serializations carry a header row of column labels and
//! d data rows in the same order.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_labels(d: usize, labels: &[String]) -> Result<()> {
    if labels.len() != d {
        return Err(Error::Mismatch(format!(
            "{} labels for {} nodes",
            labels.len(),
            d
        )));
    }
    let unique: BTreeSet<&String> = labels.iter().collect();
    if unique.len() != d {
        return Err(Error::Parameter("duplicate column labels".into()));
    }
    Ok(())
}

/// Default labels `x0..x{d-1}` for graphs constructed from bare matrices.
pub fn default_labels(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

/// A d×d real matrix of learned edge weights. Entry (i, j) is the weight of
/// the edge i → j; 0 means no edge. The diagonal is identically zero and all
/// entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAdjacency {
    entries: DMatrix<f64>,
    labels: Vec<String>,
}

impl WeightedAdjacency {
    pub fn new(entries: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Mismatch(format!(
                "adjacency matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let d = entries.nrows();
        check_labels(d, &labels)?;
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("adjacency entries must be finite".into()));
        }
        for i in 0..d {
            if entries[(i, i)] != 0.0 {
                return Err(Error::Parameter(format!(
                    "nonzero diagonal entry at ({i}, {i})"
                )));
            }
        }
        Ok(Self { entries, labels })
    }

    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let labels = default_labels(entries.nrows());
        Self::new(entries, labels)
    }

    pub fn zeros(d: usize, labels: Vec<String>) -> Result<Self> {
        Self::new(DMatrix::zeros(d, d), labels)
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.labels)?;
        for i in 0..self.d() {
            let row: Vec<String> = (0..self.d())
                .map(|j| format!("{}", self.entries[(i, j)]))
                .collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (labels, rows) = read_matrix_csv(r)?;
        let d = labels.len();
        let mut entries = DMatrix::zeros(d, d);
        for (i, row) in rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                entries[(i, j)] = cell
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad weight '{cell}' at row {i}")))?;
            }
        }
        Self::new(entries, labels)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// A d×d boolean adjacency matrix with named columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryGraph {
    d: usize,
    entries: Vec<bool>, // row-major
    labels: Vec<String>,
}

impl BinaryGraph {
    pub fn empty(d: usize, labels: Vec<String>) -> Result<Self> {
        check_labels(d, &labels)?;
        Ok(Self {
            d,
            entries: vec![false; d * d],
            labels,
        })
    }

    pub fn from_edges<I>(d: usize, labels: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::empty(d, labels)?;
        for (i, j) in edges {
            g.set_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.d + j]
    }

    pub fn set_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.d || j >= self.d {
            return Err(Error::Parameter(format!("edge ({i}, {j}) out of range")));
        }
        if i == j {
            return Err(Error::Parameter(format!("self-loop at node {i}")));
        }
        self.entries[i * self.d + j] = true;
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.entries.iter().filter(|&&e| e).count()
    }

    /// All edges (i, j) in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.d).flat_map(move |i| {
            (0..self.d).filter_map(move |j| if self.edge(i, j) { Some((i, j)) } else { None })
        })
    }

    pub fn parents_of(&self, j: usize) -> Vec<usize> {
        (0..self.d).filter(|&i| self.edge(i, j)).collect()
    }

    pub fn children_of(&self, i: usize) -> Vec<usize> {
        (0..self.d).filter(|&j| self.edge(i, j)).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.labels)?;
        for i in 0..self.d {
            let row: Vec<&str> = (0..self.d)
                .map(|j| if self.edge(i, j) { "1" } else { "0" })
                .collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (labels, rows) = read_matrix_csv(r)?;
        let d = labels.len();
        let mut g = Self::empty(d, labels)?;
        for (i, row) in rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                match cell.as_str() {
                    "0" => {}
                    "1" => {
                        if i == j {
                            return Err(Error::Parse(format!("self-loop at node {i}")));
                        }
                        g.entries[i * d + j] = true;
                    }
                    other => {
                        return Err(Error::Parse(format!(
                            "binary adjacency must contain 0/1, got '{other}' at row {i}"
                        )))
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Sidecar listing of a [`MixedGraph`]'s undirected pairs, written next to
/// the symmetric adjacency CSV so the partially directed structure survives
/// a round trip.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UndirectedSidecar {
    pub labels: Vec<String>,
    /// Unordered pairs stored as (min, max).
    pub undirected: Vec<(usize, usize)>,
}

/// A partially directed graph: PC's CPDAG-style output. Directed and
/// undirected edge sets are disjoint and free of self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedGraph {
    d: usize,
    labels: Vec<String>,
    directed: BTreeSet<(usize, usize)>,
    undirected: BTreeSet<(usize, usize)>, // stored as (min, max)
}

impl MixedGraph {
    pub fn empty(d: usize, labels: Vec<String>) -> Result<Self> {
        check_labels(d, &labels)?;
        Ok(Self {
            d,
            labels,
            directed: BTreeSet::new(),
            undirected: BTreeSet::new(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.d || j >= self.d {
            return Err(Error::Parameter(format!("edge ({i}, {j}) out of range")));
        }
        if i == j {
            return Err(Error::Parameter(format!("self-loop at node {i}")));
        }
        Ok(())
    }

    pub fn add_directed(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_pair(i, j)?;
        let key = (i.min(j), i.max(j));
        if self.undirected.contains(&key) {
            return Err(Error::Parameter(format!(
                "pair ({i}, {j}) already present as undirected"
            )));
        }
        self.directed.insert((i, j));
        Ok(())
    }

    pub fn add_undirected(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_pair(i, j)?;
        if self.directed.contains(&(i, j)) || self.directed.contains(&(j, i)) {
            return Err(Error::Parameter(format!(
                "pair ({i}, {j}) already present as directed"
            )));
        }
        self.undirected.insert((i.min(j), i.max(j)));
        Ok(())
    }

    pub fn directed_edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.directed
    }

    pub fn undirected_edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.undirected
    }

    pub fn has_directed(&self, i: usize, j: usize) -> bool {
        self.directed.contains(&(i, j))
    }

    pub fn has_undirected(&self, i: usize, j: usize) -> bool {
        self.undirected.contains(&(i.min(j), i.max(j)))
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.has_directed(i, j) || self.has_directed(j, i) || self.has_undirected(i, j)
    }

    /// Symmetric adjacency CSV: a directed edge i → j writes 1 at (i, j);
    /// an undirected pair writes 1 at both (i, j) and (j, i).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut cells = vec![false; self.d * self.d];
        for &(i, j) in &self.directed {
            cells[i * self.d + j] = true;
        }
        for &(i, j) in &self.undirected {
            cells[i * self.d + j] = true;
            cells[j * self.d + i] = true;
        }
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.labels)?;
        for i in 0..self.d {
            let row: Vec<&str> = (0..self.d)
                .map(|j| if cells[i * self.d + j] { "1" } else { "0" })
                .collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn sidecar(&self) -> UndirectedSidecar {
        UndirectedSidecar {
            labels: self.labels.clone(),
            undirected: self.undirected.iter().copied().collect(),
        }
    }

    /// Rebuild a MixedGraph from the symmetric CSV plus its sidecar.
    pub fn from_csv_and_sidecar(graph: &BinaryGraph, sidecar: &UndirectedSidecar) -> Result<Self> {
        if graph.labels() != sidecar.labels.as_slice() {
            return Err(Error::Mismatch("sidecar labels differ from CSV header".into()));
        }
        let mut mg = Self::empty(graph.d(), sidecar.labels.clone())?;
        for &(i, j) in &sidecar.undirected {
            if !(graph.edge(i, j) && graph.edge(j, i)) {
                return Err(Error::Parse(format!(
                    "sidecar pair ({i}, {j}) is not symmetric in the CSV"
                )));
            }
            mg.add_undirected(i, j)?;
        }
        for (i, j) in graph.edges() {
            if !mg.has_undirected(i, j) {
                mg.add_directed(i, j)?;
            }
        }
        Ok(mg)
    }
}

/// True iff a topological order of `g` exists. Decided by iterative DFS
/// back-edge detection, independent of [`topological_order`].
pub fn is_acyclic(g: &BinaryGraph) -> bool {
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let d = g.d();
    let mut color = vec![WHITE; d];
    for start in 0..d {
        if color[start] != WHITE {
            continue;
        }
        // stack of (node, next child index to try)
        let mut stack = vec![(start, 0usize)];
        color[start] = GRAY;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let mut advanced = false;
            while *next < d {
                let child = *next;
                *next += 1;
                if !g.edge(node, child) {
                    continue;
                }
                match color[child] {
                    GRAY => return false, // back edge
                    WHITE => {
                        color[child] = GRAY;
                        stack.push((child, 0));
                        advanced = true;
                        break;
                    }
                    _ => {}
                }
            }
            if !advanced && stack.last().map(|&(n, _)| n) == Some(node) {
                color[node] = BLACK;
                stack.pop();
            }
        }
    }
    true
}

/// Kahn peeling with smallest-index tie-breaking, so the order is
/// deterministic. On a cycle, returns [`Error::Cycle`] carrying one edge
/// that lies on a cycle.
pub fn topological_order(g: &BinaryGraph) -> Result<Vec<usize>> {
    let d = g.d();
    let mut indegree = vec![0usize; d];
    for (_, j) in g.edges() {
        indegree[j] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..d).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(d);
    let mut removed = vec![false; d];
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        removed[v] = true;
        order.push(v);
        for j in g.children_of(v) {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.insert(j);
            }
        }
    }
    if order.len() == d {
        return Ok(order);
    }
    // Every leftover node kept a positive indegree within the remainder, so
    // walking predecessors inside the remainder must revisit a node; the
    // step that closes the walk is an edge on a cycle.
    let start = (0..d).find(|&v| !removed[v]).expect("leftover node");
    let mut seen = vec![false; d];
    let mut node = start;
    loop {
        seen[node] = true;
        let pred = g
            .parents_of(node)
            .into_iter()
            .find(|&i| !removed[i])
            .expect("node in remainder has a predecessor in remainder");
        if seen[pred] {
            return Err(Error::Cycle {
                from: pred,
                to: node,
            });
        }
        node = pred;
    }
}

/// Binarize a weighted adjacency: edge i → j iff |w[i, j]| ≥ omega.
pub fn threshold(w: &WeightedAdjacency, omega: f64) -> Result<BinaryGraph> {
    if !(omega > 0.0) {
        return Err(Error::Parameter(format!(
            "threshold omega must be positive, got {omega}"
        )));
    }
    let d = w.d();
    let mut g = BinaryGraph::empty(d, w.labels().to_vec())?;
    for i in 0..d {
        for j in 0..d {
            if i != j && w.get(i, j).abs() >= omega {
                g.set_edge(i, j)?;
            }
        }
    }
    Ok(g)
}

fn read_matrix_csv<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let labels: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let d = labels.len();
    let mut rows = Vec::with_capacity(d);
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != d {
            return Err(Error::Parse(format!(
                "row {} has {} cells, expected {}",
                rows.len(),
                rec.len(),
                d
            )));
        }
        rows.push(rec.iter().map(|s| s.trim().to_string()).collect());
    }
    if rows.len() != d {
        return Err(Error::Parse(format!(
            "adjacency CSV has {} data rows for {} columns",
            rows.len(),
            d
        )));
    }
    Ok((labels, rows))
}

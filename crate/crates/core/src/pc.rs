//! PC algorithm for binary data: constraint-based skeleton discovery via
//! conditional-independence tests, then edge orientation (v-structures and
//! Meek rules 1-4).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::graph::MixedGraph;

/// Which conditional-independence statistic to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiTestKind {
    /// G² likelihood-ratio test, the standard choice for discrete data.
    G2,
    /// Pearson chi-square variant.
    Pearson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcConfig {
    /// Significance level of the CI tests.
    pub alpha: f64,
    /// Cap on the conditioning-set size; None means unbounded.
    pub max_cond_set: Option<usize>,
    /// Order-independent skeleton phase (neighborhoods frozen per level).
    pub stable: bool,
    pub test: CiTestKind,
    /// A test is underpowered when its retained sample count is below
    /// this multiple of its degrees of freedom.
    pub min_samples_per_dof: f64,
    /// When true, underpowered tests keep the edge instead of removing it.
    pub keep_underpowered: bool,
}

impl Default for PcConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_cond_set: Some(3),
            stable: true,
            test: CiTestKind::G2,
            min_samples_per_dof: 5.0,
            keep_underpowered: false,
        }
    }
}

impl PcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if !(self.min_samples_per_dof >= 0.0) {
            return Err(Error::Parameter("min_samples_per_dof must be >= 0".into()));
        }
        Ok(())
    }
}

/// Outcome of one conditional-independence test.
#[derive(Debug, Clone, PartialEq)]
pub struct CiTestResult {
    /// G² (or Pearson X²) statistic.
    pub statistic: f64,
    /// Degrees of freedom after dropping strata with a zero marginal.
    pub dof: usize,
    pub p_value: f64,
    /// p_value > alpha, or the test was underpowered.
    pub independent: bool,
    /// Too little data in the retained strata for the asymptotics to hold.
    pub low_power: bool,
}

/// Test x ⫫ y | z with the statistic selected in `cfg`.
///
/// The joint contingency table of (x, y) is built within each stratum of z.
/// Strata where x or y has a zero marginal carry no information about the
/// association and are skipped, reducing the degrees of freedom (nominally
/// 2^|z|) accordingly.
pub fn ci_test(
    data: &BinaryDataset,
    x: usize,
    y: usize,
    z: &[usize],
    cfg: &PcConfig,
) -> Result<CiTestResult> {
    if x == y || z.contains(&x) || z.contains(&y) {
        return Err(Error::Parameter(format!(
            "test variables overlap: x={x}, y={y}, z={z:?}"
        )));
    }
    if z.len() >= usize::BITS as usize - 1 {
        return Err(Error::Parameter(format!(
            "conditioning set of size {} is not representable",
            z.len()
        )));
    }
    let m = data.m();
    let xs = data.column(x);
    let ys = data.column(y);
    let zcols: Vec<&[bool]> = z.iter().map(|&c| data.column(c)).collect();

    let strata = 1usize << z.len();
    let mut counts = vec![[0u64; 4]; strata];
    for r in 0..m {
        let mut stratum = 0usize;
        for (k, col) in zcols.iter().enumerate() {
            stratum |= (col[r] as usize) << k;
        }
        counts[stratum][(xs[r] as usize) * 2 + ys[r] as usize] += 1;
    }

    let mut stat = 0.0f64;
    let mut dof = 0usize;
    let mut retained = 0u64;
    for cell in &counts {
        let [n00, n01, n10, n11] = cell.map(|v| v as f64);
        let total = n00 + n01 + n10 + n11;
        let (r0, r1) = (n00 + n01, n10 + n11);
        let (c0, c1) = (n00 + n10, n01 + n11);
        if r0 == 0.0 || r1 == 0.0 || c0 == 0.0 || c1 == 0.0 {
            continue;
        }
        dof += 1;
        retained += total as u64;
        for (obs, row, col) in [
            (n00, r0, c0),
            (n01, r0, c1),
            (n10, r1, c0),
            (n11, r1, c1),
        ] {
            let expected = row * col / total;
            match cfg.test {
                CiTestKind::G2 => {
                    if obs > 0.0 {
                        stat += 2.0 * obs * (obs / expected).ln();
                    }
                }
                CiTestKind::Pearson => {
                    let diff = obs - expected;
                    stat += diff * diff / expected;
                }
            }
        }
    }

    if dof == 0 {
        return Ok(CiTestResult {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
            independent: true,
            low_power: true,
        });
    }
    let low_power = (retained as f64) < cfg.min_samples_per_dof * dof as f64;
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Numeric(format!("chi-square with dof {dof}: {e}")))?;
    let p_value = dist.sf(stat.max(0.0));
    Ok(CiTestResult {
        statistic: stat.max(0.0),
        dof,
        p_value,
        independent: low_power || p_value > cfg.alpha,
        low_power,
    })
}

/// G² likelihood-ratio test regardless of the configured statistic.
pub fn ci_test_g2(
    data: &BinaryDataset,
    x: usize,
    y: usize,
    z: &[usize],
    cfg: &PcConfig,
) -> Result<CiTestResult> {
    ci_test(
        data,
        x,
        y,
        z,
        &PcConfig {
            test: CiTestKind::G2,
            ..cfg.clone()
        },
    )
}

/// Undirected skeleton: adjacency sets plus labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub labels: Vec<String>,
    pub adj: Vec<BTreeSet<usize>>,
}

impl Skeleton {
    pub fn d(&self) -> usize {
        self.adj.len()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains(&j)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }
}

/// Separating sets keyed by the unordered pair (min, max).
pub type SepSets = BTreeMap<(usize, usize), Vec<usize>>;

/// Visit all k-subsets of `items` in lexicographic order until the callback
/// returns true; returns whether it did.
fn any_combination(items: &[usize], k: usize, f: &mut impl FnMut(&[usize]) -> Result<bool>) -> Result<bool> {
    fn rec(
        items: &[usize],
        k: usize,
        start: usize,
        buf: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]) -> Result<bool>,
    ) -> Result<bool> {
        if buf.len() == k {
            return f(buf);
        }
        let remaining = k - buf.len();
        for i in start..=items.len().saturating_sub(remaining) {
            buf.push(items[i]);
            if rec(items, k, i + 1, buf, f)? {
                return Ok(true);
            }
            buf.pop();
        }
        Ok(false)
    }
    if k > items.len() {
        return Ok(false);
    }
    rec(items, k, 0, &mut Vec::with_capacity(k), f)
}

/// Prune the complete undirected graph by conditional-independence testing
/// with growing conditioning-set size. In stable mode the candidate
/// neighborhoods are frozen per level, so the result does not depend on the
/// order in which edges fall.
pub fn learn_skeleton(data: &BinaryDataset, cfg: &PcConfig) -> Result<(Skeleton, SepSets)> {
    cfg.validate()?;
    let d = data.n();
    if d < 2 {
        return Err(Error::Parameter("need at least 2 columns".into()));
    }
    let mut adj: Vec<BTreeSet<usize>> = (0..d)
        .map(|i| (0..d).filter(|&j| j != i).collect())
        .collect();
    let mut sepsets: SepSets = BTreeMap::new();
    let max_level = cfg.max_cond_set.unwrap_or(d.saturating_sub(2));

    for level in 0..=max_level {
        let snapshot = adj.clone();
        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|x| {
                snapshot[x]
                    .iter()
                    .filter(move |&&y| y > x)
                    .map(move |&y| (x, y))
            })
            .collect();

        let mut any_big_enough = false;
        for (x, y) in pairs {
            if !adj[x].contains(&y) {
                continue;
            }
            let cand_source = if cfg.stable { &snapshot } else { &adj };
            let from_x: Vec<usize> = cand_source[x].iter().copied().filter(|&v| v != y).collect();
            let from_y: Vec<usize> = cand_source[y].iter().copied().filter(|&v| v != x).collect();
            if from_x.len() > level || from_y.len() > level {
                any_big_enough = true;
            }

            let mut removed = false;
            let mut sep: Option<Vec<usize>> = None;
            let from_x_set: BTreeSet<usize> = from_x.iter().copied().collect();
            for (side_idx, side) in [&from_x, &from_y].into_iter().enumerate() {
                if removed {
                    break;
                }
                // the y side only contributes subsets not already tested
                let skip_contained = side_idx == 1 && level > 0;
                removed = any_combination(side, level, &mut |z| {
                    if skip_contained && z.iter().all(|v| from_x_set.contains(v)) {
                        return Ok(false);
                    }
                    let res = ci_test(data, x, y, z, cfg)?;
                    let delete = res.independent && !(res.low_power && cfg.keep_underpowered);
                    if delete {
                        sep = Some(z.to_vec());
                    }
                    Ok(delete)
                })?;
                if side_idx == 0 && level == 0 {
                    break; // the empty set was already tested
                }
            }
            if removed {
                adj[x].remove(&y);
                adj[y].remove(&x);
                sepsets.insert((x, y), sep.expect("sepset recorded on removal"));
            }
        }
        if !any_big_enough {
            break;
        }
    }

    Ok((
        Skeleton {
            labels: data.labels().to_vec(),
            adj,
        },
        sepsets,
    ))
}

/// Orient the skeleton: v-structures first (x → z ← y whenever x - z - y
/// with x, y non-adjacent and z outside sepset(x, y)), then Meek rules 1-4
/// to closure. Conflicting v-structure orientations keep the first one.
pub fn orient(skeleton: &Skeleton, sepsets: &SepSets) -> Result<MixedGraph> {
    let d = skeleton.d();
    let mut und: BTreeSet<(usize, usize)> = BTreeSet::new();
    for x in 0..d {
        for &y in &skeleton.adj[x] {
            if x < y {
                und.insert((x, y));
            }
        }
    }
    let mut dir: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut conflicts = 0usize;

    // an orientation request u -> w; the first orientation of a pair wins
    let want = |dir: &mut BTreeSet<(usize, usize)>,
                    und: &mut BTreeSet<(usize, usize)>,
                    u: usize,
                    w: usize,
                    conflicts: &mut usize| {
        if dir.contains(&(u, w)) {
            return false;
        }
        if dir.contains(&(w, u)) {
            *conflicts += 1;
            return false;
        }
        if und.remove(&(u.min(w), u.max(w))) {
            dir.insert((u, w));
            return true;
        }
        false
    };

    for z in 0..d {
        let nbrs: Vec<usize> = skeleton.adj[z].iter().copied().collect();
        for (a, &x) in nbrs.iter().enumerate() {
            for &y in &nbrs[a + 1..] {
                if skeleton.adjacent(x, y) {
                    continue;
                }
                let sep = sepsets.get(&(x.min(y), x.max(y)));
                let is_collider = match sep {
                    Some(s) => !s.contains(&z),
                    None => false,
                };
                if is_collider {
                    want(&mut dir, &mut und, x, z, &mut conflicts);
                    want(&mut dir, &mut und, y, z, &mut conflicts);
                }
            }
        }
    }
    if conflicts > 0 {
        log::warn!("{conflicts} conflicting v-structure orientation(s); first kept");
    }

    let adjacent = |dir: &BTreeSet<(usize, usize)>, und: &BTreeSet<(usize, usize)>, i: usize, j: usize| {
        dir.contains(&(i, j)) || dir.contains(&(j, i)) || und.contains(&(i.min(j), i.max(j)))
    };

    // Meek rules to closure
    let mut changed = true;
    while changed {
        changed = false;

        // R1: a -> b, b - c, a and c non-adjacent  =>  b -> c
        for (a, b) in dir.clone() {
            let und_nbrs: Vec<usize> = und
                .iter()
                .filter_map(|&(p, q)| {
                    if p == b {
                        Some(q)
                    } else if q == b {
                        Some(p)
                    } else {
                        None
                    }
                })
                .collect();
            for c in und_nbrs {
                if c != a && !adjacent(&dir, &und, a, c) {
                    changed |= want(&mut dir, &mut und, b, c, &mut conflicts);
                }
            }
        }

        // R2: a -> c -> b with a - b  =>  a -> b
        for (p, q) in und.clone() {
            for (u, v) in [(p, q), (q, p)] {
                let fires = (0..d).any(|c| dir.contains(&(u, c)) && dir.contains(&(c, v)));
                if fires && want(&mut dir, &mut und, u, v, &mut conflicts) {
                    changed = true;
                    break;
                }
            }
        }

        // R3: a - b, a - c, a - d, c -> b, d -> b, c and d non-adjacent  =>  a -> b
        for (p, q) in und.clone() {
            'pair3: for (u, v) in [(p, q), (q, p)] {
                let und_nbrs: Vec<usize> = und
                    .iter()
                    .filter_map(|&(s, t)| {
                        if s == u {
                            Some(t)
                        } else if t == u {
                            Some(s)
                        } else {
                            None
                        }
                    })
                    .filter(|&w| w != v)
                    .collect();
                for (i, &c) in und_nbrs.iter().enumerate() {
                    for &e in &und_nbrs[i + 1..] {
                        if !adjacent(&dir, &und, c, e)
                            && dir.contains(&(c, v))
                            && dir.contains(&(e, v))
                            && want(&mut dir, &mut und, u, v, &mut conflicts)
                        {
                            changed = true;
                            break 'pair3;
                        }
                    }
                }
            }
        }

        // R4: a - b, a - d, d -> c, c -> b, a adjacent to c, d and b
        // non-adjacent  =>  a -> b
        for (p, q) in und.clone() {
            'pair4: for (u, v) in [(p, q), (q, p)] {
                for &(dd, c) in dir.clone().iter() {
                    if dir.contains(&(c, v))
                        && und.contains(&(u.min(dd), u.max(dd)))
                        && adjacent(&dir, &und, u, c)
                        && !adjacent(&dir, &und, dd, v)
                        && want(&mut dir, &mut und, u, v, &mut conflicts)
                    {
                        changed = true;
                        break 'pair4;
                    }
                }
            }
        }
    }

    let mut mg = MixedGraph::empty(d, skeleton.labels.clone())?;
    for (i, j) in dir {
        mg.add_directed(i, j)?;
    }
    for (i, j) in und {
        mg.add_undirected(i, j)?;
    }
    Ok(mg)
}

/// Full PC: skeleton then orientation. Deterministic given the data and
/// config (stable mode plus fixed column order).
pub fn pc(data: &BinaryDataset, cfg: &PcConfig) -> Result<MixedGraph> {
    let (skeleton, sepsets) = learn_skeleton(data, cfg)?;
    orient(&skeleton, &sepsets)
}

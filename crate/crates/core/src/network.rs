//! Undirected agent graphs and the three-cluster family.
//!
//! Clusters 1 and 2 (size `n` each) are internally complete and joined to
//! every agent of cluster 3 (size `N - 2n`), which is itself complete.
//! Clusters 1 and 2 are not connected to each other. Thresholds are
//! `1/2 - eps`, `1/2 + eps` and `1/2` respectively.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{CtmError, Result};
use crate::scalar::Real;

/// Sizes of the three-cluster family: `total` agents, `n` in each of
/// clusters 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterSizes {
    pub total: usize,
    pub n: usize,
}

impl ClusterSizes {
    pub fn new(total: usize, n: usize) -> Self {
        Self { total, n }
    }

    /// Size of the neutral cluster 3.
    pub fn neutral(&self) -> usize {
        self.total.saturating_sub(2 * self.n)
    }

    /// Constraints required by the reduced model and the closed forms:
    /// `n >= 2` and a nonempty cluster 3.
    pub fn check_for_analysis(&self) -> Result<()> {
        if self.n < 2 {
            return Err(CtmError::Config(format!("n = {} but analysis requires n >= 2", self.n)));
        }
        if self.total < 2 * self.n + 1 {
            return Err(CtmError::Config(format!(
                "N = {} but analysis requires N >= 2n + 1 = {}",
                self.total,
                2 * self.n + 1
            )));
        }
        Ok(())
    }

    /// Constraints for building a simulatable network: `n >= 1`, `N >= 2n`.
    pub fn check_for_simulation(&self) -> Result<()> {
        if self.n < 1 {
            return Err(CtmError::Config("n must be positive".into()));
        }
        if self.total < 2 * self.n {
            return Err(CtmError::Config(format!(
                "N = {} but simulation requires N >= 2n = {}",
                self.total,
                2 * self.n
            )));
        }
        if self.total < 2 {
            return Err(CtmError::Config("need at least two agents".into()));
        }
        Ok(())
    }
}

impl fmt::Display for ClusterSizes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(N={}, n={})", self.total, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeClusterSpec<T> {
    pub sizes: ClusterSizes,
    /// Half-width of the threshold split.
    pub epsilon: T,
}

impl<T: Real> ThreeClusterSpec<T> {
    pub fn new(total: usize, n: usize, epsilon: T) -> Self {
        Self { sizes: ClusterSizes::new(total, n), epsilon }
    }

    pub fn check(&self) -> Result<()> {
        self.sizes.check_for_simulation()?;
        check_epsilon(self.epsilon)
    }
}

pub(crate) fn check_epsilon<T: Real>(eps: T) -> Result<()> {
    if !(eps >= T::zero() && eps < T::lit(0.5)) {
        return Err(CtmError::Config(format!("epsilon = {eps} outside [0, 1/2)")));
    }
    Ok(())
}

/// Cluster membership of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClusterLabel {
    /// High-response cluster (threshold `1/2 - eps`).
    High,
    /// Low-response cluster (threshold `1/2 + eps`).
    Low,
    /// Neutral cluster (threshold `1/2`).
    Neutral,
    /// Agent of an arbitrary graph.
    General,
}

impl ClusterLabel {
    /// Index 0, 1, 2 for clusters 1, 2, 3.
    pub fn index(self) -> Option<usize> {
        match self {
            ClusterLabel::High => Some(0),
            ClusterLabel::Low => Some(1),
            ClusterLabel::Neutral => Some(2),
            ClusterLabel::General => None,
        }
    }
}

/// Dense undirected graph with per-agent thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    size: usize,
    adjacency: Vec<u8>,
    degrees: Vec<usize>,
    thresholds: Vec<T>,
    labels: Vec<ClusterLabel>,
}

impl<T: Real> Network<T> {
    /// Builds the three-cluster network. Agents `0..n` form cluster 1,
    /// `n..2n` cluster 2 and the rest cluster 3.
    pub fn three_cluster(spec: &ThreeClusterSpec<T>) -> Result<Self> {
        spec.check()?;
        let total = spec.sizes.total;
        let n = spec.sizes.n;
        let half = T::lit(0.5);
        let labels: Vec<ClusterLabel> = (0..total)
            .map(|i| {
                if i < n {
                    ClusterLabel::High
                } else if i < 2 * n {
                    ClusterLabel::Low
                } else {
                    ClusterLabel::Neutral
                }
            })
            .collect();
        let mut adjacency = vec![0u8; total * total];
        for i in 0..total {
            for j in 0..total {
                let cross = matches!(
                    (labels[i], labels[j]),
                    (ClusterLabel::High, ClusterLabel::Low) | (ClusterLabel::Low, ClusterLabel::High)
                );
                if i != j && !cross {
                    adjacency[i * total + j] = 1;
                }
            }
        }
        let thresholds = labels
            .iter()
            .map(|l| match l {
                ClusterLabel::High => half - spec.epsilon,
                ClusterLabel::Low => half + spec.epsilon,
                _ => half,
            })
            .collect();
        Ok(Self::assemble(total, adjacency, thresholds, labels))
    }

    /// Builds a general graph from undirected 0-based edges. Duplicate edges
    /// collapse; self-loops are rejected.
    pub fn from_edges(size: usize, edges: &[(usize, usize)], thresholds: Vec<T>) -> Result<Self> {
        if thresholds.len() != size {
            return Err(CtmError::Config(format!(
                "{} thresholds supplied for {size} agents",
                thresholds.len()
            )));
        }
        let mut adjacency = vec![0u8; size * size];
        for &(i, j) in edges {
            if i >= size || j >= size {
                return Err(CtmError::Config(format!("edge ({i}, {j}) out of range for N = {size}")));
            }
            if i == j {
                return Err(CtmError::Config(format!("self-loop on agent {i}")));
            }
            adjacency[i * size + j] = 1;
            adjacency[j * size + i] = 1;
        }
        let net = Self::assemble(size, adjacency, thresholds, vec![ClusterLabel::General; size]);
        let problems = net.validate();
        if problems.is_empty() {
            Ok(net)
        } else {
            Err(CtmError::Config(problems.join("; ")))
        }
    }

    /// Assembles a network from raw parts without validation; degrees are
    /// recomputed from the adjacency.
    pub fn from_parts(
        size: usize,
        adjacency: Vec<u8>,
        thresholds: Vec<T>,
        labels: Vec<ClusterLabel>,
    ) -> Self {
        Self::assemble(size, adjacency, thresholds, labels)
    }

    fn assemble(size: usize, adjacency: Vec<u8>, thresholds: Vec<T>, labels: Vec<ClusterLabel>) -> Self {
        let degrees = (0..size)
            .map(|i| adjacency[i * size..(i + 1) * size].iter().map(|&a| a as usize).sum())
            .collect();
        Self { size, adjacency, degrees, thresholds, labels }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    #[inline]
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.size + j] != 0
    }

    /// Row `i` of the adjacency matrix.
    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.adjacency[i * self.size..(i + 1) * self.size]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).iter().enumerate().filter(|(_, &a)| a != 0).map(|(j, _)| j)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    pub fn labels(&self) -> &[ClusterLabel] {
        &self.labels
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|&a| a as usize).sum::<usize>() / 2
    }

    /// Agents carrying `label`.
    pub fn members(&self, label: ClusterLabel) -> Vec<usize> {
        (0..self.size).filter(|&i| self.labels[i] == label).collect()
    }

    /// Overrides the stored degree of agent `i`. Only useful for exercising
    /// [`Network::validate`].
    #[doc(hidden)]
    pub fn set_degree_unchecked(&mut self, i: usize, d: usize) {
        self.degrees[i] = d;
    }

    #[doc(hidden)]
    pub fn set_adjacency_unchecked(&mut self, i: usize, j: usize, value: u8) {
        self.adjacency[i * self.size + j] = value;
    }

    /// Lists every structural problem. An empty list means the network is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.size;
        if self.adjacency.len() != n * n {
            out.push(format!("adjacency has {} entries, expected {}", self.adjacency.len(), n * n));
            return out;
        }
        if self.thresholds.len() != n || self.degrees.len() != n || self.labels.len() != n {
            out.push("per-agent arrays do not match the agent count".into());
            return out;
        }
        for i in 0..n {
            if self.adjacent(i, i) {
                out.push(format!("self-loop on agent {i}"));
            }
            for j in (i + 1)..n {
                let (a, b) = (self.adjacency[i * n + j], self.adjacency[j * n + i]);
                if a != b {
                    out.push(format!("asymmetric adjacency between agents {i} and {j}"));
                }
                if a > 1 || b > 1 {
                    out.push(format!("non-binary adjacency entry between agents {i} and {j}"));
                }
            }
            let row_sum: usize = self.row(i).iter().map(|&a| a as usize).sum();
            if row_sum != self.degrees[i] {
                out.push(format!(
                    "degree mismatch on agent {i}: stored {}, adjacency row sums to {row_sum}",
                    self.degrees[i]
                ));
            }
            let mu = self.thresholds[i];
            if !(mu > T::zero() && mu < T::one()) {
                out.push(format!("threshold of agent {i} is {mu}, outside (0, 1)"));
            }
        }
        out
    }
}

/// Reads an edge list: first non-comment line is `N`, then `i j` per line.
pub fn read_edge_list<R: BufRead>(reader: R) -> Result<(usize, Vec<(usize, usize)>)> {
    let mut size = None;
    let mut edges = BTreeSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CtmError::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| CtmError::Parse(format!("edge list line {}: {what}", lineno + 1));
        match size {
            None => size = Some(line.parse::<usize>().map_err(|_| bad("expected agent count"))?),
            Some(_) => {
                let mut it = line.split_whitespace().map(|t| t.parse::<usize>());
                let (i, j) = match (it.next(), it.next(), it.next()) {
                    (Some(Ok(i)), Some(Ok(j)), None) => (i, j),
                    _ => return Err(bad("expected 'i j'")),
                };
                edges.insert((i.min(j), i.max(j)));
            }
        }
    }
    let size = size.ok_or_else(|| CtmError::Parse("edge list is empty".into()))?;
    Ok((size, edges.into_iter().collect()))
}

/// Reads one threshold per line.
pub fn read_thresholds<T: Real, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CtmError::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| CtmError::Parse(format!("thresholds line {}: '{line}'", lineno + 1)))?;
        out.push(T::lit(v));
    }
    Ok(out)
}

//! Shared domain types: the observed network, hard community labels, the
//! block kernel, community proportions, simulation scenarios and run records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised when constructing or validating model types.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    /// Indices are 1-based.
    #[error("adjacency matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("adjacency matrix has a nonzero diagonal entry at ({row}, {col})")]
    NonZeroDiagonal { row: usize, col: usize },
    #[error("adjacency matrix has a non-binary entry {value} at ({row}, {col})")]
    NonBinaryEntry { row: usize, col: usize, value: f64 },
    #[error("edge ({0}, {1}) is out of range for {2} nodes")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("label {label} at node {node} is outside 1..={k}")]
    LabelOutOfRange { node: usize, label: usize, k: usize },
    #[error("community count must be at least 1")]
    ZeroCommunities,
    #[error("kernel matrix must be {k}x{k} with {expected} entries, got {got}")]
    KernelShape { k: usize, expected: usize, got: usize },
    #[error("kernel matrix is not symmetric at ({0}, {1})")]
    KernelNotSymmetric(usize, usize),
    #[error("kernel entry {value} at ({row}, {col}) is not a probability")]
    KernelEntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("proportion {value} at index {index} is not strictly positive")]
    NonPositiveProportion { index: usize, value: f64 },
    #[error("proportions sum to {0}, expected 1")]
    ProportionsDoNotSumToOne(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// Symmetric, hollow, binary adjacency matrix of an undirected graph.
///
/// Stored densely, with a compressed neighbor list alongside for
/// degree and sparse traversals.
#[derive(Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    dense: Vec<u8>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl fmt::Debug for AdjacencyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdjacencyMatrix")
            .field("n", &self.n)
            .field("edges", &self.edge_count())
            .finish()
    }
}

impl AdjacencyMatrix {
    /// Validates a dense square matrix. Errors name the first offending
    /// pair in row-major order, 1-based.
    pub fn from_dense<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ModelError> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(ModelError::NotSquare { row: i + 1, len: row.len(), n });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &value) in row.as_ref().iter().enumerate() {
                if value != 0.0 && value != 1.0 {
                    return Err(ModelError::NonBinaryEntry { row: i + 1, col: j + 1, value });
                }
                if i == j && value != 0.0 {
                    return Err(ModelError::NonZeroDiagonal { row: i + 1, col: j + 1 });
                }
                if value != rows[j].as_ref()[i] {
                    return Err(ModelError::NotSymmetric { row: i + 1, col: j + 1 });
                }
            }
        }
        let mut dense = vec![0u8; n * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &value) in row.as_ref().iter().enumerate() {
                dense[i * n + j] = value as u8;
            }
        }
        Ok(Self::from_dense_unchecked(n, dense))
    }

    /// Builds a graph from 0-based undirected edges. Duplicates collapse;
    /// self-loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, ModelError> {
        let mut dense = vec![0u8; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(ModelError::EdgeOutOfRange(i + 1, j + 1, n));
            }
            if i == j {
                return Err(ModelError::NonZeroDiagonal { row: i + 1, col: j + 1 });
            }
            dense[i * n + j] = 1;
            dense[j * n + i] = 1;
        }
        Ok(Self::from_dense_unchecked(n, dense))
    }

    pub(crate) fn from_dense_unchecked(n: usize, dense: Vec<u8>) -> Self {
        debug_assert_eq!(dense.len(), n * n);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for i in 0..n {
            let row = &dense[i * n..(i + 1) * n];
            neighbors.extend(row.iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, _)| j as u32));
            offsets.push(neighbors.len());
        }
        Self { n, dense, offsets, neighbors }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_dense_unchecked(n, vec![0; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.dense[i * self.n + j] != 0
    }

    /// Row `i` as a dense 0/1 slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.dense[i * self.n..(i + 1) * self.n]
    }

    /// Sorted 0-based neighbor indices of node `i`.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Undirected edges `(i, j)` with `i < j`, 0-based.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i).iter().map(|&j| j as usize).filter(move |&j| j > i).map(move |j| (i, j))
        })
    }

    /// Dense row-major copy as reals.
    pub fn to_f64(&self) -> Vec<f64> {
        self.dense.iter().map(|&v| f64::from(v)).collect()
    }

    /// Relabels nodes: node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        assert_eq!(perm.len(), n);
        let mut dense = vec![0u8; n * n];
        for i in 0..n {
            for j in 0..n {
                dense[i * n + j] = self.dense[perm[i] * n + perm[j]];
            }
        }
        Self::from_dense_unchecked(n, dense)
    }
}

/// Hard community labels for `n` nodes.
///
/// Labels are held 0-based (`0..k`); the 1-based convention appears only in
/// file formats and error messages.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CommunityAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl CommunityAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self, ModelError> {
        if k == 0 {
            return Err(ModelError::ZeroCommunities);
        }
        if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(ModelError::LabelOutOfRange { node: node + 1, label: label + 1, k });
        }
        Ok(Self { labels, k })
    }

    /// From 1-based labels as they appear in label files.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self, ModelError> {
        if k == 0 {
            return Err(ModelError::ZeroCommunities);
        }
        let mut out = Vec::with_capacity(labels.len());
        for (node, &label) in labels.iter().enumerate() {
            if label == 0 || label > k {
                return Err(ModelError::LabelOutOfRange { node: node + 1, label, k });
            }
            out.push(label - 1);
        }
        Ok(Self { labels: out, k })
    }

    pub(crate) fn new_unchecked(labels: Vec<usize>, k: usize) -> Self {
        debug_assert!(labels.iter().all(|&l| l < k));
        Self { labels, k }
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        Self { labels: vec![0; n], k: k.max(1) }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l + 1).collect()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Community sizes, indexed by label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Row-major `n x k` one-hot matrix.
    pub fn one_hot(&self) -> Vec<u8> {
        let mut z = vec![0u8; self.labels.len() * self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            z[i * self.k + l] = 1;
        }
        z
    }
}

/// Symmetric `k x k` matrix of between-community edge probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self, ModelError> {
        if k == 0 {
            return Err(ModelError::ZeroCommunities);
        }
        if entries.len() != k * k {
            return Err(ModelError::KernelShape { k, expected: k * k, got: entries.len() });
        }
        for r in 0..k {
            for c in 0..k {
                let value = entries[r * k + c];
                if !(0.0..=1.0).contains(&value) {
                    return Err(ModelError::KernelEntryOutOfRange { row: r + 1, col: c + 1, value });
                }
                if value != entries[c * k + r] {
                    return Err(ModelError::KernelNotSymmetric(r + 1, c + 1));
                }
            }
        }
        Ok(Self { k, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.k + c]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Community proportions on the open simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityProportions {
    alpha: Vec<f64>,
}

impl CommunityProportions {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(alpha: Vec<f64>) -> Result<Self, ModelError> {
        if alpha.is_empty() {
            return Err(ModelError::ZeroCommunities);
        }
        if let Some((index, &value)) = alpha.iter().enumerate().find(|(_, &a)| !(a > 0.0)) {
            return Err(ModelError::NonPositiveProportion { index: index + 1, value });
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(ModelError::ProportionsDoNotSumToOne(sum));
        }
        Ok(Self { alpha })
    }

    pub fn uniform(k: usize) -> Self {
        Self { alpha: vec![1.0 / k as f64; k] }
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }
}

/// One simulation cell: `n` nodes, `k` communities, heterogeneity exponent
/// `beta` and sparsity exponent `b` (edge rate `rho = n^-b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    pub b: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(n: usize, k: usize, beta: f64, b: f64, seed: u64) -> Result<Self, ModelError> {
        let scenario = Self { n, k, beta, b, seed };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn rho(&self) -> f64 {
        (self.n as f64).powf(-self.b)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.k < 1 || self.n < self.k {
            return Err(ModelError::InvalidScenario(format!(
                "need n >= k >= 1, got n={} k={}",
                self.n, self.k
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(ModelError::InvalidScenario(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(ModelError::InvalidScenario(format!("b must be > 0, got {}", self.b)));
        }
        let rho = self.rho();
        if !(rho < 2.0 / 3.0) {
            return Err(ModelError::InvalidScenario(format!(
                "rho = n^-b = {rho} must be below 2/3"
            )));
        }
        Ok(())
    }
}

/// Inference methods compared by the toolkit. Serialized by name;
/// parsing is case-insensitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sc,
    Score,
    L2,
    Rsc,
    Gibbs,
    Vb,
    Vemb,
    Vemg,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Sc,
        Method::Score,
        Method::L2,
        Method::Rsc,
        Method::Gibbs,
        Method::Vb,
        Method::Vemb,
        Method::Vemg,
    ];

    pub const SPECTRAL: [Method; 4] = [Method::Sc, Method::Score, Method::L2, Method::Rsc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sc => "SC",
            Method::Score => "SCORE",
            Method::L2 => "L2",
            Method::Rsc => "RSC",
            Method::Gibbs => "GIBBS",
            Method::Vb => "VB",
            Method::Vemb => "VEMB",
            Method::Vemg => "VEMG",
        }
    }

    /// Stable small integer used when deriving RNG streams.
    pub fn index(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).unwrap() as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown method `{0}` (expected one of SC, SCORE, L2, RSC, GIBBS, VB, VEMB, VEMG)")]
pub struct UnknownMethod(pub String);

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == upper)
            .ok_or_else(|| UnknownMethod(s.to_string()))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

/// One `(method, scenario, seed)` result row.
///
/// `error` is set when the method failed to produce a partition; such rows
/// carry no meaningful `ari`/`nmi` and are excluded from summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub scenario: ScenarioConfig,
    pub ari: f64,
    pub nmi: f64,
    pub runtime_ms: f64,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

//! Graph and structural-equation-model domain types, synthetic data
//! generation, and file I/O.
//!
//! # Randomness
//!
//! Every generator takes an explicit 64-bit seed and uses a ChaCha12 stream
//! cipher RNG. Substreams keep the draws independent of evaluation order;
//! the stream assignment is fixed:
//!
//! | stream  | use                                        |
//! |---------|--------------------------------------------|
//! | 0       | random DAG: topological order              |
//! | 1       | random DAG: edge subset                    |
//! | 2       | SEM weights (sorted edge order)            |
//! | 3       | SEM noise variances (ascending node index) |
//! | 4 + j   | noise column j when sampling data          |
//!
//! The same seed therefore reproduces a full generate pipeline bit for bit.

mod io;

pub use io::{
    read_dataset_csv, read_edge_set, read_graph, write_dataset_csv, write_edge_set, write_graph,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

use crate::numerics::SymmetricMatrix;

const STREAM_DAG_ORDER: u64 = 0;
const STREAM_DAG_EDGES: u64 = 1;
const STREAM_WEIGHTS: u64 = 2;
const STREAM_VARIANCES: u64 = 3;
const STREAM_NOISE_BASE: u64 = 4;

/// Validation and I/O errors for model types.
#[derive(Debug, Error)]
pub enum ModelError {
    /// Structural validation failure (cycles, self-loops, bad parameters).
    #[error("invalid model: {0}")]
    Invalid(String),
    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        /// Offending path.
        path: String,
        /// Source error.
        #[source]
        source: std::io::Error,
    },
    /// Malformed file contents, with 1-based line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        /// Offending path.
        path: String,
        /// 1-based line number.
        line: usize,
        /// What went wrong.
        msg: String,
    },
}

/// Kahn's algorithm; returns a topological order or `None` when a cycle exists.
pub fn topological_order(m: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; m];
    let mut children = vec![Vec::new(); m];
    for &(p, c) in edges {
        indegree[c] += 1;
        children[p].push(c);
    }
    let mut queue: Vec<usize> = (0..m).filter(|&i| indegree[i] == 0).collect();
    queue.sort_unstable();
    let mut order = Vec::with_capacity(m);
    let mut head = 0;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        order.push(u);
        for &c in &children[u] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push(c);
            }
        }
    }
    if order.len() == m {
        Some(order)
    } else {
        None
    }
}

/// Directed acyclic graph on nodes `0..m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dag {
    m: usize,
    edges: Vec<(usize, usize)>,
}

impl Dag {
    /// Builds a DAG from `(parent, child)` pairs, rejecting self-loops,
    /// duplicates, out-of-range indices, and cycles.
    pub fn new(m: usize, edges: &[(usize, usize)]) -> Result<Self, ModelError> {
        if m == 0 {
            return Err(ModelError::Invalid("node count must be at least 1".into()));
        }
        let mut sorted: Vec<(usize, usize)> = edges.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(ModelError::Invalid(format!("duplicate edge {:?}", w[0])));
            }
        }
        for &(p, c) in &sorted {
            if p == c {
                return Err(ModelError::Invalid(format!("self-loop at node {p}")));
            }
            if p >= m || c >= m {
                return Err(ModelError::Invalid(format!(
                    "edge ({p}, {c}) out of range for m = {m}"
                )));
            }
        }
        if topological_order(m, &sorted).is_none() {
            return Err(ModelError::Invalid("edge list contains a cycle".into()));
        }
        Ok(Self { m, edges: sorted })
    }

    /// Empty graph on `m` nodes.
    pub fn empty(m: usize) -> Self {
        Self::new(m, &[]).expect("empty graph is valid")
    }

    /// Uniformly random DAG: random topological order, then a uniform
    /// `edge_count`-subset of the forward pairs.
    pub fn random(m: usize, edge_count: usize, seed: u64) -> Result<Self, ModelError> {
        let max_edges = m * (m - 1) / 2;
        if edge_count > max_edges {
            return Err(ModelError::Invalid(format!(
                "edge count {edge_count} exceeds maximum {max_edges} for m = {m}"
            )));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_DAG_ORDER);
        let mut order: Vec<usize> = (0..m).collect();
        // Fisher-Yates
        for i in (1..m).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut pairs = Vec::with_capacity(max_edges);
        for a in 0..m {
            for b in (a + 1)..m {
                pairs.push((order[a], order[b]));
            }
        }
        rng.set_stream(STREAM_DAG_EDGES);
        for i in 0..edge_count.min(pairs.len().saturating_sub(1)) {
            let j = rng.gen_range(i..pairs.len());
            pairs.swap(i, j);
        }
        Self::new(m, &pairs[..edge_count])
    }

    /// Node count.
    pub fn node_count(&self) -> usize {
        self.m
    }

    /// Sorted `(parent, child)` pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of directed edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Whether `parent -> child` is present.
    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.edges.binary_search(&(parent, child)).is_ok()
    }

    /// Parents of `node`, ascending.
    pub fn parents_of(&self, node: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(_, c)| c == node).map(|&(p, _)| p).collect()
    }

    /// A topological order of the nodes.
    pub fn topological_order(&self) -> Vec<usize> {
        topological_order(self.m, &self.edges).expect("validated acyclic")
    }

    /// Undirected skeleton as unordered `{min, max}` pairs.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|&(p, c)| (p.min(c), p.max(c))).collect()
    }

    /// Set of v-structures `(i, j, k)` with `i -> k <- j`, `i < j`, and `i, j`
    /// non-adjacent.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let skel = self.skeleton();
        let mut out = BTreeSet::new();
        for k in 0..self.m {
            let parents = self.parents_of(k);
            for (a, &i) in parents.iter().enumerate() {
                for &j in parents.iter().skip(a + 1) {
                    if !skel.contains(&(i.min(j), i.max(j))) {
                        out.insert((i.min(j), i.max(j), k));
                    }
                }
            }
        }
        out
    }
}

/// Completed partially directed acyclic graph, as a boolean adjacency matrix.
///
/// A directed edge `i -> j` sets entry `(i, j)` only; an undirected edge sets
/// both `(i, j)` and `(j, i)`. The diagonal is always zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cpdag {
    m: usize,
    adj: Vec<bool>,
}

impl Cpdag {
    /// All-empty CPDAG.
    pub fn empty(m: usize) -> Self {
        assert!(m >= 1);
        Self { m, adj: vec![false; m * m] }
    }

    /// Node count.
    pub fn node_count(&self) -> usize {
        self.m
    }

    /// Adjacency entry `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.m + j]
    }

    /// Marks a directed edge `i -> j`.
    pub fn set_directed(&mut self, i: usize, j: usize) {
        assert_ne!(i, j);
        self.adj[i * self.m + j] = true;
        self.adj[j * self.m + i] = false;
    }

    /// Marks an undirected edge `i - j`.
    pub fn set_undirected(&mut self, i: usize, j: usize) {
        assert_ne!(i, j);
        self.adj[i * self.m + j] = true;
        self.adj[j * self.m + i] = true;
    }

    /// Whether `i - j` is undirected (both entries set).
    pub fn is_undirected(&self, i: usize, j: usize) -> bool {
        self.get(i, j) && self.get(j, i)
    }

    /// Whether `i -> j` is directed (one-way entry).
    pub fn is_directed(&self, i: usize, j: usize) -> bool {
        self.get(i, j) && !self.get(j, i)
    }

    /// Directed one-way edges.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.m {
            for j in 0..self.m {
                if i != j && self.is_directed(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Checks the structural invariants: zero diagonal, acyclic directed part.
    pub fn validate(&self) -> Result<(), ModelError> {
        for i in 0..self.m {
            if self.get(i, i) {
                return Err(ModelError::Invalid(format!("diagonal entry set at {i}")));
            }
        }
        if topological_order(self.m, &self.directed_edges()).is_none() {
            return Err(ModelError::Invalid("directed part contains a cycle".into()));
        }
        Ok(())
    }
}

/// Superstructure edge set: ordered `(j, k)` pairs, possibly cyclic or
/// bidirectional, never self-looped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSet {
    m: usize,
    pairs: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    /// Builds an edge set, rejecting self-loops and out-of-range indices.
    pub fn new(m: usize, pairs: &[(usize, usize)]) -> Result<Self, ModelError> {
        if m == 0 {
            return Err(ModelError::Invalid("node count must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for &(j, k) in pairs {
            if j == k {
                return Err(ModelError::Invalid(format!("self-loop at node {j}")));
            }
            if j >= m || k >= m {
                return Err(ModelError::Invalid(format!(
                    "pair ({j}, {k}) out of range for m = {m}"
                )));
            }
            set.insert((j, k));
        }
        Ok(Self { m, pairs: set })
    }

    /// Empty edge set.
    pub fn empty(m: usize) -> Self {
        Self::new(m, &[]).expect("empty set is valid")
    }

    /// All ordered pairs on `m` nodes.
    pub fn complete(m: usize) -> Self {
        let mut pairs = Vec::new();
        for j in 0..m {
            for k in 0..m {
                if j != k {
                    pairs.push((j, k));
                }
            }
        }
        Self::new(m, &pairs).expect("complete set is valid")
    }

    /// Node count.
    pub fn node_count(&self) -> usize {
        self.m
    }

    /// Pair membership.
    pub fn contains(&self, j: usize, k: usize) -> bool {
        self.pairs.contains(&(j, k))
    }

    /// Number of ordered pairs.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    /// Whether the set is empty.
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Ordered iteration over pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    /// True when `(j, k)` present iff `(k, j)` present.
    pub fn is_symmetric(&self) -> bool {
        self.pairs.iter().all(|&(j, k)| self.pairs.contains(&(k, j)))
    }
}

/// SEM parameters: connectivity matrix `B` (zero diagonal, acyclic support)
/// and the diagonal of the noise covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemParameters {
    m: usize,
    /// Row-major `m x m`; `b[j][k] != 0` encodes the edge `j -> k`.
    b: Vec<Vec<f64>>,
    omega: Vec<f64>,
}

impl SemParameters {
    /// Validates and wraps `(B, Omega)`.
    pub fn new(b: Vec<Vec<f64>>, omega: Vec<f64>) -> Result<Self, ModelError> {
        let m = b.len();
        if m == 0 {
            return Err(ModelError::Invalid("B must be non-empty".into()));
        }
        if omega.len() != m {
            return Err(ModelError::Invalid("Omega length must match B dimension".into()));
        }
        let mut edges = Vec::new();
        for (j, row) in b.iter().enumerate() {
            if row.len() != m {
                return Err(ModelError::Invalid("B must be square".into()));
            }
            for (k, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(ModelError::Invalid(format!("B[{j}][{k}] not finite")));
                }
                if j == k && v != 0.0 {
                    return Err(ModelError::Invalid(format!("B diagonal nonzero at {j}")));
                }
                if j != k && v != 0.0 {
                    edges.push((j, k));
                }
            }
        }
        if topological_order(m, &edges).is_none() {
            return Err(ModelError::Invalid("support of B contains a cycle".into()));
        }
        for (j, &w) in omega.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(ModelError::Invalid(format!("Omega[{j}] must be positive")));
            }
        }
        Ok(Self { m, b, omega })
    }

    /// Variable count.
    pub fn node_count(&self) -> usize {
        self.m
    }

    /// Connectivity entry `B[j][k]` for the edge `j -> k`.
    pub fn b(&self, j: usize, k: usize) -> f64 {
        self.b[j][k]
    }

    /// Noise variance of node `j`.
    pub fn omega(&self, j: usize) -> f64 {
        self.omega[j]
    }

    /// Noise variances.
    pub fn omega_diag(&self) -> &[f64] {
        &self.omega
    }

    /// Support of `B` as a DAG.
    pub fn dag(&self) -> Dag {
        let mut edges = Vec::new();
        for j in 0..self.m {
            for k in 0..self.m {
                if self.b[j][k] != 0.0 {
                    edges.push((j, k));
                }
            }
        }
        Dag::new(self.m, &edges).expect("validated acyclic")
    }
}

/// Noise model for synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    /// Gaussian noise with the SEM's variances.
    Gaussian,
    /// Gaussian draw passed through `sign(e) * |e|^exponent`.
    Power(f64),
}

/// Specification for drawing noise variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VarianceSpec {
    /// Uniform over a finite set of values.
    Set(Vec<f64>),
    /// Uniform over `[lo, hi)`; draws are rejected until strictly positive.
    Interval(f64, f64),
}

/// Data matrix of `n` samples on `m` variables, assumed centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    m: usize,
    x: Vec<f64>,
}

impl Dataset {
    /// Wraps a row-major `n x m` buffer, checking finiteness.
    pub fn new(n: usize, m: usize, x: Vec<f64>) -> Result<Self, ModelError> {
        if n == 0 || m == 0 {
            return Err(ModelError::Invalid("n and m must be at least 1".into()));
        }
        if x.len() != n * m {
            return Err(ModelError::Invalid(format!(
                "buffer length {} does not match {n} x {m}",
                x.len()
            )));
        }
        if let Some(idx) = x.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::Invalid(format!(
                "non-finite entry at row {}, column {}",
                idx / m,
                idx % m
            )));
        }
        Ok(Self { n, m, x })
    }

    /// Sample count.
    pub fn sample_count(&self) -> usize {
        self.n
    }

    /// Variable count.
    pub fn variable_count(&self) -> usize {
        self.m
    }

    /// Entry `(row, col)`.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.x[row * self.m + col]
    }

    /// Raw row-major buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    /// Rescales each column to unit second moment (no re-centering; the model
    /// convention is that data are already centered).
    pub fn standardized(&self) -> Dataset {
        let mut scale = vec![0.0f64; self.m];
        for r in 0..self.n {
            for c in 0..self.m {
                scale[c] += self.get(r, c) * self.get(r, c);
            }
        }
        for s in scale.iter_mut() {
            *s = (*s / self.n as f64).sqrt();
            if *s <= 0.0 {
                *s = 1.0;
            }
        }
        let mut x = self.x.clone();
        for r in 0..self.n {
            for c in 0..self.m {
                x[r * self.m + c] /= scale[c];
            }
        }
        Dataset { n: self.n, m: self.m, x }
    }
}

/// Population covariance `(I - B)^{-T} Omega (I - B)^{-1}` of the SEM.
pub fn population_covariance(params: &SemParameters) -> SymmetricMatrix {
    let m = params.node_count();
    let dag = params.dag();
    let order = dag.topological_order();
    // columns of C = (I - B)^{-1}: solve (I - B) c = e_i by substitution in
    // reverse topological order (row j references children of j)
    let mut c = vec![0.0f64; m * m]; // row-major C
    for i in 0..m {
        for &j in order.iter().rev() {
            let mut acc = if j == i { 1.0 } else { 0.0 };
            for k in 0..m {
                let w = params.b(j, k);
                if w != 0.0 {
                    acc += w * c[k * m + i];
                }
            }
            c[j * m + i] = acc;
        }
    }
    // Sigma = C' Omega C
    let mut sigma = SymmetricMatrix::zeros(m);
    for i in 0..m {
        for j in i..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += c[k * m + i] * params.omega(k) * c[k * m + j];
            }
            sigma.set(i, j, acc);
        }
    }
    sigma
}

/// Draws SEM parameters on a fixed DAG: edge weights uniform from
/// `weight_set`, noise variances from `variance_spec`.
pub fn random_sem(
    dag: &Dag,
    weight_set: &[f64],
    variance_spec: &VarianceSpec,
    seed: u64,
) -> Result<SemParameters, ModelError> {
    if weight_set.is_empty() {
        return Err(ModelError::Invalid("weight set must be non-empty".into()));
    }
    if weight_set.iter().any(|&w| w == 0.0 || !w.is_finite()) {
        return Err(ModelError::Invalid("weight set must exclude zero".into()));
    }
    match variance_spec {
        VarianceSpec::Set(vals) => {
            if vals.is_empty() || vals.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
                return Err(ModelError::Invalid("variance set must be positive".into()));
            }
        }
        VarianceSpec::Interval(lo, hi) => {
            if !(*lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(ModelError::Invalid(
                    "variance interval requires 0 <= lo < hi".into(),
                ));
            }
        }
    }
    let m = dag.node_count();
    let mut b = vec![vec![0.0; m]; m];
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_WEIGHTS);
    for &(p, c) in dag.edges() {
        b[p][c] = weight_set[rng.gen_range(0..weight_set.len())];
    }
    rng.set_stream(STREAM_VARIANCES);
    let mut omega = Vec::with_capacity(m);
    for _ in 0..m {
        let w = match variance_spec {
            VarianceSpec::Set(vals) => vals[rng.gen_range(0..vals.len())],
            VarianceSpec::Interval(lo, hi) => loop {
                let v: f64 = rng.gen_range(*lo..*hi);
                if v > 0.0 {
                    break v;
                }
            },
        };
        omega.push(w);
    }
    SemParameters::new(b, omega)
}

/// Samples `n` observations from the SEM, deterministically in `seed`.
///
/// Noise column `j` is drawn on its own RNG substream, then propagated
/// through the topological order.
pub fn generate_data(
    params: &SemParameters,
    n: usize,
    noise: NoiseKind,
    seed: u64,
) -> Result<Dataset, ModelError> {
    if n == 0 {
        return Err(ModelError::Invalid("sample count must be at least 1".into()));
    }
    if let NoiseKind::Power(q) = noise {
        let ok = (0.5..=0.8).contains(&q) || (1.2..=2.0).contains(&q);
        if !ok {
            return Err(ModelError::Invalid(format!(
                "power-noise exponent {q} outside [0.5, 0.8] and [1.2, 2.0]"
            )));
        }
    }
    let m = params.node_count();
    let mut eps = vec![0.0f64; n * m]; // row-major n x m
    for j in 0..m {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_NOISE_BASE + j as u64);
        let sd = params.omega(j).sqrt();
        for r in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let e = z * sd;
            eps[r * m + j] = match noise {
                NoiseKind::Gaussian => e,
                NoiseKind::Power(q) => e.signum() * e.abs().powf(q),
            };
        }
    }
    let order = params.dag().topological_order();
    let mut x = eps;
    for r in 0..n {
        let row = &mut x[r * m..(r + 1) * m];
        for &j in &order {
            let mut acc = row[j];
            for k in 0..m {
                let w = params.b(k, j);
                if w != 0.0 {
                    acc += w * row[k];
                }
            }
            row[j] = acc;
        }
    }
    Dataset::new(n, m, x)
}

/// Sample covariance `X'X / n` (no re-centering; divisor `n`).
pub fn sample_covariance(data: &Dataset) -> SymmetricMatrix {
    let n = data.sample_count();
    let m = data.variable_count();
    let mut s = SymmetricMatrix::zeros(m);
    for i in 0..m {
        for j in i..m {
            let mut acc = 0.0;
            for r in 0..n {
                acc += data.get(r, i) * data.get(r, j);
            }
            s.set(i, j, acc / n as f64);
        }
    }
    s
}

/// Moral graph: symmetric closure of the skeleton plus all parent pairs that
/// share a child.
pub fn moral_graph(dag: &Dag) -> EdgeSet {
    let m = dag.node_count();
    let mut pairs = Vec::new();
    for &(p, c) in dag.edges() {
        pairs.push((p, c));
        pairs.push((c, p));
    }
    for k in 0..m {
        let parents = dag.parents_of(k);
        for (a, &i) in parents.iter().enumerate() {
            for &j in parents.iter().skip(a + 1) {
                pairs.push((i, j));
                pairs.push((j, i));
            }
        }
    }
    EdgeSet::new(m, &pairs).expect("moral graph pairs are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cholesky;
    use proptest::prelude::*;

    #[test]
    fn dag_rejects_cycle() {
        let err = Dag::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap_err();
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn dag_rejects_self_loop_and_duplicate() {
        assert!(Dag::new(2, &[(0, 0)]).is_err());
        assert!(Dag::new(2, &[(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn population_covariance_identity_for_trivial_sem() {
        let params = SemParameters::new(vec![vec![0.0; 3]; 3], vec![1.0; 3]).unwrap();
        let sigma = population_covariance(&params);
        assert_eq!(sigma, SymmetricMatrix::identity(3));
    }

    #[test]
    fn population_covariance_two_node_chain() {
        // X1 = X0 + e1 with unit noise: Sigma = [[1, 1], [1, 2]]
        let params =
            SemParameters::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let sigma = population_covariance(&params);
        let expect = [[1.0, 1.0], [1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((sigma.get(i, j) - expect[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn population_covariance_chain_is_pd() {
        let dag = Dag::new(3, &[(0, 1), (1, 2)]).unwrap();
        let params = random_sem(
            &dag,
            &[-0.8, -0.6, 0.6, 0.8],
            &VarianceSpec::Set(vec![0.5, 1.0, 1.5]),
            7,
        )
        .unwrap();
        let sigma = population_covariance(&params);
        assert!(cholesky(&sigma).is_ok());
    }

    #[test]
    fn generate_data_matches_population_covariance() {
        // independent case
        let params = SemParameters::new(vec![vec![0.0; 2]; 2], vec![1.0, 1.0]).unwrap();
        let data = generate_data(&params, 100_000, NoiseKind::Gaussian, 1).unwrap();
        let s = sample_covariance(&data);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s.get(i, j) - expect).abs() < 0.05, "entry ({i},{j}) = {}", s.get(i, j));
            }
        }
        // single weighted edge
        let params =
            SemParameters::new(vec![vec![0.0, 0.6], vec![0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let data = generate_data(&params, 200_000, NoiseKind::Gaussian, 2).unwrap();
        let s = sample_covariance(&data);
        let sigma = population_covariance(&params);
        for i in 0..2 {
            for j in 0..2 {
                assert!((s.get(i, j) - sigma.get(i, j)).abs() < 0.05);
            }
        }
    }

    #[test]
    fn generate_data_is_deterministic() {
        let dag = Dag::new(4, &[(0, 1), (1, 2), (0, 3)]).unwrap();
        let params = random_sem(
            &dag,
            &[0.6, 0.8],
            &VarianceSpec::Interval(0.5, 2.0),
            11,
        )
        .unwrap();
        let a = generate_data(&params, 50, NoiseKind::Gaussian, 42).unwrap();
        let b = generate_data(&params, 50, NoiseKind::Gaussian, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generate_data_rejects_bad_exponent() {
        let params = SemParameters::new(vec![vec![0.0]], vec![1.0]).unwrap();
        assert!(generate_data(&params, 10, NoiseKind::Power(1.0), 0).is_err());
        assert!(generate_data(&params, 10, NoiseKind::Power(0.9), 0).is_err());
        assert!(generate_data(&params, 10, NoiseKind::Power(1.2), 0).is_ok());
    }

    #[test]
    fn random_sem_draws_from_specs() {
        let dag = Dag::random(6, 8, 3).unwrap();
        let weights = [-0.8, -0.6, 0.6, 0.8];
        let params =
            random_sem(&dag, &weights, &VarianceSpec::Interval(0.0, 8.0), 5).unwrap();
        for &(p, c) in dag.edges() {
            assert!(weights.contains(&params.b(p, c)));
        }
        for j in 0..6 {
            let w = params.omega(j);
            assert!(w > 0.0 && w < 8.0);
        }
        // empty DAG still draws variances
        let params = random_sem(
            &Dag::empty(3),
            &weights,
            &VarianceSpec::Set(vec![0.5, 1.0, 1.5]),
            5,
        )
        .unwrap();
        for j in 0..3 {
            assert!([0.5, 1.0, 1.5].contains(&params.omega(j)));
        }
    }

    #[test]
    fn random_sem_rejects_bad_specs() {
        let dag = Dag::empty(2);
        assert!(random_sem(&dag, &[], &VarianceSpec::Set(vec![1.0]), 0).is_err());
        assert!(random_sem(&dag, &[0.0], &VarianceSpec::Set(vec![1.0]), 0).is_err());
        assert!(random_sem(&dag, &[0.5], &VarianceSpec::Interval(-1.0, 2.0), 0).is_err());
        assert!(random_sem(&dag, &[0.5], &VarianceSpec::Set(vec![]), 0).is_err());
    }

    #[test]
    fn sample_covariance_small_cases() {
        let d = Dataset::new(2, 2, vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        let s = sample_covariance(&d);
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(1, 1), 0.0);

        let d = Dataset::new(1, 3, vec![0.0; 3]).unwrap();
        assert_eq!(sample_covariance(&d), SymmetricMatrix::zeros(3));
    }

    #[test]
    fn sample_covariance_matches_naive_loops() {
        let dag = Dag::random(4, 4, 9).unwrap();
        let params =
            random_sem(&dag, &[0.6], &VarianceSpec::Set(vec![1.0]), 9).unwrap();
        let data = generate_data(&params, 50, NoiseKind::Gaussian, 9).unwrap();
        let s = sample_covariance(&data);
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for r in 0..50 {
                    acc += data.get(r, i) * data.get(r, j);
                }
                acc /= 50.0;
                assert!((s.get(i, j) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn moral_graph_cases() {
        // collider 0 -> 2 <- 1 marries parents
        let dag = Dag::new(3, &[(0, 2), (1, 2)]).unwrap();
        let mg = moral_graph(&dag);
        assert_eq!(mg.len(), 6);
        for &(a, b) in &[(0, 2), (1, 2), (0, 1)] {
            assert!(mg.contains(a, b) && mg.contains(b, a));
        }
        // chain has no common children
        let dag = Dag::new(3, &[(0, 1), (1, 2)]).unwrap();
        let mg = moral_graph(&dag);
        assert_eq!(mg.len(), 4);
        assert!(!mg.contains(0, 2));
        // diamond marries 1 and 2
        let dag = Dag::new(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        let mg = moral_graph(&dag);
        assert!(mg.contains(1, 2) && mg.contains(2, 1));
        assert_eq!(mg.len(), 10);
    }

    proptest! {
        // adding a back edge to a topological chain is rejected
        #[test]
        fn dag_rejects_back_edge(m in 2usize..7, back in 0usize..6) {
            let chain: Vec<(usize, usize)> = (0..m - 1).map(|i| (i, i + 1)).collect();
            let src = (back % (m - 1)) + 1;
            let mut with_back = chain.clone();
            with_back.push((src, 0));
            prop_assert!(Dag::new(m, &chain).is_ok());
            prop_assert!(Dag::new(m, &with_back).is_err());
        }

        // moral graph is symmetric and contains the skeleton
        #[test]
        fn moral_graph_contains_skeleton(seed in 0u64..500) {
            let dag = Dag::random(5, 5, seed).unwrap();
            let mg = moral_graph(&dag);
            prop_assert!(mg.is_symmetric());
            for &(p, c) in dag.edges() {
                prop_assert!(mg.contains(p, c) && mg.contains(c, p));
            }
        }
    }
}

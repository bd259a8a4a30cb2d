//! Exact evaluation of the penalized likelihood objective, closed-form
//! per-DAG maximum-likelihood scoring, labeled-DAG enumeration, a brute-force
//! global oracle, and BIC model selection.
//!
//! The objective being scored, for a matrix `Gamma` with positive diagonal
//! and acyclic off-diagonal support, is
//!
//! ```text
//! sum_i -2 log(Gamma_ii) + tr(Gamma Gamma' S) + lambda^2 * #offdiag(Gamma)
//! ```
//!
//! For a fixed support the minimizer is available in closed form column by
//! column from conditional variances, which is what [`dag_mle`] computes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{topological_order, Dag, Dataset, EdgeSet};
use crate::numerics::{spd_solve, NumericsError, SymmetricMatrix};

/// Scoring errors.
#[derive(Debug, Error)]
pub enum ScoringError {
    /// A diagonal entry of `Gamma` is not strictly positive.
    #[error("non-positive diagonal entry at index {0}")]
    NonPositiveDiagonal(usize),
    /// Off-diagonal support contains a cycle.
    #[error("off-diagonal support contains a cycle")]
    CyclicSupport,
    /// A parent block is singular or the conditional variance vanished.
    #[error("singular parent block at column {column} (conditional variance {value:.3e})")]
    SingularParentBlock {
        /// Column whose regression failed.
        column: usize,
        /// Offending conditional variance (or 0 when the block factorization failed).
        value: f64,
    },
    /// Enumeration guard.
    #[error("enumeration supports at most 5 nodes, got {0}")]
    TooManyNodes(usize),
    /// Every grid point failed during model selection.
    #[error("all lambda grid points failed: {0}")]
    AllGridPointsFailed(String),
    /// Shape mismatch between inputs.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Decision matrix with strictly positive diagonal and acyclic off-diagonal
/// support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GammaMatrixRepr", into = "GammaMatrixRepr")]
pub struct GammaMatrix {
    m: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GammaMatrixRepr {
    m: usize,
    entries: Vec<Vec<f64>>,
}

impl TryFrom<GammaMatrixRepr> for GammaMatrix {
    type Error = ScoringError;
    fn try_from(r: GammaMatrixRepr) -> Result<Self, ScoringError> {
        if r.entries.len() != r.m || r.entries.iter().any(|row| row.len() != r.m) {
            return Err(ScoringError::DimensionMismatch("entries must be m x m".into()));
        }
        GammaMatrix::new(r.m, r.entries.into_iter().flatten().collect())
    }
}

impl From<GammaMatrix> for GammaMatrixRepr {
    fn from(g: GammaMatrix) -> Self {
        let rows = (0..g.m).map(|i| g.entries[i * g.m..(i + 1) * g.m].to_vec()).collect();
        GammaMatrixRepr { m: g.m, entries: rows }
    }
}

impl GammaMatrix {
    /// Wraps a row-major `m x m` buffer, validating the diagonal and the
    /// acyclicity of the off-diagonal support.
    pub fn new(m: usize, entries: Vec<f64>) -> Result<Self, ScoringError> {
        assert_eq!(entries.len(), m * m, "buffer must be m x m");
        for i in 0..m {
            if !(entries[i * m + i] > 0.0) {
                return Err(ScoringError::NonPositiveDiagonal(i));
            }
        }
        let support: Vec<(usize, usize)> = (0..m)
            .flat_map(|j| (0..m).map(move |k| (j, k)))
            .filter(|&(j, k)| j != k && entries[j * m + k] != 0.0)
            .collect();
        if topological_order(m, &support).is_none() {
            return Err(ScoringError::CyclicSupport);
        }
        Ok(Self { m, entries })
    }

    /// Identity matrix (the empty-graph parameter at unit variances).
    pub fn identity(m: usize) -> Self {
        let mut entries = vec![0.0; m * m];
        for i in 0..m {
            entries[i * m + i] = 1.0;
        }
        Self { m, entries }
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Entry `(j, k)`.
    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.m + k]
    }

    /// Off-diagonal support as `(j, k)` pairs with `Gamma_jk != 0`,
    /// i.e. the encoded DAG edges `j -> k`.
    pub fn support_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.m {
            for k in 0..self.m {
                if j != k && self.get(j, k) != 0.0 {
                    out.push((j, k));
                }
            }
        }
        out
    }

    /// The DAG encoded by the off-diagonal support.
    pub fn dag(&self) -> Dag {
        Dag::new(self.m, &self.support_edges()).expect("support validated acyclic")
    }

    /// Number of nonzero entries, diagonal included.
    pub fn nonzero_count(&self) -> usize {
        self.entries.iter().filter(|&&v| v != 0.0).count()
    }

    /// `tr(Gamma Gamma' S)`, i.e. the sum over columns `c` of `c' S c`.
    pub fn trace_term(&self, s: &SymmetricMatrix) -> f64 {
        let m = self.m;
        let mut acc = 0.0;
        for k in 0..m {
            for a in 0..m {
                let ga = self.get(a, k);
                if ga == 0.0 {
                    continue;
                }
                for b in 0..m {
                    let gb = self.get(b, k);
                    if gb != 0.0 {
                        acc += ga * gb * s.get(a, b);
                    }
                }
            }
        }
        acc
    }
}

/// Value of the penalized objective at a per-DAG optimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagScore {
    /// The optimal parameter for the scored support.
    pub gamma: GammaMatrix,
    /// Penalized objective value.
    pub objective: f64,
    /// Number of penalized (off-diagonal) entries.
    pub penalty_edges: usize,
}

/// Exact penalized objective at `gamma`.
pub fn objective(
    gamma: &GammaMatrix,
    s: &SymmetricMatrix,
    lambda_sq: f64,
) -> Result<f64, ScoringError> {
    if s.dim() != gamma.dim() {
        return Err(ScoringError::DimensionMismatch(format!(
            "gamma dim {} vs covariance dim {}",
            gamma.dim(),
            s.dim()
        )));
    }
    let mut log_term = 0.0;
    for i in 0..gamma.dim() {
        let d = gamma.get(i, i);
        if !(d > 0.0) {
            return Err(ScoringError::NonPositiveDiagonal(i));
        }
        log_term += -2.0 * d.ln();
    }
    Ok(log_term + gamma.trace_term(s) + lambda_sq * gamma.support_edges().len() as f64)
}

/// Closed-form column regression: conditional variance of `col` given
/// `parents`, plus the regression coefficients.
///
/// Returns `(c, beta)` with `c = S_jj - S_jP S_PP^{-1} S_Pj` and
/// `beta = S_PP^{-1} S_Pj`.
pub(crate) fn column_regression(
    s: &SymmetricMatrix,
    col: usize,
    parents: &[usize],
) -> Result<(f64, Vec<f64>), ScoringError> {
    if parents.is_empty() {
        return Ok((s.get(col, col), Vec::new()));
    }
    let sub = s.principal_submatrix(parents);
    let rhs: Vec<f64> = parents.iter().map(|&p| s.get(p, col)).collect();
    let beta = spd_solve(&sub, &rhs).map_err(|e| match e {
        NumericsError::NotPositiveDefinite(_) => {
            ScoringError::SingularParentBlock { column: col, value: 0.0 }
        }
        NumericsError::DimensionMismatch(msg) => ScoringError::DimensionMismatch(msg),
    })?;
    let explained: f64 = beta.iter().zip(&rhs).map(|(b, r)| b * r).sum();
    Ok((s.get(col, col) - explained, beta))
}

/// Per-DAG maximum-likelihood score: the unique objective minimizer over the
/// fixed support, in closed form.
///
/// Column `j` with parent set `P` gets `Gamma_jj = c_j^{-1/2}` and
/// `Gamma_Pj = -Gamma_jj * S_PP^{-1} S_Pj`, where `c_j` is the conditional
/// variance; the objective is `sum_j (1 + log c_j) + lambda^2 |E|`.
pub fn dag_mle(
    s: &SymmetricMatrix,
    dag: &Dag,
    lambda_sq: f64,
) -> Result<DagScore, ScoringError> {
    let m = dag.node_count();
    if s.dim() != m {
        return Err(ScoringError::DimensionMismatch(format!(
            "covariance dim {} vs graph nodes {m}",
            s.dim()
        )));
    }
    let mut entries = vec![0.0; m * m];
    let mut obj = lambda_sq * dag.edge_count() as f64;
    for j in 0..m {
        let parents = dag.parents_of(j);
        let (c, beta) = column_regression(s, j, &parents)?;
        if c <= 1e-12 {
            return Err(ScoringError::SingularParentBlock { column: j, value: c });
        }
        let gjj = c.powf(-0.5);
        entries[j * m + j] = gjj;
        for (idx, &p) in parents.iter().enumerate() {
            entries[p * m + j] = -gjj * beta[idx];
        }
        obj += 1.0 + c.ln();
    }
    let gamma = GammaMatrix::new(m, entries)?;
    Ok(DagScore { gamma, objective: obj, penalty_edges: dag.edge_count() })
}

/// Every labeled DAG on `m <= 5` nodes whose edges lie inside `restrict`
/// (all ordered pairs when absent), each exactly once, in a fixed order.
pub fn enumerate_dags(m: usize, restrict: Option<&EdgeSet>) -> Result<Vec<Dag>, ScoringError> {
    if m > 5 {
        return Err(ScoringError::TooManyNodes(m));
    }
    let candidates: Vec<(usize, usize)> = match restrict {
        Some(set) => set.iter().collect(),
        None => {
            let mut v = Vec::new();
            for j in 0..m {
                for k in 0..m {
                    if j != k {
                        v.push((j, k));
                    }
                }
            }
            v
        }
    };
    let n = candidates.len();
    assert!(n <= 25, "candidate pair list unexpectedly large");
    let mut out = Vec::new();
    let mut edges = Vec::with_capacity(n);
    for mask in 0u32..(1u32 << n) {
        edges.clear();
        for (bit, &pair) in candidates.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                edges.push(pair);
            }
        }
        if topological_order(m, &edges).is_some() {
            out.push(Dag::new(m, &edges).expect("acyclic by construction"));
        }
    }
    Ok(out)
}

/// Global optimum of [`dag_mle`] over [`enumerate_dags`]; ties broken by
/// fewer edges, then lexicographic edge list.
pub fn brute_force_optimum(
    s: &SymmetricMatrix,
    lambda_sq: f64,
    restrict: Option<&EdgeSet>,
    m: usize,
) -> Result<DagScore, ScoringError> {
    let mut best: Option<(DagScore, Vec<(usize, usize)>)> = None;
    for dag in enumerate_dags(m, restrict)? {
        let score = match dag_mle(s, &dag, lambda_sq) {
            Ok(sc) => sc,
            // singular blocks cannot hold an optimum of a PD-scored instance
            Err(ScoringError::SingularParentBlock { .. }) => continue,
            Err(e) => return Err(e),
        };
        let edges = dag.edges().to_vec();
        best = match best {
            None => Some((score, edges)),
            Some((cur, cur_edges)) => {
                let tie = (score.objective - cur.objective).abs() <= 1e-9;
                let better = if tie {
                    (edges.len(), &edges) < (cur_edges.len(), &cur_edges)
                } else {
                    score.objective < cur.objective
                };
                if better {
                    Some((score, edges))
                } else {
                    Some((cur, cur_edges))
                }
            }
        };
    }
    best.map(|(s, _)| s)
        .ok_or_else(|| ScoringError::DimensionMismatch("no scorable DAG".into()))
}

/// All optima within `tol` of the brute-force minimum (oracle support for
/// tests that accept any member of a tied set).
pub fn brute_force_optima(
    s: &SymmetricMatrix,
    lambda_sq: f64,
    restrict: Option<&EdgeSet>,
    m: usize,
    tol: f64,
) -> Result<Vec<DagScore>, ScoringError> {
    let mut scores = Vec::new();
    for dag in enumerate_dags(m, restrict)? {
        match dag_mle(s, &dag, lambda_sq) {
            Ok(sc) => scores.push(sc),
            Err(ScoringError::SingularParentBlock { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let best = scores.iter().map(|s| s.objective).fold(f64::INFINITY, f64::min);
    Ok(scores.into_iter().filter(|s| s.objective <= best + tol).collect())
}

/// Bayesian information criterion of a fitted parameter.
///
/// `-2n sum_i log Gamma_ii + n tr(Gamma Gamma' S) + k log n`, where `k`
/// counts all nonzero entries of `Gamma`, diagonal included.
pub fn bic(gamma: &GammaMatrix, s: &SymmetricMatrix, n: usize) -> Result<f64, ScoringError> {
    let nf = n as f64;
    let mut log_term = 0.0;
    for i in 0..gamma.dim() {
        let d = gamma.get(i, i);
        if !(d > 0.0) {
            return Err(ScoringError::NonPositiveDiagonal(i));
        }
        log_term += d.ln();
    }
    Ok(-2.0 * nf * log_term + nf * gamma.trace_term(s) + gamma.nonzero_count() as f64 * nf.ln())
}

/// Fits the solver callback over the grid `lambda^2 = c^2 log(m)/n` and
/// returns the fit with the smallest BIC; ties go to the smaller `c`.
///
/// A failed grid point is skipped with a warning unless every point fails.
pub fn select_lambda<E: std::fmt::Display>(
    data: &Dataset,
    _e_super: &EdgeSet,
    mut fit: impl FnMut(f64) -> Result<GammaMatrix, E>,
    c_grid: &[u32],
) -> Result<(f64, GammaMatrix), ScoringError> {
    assert!(!c_grid.is_empty(), "grid must be non-empty");
    let m = data.variable_count() as f64;
    let n = data.sample_count();
    let s = crate::model::sample_covariance(data);
    let base = m.ln() / n as f64;
    let mut best: Option<(f64, f64, GammaMatrix)> = None; // (bic, lambda_sq, gamma)
    let mut last_err = String::new();
    for &c in c_grid {
        let lambda_sq = (c as f64) * (c as f64) * base;
        match fit(lambda_sq) {
            Ok(gamma) => {
                let score = bic(&gamma, &s, n)?;
                let better = match &best {
                    None => true,
                    Some((b, _, _)) => score < *b, // strict: ties keep the earlier (smaller) c
                };
                if better {
                    best = Some((score, lambda_sq, gamma));
                }
            }
            Err(e) => {
                log::warn!("lambda grid point c={c} failed: {e}");
                last_err = e.to_string();
            }
        }
    }
    best.map(|(_, l, g)| (l, g))
        .ok_or(ScoringError::AllGridPointsFailed(last_err))
}

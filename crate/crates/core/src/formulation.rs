//! Assembly of the mixed-integer convex program: the perspective-splitting
//! vector `delta`, the residual matrix `Q = S - diag(delta)`, the big-M
//! bound, and the variable layout shared with the solver.
//!
//! The program being assembled, over `Gamma`, binaries `g`, layer values
//! `psi`, and perspective variables `s`, is
//!
//! ```text
//! min  sum_i -2 log(Gamma_ii) + tr(Gamma Gamma' Q)
//!        + sum_{(j,k)} delta_j s_jk + sum_i delta_i s_ii + lambda^2 sum g_jk
//! s.t. -M g_jk <= Gamma_jk <= M g_jk          (j,k) in superstructure
//!      M >= Gamma_ii
//!      1 - m + m g_jk <= psi_k - psi_j,  psi in [1, m]^m
//!      s_jk g_jk >= Gamma_jk^2,  s_ii >= Gamma_ii^2
//!      s_jk <= M^2 g_jk,  s_ii <= M^2
//! ```
//!
//! which matches the penalized likelihood objective at every integral point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::EdgeSet;
use crate::numerics::{is_psd, SymmetricMatrix};
use crate::scoring::{column_regression, ScoringError};

/// Tolerance for the PSD membership test on `Q`.
pub const PSD_TOL: f64 = 1e-8;
/// Explicit lower bound kept on every diagonal entry of `Gamma` so the log
/// terms and OA cuts stay well posed in node relaxations.
pub const DIAGONAL_FLOOR: f64 = 1e-6;

/// Formulation errors.
#[derive(Debug, Error)]
pub enum FormulationError {
    /// Shape mismatch between covariance and edge set.
    #[error("dimension mismatch: covariance dim {0} vs edge set on {1} nodes")]
    DimensionMismatch(usize, usize),
    /// Invalid scalar input.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Failure inside the closed-form relaxation used for big-M calibration.
    #[error("big-M calibration failed: {0}")]
    Calibration(#[from] ScoringError),
}

/// Immutable problem instance shared read-only across solver workers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MicpProblemRepr", into = "MicpProblemRepr")]
pub struct MicpProblem {
    /// Sample covariance.
    pub s: SymmetricMatrix,
    /// Superstructure pairs, sorted.
    pub e_super: EdgeSet,
    /// ℓ0 penalty weight.
    pub lambda_sq: f64,
    /// Big-M bound on `|Gamma|` entries.
    pub big_m: f64,
    /// Perspective-splitting vector.
    pub delta: Vec<f64>,
    /// `S - diag(delta)`, positive semidefinite.
    pub q: SymmetricMatrix,
}

#[derive(Serialize, Deserialize)]
struct MicpProblemRepr {
    s: SymmetricMatrix,
    e_super: EdgeSet,
    lambda_sq: f64,
    big_m: f64,
    delta: Vec<f64>,
}

impl TryFrom<MicpProblemRepr> for MicpProblem {
    type Error = FormulationError;
    fn try_from(r: MicpProblemRepr) -> Result<Self, FormulationError> {
        let mut q = r.s.clone();
        for i in 0..q.dim() {
            let v = q.get(i, i) - r.delta[i];
            q.set(i, i, v);
        }
        if !is_psd(&q, PSD_TOL) {
            return Err(FormulationError::Invalid("S - diag(delta) is not PSD".into()));
        }
        Ok(MicpProblem {
            s: r.s,
            e_super: r.e_super,
            lambda_sq: r.lambda_sq,
            big_m: r.big_m,
            delta: r.delta,
            q,
        })
    }
}

impl From<MicpProblem> for MicpProblemRepr {
    fn from(p: MicpProblem) -> Self {
        MicpProblemRepr {
            s: p.s,
            e_super: p.e_super,
            lambda_sq: p.lambda_sq,
            big_m: p.big_m,
            delta: p.delta,
        }
    }
}

impl MicpProblem {
    /// Node count.
    pub fn node_count(&self) -> usize {
        self.s.dim()
    }

    /// Variable layout of this instance.
    pub fn layout(&self) -> VarLayout {
        VarLayout::new(self.s.dim(), self.e_super.iter().collect())
    }
}

/// Index map over the decision variables of the assembled program.
///
/// Order: `T_i`, `Gamma_ii`, `Gamma_jk` per pair, `g_jk`, `psi_i`, `s_jk`,
/// `s_ii`, and one auxiliary variable pinned to 1 that carries the constant
/// side of the diagonal perspective cones.
#[derive(Debug, Clone)]
pub struct VarLayout {
    /// Node count.
    pub m: usize,
    /// Sorted superstructure pairs; positions index the per-pair variables.
    pub pairs: Vec<(usize, usize)>,
}

impl VarLayout {
    /// Builds the layout for `m` nodes and the given sorted pairs.
    pub fn new(m: usize, pairs: Vec<(usize, usize)>) -> Self {
        Self { m, pairs }
    }

    /// Number of superstructure pairs.
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Total decision-variable count.
    pub fn n_vars(&self) -> usize {
        3 * self.m + 3 * self.pairs.len() + self.m + 1
    }

    /// Epigraph variable `T_i` for the log term of node `i`.
    pub fn t(&self, i: usize) -> usize {
        i
    }

    /// Diagonal entry `Gamma_ii`.
    pub fn gamma_diag(&self, i: usize) -> usize {
        self.m + i
    }

    /// Off-diagonal entry for pair position `p`.
    pub fn gamma_off(&self, p: usize) -> usize {
        2 * self.m + p
    }

    /// Edge indicator for pair position `p`.
    pub fn g(&self, p: usize) -> usize {
        2 * self.m + self.pairs.len() + p
    }

    /// Layer value of node `i`.
    pub fn psi(&self, i: usize) -> usize {
        2 * self.m + 2 * self.pairs.len() + i
    }

    /// Perspective variable `s_jk` for pair position `p`.
    pub fn s_off(&self, p: usize) -> usize {
        3 * self.m + 2 * self.pairs.len() + p
    }

    /// Perspective variable `s_ii`.
    pub fn s_diag(&self, i: usize) -> usize {
        3 * self.m + 3 * self.pairs.len() + i
    }

    /// Auxiliary variable fixed to 1.
    pub fn one(&self) -> usize {
        self.n_vars() - 1
    }

    /// Position of a pair in the sorted pair list.
    pub fn pair_position(&self, pair: (usize, usize)) -> Option<usize> {
        self.pairs.binary_search(&pair).ok()
    }

    /// Index of the `Gamma` variable holding entry `(j, k)`, if present.
    pub fn gamma_entry(&self, j: usize, k: usize) -> Option<usize> {
        if j == k {
            Some(self.gamma_diag(j))
        } else {
            self.pair_position((j, k)).map(|p| self.gamma_off(p))
        }
    }
}

/// Maximizes `sum(delta)` subject to `S - diag(delta)` staying PSD.
///
/// Two alternating moves, iterated to a fixpoint: a uniform raise of every
/// coordinate by the PD margin (a min-eigenvalue computation), then cyclic
/// per-coordinate bisection on the PD margin. `delta = 0` is always feasible,
/// so the routine cannot fail; the result is component-wise maximal.
pub fn choose_delta(s: &SymmetricMatrix) -> Vec<f64> {
    let m = s.dim();
    let mut delta = vec![0.0f64; m];
    let feasible = |d: &[f64]| -> bool {
        let mut q = s.clone();
        for i in 0..m {
            let v = q.get(i, i) - d[i];
            q.set(i, i, v);
        }
        // strictly inside the 1e-8 PSD test used on the assembled problem
        is_psd(&q, PSD_TOL * 0.1)
    };
    let scale = s.max_abs().max(1.0);
    let improve_tol = 1e-8;
    loop {
        let mut improved = 0.0f64;
        // uniform raise: bisection on t with delta + t*1 feasible
        let mut lo = 0.0f64;
        let mut hi = (0..m)
            .map(|i| s.get(i, i) - delta[i])
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        if hi > 0.0 {
            let probe: Vec<f64> = delta.iter().map(|&d| d + hi).collect();
            if feasible(&probe) {
                lo = hi;
            } else {
                while hi - lo > 1e-10 * scale {
                    let mid = 0.5 * (lo + hi);
                    let probe: Vec<f64> = delta.iter().map(|&d| d + mid).collect();
                    if feasible(&probe) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            if lo > 0.0 {
                for d in delta.iter_mut() {
                    *d += lo;
                }
                improved += lo * m as f64;
            }
        }
        // cyclic per-coordinate maximization
        for i in 0..m {
            let mut lo = delta[i];
            let mut hi = s.get(i, i);
            if hi <= lo {
                continue;
            }
            let mut probe = delta.clone();
            probe[i] = hi;
            if feasible(&probe) {
                lo = hi;
            } else {
                while hi - lo > 1e-10 * scale {
                    let mid = 0.5 * (lo + hi);
                    probe[i] = mid;
                    if feasible(&probe) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            if lo > delta[i] {
                improved += lo - delta[i];
                delta[i] = lo;
            }
        }
        if improved <= improve_tol {
            break;
        }
    }
    delta
}

/// Closed-form cycle-unconstrained relaxation used for big-M calibration:
/// every column regresses on all of its superstructure parents.
///
/// Returns the dense `Gamma`-hat matrix. A singular parent block falls back
/// to a ridge-regularized solve.
pub fn unconstrained_gamma(
    s: &SymmetricMatrix,
    e_super: &EdgeSet,
) -> Result<Vec<f64>, FormulationError> {
    let m = s.dim();
    if e_super.node_count() != m {
        return Err(FormulationError::DimensionMismatch(m, e_super.node_count()));
    }
    let mut gamma = vec![0.0f64; m * m];
    for j in 0..m {
        let parents: Vec<usize> = (0..m).filter(|&k| k != j && e_super.contains(k, j)).collect();
        let (c, beta) = match column_regression(s, j, &parents) {
            Ok((c, beta)) if c > 1e-12 => (c, beta),
            _ => {
                log::warn!("singular parent block at column {j}; applying ridge fallback");
                ridge_regression(s, j, &parents)?
            }
        };
        let gjj = c.powf(-0.5);
        gamma[j * m + j] = gjj;
        for (idx, &p) in parents.iter().enumerate() {
            gamma[p * m + j] = -gjj * beta[idx];
        }
    }
    Ok(gamma)
}

fn ridge_regression(
    s: &SymmetricMatrix,
    col: usize,
    parents: &[usize],
) -> Result<(f64, Vec<f64>), FormulationError> {
    let sub = s.principal_submatrix(parents).shifted(1e-8);
    let rhs: Vec<f64> = parents.iter().map(|&p| s.get(p, col)).collect();
    let beta = crate::numerics::spd_solve(&sub, &rhs)
        .map_err(|e| FormulationError::Invalid(format!("ridge fallback failed: {e}")))?;
    let explained: f64 = beta.iter().zip(&rhs).map(|(b, r)| b * r).sum();
    let c = (s.get(col, col) - explained).max(1e-12);
    Ok((c, beta))
}

/// Big-M heuristic: `M = 2 max |Gamma-hat|` over superstructure entries and
/// the diagonal, where `Gamma`-hat is the cycle-unconstrained relaxation.
pub fn calibrate_big_m(s: &SymmetricMatrix, e_super: &EdgeSet) -> Result<f64, FormulationError> {
    let m = s.dim();
    let gamma = unconstrained_gamma(s, e_super)?;
    let mut max_abs = 0.0f64;
    for i in 0..m {
        max_abs = max_abs.max(gamma[i * m + i].abs());
    }
    for (j, k) in e_super.iter() {
        max_abs = max_abs.max(gamma[j * m + k].abs());
    }
    Ok(2.0 * max_abs)
}

/// Assembles the full problem instance.
pub fn build_problem(
    s: &SymmetricMatrix,
    e_super: &EdgeSet,
    lambda_sq: f64,
) -> Result<MicpProblem, FormulationError> {
    let m = s.dim();
    if e_super.node_count() != m {
        return Err(FormulationError::DimensionMismatch(m, e_super.node_count()));
    }
    if !(lambda_sq >= 0.0 && lambda_sq.is_finite()) {
        return Err(FormulationError::Invalid("lambda_sq must be non-negative".into()));
    }
    let delta = choose_delta(s);
    let mut q = s.clone();
    for i in 0..m {
        let v = q.get(i, i) - delta[i];
        q.set(i, i, v);
    }
    debug_assert!(is_psd(&q, PSD_TOL), "choose_delta kept Q inside the PSD test");
    let big_m = calibrate_big_m(s, e_super)?;
    Ok(MicpProblem { s: s.clone(), e_super: e_super.clone(), lambda_sq, big_m, delta, q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dag;
    use crate::scoring::{brute_force_optimum, dag_mle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_spd(m: usize, seed: u64) -> SymmetricMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut s = SymmetricMatrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                let mut acc = if i == j { 0.4 } else { 0.0 };
                for k in 0..m {
                    acc += g[i * m + k] * g[j * m + k];
                }
                s.set(i, j, acc);
            }
        }
        s
    }

    #[test]
    fn delta_identity_and_diagonal() {
        let d = choose_delta(&SymmetricMatrix::identity(3));
        for v in &d {
            assert!((v - 1.0).abs() < 1e-6, "{d:?}");
        }
        let d = choose_delta(&SymmetricMatrix::from_diagonal(&[2.0, 0.5, 7.0]));
        for (v, expect) in d.iter().zip([2.0, 0.5, 7.0]) {
            assert!((v - expect).abs() < 1e-6, "{d:?}");
        }
    }

    #[test]
    fn delta_two_by_two_matches_grid_oracle() {
        let s = SymmetricMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let d = choose_delta(&s);
        // 2-D grid over feasible delta: maximize the sum subject to
        // (2 - d1)(2 - d2) >= 1
        let mut best = (0.0, 0.0, 0.0);
        let steps = 400;
        for i in 0..=steps {
            for j in 0..=steps {
                let d1 = 2.0 * i as f64 / steps as f64;
                let d2 = 2.0 * j as f64 / steps as f64;
                if (2.0 - d1) * (2.0 - d2) >= 1.0 && d1 + d2 > best.0 {
                    best = (d1 + d2, d1, d2);
                }
            }
        }
        assert!((best.1 - 1.0).abs() < 0.02 && (best.2 - 1.0).abs() < 0.02);
        assert!((d[0] - 1.0).abs() < 1e-4 && (d[1] - 1.0).abs() < 1e-4, "{d:?}");
        assert!((d[0] + d[1] - best.0).abs() < 1e-4 * 2.0);
    }

    #[test]
    fn delta_is_componentwise_maximal_and_feasible() {
        for seed in 0..10u64 {
            let s = random_spd(4, seed);
            let d = choose_delta(&s);
            let q_of = |d: &[f64]| {
                let mut q = s.clone();
                for i in 0..4 {
                    let v = q.get(i, i) - d[i];
                    q.set(i, i, v);
                }
                q
            };
            assert!(is_psd(&q_of(&d), PSD_TOL));
            for i in 0..4 {
                let mut bumped = d.clone();
                bumped[i] += 1e-6;
                assert!(
                    !is_psd(&q_of(&bumped), PSD_TOL * 0.01),
                    "coordinate {i} not maximal for seed {seed}"
                );
            }
        }
    }

    #[test]
    fn big_m_identity_cases() {
        let e = EdgeSet::complete(3);
        let m = calibrate_big_m(&SymmetricMatrix::identity(3), &e).unwrap();
        assert!((m - 2.0).abs() < 1e-12);
        // scaling S by 4 halves the diagonal of Gamma-hat
        let mut s4 = SymmetricMatrix::identity(3);
        for i in 0..3 {
            s4.set(i, i, 4.0);
        }
        let m = calibrate_big_m(&s4, &e).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn big_m_bounds_brute_force_entries() {
        for seed in 0..20u64 {
            let m_nodes = 2 + (seed % 3) as usize; // 2..4
            let s = random_spd(m_nodes, 1000 + seed);
            let e = EdgeSet::complete(m_nodes);
            let big_m = calibrate_big_m(&s, &e).unwrap();
            for lambda_sq in [0.01, 0.1] {
                let best = brute_force_optimum(&s, lambda_sq, None, m_nodes).unwrap();
                for j in 0..m_nodes {
                    for k in 0..m_nodes {
                        assert!(
                            best.gamma.get(j, k).abs() <= big_m + 1e-9,
                            "entry ({j},{k}) = {} exceeds M = {big_m} (seed {seed})",
                            best.gamma.get(j, k)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn big_m_two_node_closed_form_check() {
        let s = SymmetricMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        let e = EdgeSet::complete(2);
        let big_m = calibrate_big_m(&s, &e).unwrap();
        // column regressions: c = 0.75, gjj = 0.75^{-1/2}, off = -gjj * 0.5
        let gjj = 0.75f64.powf(-0.5);
        assert!((big_m - 2.0 * gjj).abs() < 1e-12);
        let best = brute_force_optimum(&s, 0.01, None, 2).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert!(best.gamma.get(j, k).abs() <= big_m + 1e-12);
            }
        }
    }

    #[test]
    fn build_problem_counts_and_q_psd() {
        let s = random_spd(3, 4);
        let e = EdgeSet::complete(3);
        let p = build_problem(&s, &e, 0.1).unwrap();
        let layout = p.layout();
        assert_eq!(layout.n_pairs(), 6);
        assert_eq!(layout.n_vars(), 3 * 3 + 3 * 6 + 3 + 1);
        assert!(is_psd(&p.q, PSD_TOL));
        assert!(p.big_m > 0.0);

        // empty superstructure: zero binaries
        let p = build_problem(&SymmetricMatrix::identity(2), &EdgeSet::empty(2), 1.0).unwrap();
        assert_eq!(p.layout().n_pairs(), 0);
    }

    #[test]
    fn integral_objective_matches_penalized_likelihood() {
        // substituting s_jk = Gamma_jk^2 into the assembled objective must
        // reproduce the exact objective, for any feasible integral point
        for seed in 0..10u64 {
            let s = random_spd(4, 500 + seed);
            let e = EdgeSet::complete(4);
            let p = build_problem(&s, &e, 0.05).unwrap();
            let dag = Dag::random(4, (seed % 6) as usize, seed).unwrap();
            let score = dag_mle(&s, &dag, 0.05).unwrap();
            let g = &score.gamma;
            let mut assembled = 0.0;
            for i in 0..4 {
                assembled += -2.0 * g.get(i, i).ln();
                assembled += p.delta[i] * g.get(i, i) * g.get(i, i);
            }
            assembled += g.trace_term(&p.q);
            for (j, k) in p.e_super.iter() {
                assembled += p.delta[j] * g.get(j, k) * g.get(j, k);
            }
            assembled += p.lambda_sq * dag.edge_count() as f64;
            assert!(
                (assembled - score.objective).abs() < 1e-10 * (1.0 + score.objective.abs()),
                "{assembled} vs {}",
                score.objective
            );
        }
    }

    #[test]
    fn problem_json_roundtrip() {
        let s = random_spd(3, 8);
        let e = EdgeSet::complete(3);
        let p = build_problem(&s, &e, 0.2).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: MicpProblem = serde_json::from_str(&json).unwrap();
        assert_eq!(back.lambda_sq, p.lambda_sq);
        assert_eq!(back.big_m, p.big_m);
        assert_eq!(back.delta, p.delta);
        assert!((back.q.get(0, 0) - p.q.get(0, 0)).abs() < 1e-15);
    }
}

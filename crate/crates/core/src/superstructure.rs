//! Superstructure estimation: ℓ1-penalized precision estimation (graphical
//! lasso) followed by thresholding of the off-diagonal entries.
//!
//! The estimator minimizes
//!
//! ```text
//! -log det(Theta) + tr(Theta S) + lambda_glasso^2 * ||Theta - diag(Theta)||_1
//! ```
//!
//! by proximal gradient (ISTA) with soft-thresholding of the off-diagonals
//! and a backtracking line search that rejects iterates failing the
//! positive-definiteness floor. The objective trace is recorded so callers
//! can assert monotone descent. Thresholding the fitted precision at `tau`
//! yields the candidate edge set handed to the mixed-integer solver.

use thiserror::Error;

use crate::model::{sample_covariance, Dataset, EdgeSet};
use crate::numerics::{cholesky, SymmetricMatrix};

/// PD floor enforced on every accepted iterate.
const PD_FLOOR: f64 = 1e-8;

/// Graphical-lasso configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GlassoConfig {
    /// ℓ1 penalty weight on off-diagonal precision entries.
    pub lambda_glasso_sq: f64,
    /// Threshold on `|Theta_ij|` for superstructure membership.
    pub threshold_tau: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Entrywise subgradient-residual tolerance.
    pub tol: f64,
}

impl GlassoConfig {
    /// Paper defaults: `lambda^2 = log(m)/n`, `tau = 0.1`.
    pub fn default_for(m: usize, n: usize) -> Self {
        Self {
            lambda_glasso_sq: (m as f64).ln() / n as f64,
            threshold_tau: 0.1,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

/// Graphical-lasso failure modes.
#[derive(Debug, Error)]
pub enum SuperstructureError {
    /// Iteration cap reached before the residual tolerance; carries the last
    /// iterate and its residual.
    #[error("graphical lasso hit the iteration cap (residual {residual:.3e})")]
    MaxIterExceeded {
        /// Last iterate.
        theta: Box<SymmetricMatrix>,
        /// Entrywise subgradient residual at the last iterate.
        residual: f64,
    },
    /// Invalid inputs (non-positive diagonal, bad config).
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Result of a graphical-lasso fit.
#[derive(Debug, Clone)]
pub struct GlassoFit {
    /// Estimated precision matrix.
    pub theta: SymmetricMatrix,
    /// Penalized objective after each accepted step (monotone non-increasing).
    pub objective_trace: Vec<f64>,
    /// Accepted iterations.
    pub iterations: usize,
    /// Final entrywise subgradient residual.
    pub residual: f64,
}

fn inverse_via_cholesky(theta: &SymmetricMatrix) -> Option<SymmetricMatrix> {
    let m = theta.dim();
    let chol = cholesky(theta).ok()?;
    let mut inv = SymmetricMatrix::zeros(m);
    let mut e = vec![0.0; m];
    for i in 0..m {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[i] = 1.0;
        let col = chol.solve(&e);
        for j in i..m {
            inv.set(i, j, col[j]);
        }
    }
    Some(inv)
}

fn penalized_objective(theta: &SymmetricMatrix, s: &SymmetricMatrix, lambda_sq: f64) -> Option<f64> {
    let chol = cholesky(theta).ok()?;
    let m = theta.dim();
    let mut tr = 0.0;
    let mut l1 = 0.0;
    for i in 0..m {
        for j in 0..m {
            tr += theta.get(i, j) * s.get(i, j);
            if i != j {
                l1 += theta.get(i, j).abs();
            }
        }
    }
    Some(-chol.log_det() + tr + lambda_sq * l1)
}

/// Entrywise subgradient residual of the penalized objective at `theta`.
fn subgradient_residual(
    theta: &SymmetricMatrix,
    grad: &SymmetricMatrix,
    lambda_sq: f64,
) -> f64 {
    let m = theta.dim();
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let g = grad.get(i, j);
            let r = if i == j {
                g.abs()
            } else if theta.get(i, j) != 0.0 {
                (g + lambda_sq * theta.get(i, j).signum()).abs()
            } else {
                (g.abs() - lambda_sq).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    worst
}

/// Minimizes the penalized precision objective by proximal gradient.
pub fn graphical_lasso(
    s: &SymmetricMatrix,
    cfg: &GlassoConfig,
) -> Result<GlassoFit, SuperstructureError> {
    let m = s.dim();
    if cfg.tol <= 0.0 || cfg.max_iter == 0 {
        return Err(SuperstructureError::Invalid("tol and max_iter must be positive".into()));
    }
    if cfg.lambda_glasso_sq < 0.0 {
        return Err(SuperstructureError::Invalid("lambda_glasso_sq must be >= 0".into()));
    }
    for i in 0..m {
        if !(s.get(i, i) > 0.0) {
            return Err(SuperstructureError::Invalid(format!(
                "covariance diagonal must be positive (index {i})"
            )));
        }
    }
    let lambda_sq = cfg.lambda_glasso_sq;
    // diagonal start is PD and cheap
    let mut theta = SymmetricMatrix::zeros(m);
    for i in 0..m {
        theta.set(i, i, 1.0 / s.get(i, i));
    }
    let mut obj = penalized_objective(&theta, s, lambda_sq)
        .expect("diagonal start is positive definite");
    let mut trace = vec![obj];
    let mut step = 1.0f64;
    let mut residual = f64::INFINITY;
    for iter in 0..cfg.max_iter {
        let inv = inverse_via_cholesky(&theta).expect("iterates stay positive definite");
        let mut grad = SymmetricMatrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                grad.set(i, j, s.get(i, j) - inv.get(i, j));
            }
        }
        residual = subgradient_residual(&theta, &grad, lambda_sq);
        if residual <= cfg.tol {
            return Ok(GlassoFit { theta, objective_trace: trace, iterations: iter, residual });
        }
        // backtracking proximal step
        loop {
            let mut cand = SymmetricMatrix::zeros(m);
            for i in 0..m {
                for j in i..m {
                    let raw = theta.get(i, j) - step * grad.get(i, j);
                    let v = if i == j {
                        raw
                    } else {
                        // soft threshold off-diagonals
                        let t = step * lambda_sq;
                        if raw > t {
                            raw - t
                        } else if raw < -t {
                            raw + t
                        } else {
                            0.0
                        }
                    };
                    cand.set(i, j, v);
                }
            }
            // PD floor, then the standard sufficient-decrease test
            let pd_ok = cholesky(&cand.shifted(-PD_FLOOR)).is_ok();
            if pd_ok {
                if let Some(cand_obj) = penalized_objective(&cand, s, lambda_sq) {
                    let mut quad = 0.0;
                    let mut lin = 0.0;
                    let mut l1_delta = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            let d = cand.get(i, j) - theta.get(i, j);
                            quad += d * d;
                            lin += grad.get(i, j) * d;
                            if i != j {
                                l1_delta += cand.get(i, j).abs() - theta.get(i, j).abs();
                            }
                        }
                    }
                    let model = obj + lin + quad / (2.0 * step) + lambda_sq * l1_delta;
                    if cand_obj <= model + 1e-12 * (1.0 + obj.abs()) && cand_obj <= obj {
                        theta = cand;
                        obj = cand_obj;
                        trace.push(obj);
                        step = (step * 1.2).min(1e4);
                        break;
                    }
                }
            }
            step *= 0.5;
            if step < 1e-16 {
                // no productive step remains; report where we stopped
                return Err(SuperstructureError::MaxIterExceeded {
                    theta: Box::new(theta),
                    residual,
                });
            }
        }
    }
    Err(SuperstructureError::MaxIterExceeded { theta: Box::new(theta), residual })
}

/// Estimates the superstructure edge set from data: graphical lasso on the
/// sample covariance, then strictly thresholding `|Theta_ij| > tau`.
pub fn estimate_superstructure(
    data: &Dataset,
    cfg: &GlassoConfig,
) -> Result<EdgeSet, SuperstructureError> {
    let s = sample_covariance(data);
    let fit = graphical_lasso(&s, cfg)?;
    Ok(threshold_edges(&fit.theta, cfg.threshold_tau))
}

/// Symmetric edge set `{(i, j) : i != j, |Theta_ij| > tau}`.
pub fn threshold_edges(theta: &SymmetricMatrix, tau: f64) -> EdgeSet {
    let m = theta.dim();
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i != j && theta.get(i, j).abs() > tau {
                pairs.push((i, j));
            }
        }
    }
    EdgeSet::new(m, &pairs).expect("thresholded pairs are valid")
}

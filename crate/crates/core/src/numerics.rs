//! Dense symmetric linear algebra used by every other module.
//!
//! Everything here is deliberately small and self-contained: a dense
//! symmetric matrix type, Cholesky factorization with a scale-invariant
//! positive-definiteness test, an SPD linear solve, and a minimum-eigenvalue
//! routine based on bisection of the shifted Cholesky test over a
//! Gershgorin-bounded interval. Problems in scope stay below a few hundred
//! dimensions, so there is no sparsity machinery.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from factorizations and solves.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    /// A Cholesky pivot fell below the tolerance; carries the pivot index.
    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    /// Inputs whose shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense symmetric matrix, stored as a full row-major square block.
///
/// Construction enforces exact symmetry, so `get(i, j) == get(j, i)` always
/// holds bitwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Zero matrix of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self { dim, data: vec![0.0; dim * dim] }
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Build from a full row-major buffer, symmetrizing as `(a + a')/2`.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), dim * dim, "buffer length must be dim^2");
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, 0.5 * (data[i * dim + j] + data[j * dim + i]));
            }
        }
        m
    }

    /// Build from nested rows (convenient in tests).
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| {
            assert_eq!(r.len(), dim, "rows must form a square matrix");
            r.iter().copied()
        }).collect();
        Self::from_row_major(dim, &flat)
    }

    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry accessor.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets `(i, j)` and `(j, i)` together.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    /// Immutable view of the raw row-major buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// `A + c*I`.
    pub fn shifted(&self, c: f64) -> SymmetricMatrix {
        let mut out = self.clone();
        for i in 0..self.dim {
            let v = out.get(i, i) + c;
            out.set(i, i, v);
        }
        out
    }

    /// `A v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Extracts the principal submatrix indexed by `idx`.
    pub fn principal_submatrix(&self, idx: &[usize]) -> SymmetricMatrix {
        let k = idx.len();
        assert!(k >= 1);
        let mut out = SymmetricMatrix::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().skip(a) {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }
}

/// Lower-triangular Cholesky factor `L` with `L L' = A`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    data: Vec<f64>, // row-major, upper part unused (zero)
}

impl CholeskyFactor {
    /// Factor dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry of the lower-triangular factor.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Solves `L L' x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim;
        assert_eq!(b.len(), n);
        // forward: L y = b
        for i in 0..n {
            let mut acc = b[i];
            for j in 0..i {
                acc -= self.data[i * n + j] * b[j];
            }
            b[i] = acc / self.data[i * n + i];
        }
        // backward: L' x = y
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in (i + 1)..n {
                acc -= self.data[j * n + i] * b[j];
            }
            b[i] = acc / self.data[i * n + i];
        }
    }

    /// Solves `L L' x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `log det A = 2 * sum(log L_ii)`.
    pub fn log_det(&self) -> f64 {
        (0..self.dim).map(|i| 2.0 * self.data[i * self.dim + i].ln()).sum()
    }
}

/// Cholesky factorization with a scale-invariant pivot test.
///
/// A pivot is accepted when it exceeds `1e-12 * max_ii A_ii`; otherwise the
/// matrix is declared not positive definite at that pivot index.
pub fn cholesky(a: &SymmetricMatrix) -> Result<CholeskyFactor, NumericsError> {
    let n = a.dim();
    let mut max_diag = 0.0f64;
    for i in 0..n {
        max_diag = max_diag.max(a.get(i, i));
    }
    let pivot_tol = 1e-12 * max_diag.max(1e-300);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = a.get(i, j);
            for k in 0..j {
                acc -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if acc <= pivot_tol {
                    return Err(NumericsError::NotPositiveDefinite(i));
                }
                l[i * n + i] = acc.sqrt();
            } else {
                l[i * n + j] = acc / l[j * n + j];
            }
        }
    }
    Ok(CholeskyFactor { dim: n, data: l })
}

/// Whether `A - sigma*I` passes the positive-definiteness test.
pub fn is_pd_shifted(a: &SymmetricMatrix, sigma: f64) -> bool {
    cholesky(&a.shifted(-sigma)).is_ok()
}

/// Positive-semidefiniteness test at tolerance `tol`: `A + tol*I` must be PD.
pub fn is_psd(a: &SymmetricMatrix, tol: f64) -> bool {
    cholesky(&a.shifted(tol)).is_ok()
}

/// Gershgorin bounds `(lo, hi)` containing every eigenvalue of `A`.
pub fn gershgorin_interval(a: &SymmetricMatrix) -> (f64, f64) {
    let n = a.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum();
        lo = lo.min(a.get(i, i) - radius);
        hi = hi.max(a.get(i, i) + radius);
    }
    (lo, hi)
}

/// Minimum eigenvalue of `A` within `tol`.
///
/// Bisection of the shifted positive-definiteness test over the Gershgorin
/// interval. Deterministic and free of any external eigensolver; always
/// converges because the interval is finite.
pub fn min_eigenvalue(a: &SymmetricMatrix, tol: f64) -> f64 {
    assert!(tol > 0.0, "tolerance must be positive");
    let (glo, ghi) = gershgorin_interval(a);
    // invariant: A - lo*I is PD, A - hi*I is not
    let mut lo = glo - tol;
    let mut hi = ghi + tol;
    if !is_pd_shifted(a, lo) {
        // degenerate guard: widen until PD holds (Gershgorin already implies it)
        lo = glo - 1.0 - glo.abs();
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if is_pd_shifted(a, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `A x = b` for positive-definite `A`.
pub fn spd_solve(a: &SymmetricMatrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    if b.len() != a.dim() {
        return Err(NumericsError::DimensionMismatch(format!(
            "matrix dim {} vs rhs len {}",
            a.dim(),
            b.len()
        )));
    }
    let chol = cholesky(a)?;
    // one step of iterative refinement keeps the residual near machine precision
    let mut x = chol.solve(b);
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let dx = chol.solve(&r);
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += di;
    }
    Ok(x)
}

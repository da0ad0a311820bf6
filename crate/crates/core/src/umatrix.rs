//! Structured `Λ×Λ` matrices built from powers of the sample covariance.
//!
//! With `Λ = {(i,j): i ∈ [N], j ∈ [p]}` ordered row-major, the inverse
//! family is `(U_{ℓ,m})_{(ij),(i'j')} = N⁻¹ X_iᵀ S^{-ℓ} X_{i'} (S^{-m})_{jj'}`
//! and the plus family replaces the inverse powers by plain powers. These
//! factor as Kronecker products `(N⁻¹ X S^{∓ℓ} Xᵀ) ⊗ S^{∓m}`, which is how
//! they are assembled here; the semigroup and norm identities checked in
//! tests are exact algebraic facts about that structure.

use crate::error::{Error, Result};
use crate::stats::sample_cov_known_mean;
use crate::Matrix;

/// Dense `Λ×Λ` allocations are refused above this flattened dimension.
pub const MAX_LAMBDA_DIM: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UMatrixSign {
    /// `S^{-ℓ}` / `S^{-m}` factors; requires a nonsingular `S`.
    Inverse,
    /// `S^{ℓ}` / `S^{m}` factors; defined for any `(N, p)`.
    Plus,
}

/// A `Λ×Λ` matrix tagged with its index geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMatrix {
    pub n_eff: usize,
    pub p: usize,
    pub mat: Matrix,
}

impl LambdaMatrix {
    /// Spectral norm; the matrix is symmetric so this is `max |eigenvalue|`.
    pub fn op_norm(&self) -> f64 {
        op_norm_symmetric(&self.mat)
    }
}

/// Spectral norm of a symmetric matrix via its eigenvalues.
pub fn op_norm_symmetric(m: &Matrix) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|lam| lam.abs())
        .fold(0.0, f64::max)
}

fn matrix_power(base: &Matrix, exp: u32) -> Matrix {
    let p = base.nrows();
    let mut out = Matrix::identity(p, p);
    for _ in 0..exp {
        out = &out * base;
    }
    out
}

/// Builds `U_{ℓ,m}` (inverse sign) or `U_{ℓ,m;+}` (plus sign) from the data
/// matrix `X` in the known-mean convention.
pub fn u_matrix(ell: u32, m: u32, sign: UMatrixSign, x: &Matrix) -> Result<LambdaMatrix> {
    let n_eff = x.nrows();
    let p = x.ncols();
    let dim = n_eff * p;
    if dim > MAX_LAMBDA_DIM {
        return Err(Error::TooLarge(alloc::format!(
            "Λ×Λ dimension N*p = {dim} exceeds {MAX_LAMBDA_DIM}"
        )));
    }
    let s = sample_cov_known_mean(x);
    let base = match sign {
        UMatrixSign::Plus => s,
        UMatrixSign::Inverse => {
            let inv = s
                .cholesky()
                .ok_or_else(|| Error::degenerate("sample covariance is singular"))?
                .inverse();
            (&inv + inv.transpose()) * 0.5
        }
    };
    let row_factor = x * matrix_power(&base, ell) * x.transpose() / n_eff as f64;
    let row_factor = (&row_factor + row_factor.transpose()) * 0.5;
    let col_factor = matrix_power(&base, m);
    Ok(LambdaMatrix {
        n_eff,
        p,
        mat: row_factor.kronecker(&col_factor),
    })
}

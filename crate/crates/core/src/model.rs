//! Covariance model construction and scalar matrix functionals.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::Matrix;

/// Relative PSD tolerance: eigenvalues above `-PSD_TOL * lambda_max` are
/// treated as zero, anything below is an error.
pub const PSD_TOL: f64 = 1e-12;

/// Relative asymmetry tolerance for dense user input.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Declarative description of a covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceKind {
    Identity,
    ScaledIdentity(f64),
    /// Diagonal matrix with the given eigenvalues.
    Diagonal(Vec<f64>),
    /// Spiked model `diag(1 + a_1, ..., 1 + a_p)`.
    Spiked(Vec<f64>),
    Dense(Matrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    pub kind: CovarianceKind,
    pub p: usize,
}

impl CovarianceSpec {
    pub fn identity(p: usize) -> Self {
        Self {
            kind: CovarianceKind::Identity,
            p,
        }
    }

    pub fn scaled_identity(p: usize, lambda: f64) -> Self {
        Self {
            kind: CovarianceKind::ScaledIdentity(lambda),
            p,
        }
    }

    pub fn diagonal(eigenvalues: Vec<f64>) -> Self {
        let p = eigenvalues.len();
        Self {
            kind: CovarianceKind::Diagonal(eigenvalues),
            p,
        }
    }

    pub fn spiked(a: Vec<f64>) -> Self {
        let p = a.len();
        Self {
            kind: CovarianceKind::Spiked(a),
            p,
        }
    }

    pub fn dense(entries: Matrix) -> Self {
        let p = entries.nrows();
        Self {
            kind: CovarianceKind::Dense(entries),
            p,
        }
    }
}

/// Realizes a [`CovarianceSpec`] as a dense symmetric PSD matrix.
///
/// Diagonal and spiked specs are realized exactly; dense input is
/// symmetrized as `(M + Mᵀ)/2` (asymmetry beyond `SYMMETRY_TOL·‖M‖_F` is
/// rejected) and negative eigenvalues within `PSD_TOL·λ_max` are clipped.
pub fn build_covariance(spec: &CovarianceSpec) -> Result<Matrix> {
    let p = spec.p;
    if p == 0 {
        return Err(Error::bad_arg("dimension p must be positive"));
    }
    match &spec.kind {
        CovarianceKind::Identity => Ok(DMatrix::identity(p, p)),
        CovarianceKind::ScaledIdentity(lambda) => {
            if !(*lambda > 0.0) {
                return Err(Error::bad_arg("scaled identity requires lambda > 0"));
            }
            Ok(DMatrix::identity(p, p) * *lambda)
        }
        CovarianceKind::Diagonal(eigs) => {
            if eigs.len() != p {
                return Err(Error::BadDimension {
                    expected: p,
                    got: eigs.len(),
                });
            }
            let max = eigs.iter().cloned().fold(0.0_f64, f64::max);
            let mut out = DMatrix::zeros(p, p);
            for (j, &lam) in eigs.iter().enumerate() {
                if lam < -PSD_TOL * max {
                    return Err(Error::NotPsd {
                        min_eig: lam,
                        max_eig: max,
                    });
                }
                out[(j, j)] = lam.max(0.0);
            }
            Ok(out)
        }
        CovarianceKind::Spiked(a) => {
            if a.len() != p {
                return Err(Error::BadDimension {
                    expected: p,
                    got: a.len(),
                });
            }
            let max = a.iter().map(|&aj| 1.0 + aj).fold(0.0_f64, f64::max);
            let mut out = DMatrix::zeros(p, p);
            for (j, &aj) in a.iter().enumerate() {
                let lam = 1.0 + aj;
                if lam < -PSD_TOL * max {
                    return Err(Error::NotPsd {
                        min_eig: lam,
                        max_eig: max,
                    });
                }
                out[(j, j)] = lam.max(0.0);
            }
            Ok(out)
        }
        CovarianceKind::Dense(m) => {
            if m.nrows() != p || m.ncols() != p {
                return Err(Error::BadDimension {
                    expected: p,
                    got: m.nrows().max(m.ncols()),
                });
            }
            let sym = (m + m.transpose()) * 0.5;
            let asym = (m - m.transpose()).norm() * 0.5;
            if asym > SYMMETRY_TOL * m.norm().max(1e-300) {
                return Err(Error::bad_arg("dense covariance input is not symmetric"));
            }
            clip_to_psd(&sym)
        }
    }
}

/// Eigen-clips a symmetric matrix to PSD; errors when an eigenvalue lies
/// below `-PSD_TOL * lambda_max`.
pub fn clip_to_psd(sym: &Matrix) -> Result<Matrix> {
    let eig = sym.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL * max.max(1e-300) {
        return Err(Error::NotPsd {
            min_eig: min,
            max_eig: max,
        });
    }
    if min >= 0.0 {
        return Ok(sym.clone());
    }
    let mut eig = eig;
    for lam in eig.eigenvalues.iter_mut() {
        *lam = lam.max(0.0);
    }
    let rebuilt = eig.recompose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}

/// Stein loss `tr(Σ₁Σ₂⁻¹) - log det(Σ₁Σ₂⁻¹) - p`.
///
/// Computed through the symmetric similarity transform `L₂⁻¹ Σ₁ L₂⁻ᵀ`
/// (with `Σ₂ = L₂L₂ᵀ`), whose Cholesky failure signals a singular `Σ₁`
/// and hence the value `+∞`.
pub fn stein_loss(sigma1: &Matrix, sigma2: &Matrix) -> Result<f64> {
    let p = sigma1.nrows();
    if sigma1.ncols() != p || sigma2.nrows() != p || sigma2.ncols() != p {
        return Err(Error::BadDimension {
            expected: p,
            got: sigma2.nrows(),
        });
    }
    let chol2 = sigma2.clone().cholesky().ok_or(Error::InvalidReference)?;
    let l2 = chol2.l();
    // B = L₂⁻¹ Σ₁ L₂⁻ᵀ, similar to Σ₁Σ₂⁻¹.
    let y = l2
        .solve_lower_triangular(sigma1)
        .ok_or(Error::InvalidReference)?;
    let b = l2
        .solve_lower_triangular(&y.transpose())
        .ok_or(Error::InvalidReference)?;
    let b = (&b + b.transpose()) * 0.5;
    let trace = b.trace();
    let log_det = match b.cholesky() {
        Some(ch) => {
            let mut acc = 0.0;
            let l = ch.l_dirty();
            for i in 0..p {
                acc += libm::log(l[(i, i)]);
            }
            2.0 * acc
        }
        None => return Ok(f64::INFINITY),
    };
    let loss = trace - log_det - p as f64;
    // Mathematically >= 0; sweep tiny negative roundoff to zero.
    if loss < 0.0 && loss > -1e-10 * (1.0 + trace.abs()) {
        Ok(0.0)
    } else {
        Ok(loss)
    }
}

/// Normalized trace power `b_ℓ(M) = p⁻¹ tr(M^ℓ)`.
pub fn trace_power_mean(m: &Matrix, ell: u32) -> Result<f64> {
    if ell < 1 {
        return Err(Error::bad_arg("trace power exponent must be >= 1"));
    }
    let p = m.nrows();
    if m.ncols() != p {
        return Err(Error::BadDimension {
            expected: p,
            got: m.ncols(),
        });
    }
    let tr = match ell {
        1 => m.trace(),
        // For symmetric M, tr(M²) = ‖M‖_F².
        2 => m.norm_squared(),
        _ => {
            let mut pow = m.clone();
            for _ in 2..ell {
                pow = &pow * m;
            }
            (&pow * m).trace()
        }
    };
    Ok(tr / p as f64)
}

/// `b(M)` shorthand: normalized trace `tr(M)/p`.
pub fn trace_mean(m: &Matrix) -> f64 {
    m.trace() / m.nrows() as f64
}

/// Rescales `Σ` to unit normalized trace: `Σ · b⁻¹(Σ)`.
pub fn normalize_sphericity(sigma: &Matrix) -> Result<Matrix> {
    let b = trace_mean(sigma);
    if !(b > 0.0) {
        return Err(Error::bad_arg(
            "sphericity normalization requires tr(Σ) > 0",
        ));
    }
    Ok(sigma / b)
}

/// Symmetric PSD square root via eigendecomposition with clipped negatives.
pub fn sym_sqrt(sigma: &Matrix) -> Result<Matrix> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::BadDimension {
            expected: p,
            got: sigma.ncols(),
        });
    }
    let mut eig = sigma.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    for lam in eig.eigenvalues.iter_mut() {
        if *lam < -PSD_TOL * max.max(1e-300) {
            return Err(Error::NotPsd {
                min_eig: *lam,
                max_eig: max,
            });
        }
        *lam = libm::sqrt(lam.max(0.0));
    }
    let root = eig.recompose();
    Ok((&root + root.transpose()) * 0.5)
}

//! Analytic power engine: leading-order mean shifts and the predicted
//! power `1 - Φ(z_α - τ)` for each test under an arbitrary alternative,
//! plus the spiked-model closed forms and their orderings.
//!
//! Leading-order gaps drop the finite-sample residual terms; those are
//! surfaced separately by the contiguity diagnostics.

use alloc::vec::Vec;

use crate::dist::{normal_cdf, z_alpha};
use crate::error::{Error, Result};
use crate::model::{normalize_sphericity, stein_loss};
use crate::stats::TestKind;
use crate::Matrix;

/// Predicted power with its component breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPrediction {
    pub kind: TestKind,
    /// Mean shift `τ = mean_gap_leading / sigma_null`.
    pub tau: f64,
    pub power: f64,
    pub mean_gap_leading: f64,
    pub sigma_null: f64,
    pub alpha: f64,
}

/// Leading-order mean gap `m_Σ - m_{H₀}` (numerator of the mean shift,
/// before dividing by the null standard deviation).
///
/// Extended reals are allowed: the log-determinant tests return `+∞` for a
/// singular alternative, where the predicted power is 1.
pub fn mean_gap_leading(kind: TestKind, sigma: &Matrix, n: usize, p: usize) -> Result<f64> {
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::BadDimension {
            expected: p,
            got: sigma.nrows(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: n });
    }
    let nf = (n - 1) as f64;
    let identity = Matrix::identity(p, p);
    match kind {
        TestKind::LrtIdentity => Ok(0.5 * nf * stein_loss(sigma, &identity)?),
        TestKind::Nagao => Ok(0.25 * nf * (sigma - &identity).norm_squared()),
        TestKind::LrtSphericity => {
            let normalized = normalize_sphericity(sigma)?;
            // -log det(Σ·b⁻¹(Σ)) = L_S(Σ·b⁻¹(Σ), I) since tr = p.
            Ok(0.5 * nf * stein_loss(&normalized, &identity)?)
        }
        TestKind::John => {
            let normalized = normalize_sphericity(sigma)?;
            Ok(0.25 * nf * (normalized - &identity).norm_squared())
        }
    }
}

/// Power prediction from a mean gap and a null standard deviation.
pub fn power_from_gap(
    kind: TestKind,
    gap: f64,
    sigma_null: f64,
    alpha: f64,
) -> Result<PowerPrediction> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::bad_arg("alpha must lie in (0, 1)"));
    }
    if !(sigma_null > 0.0) {
        return Err(Error::bad_arg("sigma_null must be positive"));
    }
    let tau = gap / sigma_null;
    let power = if tau.is_infinite() && tau > 0.0 {
        1.0
    } else {
        1.0 - normal_cdf(z_alpha(alpha)? - tau)
    };
    Ok(PowerPrediction {
        kind,
        tau,
        power,
        mean_gap_leading: gap,
        sigma_null,
        alpha,
    })
}

/// Asymptotically exact power of the level-α test of `kind` against `Σ`.
pub fn analytic_power(
    kind: TestKind,
    sigma: &Matrix,
    n: usize,
    p: usize,
    alpha: f64,
    sigma_null: f64,
) -> Result<PowerPrediction> {
    let gap = mean_gap_leading(kind, sigma, n, p)?;
    power_from_gap(kind, gap, sigma_null, alpha)
}

fn validate_spikes(a: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::bad_arg("spike vector must be nonempty"));
    }
    if a.iter().any(|&aj| !(aj > -1.0)) {
        return Err(Error::bad_arg("spikes must satisfy a_j > -1"));
    }
    Ok(())
}

/// Denominator `sqrt(2(-y - log(1-y)))` shared by the two LRT formulas.
fn lrt_sigma_scale(n_eff: usize, p: usize) -> Result<f64> {
    if p >= n_eff {
        return Err(Error::degenerate("LRT power requires p < N"));
    }
    let y = p as f64 / n_eff as f64;
    Ok(libm::sqrt(2.0 * (-y - libm::log(1.0 - y))))
}

/// Spiked-model power `β(a)` under `Σ(a) = diag(1 + a_1, ..., 1 + a_p)`.
pub fn spiked_power(kind: TestKind, a: &[f64], n: usize, p: usize, alpha: f64) -> Result<f64> {
    validate_spikes(a)?;
    if a.len() != p {
        return Err(Error::BadDimension {
            expected: p,
            got: a.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: n });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::bad_arg("alpha must lie in (0, 1)"));
    }
    let n_eff = n - 1;
    let pf = p as f64;
    let y = pf / n_eff as f64;
    let tau = match kind {
        TestKind::LrtIdentity => {
            let num: f64 = a.iter().map(|&aj| aj - libm::log(1.0 + aj)).sum();
            num / lrt_sigma_scale(n_eff, p)?
        }
        TestKind::Nagao => {
            let num: f64 = a.iter().map(|&aj| aj * aj).sum();
            num / (2.0 * y)
        }
        TestKind::LrtSphericity => {
            let abar = a.iter().sum::<f64>() / pf;
            let num: f64 = a
                .iter()
                .map(|&aj| libm::log((1.0 + abar) / (1.0 + aj)))
                .sum();
            num / lrt_sigma_scale(n_eff, p)?
        }
        TestKind::John => {
            let abar = a.iter().sum::<f64>() / pf;
            let num: f64 = a
                .iter()
                .map(|&aj| {
                    let dev = (aj - abar) / (1.0 + abar);
                    dev * dev
                })
                .sum();
            num / (2.0 * y)
        }
    };
    Ok(1.0 - normal_cdf(z_alpha(alpha)? - tau))
}

/// Relative ordering of two powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    First,
    Second,
    Tie,
}

/// Power comparison of the two test groups under a spiked alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerOrdering {
    pub beta_lrt: f64,
    pub beta_lrt_s: f64,
    pub beta_nagao: f64,
    pub beta_john: f64,
    /// `ā² - \overline{a²}(1 - (1+ā)²)`: nonnegative exactly when the
    /// Ledoit-Nagao-Wolf test dominates John's.
    pub boundary: f64,
    pub lrt_vs_lrt_s: Dominance,
    pub nagao_vs_john: Dominance,
}

pub fn power_ordering(a: &[f64], n: usize, p: usize, alpha: f64) -> Result<PowerOrdering> {
    validate_spikes(a)?;
    let pf = p as f64;
    let abar = a.iter().sum::<f64>() / pf;
    let a2bar = a.iter().map(|&aj| aj * aj).sum::<f64>() / pf;
    let boundary = abar * abar - a2bar * (1.0 - (1.0 + abar) * (1.0 + abar));

    let beta_lrt = spiked_power(TestKind::LrtIdentity, a, n, p, alpha)?;
    let beta_lrt_s = spiked_power(TestKind::LrtSphericity, a, n, p, alpha)?;
    let beta_nagao = spiked_power(TestKind::Nagao, a, n, p, alpha)?;
    let beta_john = spiked_power(TestKind::John, a, n, p, alpha)?;

    let cmp = |x: f64, y: f64| {
        if (x - y).abs() <= 1e-14 {
            Dominance::Tie
        } else if x > y {
            Dominance::First
        } else {
            Dominance::Second
        }
    };
    Ok(PowerOrdering {
        beta_lrt,
        beta_lrt_s,
        beta_nagao,
        beta_john,
        boundary,
        lrt_vs_lrt_s: cmp(beta_lrt, beta_lrt_s),
        nagao_vs_john: cmp(beta_nagao, beta_john),
    })
}

/// `Σ(a)` fed back through the matrix-functional path; used to check that
/// the spiked closed forms agree with [`analytic_power`].
pub fn spiked_sigma(a: &[f64]) -> Result<Matrix> {
    validate_spikes(a)?;
    let diag: Vec<f64> = a.iter().map(|&aj| 1.0 + aj).collect();
    Ok(Matrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
}

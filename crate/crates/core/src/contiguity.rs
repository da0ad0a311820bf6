//! Contiguity diagnostics: the gradient transport map, closed-form
//! dispersion for the identity LRT, mean gaps with residuals, the
//! dispersion-to-separation ratio, and the distributional-transfer bound
//! shapes built from it.
//!
//! Universal constants in the bounds are unknown; every bound-shaped
//! quantity here uses unit constants and is reported as a shape, not as a
//! certified bound. `μ` is fixed to zero throughout: all four statistics
//! are used location-invariantly.

use crate::error::{Error, Result};
use crate::model::{normalize_sphericity, sym_sqrt};
use crate::stats::{gradient, TestKind};
use crate::Matrix;

/// Transport map `𝒯_Σ(Z) = ∇T(Z Σ^{1/2}) Σ^{1/2}`.
///
/// Its mean-square Frobenius discrepancy between an alternative and the
/// null reference defines the dispersion `V²`.
pub fn tmap(kind: TestKind, sigma: &Matrix, z: &Matrix) -> Result<Matrix> {
    let p = z.ncols();
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::BadDimension {
            expected: p,
            got: sigma.nrows(),
        });
    }
    let root = sym_sqrt(sigma)?;
    let x = z * &root;
    Ok(gradient(kind, &x)? * root)
}

/// Exact dispersion for the identity LRT: `V² = N‖Σ - I‖_F²`.
pub fn dispersion_closed_lrt(sigma: &Matrix, n_eff: usize) -> f64 {
    let p = sigma.nrows();
    let dev = sigma - Matrix::identity(p, p);
    n_eff as f64 * dev.norm_squared()
}

/// Mean gap `m_Σ - m_{H₀}` split into its leading term and residual.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanGap {
    /// Leading-order gap (the power engine's numerator).
    pub leading: f64,
    /// The `Q`-term of the bracketed mean expansion: exact for the
    /// Ledoit-Nagao-Wolf test, a unit-constant bound magnitude for the
    /// sphericity tests, and zero for the identity LRT.
    pub residual: f64,
    /// Whether `leading` (+ scaled residual) is the exact gap.
    pub exact: bool,
    /// Best available gap estimate: exact where possible, otherwise the
    /// leading term.
    pub gap: f64,
}

pub fn mean_gap_with_residual(
    kind: TestKind,
    sigma: &Matrix,
    n: usize,
    p: usize,
) -> Result<MeanGap> {
    let leading = crate::power::mean_gap_leading(kind, sigma, n, p)?;
    let nf = (n - 1) as f64;
    let pf = p as f64;
    match kind {
        TestKind::LrtIdentity => Ok(MeanGap {
            leading,
            residual: 0.0,
            exact: true,
            gap: leading,
        }),
        TestKind::Nagao => {
            // Q = (N⁻¹ - 2N⁻²) tr(Σ² - I), exact.
            let tr2 = sigma.norm_squared();
            let q = (1.0 / nf - 2.0 / (nf * nf)) * (tr2 - pf);
            Ok(MeanGap {
                leading,
                residual: q,
                exact: true,
                gap: leading + 0.25 * nf * q,
            })
        }
        TestKind::LrtSphericity => {
            // |Q| <= C₂ N⁻¹ b[(Σ·b⁻¹(Σ))²], reported with unit constant.
            let normalized = normalize_sphericity(sigma)?;
            let b2 = normalized.norm_squared() / pf;
            let q_bound = b2 / nf;
            Ok(MeanGap {
                leading,
                residual: q_bound,
                exact: false,
                gap: leading,
            })
        }
        TestKind::John => {
            // |Q| <= C₂ N^{-1/2}(p⁻¹‖Σ·b⁻¹(Σ)‖_F² + 1)‖Σ·b⁻¹(Σ) - I‖_F.
            let normalized = normalize_sphericity(sigma)?;
            let fro2 = normalized.norm_squared();
            let dev = (&normalized - Matrix::identity(p, p)).norm();
            let q_bound = (fro2 / pf + 1.0) * dev / libm::sqrt(nf);
            Ok(MeanGap {
                leading,
                residual: q_bound,
                exact: false,
                gap: leading,
            })
        }
    }
}

/// The contiguity ratio `err̄ = V / max(|mean gap|, σ_{H₀})`.
pub fn err_bar_from_parts(mean_gap: f64, sigma_null: f64, v: f64) -> f64 {
    v / mean_gap.abs().max(sigma_null)
}

/// Contiguity ratio for an explicit alternative, using the exact mean gap
/// where available and the leading term otherwise.
pub fn err_bar(
    kind: TestKind,
    sigma: &Matrix,
    n: usize,
    p: usize,
    sigma_null: f64,
    v: f64,
) -> Result<f64> {
    if !(sigma_null > 0.0) {
        return Err(Error::bad_arg("sigma_null must be positive"));
    }
    let gap = mean_gap_with_residual(kind, sigma, n, p)?.gap;
    Ok(err_bar_from_parts(gap, sigma_null, v))
}

/// Distributional-transfer error shapes with unit constants:
/// `thm21 = err_null + ((1+|t|)·err̄)^{2/3}` and
/// `cor22 = err_null + err̄^{4/9}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    pub thm21: f64,
    pub cor22: f64,
}

pub fn bound_terms(err_null: f64, err_bar: f64, t: f64) -> BoundTerms {
    BoundTerms {
        thm21: err_null + libm::pow((1.0 + t.abs()) * err_bar, 2.0 / 3.0),
        cor22: err_null + libm::pow(err_bar, 4.0 / 9.0),
    }
}

/// Full diagnostic bundle for one `(kind, Σ, n, p)` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ContiguityReport {
    pub kind: TestKind,
    /// Square root of the dispersion `V²`.
    pub v: f64,
    pub mean_gap: f64,
    pub sigma_null: f64,
    pub err_bar: f64,
    /// Residual `Q`-term (exact or unit-constant bound; see [`MeanGap`]).
    pub residual: f64,
    pub residual_exact: bool,
    /// Evaluation point for the `(1+|t|)`-dependent bound term.
    pub t: f64,
    pub bound_term_23: f64,
    pub bound_term_49: f64,
}

impl ContiguityReport {
    /// Assembles the report; `err_null` is folded in by the caller when a
    /// null CLT error estimate is available (zero otherwise).
    pub fn new(kind: TestKind, v: f64, gap: &MeanGap, sigma_null: f64, t: f64) -> Result<Self> {
        if !(sigma_null > 0.0) {
            return Err(Error::bad_arg("sigma_null must be positive"));
        }
        let eb = err_bar_from_parts(gap.gap, sigma_null, v);
        let terms = bound_terms(0.0, eb, t);
        Ok(ContiguityReport {
            kind,
            v,
            mean_gap: gap.gap,
            sigma_null,
            err_bar: eb,
            residual: gap.residual,
            residual_exact: gap.exact,
            t,
            bound_term_23: terms.thm21,
            bound_term_49: terms.cor22,
        })
    }
}

/// Least-squares slope of `log(err̄)` against `log(p)`; the decay-rate
/// diagnostic used over dimension grids at fixed `p/N`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::bad_arg("slope needs at least two points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::bad_arg("slope needs positive coordinates"));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let lx = libm::log(x);
        let ly = libm::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::null_variance_asymptotic;
    use crate::model::build_covariance;
    use crate::model::CovarianceSpec;
    use crate::stats::sample_cov_known_mean;
    use alloc::vec;
    use alloc::vec::Vec;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_z(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| {
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
        })
    }

    #[test]
    fn tmap_identity_reduces_to_gradient() {
        let z = random_z(6, 3, 1);
        let i3 = Matrix::identity(3, 3);
        for kind in TestKind::ALL {
            let t = tmap(kind, &i3, &z).unwrap();
            let g = gradient(kind, &z).unwrap();
            assert_abs_diff_eq!((t - g).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn tmap_lrt_closed_form() {
        // For the identity LRT, 𝒯_Σ(Z) = Z(Σ - S_Z⁻¹) with S_Z = N⁻¹ZᵀZ.
        let z = random_z(8, 3, 2);
        let sigma = build_covariance(&CovarianceSpec::diagonal(vec![2.0, 1.0, 0.5])).unwrap();
        let t = tmap(TestKind::LrtIdentity, &sigma, &z).unwrap();
        let s_z = sample_cov_known_mean(&z);
        let s_z_inv = s_z.cholesky().unwrap().inverse();
        let want = &z * (&sigma - s_z_inv);
        let rel = (t - &want).norm() / want.norm();
        assert!(rel <= 1e-10, "rel={rel}");
    }

    #[test]
    fn tmap_matches_chain_rule_finite_differences() {
        // 𝒯 entries are the partials of z ↦ T(zΣ^{1/2}).
        let n = 6usize;
        let p = 3usize;
        let z = random_z(n, p, 3);
        let sigma = build_covariance(&CovarianceSpec::spiked(vec![1.0, 0.3, -0.4])).unwrap();
        let root = sym_sqrt(&sigma).unwrap();
        for kind in TestKind::ALL {
            let t = tmap(kind, &sigma, &z).unwrap();
            let mut max_rel: f64 = 0.0;
            let scale = t.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(1.0);
            for i in 0..n {
                for j in 0..p {
                    let h = f64::EPSILON.cbrt() * (1.0 + z[(i, j)].abs());
                    let mut zp = z.clone();
                    zp[(i, j)] += h;
                    let mut zm = z.clone();
                    zm[(i, j)] -= h;
                    let fp = crate::stats::statistic_from_data(kind, &(&zp * &root)).unwrap();
                    let fm = crate::stats::statistic_from_data(kind, &(&zm * &root)).unwrap();
                    let fd = (fp - fm) / (2.0 * h);
                    max_rel = max_rel.max((fd - t[(i, j)]).abs() / scale);
                }
            }
            assert!(max_rel <= 1e-5, "{kind:?}: rel={max_rel}");
        }
    }

    #[test]
    fn dispersion_closed_lrt_examples() {
        let i = Matrix::identity(4, 4);
        assert_eq!(dispersion_closed_lrt(&i, 25), 0.0);
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0]));
        assert_abs_diff_eq!(dispersion_closed_lrt(&d, 10), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_gap_examples() {
        let p = 2usize;
        let i = Matrix::identity(p, p);
        let lrt = mean_gap_with_residual(TestKind::LrtIdentity, &i, 11, p).unwrap();
        assert!(lrt.exact);
        assert_eq!(lrt.residual, 0.0);
        assert_abs_diff_eq!(lrt.gap, 0.0, epsilon = 1e-12);

        let na = mean_gap_with_residual(TestKind::Nagao, &i, 11, p).unwrap();
        assert_eq!(na.residual, 0.0);
        assert_abs_diff_eq!(na.leading, 0.0, epsilon = 1e-15);

        // Q = (N⁻¹ - 2N⁻²)tr(Σ² - I) = 0.08 · 3 at N = 10.
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0]));
        let na = mean_gap_with_residual(TestKind::Nagao, &d, 11, p).unwrap();
        assert!(na.exact);
        assert_abs_diff_eq!(na.residual, 0.24, epsilon = 1e-12);
        assert_abs_diff_eq!(na.gap, na.leading + 2.5 * 0.24, epsilon = 1e-12);

        let sph = mean_gap_with_residual(TestKind::LrtSphericity, &d, 11, p).unwrap();
        assert!(!sph.exact);
        assert!(sph.residual > 0.0);
    }

    #[test]
    fn err_bar_zero_at_null() {
        let i = Matrix::identity(3, 3);
        let eb = err_bar(TestKind::LrtIdentity, &i, 21, 3, 2.0, 0.0).unwrap();
        assert_eq!(eb, 0.0);
    }

    #[test]
    fn err_bar_lrt_closed_form_decay() {
        // err̄ computed wholly from closed forms decays like p^{-1/2} along
        // a fixed-ratio grid with a unit spike.
        let mut points: Vec<(f64, f64)> = vec![];
        for &p in &[20usize, 40, 80, 160] {
            let n_eff = 4 * p;
            let mut diag = vec![1.0; p];
            diag[0] = 2.0;
            let sigma = Matrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
            let v = libm::sqrt(dispersion_closed_lrt(&sigma, n_eff));
            let sigma_null =
                libm::sqrt(null_variance_asymptotic(TestKind::LrtIdentity, n_eff + 1, p).unwrap());
            let eb = err_bar(TestKind::LrtIdentity, &sigma, n_eff + 1, p, sigma_null, v).unwrap();
            points.push((p as f64, eb));
        }
        let slope = log_log_slope(&points).unwrap();
        assert!(slope <= -0.4, "slope={slope}");
    }

    #[test]
    fn err_bar_scale_invariant_for_sphericity() {
        // Both numerator and denominator are built from Σ·b⁻¹(Σ), so
        // rescaling Σ changes nothing.
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, 0.7]));
        let (n, p) = (41usize, 3usize);
        let sigma_null = 1.7;
        let z = random_z(n - 1, p, 5);
        for kind in [TestKind::LrtSphericity, TestKind::John] {
            let v_of = |s: &Matrix| {
                let norm = normalize_sphericity(s).unwrap();
                (tmap(kind, &norm, &z).unwrap() - tmap(kind, &Matrix::identity(p, p), &z).unwrap())
                    .norm()
            };
            let e1 = err_bar(kind, &d, n, p, sigma_null, v_of(&d)).unwrap();
            for c in [0.25, 4.0] {
                let scaled = &d * c;
                let e2 = err_bar(kind, &scaled, n, p, sigma_null, v_of(&scaled)).unwrap();
                assert_abs_diff_eq!(e1, e2, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn bound_terms_examples() {
        let b = bound_terms(0.25, 0.0, 3.0);
        assert_eq!(b.thm21, 0.25);
        assert_eq!(b.cor22, 0.25);

        let b = bound_terms(0.1, 1.0, 0.0);
        assert_abs_diff_eq!(b.thm21, 1.1, epsilon = 1e-12);

        let mut last = 0.0;
        for t in [0.0, 0.5, 1.0, 2.0, 10.0] {
            let b = bound_terms(0.0, 0.3, t);
            assert!(b.thm21 >= last);
            last = b.thm21;
        }
    }

    #[test]
    fn report_invariants() {
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0]));
        let gap = mean_gap_with_residual(TestKind::Nagao, &d, 11, 2).unwrap();
        let report = ContiguityReport::new(TestKind::Nagao, 3.0, &gap, 1.5, 1.0).unwrap();
        assert_abs_diff_eq!(
            report.err_bar,
            3.0 / report.mean_gap.abs().max(1.5),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            report.bound_term_23,
            libm::pow(2.0 * report.err_bar, 2.0 / 3.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            report.bound_term_49,
            libm::pow(report.err_bar, 4.0 / 9.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn slope_fits_exact_power_law() {
        let pts: Vec<(f64, f64)> = [20.0, 40.0, 80.0]
            .iter()
            .map(|&x: &f64| (x, 3.0 * libm::pow(x, -0.5)))
            .collect();
        assert_abs_diff_eq!(log_log_slope(&pts).unwrap(), -0.5, epsilon = 1e-12);
        assert!(log_log_slope(&[(1.0, 1.0)]).is_err());
    }
}

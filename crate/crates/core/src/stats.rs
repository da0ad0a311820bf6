//! Sample covariance constructions and the four test statistics with their
//! closed-form gradients and Hessians.
//!
//! Derivatives are hand-coded on purpose: they feed the contiguity
//! functionals and double as oracles that finite-difference tests validate.
//! Conventions: the data matrix `X` is rows-by-`p` with one observation per
//! row; in known-mean mode `S = N⁻¹ XᵀX` with `N` the number of rows, and
//! the flattened index set `Λ = {(i,j)}` is ordered row-major (`i` outer).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::trace_mean;
use crate::Matrix;

/// Dense Hessians are refused above this flattened dimension.
pub const MAX_HESSIAN_DIM: usize = 4096;

/// The four covariance tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    /// Likelihood ratio test of `Σ = I`.
    LrtIdentity,
    /// Ledoit-Nagao-Wolf trace test of `Σ = I`.
    Nagao,
    /// Likelihood ratio test of sphericity `Σ = λI`.
    LrtSphericity,
    /// John's trace test of sphericity.
    John,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [
        TestKind::LrtIdentity,
        TestKind::Nagao,
        TestKind::LrtSphericity,
        TestKind::John,
    ];

    /// Log-determinant statistics need a nonsingular sample covariance.
    pub fn requires_pd(self) -> bool {
        matches!(self, TestKind::LrtIdentity | TestKind::LrtSphericity)
    }

    /// True for the tests whose null is `Σ = λI` rather than `Σ = I`.
    pub fn is_sphericity(self) -> bool {
        matches!(self, TestKind::LrtSphericity | TestKind::John)
    }

    pub fn name(self) -> &'static str {
        match self {
            TestKind::LrtIdentity => "lrt",
            TestKind::Nagao => "nagao",
            TestKind::LrtSphericity => "lrt-s",
            TestKind::John => "john",
        }
    }
}

/// Sample-size bookkeeping: `n` observations, effective degrees `N = n - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleShape {
    pub n: usize,
    pub p: usize,
}

impl SampleShape {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InsufficientSamples { need: 2, got: n });
        }
        if p == 0 {
            return Err(Error::bad_arg("dimension p must be positive"));
        }
        Ok(Self { n, p })
    }

    pub fn n_eff(&self) -> usize {
        self.n - 1
    }

    /// Degeneracy check: the LRT statistics need `p <= N - 1`.
    pub fn check_kind(&self, kind: TestKind) -> Result<()> {
        if kind.requires_pd() && self.p + 1 > self.n_eff() {
            return Err(Error::degenerate(
                "log-determinant statistic requires p <= N - 1",
            ));
        }
        Ok(())
    }
}

/// Known-mean sample covariance `S = N⁻¹ Σᵢ XᵢXᵢᵀ` from `N` mean-zero rows.
pub fn sample_cov_known_mean(x: &Matrix) -> Matrix {
    let n_eff = x.nrows() as f64;
    x.tr_mul(x) / n_eff
}

/// Centered sample covariances `(S_*, S)` from `n >= 2` rows:
/// `S_* = n⁻¹ Σ (X_k - X̄)(X_k - X̄)ᵀ` and `S = (n/N) S_*` with `N = n - 1`.
pub fn sample_cov_unknown_mean(x: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: n });
    }
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let s_star = centered.tr_mul(&centered) / n as f64;
    let s = &s_star * (n as f64 / (n - 1) as f64);
    Ok((s_star, s))
}

/// Log-determinant of a PSD matrix via Cholesky; `None` when a pivot is
/// non-positive (singular within roundoff).
fn log_det_psd(s: &Matrix) -> Option<f64> {
    let chol = s.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..s.nrows() {
        acc += libm::log(l[(i, i)]);
    }
    Some(2.0 * acc)
}

/// Evaluates the test statistic on a sample covariance `S` with effective
/// sample size `N = n_eff`.
pub fn statistic(kind: TestKind, s: &Matrix, n_eff: usize) -> Result<f64> {
    let p = s.nrows();
    if s.ncols() != p {
        return Err(Error::BadDimension {
            expected: p,
            got: s.ncols(),
        });
    }
    let nf = n_eff as f64;
    let pf = p as f64;
    match kind {
        TestKind::LrtIdentity => {
            let log_det =
                log_det_psd(s).ok_or_else(|| Error::degenerate("sample covariance is singular"))?;
            Ok(0.5 * nf * (s.trace() - log_det - pf))
        }
        TestKind::Nagao => {
            let mut dev = s.clone();
            for j in 0..p {
                dev[(j, j)] -= 1.0;
            }
            let tr = s.trace();
            Ok(0.25 * nf * (dev.norm_squared() - tr * tr / nf))
        }
        TestKind::LrtSphericity => {
            let tr = s.trace();
            if !(tr > 0.0) {
                return Err(Error::ZeroTrace);
            }
            let log_det =
                log_det_psd(s).ok_or_else(|| Error::degenerate("sample covariance is singular"))?;
            Ok(0.5 * nf * (pf * libm::log(tr) - log_det - pf * libm::log(pf)))
        }
        TestKind::John => {
            let tr = s.trace();
            if !(tr > 0.0) {
                return Err(Error::ZeroTrace);
            }
            let b = tr / pf;
            let mut dev = s / b;
            for j in 0..p {
                dev[(j, j)] -= 1.0;
            }
            Ok(0.25 * nf * dev.norm_squared())
        }
    }
}

/// Statistic in the known-mean convention: `S = N⁻¹XᵀX` with `N = rows`.
pub fn statistic_from_data(kind: TestKind, x: &Matrix) -> Result<f64> {
    statistic(kind, &sample_cov_known_mean(x), x.nrows())
}

/// Inverse of the known-mean sample covariance, or a degeneracy error.
fn sample_cov_inverse(s: &Matrix) -> Result<Matrix> {
    let inv = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::degenerate("sample covariance is singular"))?
        .inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Gradient of the statistic in the known-mean convention, as an `N×p`
/// matrix of entrywise partial derivatives.
pub fn gradient(kind: TestKind, x: &Matrix) -> Result<Matrix> {
    let n_eff = x.nrows();
    let p = x.ncols();
    let nf = n_eff as f64;
    let pf = p as f64;
    let s = sample_cov_known_mean(x);
    match kind {
        TestKind::LrtIdentity => {
            let s_inv = sample_cov_inverse(&s)?;
            // X(I - S⁻¹)
            Ok(x - x * s_inv)
        }
        TestKind::Nagao => {
            // X(S - I) - (tr S / N) X
            let tr = s.trace();
            Ok(x * &s - x * (1.0 + tr / nf))
        }
        TestKind::LrtSphericity => {
            let s_inv = sample_cov_inverse(&s)?;
            let b = trace_mean(&s);
            if !(b > 0.0) {
                return Err(Error::ZeroTrace);
            }
            // X(I - S⁻¹) + (1/b - 1)X
            Ok(x * (1.0 / b) - x * s_inv)
        }
        TestKind::John => {
            let tr = s.trace();
            if !(tr > 0.0) {
                return Err(Error::ZeroTrace);
            }
            let b = tr / pf;
            let b2 = s.norm_squared() / pf;
            // XS/b² - X·b₂/b³
            Ok(x * &s / (b * b) - x * (b2 / (b * b * b)))
        }
    }
}

/// Dense Hessian over the flattened index set `Λ`, row-major (`i` outer,
/// `j` inner), so entry `(i*p + j, i'*p + j')` is `∂²T/∂X_{ij}∂X_{i'j'}`.
pub fn hessian(kind: TestKind, x: &Matrix) -> Result<Matrix> {
    let n_eff = x.nrows();
    let p = x.ncols();
    let dim = n_eff * p;
    if dim > MAX_HESSIAN_DIM {
        return Err(Error::TooLarge(alloc::format!(
            "dense Hessian dimension N*p = {dim} exceeds {MAX_HESSIAN_DIM}"
        )));
    }
    let nf = n_eff as f64;
    let pf = p as f64;
    let s = sample_cov_known_mean(x);
    let mut h = DMatrix::zeros(dim, dim);
    let idx = |i: usize, j: usize| i * p + j;

    match kind {
        TestKind::LrtIdentity | TestKind::LrtSphericity => {
            let s_inv = sample_cov_inverse(&s)?;
            let g = x * &s_inv; // XS⁻¹
            let w = &g * x.transpose() / nf; // N⁻¹ XS⁻¹Xᵀ
            let spherical = kind == TestKind::LrtSphericity;
            let (b, inv_b2_np) = if spherical {
                let b = trace_mean(&s);
                if !(b > 0.0) {
                    return Err(Error::ZeroTrace);
                }
                (b, 2.0 / (nf * pf * b * b))
            } else {
                (1.0, 0.0)
            };
            for i in 0..n_eff {
                for j in 0..p {
                    let a = idx(i, j);
                    for i2 in 0..n_eff {
                        for j2 in 0..p {
                            let bcol = idx(i2, j2);
                            let mut v = g[(i, j2)] * g[(i2, j)] / nf + w[(i, i2)] * s_inv[(j, j2)];
                            if i == i2 {
                                v += delta(j, j2) - s_inv[(j, j2)];
                            }
                            if spherical {
                                if i == i2 && j == j2 {
                                    v += 1.0 / b - 1.0;
                                }
                                v -= inv_b2_np * x[(i, j)] * x[(i2, j2)];
                            }
                            h[(a, bcol)] = v;
                        }
                    }
                }
            }
        }
        TestKind::Nagao => {
            let c = x * x.transpose() / nf; // N⁻¹ XXᵀ
            let tr = s.trace();
            for i in 0..n_eff {
                for j in 0..p {
                    let a = idx(i, j);
                    for i2 in 0..n_eff {
                        for j2 in 0..p {
                            let bcol = idx(i2, j2);
                            let mut v = x[(i2, j)] * x[(i, j2)] / nf
                                - 2.0 * x[(i, j)] * x[(i2, j2)] / (nf * nf);
                            if j == j2 {
                                v += c[(i, i2)];
                            }
                            if i == i2 {
                                v += s[(j, j2)] - delta(j, j2) * (1.0 + tr / nf);
                            }
                            h[(a, bcol)] = v;
                        }
                    }
                }
            }
        }
        TestKind::John => {
            let tr = s.trace();
            if !(tr > 0.0) {
                return Err(Error::ZeroTrace);
            }
            let b = tr / pf;
            let b2 = s.norm_squared() / pf;
            let xs = x * &s;
            let c = x * x.transpose() / nf;
            let inv_b2 = 1.0 / (b * b);
            let coef3 = 6.0 * b2 / (b * b * b * b * nf * pf);
            let coef4 = 4.0 / (b * b * b * nf * pf);
            for i in 0..n_eff {
                for j in 0..p {
                    let a = idx(i, j);
                    for i2 in 0..n_eff {
                        for j2 in 0..p {
                            let bcol = idx(i2, j2);
                            let mut v = inv_b2 * (x[(i2, j)] * x[(i, j2)] / nf);
                            if j == j2 {
                                v += inv_b2 * c[(i, i2)];
                            }
                            if i == i2 {
                                v += inv_b2 * s[(j, j2)];
                                if j == j2 {
                                    v -= b2 / (b * b * b);
                                }
                            }
                            v += coef3 * x[(i, j)] * x[(i2, j2)];
                            v -= coef4 * (xs[(i, j)] * x[(i2, j2)] + xs[(i2, j2)] * x[(i, j)]);
                            h[(a, bcol)] = v;
                        }
                    }
                }
            }
        }
    }
    Ok(h)
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Third- or fourth-order partial derivative of the Ledoit-Nagao-Wolf
/// statistic at the given `Λ`-index tuples (length 3 or 4).
///
/// Third-order values are linear in `X`; fourth-order values are constants
/// built from Kronecker deltas and `N`.
pub fn nagao_higher_derivative(x: &Matrix, indices: &[(usize, usize)]) -> Result<f64> {
    let n_eff = x.nrows();
    let p = x.ncols();
    for &(i, j) in indices {
        if i >= n_eff || j >= p {
            return Err(Error::BadIndex);
        }
    }
    let nf = n_eff as f64;
    match indices {
        [(i1, j1), (i2, j2), (i3, j3)] => {
            let (i1, j1, i2, j2, i3, j3) = (*i1, *j1, *i2, *j2, *i3, *j3);
            let d = delta;
            let first = d(i1, i3) * d(j1, j2) * x[(i2, j3)]
                + d(i2, i3) * d(j1, j2) * x[(i1, j3)]
                + d(i2, i3) * d(j1, j3) * x[(i1, j2)]
                + d(i1, i3) * d(j2, j3) * x[(i2, j1)]
                + d(i1, i2) * d(j1, j3) * x[(i3, j2)]
                + d(i1, i2) * d(j2, j3) * x[(i3, j1)];
            let second = d(i1, i3) * d(j1, j3) * x[(i2, j2)]
                + d(i2, i3) * d(j2, j3) * x[(i1, j1)]
                + d(i1, i2) * d(j1, j2) * x[(i3, j3)];
            Ok(first / nf - 2.0 * second / (nf * nf))
        }
        [(i1, j1), (i2, j2), (i3, j3), (i4, j4)] => {
            let (i1, j1, i2, j2, i3, j3, i4, j4) = (*i1, *j1, *i2, *j2, *i3, *j3, *i4, *j4);
            let d = delta;
            let first = d(i1, i3) * d(i2, i4) * d(j1, j2) * d(j3, j4)
                + d(i1, i4) * d(i2, i3) * d(j1, j2) * d(j3, j4)
                + d(i1, i4) * d(i2, i3) * d(j1, j3) * d(j2, j4)
                + d(i1, i3) * d(i2, i4) * d(j1, j4) * d(j2, j3)
                + d(i1, i2) * d(i3, i4) * d(j1, j3) * d(j2, j4)
                + d(i1, i2) * d(i3, i4) * d(j1, j4) * d(j2, j3);
            let second = d(i1, i3) * d(i2, i4) * d(j1, j3) * d(j2, j4)
                + d(i1, i4) * d(i2, i3) * d(j1, j4) * d(j2, j3)
                + d(i1, i2) * d(i3, i4) * d(j1, j2) * d(j3, j4);
            Ok(first / nf - 2.0 * second / (nf * nf))
        }
        _ => Err(Error::bad_arg("derivative order must be 3 or 4")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Matrix {
        // Shifted away from zero so S is comfortably nonsingular.
        let mut x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        for j in 0..p.min(n) {
            x[(j, j)] += 1.5;
        }
        x
    }

    /// Central finite difference of the statistic, step `eps^{1/3}(1+|x|)`.
    fn fd_gradient(kind: TestKind, x: &Matrix) -> Matrix {
        let mut g = Matrix::zeros(x.nrows(), x.ncols());
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                let h = f64::EPSILON.cbrt() * (1.0 + x[(i, j)].abs());
                let mut xp = x.clone();
                xp[(i, j)] += h;
                let mut xm = x.clone();
                xm[(i, j)] -= h;
                let fp = statistic_from_data(kind, &xp).unwrap();
                let fm = statistic_from_data(kind, &xm).unwrap();
                g[(i, j)] = (fp - fm) / (2.0 * h);
            }
        }
        g
    }

    fn fd_hessian(kind: TestKind, x: &Matrix) -> Matrix {
        let p = x.ncols();
        let dim = x.nrows() * p;
        let mut h = Matrix::zeros(dim, dim);
        for i in 0..x.nrows() {
            for j in 0..p {
                let step = f64::EPSILON.cbrt() * (1.0 + x[(i, j)].abs());
                let mut xp = x.clone();
                xp[(i, j)] += step;
                let mut xm = x.clone();
                xm[(i, j)] -= step;
                let gp = gradient(kind, &xp).unwrap();
                let gm = gradient(kind, &xm).unwrap();
                let col = (gp - gm) / (2.0 * step);
                for i2 in 0..x.nrows() {
                    for j2 in 0..p {
                        h[(i * p + j, i2 * p + j2)] = col[(i2, j2)];
                    }
                }
            }
        }
        h
    }

    fn max_rel_err(got: &Matrix, want: &Matrix) -> f64 {
        let scale = want
            .iter()
            .map(|v| v.abs())
            .fold(0.0_f64, f64::max)
            .max(1.0);
        got.iter()
            .zip(want.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max)
            / scale
    }

    #[test]
    fn sample_cov_examples() {
        let zero = Matrix::zeros(3, 2);
        assert_eq!(sample_cov_known_mean(&zero), Matrix::zeros(2, 2));

        let x = Matrix::from_row_slice(1, 1, &[2.0]);
        assert_abs_diff_eq!(sample_cov_known_mean(&x)[(0, 0)], 4.0, epsilon = 1e-15);

        let x = Matrix::from_row_slice(2, 1, &[1.0, 3.0]);
        assert_abs_diff_eq!(sample_cov_known_mean(&x)[(0, 0)], 5.0, epsilon = 1e-15);
    }

    #[test]
    fn sample_cov_unknown_mean_examples() {
        let x = Matrix::from_row_slice(3, 2, &[4.0, -1.0, 4.0, -1.0, 4.0, -1.0]);
        let (s_star, s) = sample_cov_unknown_mean(&x).unwrap();
        assert_eq!(s_star, Matrix::zeros(2, 2));
        assert_eq!(s, Matrix::zeros(2, 2));

        let x = Matrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let (s_star, s) = sample_cov_unknown_mean(&x).unwrap();
        assert_abs_diff_eq!(s_star[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(0, 0)], 2.0, epsilon = 1e-15);

        let x = Matrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let (s_star, s) = sample_cov_unknown_mean(&x).unwrap();
        assert_abs_diff_eq!(s_star[(0, 0)], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(0, 0)], 1.0, epsilon = 1e-15);

        let single = Matrix::from_row_slice(1, 1, &[1.0]);
        assert!(sample_cov_unknown_mean(&single).is_err());
    }

    #[test]
    fn statistic_examples() {
        let i4 = DMatrix::identity(4, 4);
        assert_abs_diff_eq!(
            statistic(TestKind::LrtIdentity, &i4, 10).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        // Nagao at S=I is -p²/4 for any N.
        assert_abs_diff_eq!(
            statistic(TestKind::Nagao, &i4, 7).unwrap(),
            -4.0,
            epsilon = 1e-12
        );
        for lambda in [0.4, 1.0, 17.0] {
            let s = &i4 * lambda;
            assert_abs_diff_eq!(
                statistic(TestKind::LrtSphericity, &s, 9).unwrap(),
                0.0,
                epsilon = 1e-10
            );
            assert_abs_diff_eq!(
                statistic(TestKind::John, &s, 9).unwrap(),
                0.0,
                epsilon = 1e-12
            );
        }
        let s = Matrix::from_row_slice(1, 1, &[core::f64::consts::E]);
        assert_abs_diff_eq!(
            statistic(TestKind::LrtIdentity, &s, 2).unwrap(),
            core::f64::consts::E - 2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn statistic_degenerate_cases() {
        // p > N makes S singular: LRT kinds must fail, trace kinds must not.
        let x = random_matrix(2, 4, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(
            statistic_from_data(TestKind::LrtIdentity, &x),
            Err(Error::Degenerate(_))
        ));
        assert!(statistic_from_data(TestKind::Nagao, &x).is_ok());
        assert!(statistic_from_data(TestKind::John, &x).is_ok());

        let zero = Matrix::zeros(2, 2);
        assert!(matches!(
            statistic(TestKind::John, &zero, 3),
            Err(Error::ZeroTrace)
        ));
        assert!(matches!(
            statistic(TestKind::LrtSphericity, &zero, 3),
            Err(Error::ZeroTrace)
        ));
    }

    #[test]
    fn gradient_zero_when_s_is_identity() {
        // X with XᵀX = N·I so S = I.
        #[rustfmt::skip]
        let x = Matrix::from_row_slice(
            4,
            2,
            &[
                2.0_f64.sqrt(), 0.0,
                0.0, 2.0_f64.sqrt(),
                2.0_f64.sqrt(), 0.0,
                0.0, 2.0_f64.sqrt(),
            ],
        );
        let g = gradient(TestKind::LrtIdentity, &x).unwrap();
        assert!(g.norm() <= 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for kind in TestKind::ALL {
            for &(n, p) in &[(8usize, 4usize), (6, 3), (6, 2)] {
                let x = random_matrix(n, p, &mut rng);
                let g = gradient(kind, &x).unwrap();
                let fd = fd_gradient(kind, &x);
                let rel = max_rel_err(&g, &fd);
                assert!(rel <= 1e-6, "{kind:?} ({n},{p}): rel={rel}");
            }
        }
    }

    #[test]
    fn trace_test_derivatives_work_when_p_exceeds_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(58);
        let x = random_matrix(4, 6, &mut rng);
        for kind in [TestKind::Nagao, TestKind::John] {
            let g = gradient(kind, &x).unwrap();
            let fd = fd_gradient(kind, &x);
            assert!(max_rel_err(&g, &fd) <= 1e-6, "{kind:?}");
            let h = hessian(kind, &x).unwrap();
            let fdh = fd_hessian(kind, &x);
            assert!(max_rel_err(&h, &fdh) <= 1e-5, "{kind:?}");
        }
    }

    #[test]
    fn john_gradient_scales_inversely() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_matrix(6, 3, &mut rng);
        let g = gradient(TestKind::John, &x).unwrap();
        for c in [0.5, 2.0, 11.0] {
            let gc = gradient(TestKind::John, &(&x * c)).unwrap();
            assert!(max_rel_err(&gc, &(&g / c)) <= 1e-10);
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        for kind in TestKind::ALL {
            let x = random_matrix(6, 3, &mut rng);
            let h = hessian(kind, &x).unwrap();
            let fd = fd_hessian(kind, &x);
            let rel = max_rel_err(&h, &fd);
            assert!(rel <= 1e-5, "{kind:?}: rel={rel}");
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for kind in TestKind::ALL {
            let x = random_matrix(5, 3, &mut rng);
            let h = hessian(kind, &x).unwrap();
            let rel = (&h - h.transpose()).norm() / h.norm().max(1.0);
            assert!(rel <= 1e-9, "{kind:?}: asymmetry {rel}");
        }
    }

    #[test]
    fn hessian_guards_size() {
        let x = Matrix::zeros(100, 100);
        assert!(matches!(
            hessian(TestKind::Nagao, &x),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn lrt_hessian_diagonal_block_vanishes_at_identity() {
        // At S = I the δ-term e_jᵀ(I - S⁻¹)e_{j'} is zero.
        #[rustfmt::skip]
        let x = Matrix::from_row_slice(
            4,
            2,
            &[
                2.0_f64.sqrt(), 0.0,
                0.0, 2.0_f64.sqrt(),
                -(2.0_f64.sqrt()), 0.0,
                0.0, -(2.0_f64.sqrt()),
            ],
        );
        let h = hessian(TestKind::LrtIdentity, &x).unwrap();
        let fd = fd_hessian(TestKind::LrtIdentity, &x);
        assert!(max_rel_err(&h, &fd) <= 1e-5);
    }

    /// Exact multilinear polarization stencils; no truncation error for a
    /// quartic polynomial such as the Nagao statistic.
    fn polarized_derivative(x: &Matrix, indices: &[(usize, usize)]) -> f64 {
        let k = indices.len();
        let h = 0.5;
        let mut acc = 0.0;
        for mask in 0..(1u32 << k) {
            let mut pt = x.clone();
            let mut sign = 1.0;
            for (b, &(i, j)) in indices.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    pt[(i, j)] += h;
                } else {
                    pt[(i, j)] -= h;
                    sign = -sign;
                }
            }
            acc += sign * statistic_from_data(TestKind::Nagao, &pt).unwrap();
        }
        acc / libm::pow(2.0 * h, k as f64)
    }

    #[test]
    fn nagao_fourth_derivative_examples() {
        let n = 4usize;
        let x = random_matrix(n, 2, &mut ChaCha8Rng::seed_from_u64(21));
        // Fully coincident indices.
        let idx = [(1, 1); 4];
        let v = nagao_higher_derivative(&x, &idx).unwrap();
        let nf = n as f64;
        assert_abs_diff_eq!(v, 6.0 / nf - 6.0 / (nf * nf), epsilon = 1e-12);
        assert_abs_diff_eq!(v, polarized_derivative(&x, &idx), epsilon = 1e-9);

        // All row and column indices distinct: every delta product vanishes.
        let x = random_matrix(5, 4, &mut ChaCha8Rng::seed_from_u64(22));
        let idx = [(0, 0), (1, 1), (2, 2), (3, 3)];
        assert_eq!(nagao_higher_derivative(&x, &idx).unwrap(), 0.0);
        assert_abs_diff_eq!(polarized_derivative(&x, &idx), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn nagao_fourth_derivative_matches_polarization_everywhere() {
        let n = 4usize;
        let p = 2usize;
        let x = random_matrix(n, p, &mut ChaCha8Rng::seed_from_u64(23));
        let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..40 {
            let pick = |rng: &mut ChaCha8Rng| all[rng.random_range(0..all.len())];
            let idx = [
                pick(&mut rng),
                pick(&mut rng),
                pick(&mut rng),
                pick(&mut rng),
            ];
            let v = nagao_higher_derivative(&x, &idx).unwrap();
            let fd = polarized_derivative(&x, &idx);
            assert_abs_diff_eq!(v, fd, epsilon = 1e-9);
        }
    }

    #[test]
    fn nagao_third_derivative_properties() {
        let n = 4usize;
        let p = 2usize;
        // Linear in X: vanishes at X = 0.
        let zero = Matrix::zeros(n, p);
        let idx = [(0, 0), (0, 1), (1, 0)];
        assert_eq!(nagao_higher_derivative(&zero, &idx).unwrap(), 0.0);

        let x = random_matrix(n, p, &mut ChaCha8Rng::seed_from_u64(31));
        let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..40 {
            let pick = |rng: &mut ChaCha8Rng| all[rng.random_range(0..all.len())];
            let idx = [pick(&mut rng), pick(&mut rng), pick(&mut rng)];
            let v = nagao_higher_derivative(&x, &idx).unwrap();
            let fd = polarized_derivative(&x, &idx);
            assert_abs_diff_eq!(v, fd, epsilon = 1e-9);
        }
    }

    #[test]
    fn nagao_higher_derivative_rejects_bad_input() {
        let x = Matrix::zeros(3, 2);
        assert!(matches!(
            nagao_higher_derivative(&x, &[(0, 0), (5, 0), (0, 1)]),
            Err(Error::BadIndex)
        ));
        assert!(nagao_higher_derivative(&x, &[(0, 0), (0, 1)]).is_err());
    }

    #[test]
    fn location_invariance_unknown_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let x = random_matrix(9, 3, &mut rng);
        let shift = nalgebra::RowDVector::from_vec(vec![3.0, -7.0, 0.25]);
        let mut shifted = x.clone();
        for mut row in shifted.row_iter_mut() {
            row += &shift;
        }
        for kind in TestKind::ALL {
            let (_, s1) = sample_cov_unknown_mean(&x).unwrap();
            let (_, s2) = sample_cov_unknown_mean(&shifted).unwrap();
            let t1 = statistic(kind, &s1, x.nrows() - 1).unwrap();
            let t2 = statistic(kind, &s2, x.nrows() - 1).unwrap();
            let rel = (t1 - t2).abs() / t1.abs().max(1.0);
            assert!(rel <= 1e-9, "{kind:?}: rel={rel}");
        }
    }

    proptest::proptest! {
        // The sphericity statistics are exactly scale-invariant.
        #[test]
        fn scale_invariance_sphericity_kinds(seed in 0u64..1000, c in 0.01f64..100.0) {
            let x = random_matrix(8, 3, &mut ChaCha8Rng::seed_from_u64(seed));
            for kind in [TestKind::LrtSphericity, TestKind::John] {
                let t = statistic_from_data(kind, &x).unwrap();
                let tc = statistic_from_data(kind, &(&x * c)).unwrap();
                let rel = (t - tc).abs() / t.abs().max(1.0);
                proptest::prop_assert!(rel <= 1e-9, "{:?} c={}: rel={}", kind, c, rel);
            }
        }
    }

    #[test]
    fn orthogonal_invariance_all_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let x = random_matrix(8, 4, &mut rng);
        let m = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let q = m.qr().q();
        let xq = &x * &q;
        for kind in TestKind::ALL {
            let t1 = statistic_from_data(kind, &x).unwrap();
            let t2 = statistic_from_data(kind, &xq).unwrap();
            let rel = (t1 - t2).abs() / t1.abs().max(1.0);
            assert!(rel <= 1e-8, "{kind:?}: rel={rel}");
        }
    }

    #[test]
    fn shape_checks() {
        assert!(SampleShape::new(1, 3).is_err());
        let shape = SampleShape::new(10, 20).unwrap();
        assert_eq!(shape.n_eff(), 9);
        assert!(shape.check_kind(TestKind::LrtIdentity).is_err());
        assert!(shape.check_kind(TestKind::Nagao).is_ok());
        // p = N - 1 is the largest admissible LRT dimension.
        assert!(SampleShape::new(10, 8)
            .unwrap()
            .check_kind(TestKind::LrtSphericity)
            .is_ok());
        assert!(SampleShape::new(10, 9)
            .unwrap()
            .check_kind(TestKind::LrtSphericity)
            .is_err());
    }
}

//! Named verification checks: derivative oracles, closed-form vs Monte
//! Carlo comparisons, algebraic identities, size/power/CLT behavior, and
//! reproducibility. The `verify` CLI subcommand runs the whole list; the
//! acceptance test suite runs the same checks grouped by criterion.

use hdcov_core::calibrate::{null_mean_exact, null_variance_asymptotic};
use hdcov_core::contiguity::{
    dispersion_closed_lrt, err_bar_from_parts, log_log_slope, mean_gap_with_residual,
};
use hdcov_core::dist::{normal_cdf, normal_quantile};
use hdcov_core::model::build_covariance;
use hdcov_core::model::CovarianceSpec;
use hdcov_core::moments::{wishart_trace_oracle, TraceMoment};
use hdcov_core::power::{analytic_power, power_ordering, spiked_power, spiked_sigma};
use hdcov_core::stats::{
    gradient, hessian, nagao_higher_derivative, statistic_from_data, TestKind,
};
use hdcov_core::umatrix::{op_norm_symmetric, u_matrix, UMatrixSign};
use hdcov_core::Matrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::formats::SCHEMA_VERSION;
use crate::mc::{
    self, bb3_minus_b2sq_variance_mc, dispersion_mc, empirical_power, fourth_moment_bound_check,
    inverse_opnorm_moment_mc, null_calibrate_mc, null_clt_check, statistic_mc,
    trace_concentration_tail_check, wishart_trace_mc, with_pool,
};
use crate::sample::{derive_seed, standard_normal_matrix, substream};

/// Default seed for the `verify` subcommand; every randomized check derives
/// its streams from this unless the user overrides `--seed`.
pub const DEFAULT_VERIFY_SEED: u64 = 1729;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.status == "pass"
    }

    /// Check of the form `observed <= threshold`.
    fn le(name: &str, observed: f64, threshold: f64, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            status: if observed <= threshold {
                "pass"
            } else {
                "fail"
            }
            .to_string(),
            observed,
            expected: threshold,
            tolerance: threshold,
            detail,
        }
    }

    /// Check of the form `|observed - expected| <= tolerance`.
    fn within(name: &str, observed: f64, expected: f64, tolerance: f64, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            status: if (observed - expected).abs() <= tolerance {
                "pass"
            } else {
                "fail"
            }
            .to_string(),
            observed,
            expected,
            tolerance,
            detail,
        }
    }

    fn boolean(name: &str, ok: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            status: if ok { "pass" } else { "fail" }.to_string(),
            observed: if ok { 1.0 } else { 0.0 },
            expected: 1.0,
            tolerance: 0.0,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub seed: u64,
    pub threads: usize,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckResult>,
}

// ---------------------------------------------------------------------
// Finite-difference oracles. These evaluate only the statistic (or the
// gradient, for the Hessian check) and are independent of the closed-form
// derivative implementations they validate.
// ---------------------------------------------------------------------

/// Central finite difference of the statistic, step `eps^{1/3}(1 + |x|)`.
pub fn fd_gradient(kind: TestKind, x: &Matrix) -> Matrix {
    let mut g = Matrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let h = f64::EPSILON.cbrt() * (1.0 + x[(i, j)].abs());
            let mut xp = x.clone();
            xp[(i, j)] += h;
            let mut xm = x.clone();
            xm[(i, j)] -= h;
            let fp = statistic_from_data(kind, &xp).expect("statistic degenerate at FD point");
            let fm = statistic_from_data(kind, &xm).expect("statistic degenerate at FD point");
            g[(i, j)] = (fp - fm) / (2.0 * h);
        }
    }
    g
}

/// Central finite difference of the gradient, column by column.
pub fn fd_hessian(kind: TestKind, x: &Matrix) -> Matrix {
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
            let gp = gradient(kind, &xp).expect("gradient degenerate at FD point");
            let gm = gradient(kind, &xm).expect("gradient degenerate at FD point");
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

/// Entrywise max deviation normalized by the larger of 1 and the max
/// magnitude of the reference.
pub fn max_rel_err(got: &Matrix, want: &Matrix) -> f64 {
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

fn random_data_matrix(n: usize, p: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Matrix {
    let mut x = Matrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    for j in 0..p.min(n) {
        x[(j, j)] += 1.5;
    }
    x
}

fn random_diag_sigma(p: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Matrix {
    let eigs: Vec<f64> = (0..p).map(|_| rng.random_range(0.3..2.5)).collect();
    Matrix::from_diagonal(&nalgebra::DVector::from_vec(eigs))
}

fn random_dense_psd(p: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Matrix {
    let a = Matrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() / p as f64 + Matrix::identity(p, p) * 0.5
}

// ---------------------------------------------------------------------
// Criterion 1: derivative oracles.
// ---------------------------------------------------------------------

pub fn derivative_oracle_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let shapes: Vec<(usize, usize)> = [6usize, 8]
        .iter()
        .flat_map(|&n| [2usize, 3, 4].map(|p| (n, p)))
        .collect();
    for kind in TestKind::ALL {
        let mut rng = substream(derive_seed(seed, 10 + kind as u64), 0);
        let mut grad_err: f64 = 0.0;
        let mut hess_err: f64 = 0.0;
        let mut count = 0;
        while count < 20 {
            let (n, p) = shapes[count % shapes.len()];
            let x = random_data_matrix(n, p, &mut rng);
            grad_err = grad_err.max(max_rel_err(
                &gradient(kind, &x).unwrap(),
                &fd_gradient(kind, &x),
            ));
            hess_err = hess_err.max(max_rel_err(
                &hessian(kind, &x).unwrap(),
                &fd_hessian(kind, &x),
            ));
            count += 1;
        }
        out.push(CheckResult::le(
            &format!("gradient_fd_{}", kind.name()),
            grad_err,
            1e-5,
            "max rel err over 20 instances, (N,p) in {6,8}x{2,3,4}".into(),
        ));
        out.push(CheckResult::le(
            &format!("hessian_fd_{}", kind.name()),
            hess_err,
            1e-4,
            "max rel err of Hessian vs finite-differenced gradient".into(),
        ));
    }
    out.push(nagao_higher_derivative_check(seed));
    out
}

/// Exact multilinear polarization stencil: for a quartic polynomial the
/// alternating 2^k-point sum recovers the k-th mixed derivative with no
/// truncation error.
fn polarized_nagao_derivative(x: &Matrix, indices: &[(usize, usize)]) -> f64 {
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
    acc / (2.0 * h).powi(k as i32)
}

fn nagao_higher_derivative_check(seed: u64) -> CheckResult {
    let mut rng = substream(derive_seed(seed, 20), 0);
    let n = 4usize;
    let p = 2usize;
    let x = random_data_matrix(n, p, &mut rng);
    let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).collect();
    let mut max_err: f64 = 0.0;
    // Coincident-index spot value 6/N - 6/N².
    let spot = nagao_higher_derivative(&x, &[(0, 0); 4]).unwrap();
    let nf = n as f64;
    max_err = max_err.max((spot - (6.0 / nf - 6.0 / (nf * nf))).abs());
    for order in [3usize, 4] {
        for _ in 0..40 {
            let idx: Vec<(usize, usize)> = (0..order)
                .map(|_| all[rng.random_range(0..all.len())])
                .collect();
            let v = nagao_higher_derivative(&x, &idx).unwrap();
            let fd = polarized_nagao_derivative(&x, &idx);
            max_err = max_err.max((v - fd).abs());
        }
    }
    CheckResult::le(
        "nagao_higher_derivatives",
        max_err,
        1e-9,
        "orders 3 and 4 vs exact polarization stencil at N=4, p=2".into(),
    )
}

// ---------------------------------------------------------------------
// Criterion 2: identity-LRT dispersion closed form.
// ---------------------------------------------------------------------

pub fn lrt_dispersion_check(seed: u64) -> CheckResult {
    let (n, p, reps) = (41usize, 10usize, 2000u64);
    let mut rng = substream(derive_seed(seed, 30), 0);
    let mut worst_z: f64 = 0.0;
    for trial in 0..10u64 {
        let sigma = random_dense_psd(p, &mut rng);
        let est = dispersion_mc(
            TestKind::LrtIdentity,
            &sigma,
            n,
            p,
            reps,
            derive_seed(seed, 31 + trial),
        )
        .unwrap();
        let closed = dispersion_closed_lrt(&sigma, n - 1);
        let z = (est.value - closed).abs() / est.std_error.max(1e-12);
        worst_z = worst_z.max(z);
    }
    CheckResult::le(
        "lrt_dispersion_closed_form",
        worst_z,
        3.0,
        "MC dispersion vs N·||Σ-I||_F² on 10 random Σ, in SE units (N=40, p=10, reps=2000)".into(),
    )
}

// ---------------------------------------------------------------------
// Criterion 3: Nagao mean closed form.
// ---------------------------------------------------------------------

pub fn nagao_mean_check(seed: u64) -> CheckResult {
    let (n, p, reps) = (51usize, 10usize, 20_000u64);
    let nf = (n - 1) as f64;
    let mut rng = substream(derive_seed(seed, 40), 0);
    let mut worst_z: f64 = 0.0;
    for trial in 0..5u64 {
        let sigma = random_diag_sigma(p, &mut rng);
        let est = statistic_mc(
            TestKind::Nagao,
            &sigma,
            n,
            p,
            reps,
            derive_seed(seed, 41 + trial),
        )
        .unwrap();
        let gap = mean_gap_with_residual(TestKind::Nagao, &sigma, n, p).unwrap();
        let m_null = null_mean_exact(TestKind::Nagao, n, p).unwrap();
        let expect = gap.leading + 0.25 * nf * gap.residual + m_null;
        let z = (est.value - expect).abs() / est.std_error.max(1e-12);
        worst_z = worst_z.max(z);
    }
    CheckResult::le(
        "nagao_mean_closed_form",
        worst_z,
        4.0,
        "MC mean vs (N/4)[||Σ-I||² + Q] + m_null on 5 random diagonal Σ, SE units".into(),
    )
}

// ---------------------------------------------------------------------
// Criterion 4: Wishart trace-moment oracles.
// ---------------------------------------------------------------------

pub fn wishart_moment_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let (n, p, reps) = (21usize, 10usize, 50_000u64);
    let identity = Matrix::identity(p, p);

    let mut worst_z: f64 = 0.0;
    let mut detail = String::new();
    for (i, name) in TraceMoment::ALL.into_iter().enumerate() {
        let est =
            wishart_trace_mc(name, &identity, n, reps, derive_seed(seed, 50 + i as u64)).unwrap();
        let exact = wishart_trace_oracle(name, &identity, n - 1).unwrap();
        let z = (est.value - exact).abs() / est.std_error.max(1e-12);
        worst_z = worst_z.max(z);
        detail.push_str(&format!("{}: z={:.2}; ", name.name(), z));
    }
    out.push(CheckResult::le(
        "wishart_moments_identity",
        worst_z,
        4.0,
        format!("all seven closed forms vs MC at (N,p)=(20,10), reps=50000; {detail}"),
    ));

    let mut rng = substream(derive_seed(seed, 60), 0);
    let mut worst_z: f64 = 0.0;
    for trial in 0..3u64 {
        let sigma = random_diag_sigma(p, &mut rng);
        for (i, name) in [TraceMoment::ETrS2, TraceMoment::ETr2S]
            .into_iter()
            .enumerate()
        {
            let est = wishart_trace_mc(
                name,
                &sigma,
                n,
                reps,
                derive_seed(seed, 61 + 2 * trial + i as u64),
            )
            .unwrap();
            let exact = wishart_trace_oracle(name, &sigma, n - 1).unwrap();
            let z = (est.value - exact).abs() / est.std_error.max(1e-12);
            worst_z = worst_z.max(z);
        }
    }
    out.push(CheckResult::le(
        "wishart_moments_general_sigma",
        worst_z,
        4.0,
        "second-moment closed forms vs MC at random diagonal Σ, SE units".into(),
    ));

    // Additional (N, p) grid points, including the p > N regime where the
    // identity-family formulas remain exact.
    let mut worst_z: f64 = 0.0;
    for (gi, (n, p)) in [(41usize, 10usize), (11, 20)].into_iter().enumerate() {
        let identity = Matrix::identity(p, p);
        for (i, name) in TraceMoment::ALL.into_iter().enumerate() {
            let est = wishart_trace_mc(
                name,
                &identity,
                n,
                20_000,
                derive_seed(seed, 64 + 10 * gi as u64 + i as u64),
            )
            .unwrap();
            let exact = wishart_trace_oracle(name, &identity, n - 1).unwrap();
            let z = (est.value - exact).abs() / est.std_error.max(1e-12);
            worst_z = worst_z.max(z);
        }
    }
    out.push(CheckResult::le(
        "wishart_moments_np_grid",
        worst_z,
        4.0,
        "closed forms vs MC at (N,p) in {(40,10),(10,20)}, reps=20000, SE units".into(),
    ));

    let i2 = Matrix::identity(2, 2);
    let spot = wishart_trace_oracle(TraceMoment::ETrS3, &i2, 2).unwrap();
    let mut spot_err = (spot - 18.0).abs();
    for (n_eff, pp) in [(20usize, 10usize), (7, 3)] {
        let i = Matrix::identity(pp, pp);
        let got = wishart_trace_oracle(TraceMoment::ETr2S, &i, n_eff).unwrap();
        let want = (pp * pp) as f64 + 2.0 * pp as f64 / n_eff as f64;
        spot_err = spot_err.max((got - want).abs());
    }
    out.push(CheckResult::le(
        "wishart_moment_spot_values",
        spot_err,
        1e-10,
        "E tr(S³)=18 at N=p=2 and E tr²(S)=p²+2p/N at Σ=I".into(),
    ));
    out
}

// ---------------------------------------------------------------------
// Criterion 5: U-matrix algebra.
// ---------------------------------------------------------------------

pub fn u_matrix_checks(seed: u64) -> Vec<CheckResult> {
    let (n, p) = (6usize, 3usize);
    let mut semigroup_err: f64 = 0.0;
    let mut norm_err: f64 = 0.0;
    let mut plus_violation: f64 = 0.0;
    for trial in 0..5u64 {
        let mut rng = substream(derive_seed(seed, 70 + trial), 0);
        let x = random_data_matrix(n, p, &mut rng);
        let s = hdcov_core::stats::sample_cov_known_mean(&x);
        let eigs = s.clone().symmetric_eigen().eigenvalues;
        let s_inv_norm = 1.0 / eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let s_norm = eigs.iter().cloned().fold(0.0_f64, f64::max);

        for (l1, m1, l2, m2) in [
            (1u32, 0u32, 1u32, 1u32),
            (1, 1, 1, 1),
            (2, 0, 1, 1),
            (1, 2, 2, 0),
            (2, 1, 1, 0),
        ] {
            let a = u_matrix(l1, m1, UMatrixSign::Inverse, &x).unwrap();
            let b = u_matrix(l2, m2, UMatrixSign::Inverse, &x).unwrap();
            let want = u_matrix(l1 + l2 - 1, m1 + m2, UMatrixSign::Inverse, &x).unwrap();
            let err = (&a.mat * &b.mat - &want.mat).norm() / want.mat.norm().max(1.0);
            semigroup_err = semigroup_err.max(err);
        }
        for (l1, m1, l2, m2) in [(0u32, 0u32, 0u32, 1u32), (1, 0, 0, 1), (1, 1, 1, 0)] {
            let a = u_matrix(l1, m1, UMatrixSign::Plus, &x).unwrap();
            let b = u_matrix(l2, m2, UMatrixSign::Plus, &x).unwrap();
            let want = u_matrix(l1 + l2 + 1, m1 + m2, UMatrixSign::Plus, &x).unwrap();
            let err = (&a.mat * &b.mat - &want.mat).norm() / want.mat.norm().max(1.0);
            semigroup_err = semigroup_err.max(err);
        }
        for ell in 1..=3u32 {
            for m in 0..=3u32 {
                if ell + m > 4 {
                    continue;
                }
                let u = u_matrix(ell, m, UMatrixSign::Inverse, &x).unwrap();
                let want = s_inv_norm.powi((ell + m - 1) as i32);
                norm_err = norm_err.max((op_norm_symmetric(&u.mat) - want).abs() / want.max(1.0));
            }
        }
        for ell in 0..=2u32 {
            for m in 0..=2u32 {
                let u = u_matrix(ell, m, UMatrixSign::Plus, &x).unwrap();
                let bound = s_norm.powi((ell + m + 1) as i32);
                let excess = (op_norm_symmetric(&u.mat) - bound) / bound.max(1.0);
                plus_violation = plus_violation.max(excess);
            }
        }
    }
    vec![
        CheckResult::le(
            "u_matrix_semigroup",
            semigroup_err,
            1e-9,
            "inverse and plus semigroup identities at N=6, p=3 over 5 random X".into(),
        ),
        CheckResult::le(
            "u_matrix_norm_identity",
            norm_err,
            1e-9,
            "||U_{l,m}||_op = ||S^{-1}||_op^{l+m-1} for l >= 1".into(),
        ),
        CheckResult::le(
            "u_matrix_plus_norm_bound",
            plus_violation,
            1e-9,
            "||U_{l,m;+}||_op <= ||S||_op^{l+m+1}".into(),
        ),
    ]
}

// ---------------------------------------------------------------------
// Criterion 6: null CLT Kolmogorov distances and their trend in p.
// ---------------------------------------------------------------------

pub fn clt_checks(seed: u64) -> Vec<CheckResult> {
    let reps = 5000u64;
    let mut out = Vec::new();
    for kind in TestKind::ALL {
        let check = null_clt_check(
            kind,
            201,
            50,
            reps,
            derive_seed(seed, 80 + 10 * kind as u64),
        )
        .unwrap();
        out.push(CheckResult::le(
            &format!("null_clt_dkol_{}", kind.name()),
            check.d_kol,
            0.05,
            format!("d_Kol at (N,p)=(200,50), reps={reps}"),
        ));

        // The doubling trend is measured on a small-p grid where the
        // normal-approximation error still dominates the sampling floor of
        // the empirical sup-distance (~1/sqrt(reps)); at p >= 25 the true
        // distance is already below that floor and ordering is noise.
        let grid = [4usize, 8, 16, 32];
        let trend_reps = 20_000u64;
        let mut pts = Vec::new();
        for (i, &p) in grid.iter().enumerate() {
            let check = null_clt_check(
                kind,
                4 * p + 1,
                p,
                trend_reps,
                derive_seed(seed, 85 + 10 * kind as u64 + i as u64),
            )
            .unwrap();
            pts.push((p as f64, check.d_kol));
        }
        let slope = log_log_slope(&pts).unwrap();
        let decayed = pts.last().unwrap().1 < pts[0].1;
        out.push(CheckResult::boolean(
            &format!("null_clt_trend_{}", kind.name()),
            slope <= -0.3 && decayed,
            format!(
                "d_Kol decreases as p doubles at p/N=0.25 (reps={trend_reps}): \
                 slope {slope:.3} (<= -0.3), points {pts:?}"
            ),
        ));
    }
    out
}

// ---------------------------------------------------------------------
// Criterion 7: power reproduction.
// ---------------------------------------------------------------------

fn power_configs(kind: TestKind) -> Vec<(usize, usize)> {
    match kind {
        TestKind::LrtIdentity | TestKind::LrtSphericity => vec![(201, 50)],
        TestKind::Nagao | TestKind::John => vec![(101, 100), (101, 200)],
    }
}

pub fn power_reproduction_checks(seed: u64) -> Vec<CheckResult> {
    let alpha = 0.05;
    let reps = 2000u64;
    let mut out = Vec::new();
    for kind in TestKind::ALL {
        let mut worst: f64 = 0.0;
        let mut detail = String::new();
        for (ci, (n, p)) in power_configs(kind).into_iter().enumerate() {
            let calib_seed = derive_seed(seed, 100 + 20 * kind as u64 + ci as u64);
            let calib = null_calibrate_mc(kind, n, p, 20_000, calib_seed).unwrap();
            // Empirical comparisons standardize by the MC-calibrated null
            // sigma (finite-sample faithful); the asymptotic sigma is for
            // theory-facing predictions.
            let sigma_null = calib.sigma;

            let mut alternatives: Vec<(String, Matrix)> = Vec::new();
            for a1 in [0.5, 1.0, 2.0] {
                let mut a = vec![0.0; p];
                a[0] = a1;
                alternatives.push((format!("spike({a1})"), spiked_sigma(&a).unwrap()));
            }
            // Dense perturbation of the identity, bisected to a mid-range
            // separation (tau ~ 1) so the power comparison is informative.
            let mut rng = substream(derive_seed(seed, 110 + 20 * kind as u64 + ci as u64), 0);
            let noise = Matrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            let sym = (&noise + noise.transpose()) * (0.5 / op_norm_symmetric(&noise));
            let tau_at = |c: f64| {
                let candidate = Matrix::identity(p, p) + &sym * c;
                analytic_power(kind, &candidate, n, p, alpha, sigma_null)
                    .unwrap()
                    .tau
            };
            let c_max = 0.95;
            let mut lo = 0.0;
            let mut hi = c_max;
            if tau_at(c_max) > 1.0 {
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if tau_at(mid) > 1.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
            alternatives.push(("dense".into(), Matrix::identity(p, p) + &sym * hi));

            for (ai, (tag, sigma)) in alternatives.iter().enumerate() {
                let analytic = analytic_power(kind, sigma, n, p, alpha, sigma_null).unwrap();
                let empirical = empirical_power(
                    kind,
                    sigma,
                    n,
                    p,
                    alpha,
                    &calib,
                    reps,
                    derive_seed(seed, 120 + 100 * kind as u64 + 10 * ci as u64 + ai as u64),
                )
                .unwrap();
                let gap = (empirical.value - analytic.power).abs();
                worst = worst.max(gap);
                detail.push_str(&format!("({n},{p}) {tag}: |Δ|={gap:.4}; "));
            }
        }
        out.push(CheckResult::le(
            &format!("power_reproduction_{}", kind.name()),
            worst,
            0.05,
            detail,
        ));
    }
    out
}

// ---------------------------------------------------------------------
// Criterion 8: size control.
// ---------------------------------------------------------------------

pub fn size_checks(seed: u64) -> Vec<CheckResult> {
    let alpha = 0.05;
    let reps = 5000u64;
    // The binomial band only brackets the nominal level once the null CLT
    // error is well below it, hence the comfortably large (n, p).
    let (n, p) = (201usize, 50usize);
    let tol = 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt();
    let mut out = Vec::new();
    for kind in TestKind::ALL {
        let calib =
            null_calibrate_mc(kind, n, p, 20_000, derive_seed(seed, 140 + kind as u64)).unwrap();
        let est = empirical_power(
            kind,
            &Matrix::identity(p, p),
            n,
            p,
            alpha,
            &calib,
            reps,
            derive_seed(seed, 150 + kind as u64),
        )
        .unwrap();
        out.push(CheckResult::within(
            &format!("size_control_{}", kind.name()),
            est.value,
            alpha,
            tol,
            format!("null rejection rate with MC calibration, reps={reps}, 3 binomial SE"),
        ));
    }
    out
}

// ---------------------------------------------------------------------
// Criterion 9: spiked-power orderings.
// ---------------------------------------------------------------------

pub fn ordering_checks(seed: u64) -> Vec<CheckResult> {
    let (n, p, alpha) = (101usize, 10usize, 0.05);
    let mut rng = substream(derive_seed(seed, 160), 0);
    let mut lrt_violations = 0usize;
    for _ in 0..1000 {
        let a: Vec<f64> = (0..p).map(|_| rng.random_range(-0.9..4.0)).collect();
        let ord = power_ordering(&a, n, p, alpha).unwrap();
        if ord.beta_lrt < ord.beta_lrt_s - 1e-12 {
            lrt_violations += 1;
        }
    }

    // Grids straddling the boundary: interpolate between a John-favoring
    // and a Nagao-favoring spike vector and check the flip tracks the sign.
    let a_nagao: Vec<f64> = (0..p).map(|j| if j == 0 { 2.0 } else { 0.5 }).collect();
    let a_john: Vec<f64> = (0..p).map(|j| if j < 5 { -0.85 } else { 0.2 }).collect();
    let mut flip_violations = 0usize;
    let mut signs_seen = (false, false);
    for step in 0..=40 {
        let t = step as f64 / 40.0;
        let a: Vec<f64> = a_nagao
            .iter()
            .zip(&a_john)
            .map(|(&x, &y)| (1.0 - t) * x + t * y)
            .collect();
        let ord = power_ordering(&a, n, p, alpha).unwrap();
        if ord.boundary > 1e-9 {
            signs_seen.0 = true;
            if ord.beta_nagao < ord.beta_john - 1e-12 {
                flip_violations += 1;
            }
        } else if ord.boundary < -1e-9 {
            signs_seen.1 = true;
            if ord.beta_john < ord.beta_nagao - 1e-12 {
                flip_violations += 1;
            }
        }
    }
    vec![
        CheckResult::le(
            "ordering_lrt_dominates_sphericity_lrt",
            lrt_violations as f64,
            0.0,
            "β_lrt >= β_lrt-s over 1000 random spike vectors".into(),
        ),
        CheckResult::boolean(
            "ordering_nagao_john_boundary",
            flip_violations == 0 && signs_seen.0 && signs_seen.1,
            format!(
                "ordering flips with sign of ā² - a²̄(1-(1+ā)²) on a straddling grid; \
                 violations={flip_violations}, both signs seen={:?}",
                signs_seen
            ),
        ),
    ]
}

// ---------------------------------------------------------------------
// Criterion 10: contiguity ratio decay.
// ---------------------------------------------------------------------

pub fn errbar_decay_checks(seed: u64) -> Vec<CheckResult> {
    let grid = [20usize, 40, 80, 160];
    let mut out = Vec::new();

    // Identity LRT: fully closed-form.
    let mut pts = Vec::new();
    for &p in &grid {
        let n = 4 * p + 1;
        let mut a = vec![0.0; p];
        a[0] = 1.0;
        let sigma = spiked_sigma(&a).unwrap();
        let v = dispersion_closed_lrt(&sigma, n - 1).sqrt();
        let sigma_null = null_variance_asymptotic(TestKind::LrtIdentity, n, p)
            .unwrap()
            .sqrt();
        let gap = mean_gap_with_residual(TestKind::LrtIdentity, &sigma, n, p)
            .unwrap()
            .gap;
        pts.push((p as f64, err_bar_from_parts(gap, sigma_null, v)));
    }
    let slope = log_log_slope(&pts).unwrap();
    out.push(CheckResult::le(
        "errbar_decay_slope_lrt",
        slope,
        -0.4,
        format!("closed-form err̄ over p∈{{20,40,80,160}} at p/N=0.25, spike a1=1; points {pts:?}"),
    ));

    // Trace and sphericity tests: MC dispersion, exact or leading gap.
    for (tag, kind, threshold) in [
        ("nagao", TestKind::Nagao, -0.4),
        ("lrt_s", TestKind::LrtSphericity, -0.3),
        ("john", TestKind::John, -0.3),
    ] {
        let mut pts = Vec::new();
        for (gi, &p) in grid.iter().enumerate() {
            let n = 4 * p + 1;
            let mut a = vec![0.0; p];
            a[0] = 1.0;
            let sigma = spiked_sigma(&a).unwrap();
            let v2 = dispersion_mc(
                kind,
                &sigma,
                n,
                p,
                400,
                derive_seed(seed, 170 + 10 * kind as u64 + gi as u64),
            )
            .unwrap();
            let sigma_null = null_variance_asymptotic(kind, n, p).unwrap().sqrt();
            let gap = mean_gap_with_residual(kind, &sigma, n, p).unwrap().gap;
            pts.push((
                p as f64,
                err_bar_from_parts(gap, sigma_null, v2.value.sqrt()),
            ));
        }
        let slope = log_log_slope(&pts).unwrap();
        out.push(CheckResult::le(
            &format!("errbar_decay_slope_{tag}"),
            slope,
            threshold,
            format!("MC dispersion (reps=400) over the same grid; points {pts:?}"),
        ));
    }
    out
}

// ---------------------------------------------------------------------
// Criterion 11: reproducibility.
// ---------------------------------------------------------------------

pub fn reproducibility_checks(seed: u64) -> Vec<CheckResult> {
    let (n, p, reps) = (41usize, 10usize, 2000u64);
    let kind = TestKind::Nagao;
    let c1 = with_pool(1, || null_calibrate_mc(kind, n, p, reps, seed).unwrap());
    let c8 = with_pool(8, || null_calibrate_mc(kind, n, p, reps, seed).unwrap());
    let c1b = with_pool(1, || null_calibrate_mc(kind, n, p, reps, seed).unwrap());
    let calib_ok = c1.m.to_bits() == c8.m.to_bits()
        && c1.sigma.to_bits() == c8.sigma.to_bits()
        && c1.m.to_bits() == c1b.m.to_bits();

    let sigma = {
        let mut a = vec![0.0; p];
        a[0] = 1.0;
        spiked_sigma(&a).unwrap()
    };
    let e1 = with_pool(1, || {
        empirical_power(kind, &sigma, n, p, 0.05, &c1, reps, derive_seed(seed, 1)).unwrap()
    });
    let e8 = with_pool(8, || {
        empirical_power(kind, &sigma, n, p, 0.05, &c1, reps, derive_seed(seed, 1)).unwrap()
    });
    let power_ok = e1.value.to_bits() == e8.value.to_bits();

    let d1 = with_pool(1, || {
        dispersion_mc(kind, &sigma, n, p, 500, derive_seed(seed, 2)).unwrap()
    });
    let d8 = with_pool(8, || {
        dispersion_mc(kind, &sigma, n, p, 500, derive_seed(seed, 2)).unwrap()
    });
    let disp_ok = d1.value.to_bits() == d8.value.to_bits();

    vec![CheckResult::boolean(
        "reproducibility_bitwise",
        calib_ok && power_ok && disp_ok,
        format!(
            "calibration/power/dispersion bitwise identical across reruns and worker counts \
             1 vs 8: {calib_ok}/{power_ok}/{disp_ok}"
        ),
    )]
}

// ---------------------------------------------------------------------
// Auxiliary checks: moment bounds, tails, stability, quantiles, and the
// distributional identity between the two covariance conventions.
// ---------------------------------------------------------------------

pub fn auxiliary_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    // Fourth-moment inequality: exact chi-square case plus random A.
    let check =
        fourth_moment_bound_check(&Matrix::identity(2, 2), 3, 20_000, derive_seed(seed, 200))
            .unwrap();
    let identity_ok =
        (check.lhs_mc.value - 48.0).abs() <= 4.0 * check.lhs_mc.std_error && check.rhs == 60.0;
    let mut rng = substream(derive_seed(seed, 201), 0);
    let mut holds = true;
    for trial in 0..20u64 {
        let p = 2 + (trial % 3) as usize;
        let a = Matrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        let c = fourth_moment_bound_check(&a, 4, 2000, derive_seed(seed, 202 + trial)).unwrap();
        holds &= c.lhs_mc.value <= c.rhs + 3.0 * c.lhs_mc.std_error;
    }
    out.push(CheckResult::boolean(
        "fourth_moment_bound",
        identity_ok && holds,
        "E||ZA||⁴ <= 4N||AᵀA||² + N²||A||⁴: chi-square case and 20 random A".into(),
    ));

    // Trace concentration tail.
    let est = trace_concentration_tail_check(
        &Matrix::identity(10, 10),
        51,
        10,
        100_000,
        derive_seed(seed, 210),
    )
    .unwrap();
    let shape_ok = est.value <= (-(50.0) / 20.0_f64).exp() + 3.0 * est.std_error;
    let scalar = trace_concentration_tail_check(
        &Matrix::identity(1, 1),
        6,
        1,
        40_000,
        derive_seed(seed, 211),
    )
    .unwrap();
    // P(χ²₅ < 2.5) from the chi-square CDF.
    let scalar_ok = (scalar.value - 0.2235448).abs() <= 3.0 * scalar.std_error + 1e-3;
    out.push(CheckResult::boolean(
        "trace_concentration_tail",
        shape_ok && scalar_ok && est.value == 0.0,
        format!(
            "tail at (N,p)=(50,10) is {} (shape bound holds); scalar case matches chi-square CDF",
            est.value
        ),
    ));

    // Inverse operator-norm moment stability across a fixed-ratio grid.
    let mut vals = Vec::new();
    for (gi, &n_eff) in [40usize, 80, 160].iter().enumerate() {
        let est = inverse_opnorm_moment_mc(
            n_eff + 1,
            n_eff / 2,
            1,
            1000,
            derive_seed(seed, 220 + gi as u64),
        )
        .unwrap();
        vals.push(est.value);
    }
    let spread = vals.iter().cloned().fold(0.0_f64, f64::max)
        / vals.iter().cloned().fold(f64::INFINITY, f64::min)
        - 1.0;
    out.push(CheckResult::le(
        "inverse_opnorm_moment_stability",
        spread,
        0.25,
        format!("E||S⁻¹||_op at p/N=0.5, N∈{{40,80,160}}: {vals:?}"),
    ));

    // Var(b·b₃ - b₂²) = O(p²/N²) is an order bound: along a fixed-ratio
    // grid the scaled variance must not grow (empirically it decays well
    // below the stated order, which is consistent with the bound).
    let mut scaled = Vec::new();
    for (gi, &n_eff) in [20usize, 40, 80].iter().enumerate() {
        let p = 2 * n_eff;
        let est =
            bb3_minus_b2sq_variance_mc(n_eff + 1, p, 2000, derive_seed(seed, 230 + gi as u64))
                .unwrap();
        scaled.push(est.value * (n_eff as f64 / p as f64).powi(2));
    }
    let bounded = scaled.windows(2).all(|w| w[1] <= w[0] * 1.5);
    out.push(CheckResult::boolean(
        "bb3_variance_scaling_trend",
        bounded,
        format!("Var(b·b₃-b₂²)·(N/p)² non-growing at p/N=2, N∈{{20,40,80}}: {scaled:?}"),
    ));

    // Normal quantile accuracy.
    let mut worst: f64 = 0.0;
    let mut alpha = 1e-8;
    while alpha < 1.0 - 1e-8 {
        let z = normal_quantile(alpha).unwrap();
        worst = worst.max((normal_cdf(z) - alpha).abs());
        alpha = alpha * 1.9 + 1e-3;
    }
    out.push(CheckResult::le(
        "normal_quantile_round_trip",
        worst,
        1e-9,
        "|Φ(Φ⁻¹(α)) - α| over α ∈ [1e-8, 1-1e-8]".into(),
    ));

    // Known-mean (N rows) vs unknown-mean (n rows) statistic distributions
    // agree in mean within 4 SE.
    let (n, p, reps) = (31usize, 6usize, 20_000u64);
    let mut worst_z: f64 = 0.0;
    for kind in TestKind::ALL {
        let known = mc::statistic_mc(
            kind,
            &Matrix::identity(p, p),
            n,
            p,
            reps,
            derive_seed(seed, 240 + kind as u64),
        )
        .unwrap();
        let unknown_values =
            mc::run_replicates(reps, derive_seed(seed, 250 + kind as u64), |_, rng| {
                let mut x = standard_normal_matrix(n, p, rng);
                for i in 0..n {
                    for j in 0..p {
                        x[(i, j)] += 0.7; // nonzero mean exercises the centering
                    }
                }
                let (_, s) = hdcov_core::stats::sample_cov_unknown_mean(&x).unwrap();
                hdcov_core::stats::statistic(kind, &s, n - 1).unwrap()
            });
        let (mu, sd) = mc::mean_sd(&unknown_values);
        let se = (known.std_error.powi(2) + sd * sd / reps as f64).sqrt();
        worst_z = worst_z.max((known.value - mu).abs() / se.max(1e-12));
    }
    out.push(CheckResult::le(
        "known_vs_unknown_mean_identity",
        worst_z,
        4.0,
        "statistic means agree across the two covariance conventions, SE units".into(),
    ));

    // Exact digamma-based LRT null means vs Monte Carlo.
    let mut worst_z: f64 = 0.0;
    for (i, kind) in [TestKind::LrtIdentity, TestKind::LrtSphericity]
        .into_iter()
        .enumerate()
    {
        let calib =
            null_calibrate_mc(kind, 61, 10, 20_000, derive_seed(seed, 260 + i as u64)).unwrap();
        let exact = null_mean_exact(kind, 61, 10).unwrap();
        let se = calib.sigma / (calib.reps as f64).sqrt();
        worst_z = worst_z.max((calib.m - exact).abs() / se);
    }
    out.push(CheckResult::le(
        "lrt_exact_mean_vs_mc",
        worst_z,
        4.0,
        "digamma-based null means vs MC at (N,p)=(60,10), SE units".into(),
    ));

    // MC null variance approaches the asymptotic formulas.
    let lrt =
        null_calibrate_mc(TestKind::LrtIdentity, 201, 50, 5000, derive_seed(seed, 270)).unwrap();
    let lrt_rel = (lrt.sigma.powi(2)
        / null_variance_asymptotic(TestKind::LrtIdentity, 201, 50).unwrap()
        - 1.0)
        .abs();
    let john = null_calibrate_mc(TestKind::John, 101, 100, 5000, derive_seed(seed, 271)).unwrap();
    let john_rel =
        (john.sigma.powi(2) / null_variance_asymptotic(TestKind::John, 101, 100).unwrap() - 1.0)
            .abs();
    out.push(CheckResult::boolean(
        "null_variance_asymptotics",
        lrt_rel < 0.10 && john_rel < 0.15,
        format!(
            "MC σ² vs asymptotic: lrt rel {lrt_rel:.3} (<0.10), john rel {john_rel:.3} (<0.15)"
        ),
    ));

    // Analytic power equals the spiked closed forms, and equals α at null.
    let mut rng = substream(derive_seed(seed, 280), 0);
    let mut worst: f64 = 0.0;
    for kind in TestKind::ALL {
        for _ in 0..10 {
            let p = 6usize;
            let n = 4 * p + 1;
            let a: Vec<f64> = (0..p).map(|_| rng.random_range(-0.8..3.0)).collect();
            let sigma = spiked_sigma(&a).unwrap();
            let sigma_null = null_variance_asymptotic(kind, n, p).unwrap().sqrt();
            let via_matrix = analytic_power(kind, &sigma, n, p, 0.05, sigma_null)
                .unwrap()
                .power;
            let via_formula = spiked_power(kind, &a, n, p, 0.05).unwrap();
            worst = worst.max((via_matrix - via_formula).abs());
        }
        let i6 = Matrix::identity(6, 6);
        let sigma_null = null_variance_asymptotic(kind, 25, 6).unwrap().sqrt();
        let at_null = analytic_power(kind, &i6, 25, 6, 0.05, sigma_null)
            .unwrap()
            .power;
        worst = worst.max((at_null - 0.05).abs());
    }
    out.push(CheckResult::le(
        "analytic_vs_spiked_power_equivalence",
        worst,
        1e-10,
        "matrix-functional and spiked closed-form powers agree; power(I) = α".into(),
    ));

    // err̄ vanishes at the null.
    let i3 = Matrix::identity(3, 3);
    let gap = mean_gap_with_residual(TestKind::LrtIdentity, &i3, 21, 3).unwrap();
    let eb = err_bar_from_parts(gap.gap, 2.0, dispersion_closed_lrt(&i3, 20).sqrt());
    out.push(CheckResult::le(
        "errbar_zero_at_null",
        eb,
        0.0,
        "err̄ = 0 when Σ = I (V = 0)".into(),
    ));

    // Spec realization spot checks.
    let spiked = build_covariance(&CovarianceSpec::spiked(vec![1.0, 0.0, 0.0])).unwrap();
    let ok = spiked[(0, 0)] == 2.0 && spiked[(1, 1)] == 1.0 && spiked[(2, 2)] == 1.0;
    out.push(CheckResult::boolean(
        "covariance_spec_realization",
        ok,
        "spiked([1,0,0]) realizes diag(2,1,1)".into(),
    ));

    out
}

/// The named sections of the verification suite, in run order.
pub const SECTIONS: [&str; 12] = [
    "derivatives",
    "lrt_dispersion",
    "nagao_mean",
    "wishart_moments",
    "u_matrix",
    "clt",
    "power",
    "size",
    "ordering",
    "errbar_decay",
    "reproducibility",
    "auxiliary",
];

fn run_section(name: &str, seed: u64) -> Vec<CheckResult> {
    match name {
        "derivatives" => derivative_oracle_checks(seed),
        "lrt_dispersion" => vec![lrt_dispersion_check(seed)],
        "nagao_mean" => vec![nagao_mean_check(seed)],
        "wishart_moments" => wishart_moment_checks(seed),
        "u_matrix" => u_matrix_checks(seed),
        "clt" => clt_checks(seed),
        "power" => power_reproduction_checks(seed),
        "size" => size_checks(seed),
        "ordering" => ordering_checks(seed),
        "errbar_decay" => errbar_decay_checks(seed),
        "reproducibility" => reproducibility_checks(seed),
        "auxiliary" => auxiliary_checks(seed),
        _ => unreachable!("unknown section"),
    }
}

/// Runs every check (or only the sections whose name contains `filter`),
/// reporting each result through `on_check` as its section completes.
pub fn run_all(
    seed: u64,
    filter: Option<&str>,
    mut on_check: impl FnMut(&CheckResult),
) -> Vec<CheckResult> {
    let mut checks = Vec::new();
    for section in SECTIONS {
        if let Some(f) = filter {
            if !section.contains(f) {
                continue;
            }
        }
        for check in run_section(section, seed) {
            on_check(&check);
            checks.push(check);
        }
    }
    checks
}

pub fn report_from_checks(seed: u64, threads: usize, checks: Vec<CheckResult>) -> VerifyReport {
    let passed = checks.iter().filter(|c| c.passed()).count();
    let failed = checks.len() - passed;
    VerifyReport {
        schema_version: SCHEMA_VERSION,
        seed,
        threads,
        passed,
        failed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_check_detects_perturbation() {
        // The oracle must flag a tampered gradient: this is the mutation
        // sensitivity the verification suite relies on.
        let mut rng = substream(3, 0);
        let x = random_data_matrix(6, 3, &mut rng);
        let mut g = gradient(TestKind::LrtIdentity, &x).unwrap();
        let fd = fd_gradient(TestKind::LrtIdentity, &x);
        assert!(max_rel_err(&g, &fd) <= 1e-6);
        g[(0, 0)] += 1e-3;
        assert!(max_rel_err(&g, &fd) > 1e-5);
    }

    #[test]
    fn fast_sections_pass() {
        for c in derivative_oracle_checks(DEFAULT_VERIFY_SEED)
            .into_iter()
            .chain(u_matrix_checks(DEFAULT_VERIFY_SEED))
            .chain(ordering_checks(DEFAULT_VERIFY_SEED))
        {
            assert!(
                c.passed(),
                "{}: observed {} vs {} ({})",
                c.name,
                c.observed,
                c.expected,
                c.detail
            );
        }
    }

    #[test]
    fn filter_selects_subset() {
        let checks = run_all(DEFAULT_VERIFY_SEED, Some("u_matrix"), |_| {});
        assert_eq!(checks.len(), 3);
        assert!(checks.iter().all(|c| c.name.starts_with("u_matrix")));
    }
}

//! Monte Carlo engines: null calibration, empirical power and size, CLT
//! distance, dispersion estimation, and the moment/tail checks.
//!
//! Sample-size convention: every function here takes the observation count
//! `n` and simulates `N = n - 1` mean-zero rows, matching the known-mean
//! form of the sample covariance used by all closed forms.

use hdcov_core::calibrate::{CalibrationMethod, NullCalibration};
use hdcov_core::contiguity::tmap;
use hdcov_core::dist::{normal_cdf, z_alpha};
use hdcov_core::model::{normalize_sphericity, sym_sqrt};
use hdcov_core::moments::{fourth_moment_bound, TraceMoment};
use hdcov_core::stats::{sample_cov_known_mean, statistic_from_data, SampleShape, TestKind};
use hdcov_core::{Error, Matrix, Result};
use rand_chacha::ChaCha8Rng;

use crate::sample::{derive_seed, gaussian_sample_with, standard_normal_matrix, substream};

/// A Monte Carlo estimate with its standard error and provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub reps: u64,
    pub seed: u64,
}

/// Runs `f` inside a rayon pool with the requested worker count
/// (0 = rayon's default).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool construction cannot fail with these settings");
    pool.install(f)
}

/// Evaluates `f(replicate, rng)` for each replicate on its own substream,
/// in parallel, into an index-ordered buffer. The buffer content is
/// independent of the worker count; reductions over it in fixed order are
/// therefore bitwise reproducible.
pub fn run_replicates<F>(reps: u64, seed: u64, f: F) -> Vec<f64>
where
    F: Fn(u64, &mut ChaCha8Rng) -> f64 + Sync,
{
    use rayon::prelude::*;
    let mut out = vec![0.0_f64; reps as usize];
    out.par_iter_mut().enumerate().for_each(|(r, slot)| {
        let mut rng = substream(seed, r as u64);
        *slot = f(r as u64, &mut rng);
    });
    out
}

/// Index-ordered mean and sample standard deviation (two-pass).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn mc_estimate(values: &[f64], reps: u64, seed: u64) -> McEstimate {
    let (mean, sd) = mean_sd(values);
    McEstimate {
        value: mean,
        std_error: sd / (reps as f64).sqrt(),
        reps,
        seed,
    }
}

fn check_reps(reps: u64, min: u64) -> Result<()> {
    if reps < min {
        return Err(Error::BadArgument(format!(
            "need at least {min} replicates, got {reps}"
        )));
    }
    Ok(())
}

/// Monte Carlo null calibration: mean and standard deviation of the
/// statistic over `reps` independent null datasets (`Σ = I`; the
/// sphericity statistics are scale-invariant so λ = 1 suffices).
pub fn null_calibrate_mc(
    kind: TestKind,
    n: usize,
    p: usize,
    reps: u64,
    seed: u64,
) -> Result<NullCalibration> {
    check_reps(reps, 100)?;
    SampleShape::new(n, p)?.check_kind(kind)?;
    let n_eff = n - 1;
    let values = run_replicates(reps, seed, |_, rng| {
        let z = standard_normal_matrix(n_eff, p, rng);
        statistic_from_data(kind, &z).expect("null draw produced a degenerate statistic")
    });
    let (m, sigma) = mean_sd(&values);
    Ok(NullCalibration {
        kind,
        n,
        p,
        m,
        sigma,
        method: CalibrationMethod::MonteCarlo,
        reps,
        seed,
    })
}

/// Empirical power: rejection frequency of the level-α test over `reps`
/// datasets drawn under `Σ`, with binomial standard error.
#[allow(clippy::too_many_arguments)]
pub fn empirical_power(
    kind: TestKind,
    sigma: &Matrix,
    n: usize,
    p: usize,
    alpha: f64,
    calib: &NullCalibration,
    reps: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_reps(reps, 1)?;
    calib.validate()?;
    if calib.kind != kind || calib.n != n || calib.p != p {
        return Err(Error::BadArgument(
            "calibration does not match the requested (kind, n, p)".into(),
        ));
    }
    let shape = SampleShape::new(n, p)?;
    shape.check_kind(kind)?;
    let za = z_alpha(alpha)?;
    let root = sym_sqrt(sigma)?;
    let n_eff = shape.n_eff();
    let values = run_replicates(reps, seed, |_, rng| {
        let x = gaussian_sample_with(&root, None, n_eff, rng);
        let t = statistic_from_data(kind, &x).expect("draw produced a degenerate statistic");
        if (t - calib.m) / calib.sigma > za {
            1.0
        } else {
            0.0
        }
    });
    let frac = values.iter().sum::<f64>() / reps as f64;
    let se = (frac * (1.0 - frac) / reps as f64).sqrt();
    Ok(McEstimate {
        value: frac,
        std_error: se,
        reps,
        seed,
    })
}

/// Monte Carlo mean of the statistic over datasets drawn under `Σ`
/// (known-mean convention, `N = n - 1` rows per draw).
pub fn statistic_mc(
    kind: TestKind,
    sigma: &Matrix,
    n: usize,
    p: usize,
    reps: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_reps(reps, 100)?;
    let shape = SampleShape::new(n, p)?;
    shape.check_kind(kind)?;
    let root = sym_sqrt(sigma)?;
    let n_eff = shape.n_eff();
    let values = run_replicates(reps, seed, |_, rng| {
        let x = gaussian_sample_with(&root, None, n_eff, rng);
        statistic_from_data(kind, &x).expect("draw produced a degenerate statistic")
    });
    Ok(mc_estimate(&values, reps, seed))
}

/// Exact Kolmogorov distance between the empirical CDF of `sample` and the
/// standard normal CDF: the maximum of both one-sided gaps at each order
/// statistic.
pub fn kolmogorov_distance_to_normal(sample: &mut [f64]) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).expect("statistic values must not be NaN"));
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let phi = normal_cdf(x);
        let upper = (i as f64 + 1.0) / n - phi;
        let lower = phi - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    d
}

/// Result of a null CLT check.
#[derive(Debug, Clone, PartialEq)]
pub struct CltCheck {
    pub d_kol: f64,
    pub calibration: NullCalibration,
    pub reps: u64,
    pub seed: u64,
}

/// Kolmogorov distance between standardized null statistics and `N(0,1)`.
///
/// Standardization uses a Monte Carlo calibration computed from a seed
/// derived disjointly from the draw seed, to avoid in-sample bias.
pub fn null_clt_check(
    kind: TestKind,
    n: usize,
    p: usize,
    reps: u64,
    seed: u64,
) -> Result<CltCheck> {
    check_reps(reps, 1000)?;
    let calib = null_calibrate_mc(kind, n, p, reps, derive_seed(seed, 1))?;
    let n_eff = n - 1;
    let mut values = run_replicates(reps, derive_seed(seed, 0), |_, rng| {
        let z = standard_normal_matrix(n_eff, p, rng);
        let t = statistic_from_data(kind, &z).expect("null draw produced a degenerate statistic");
        (t - calib.m) / calib.sigma
    });
    let d_kol = kolmogorov_distance_to_normal(&mut values);
    Ok(CltCheck {
        d_kol,
        calibration: calib,
        reps,
        seed,
    })
}

/// Monte Carlo dispersion `V²`: mean of `‖𝒯_Σ(Z) - 𝒯_{Σ₀}(Z)‖_F²` over
/// shared standard normal draws (common random numbers).
///
/// For the identity tests the reference is `Σ₀ = I`. For the sphericity
/// tests the composite-null infimum is approximated from above by first
/// normalizing `Σ` to unit trace mean and comparing against `I`; the
/// returned value is an upper bound on the infimum-based dispersion.
pub fn dispersion_mc(
    kind: TestKind,
    sigma: &Matrix,
    n: usize,
    p: usize,
    reps: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_reps(reps, 100)?;
    let shape = SampleShape::new(n, p)?;
    shape.check_kind(kind)?;
    let reference = if kind.is_sphericity() {
        normalize_sphericity(sigma)?
    } else {
        sigma.clone()
    };
    let n_eff = shape.n_eff();
    let values = run_replicates(reps, seed, |_, rng| {
        let z = standard_normal_matrix(n_eff, p, rng);
        let t_alt = tmap(kind, &reference, &z).expect("transport map degenerate under alternative");
        let t_null =
            hdcov_core::stats::gradient(kind, &z).expect("transport map degenerate under null");
        (t_alt - t_null).norm_squared()
    });
    Ok(mc_estimate(&values, reps, seed))
}

/// Monte Carlo estimate of `E‖S_Z⁻¹‖_op^q`, a stability diagnostic.
///
/// Enforces `p/N <= 0.9` and `q <= (N - p - 1)/8`.
pub fn inverse_opnorm_moment_mc(
    n: usize,
    p: usize,
    q: u32,
    reps: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_reps(reps, 100)?;
    let shape = SampleShape::new(n, p)?;
    let n_eff = shape.n_eff();
    if (p as f64) / (n_eff as f64) > 0.9 {
        return Err(Error::RatioTooLarge(format!(
            "p/N = {:.3} exceeds 0.9",
            p as f64 / n_eff as f64
        )));
    }
    if q as f64 > (n_eff as f64 - p as f64 - 1.0) / 8.0 {
        return Err(Error::RatioTooLarge(format!(
            "moment order q = {q} exceeds (N - p - 1)/8"
        )));
    }
    let values = run_replicates(reps, seed, |_, rng| {
        let z = standard_normal_matrix(n_eff, p, rng);
        let s = sample_cov_known_mean(&z);
        let min_eig = s
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let inv_norm = 1.0 / min_eig;
        let mut acc = 1.0;
        for _ in 0..q {
            acc *= inv_norm;
        }
        acc
    });
    Ok(mc_estimate(&values, reps, seed))
}

/// Monte Carlo mean of the named Wishart trace functional under `Σ`.
pub fn wishart_trace_mc(
    name: TraceMoment,
    sigma: &Matrix,
    n: usize,
    reps: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_reps(reps, 100)?;
    let p = sigma.nrows();
    let shape = SampleShape::new(n, p)?;
    let root = sym_sqrt(sigma)?;
    let n_eff = shape.n_eff();
    let values = run_replicates(reps, seed, |_, rng| {
        let x = gaussian_sample_with(&root, None, n_eff, rng);
        let s = sample_cov_known_mean(&x);
        let tr = s.trace();
        match name {
            TraceMoment::ETrS2 => s.norm_squared(),
            TraceMoment::ETr2S => tr * tr,
            TraceMoment::ETrS3 => (&s * &s * &s).trace(),
            TraceMoment::ETr3S => tr * tr * tr,
            TraceMoment::ETrSTrS2 => tr * s.norm_squared(),
            TraceMoment::ETr2S2 => {
                let t2 = s.norm_squared();
                t2 * t2
            }
            TraceMoment::ETrSTrS3 => tr * (&s * &s * &s).trace(),
        }
    });
    Ok(mc_estimate(&values, reps, seed))
}

/// Monte Carlo variance of `b(S)b₃(S) - b₂²(S)` under the null; used as a
/// grid-trend diagnostic for its `O(p²/N²)` scaling.
pub fn bb3_minus_b2sq_variance_mc(n: usize, p: usize, reps: u64, seed: u64) -> Result<McEstimate> {
    check_reps(reps, 100)?;
    let shape = SampleShape::new(n, p)?;
    let n_eff = shape.n_eff();
    let pf = p as f64;
    let values = run_replicates(reps, seed, |_, rng| {
        let z = standard_normal_matrix(n_eff, p, rng);
        let s = sample_cov_known_mean(&z);
        let b = s.trace() / pf;
        let b2 = s.norm_squared() / pf;
        let b3 = (&s * &s * &s).trace() / pf;
        b * b3 - b2 * b2
    });
    let (_, sd) = mean_sd(&values);
    // Variance estimate with a rough SE (delta method on the SD).
    let var = sd * sd;
    let se = var * (2.0 / (reps as f64 - 1.0)).sqrt();
    Ok(McEstimate {
        value: var,
        std_error: se,
        reps,
        seed,
    })
}

/// Monte Carlo and deterministic sides of the fourth-moment inequality
/// `E‖ZA‖_F⁴ ≤ 4N‖AᵀA‖_F² + N²‖A‖_F⁴`, with `Z` an `N×p` standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct FourthMomentCheck {
    pub lhs_mc: McEstimate,
    pub rhs: f64,
}

pub fn fourth_moment_bound_check(
    a: &Matrix,
    n_rows: usize,
    reps: u64,
    seed: u64,
) -> Result<FourthMomentCheck> {
    check_reps(reps, 1000)?;
    let p = a.nrows();
    if a.ncols() != p {
        return Err(Error::BadDimension {
            expected: p,
            got: a.ncols(),
        });
    }
    let values = run_replicates(reps, seed, |_, rng| {
        let z = standard_normal_matrix(n_rows, p, rng);
        let fro2 = (z * a).norm_squared();
        fro2 * fro2
    });
    Ok(FourthMomentCheck {
        lhs_mc: mc_estimate(&values, reps, seed),
        rhs: fourth_moment_bound(a, n_rows),
    })
}

/// Empirical tail probability `P(tr(Σ S_Z) < tr(Σ)/2)`.
pub fn trace_concentration_tail_check(
    sigma: &Matrix,
    n: usize,
    p: usize,
    reps: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_reps(reps, 10_000)?;
    let shape = SampleShape::new(n, p)?;
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::BadDimension {
            expected: p,
            got: sigma.nrows(),
        });
    }
    let n_eff = shape.n_eff();
    let trace = sigma.trace();
    let sigma = sigma.clone();
    let values = run_replicates(reps, seed, |_, rng| {
        let z = standard_normal_matrix(n_eff, p, rng);
        let s_z = sample_cov_known_mean(&z);
        // tr(Σ S_Z) < tr(Σ)/2; impossible when tr(Σ) = 0.
        if (&sigma * s_z).trace() < 0.5 * trace {
            1.0
        } else {
            0.0
        }
    });
    let frac = values.iter().sum::<f64>() / reps as f64;
    let se = (frac * (1.0 - frac) / reps as f64).sqrt();
    Ok(McEstimate {
        value: frac,
        std_error: se,
        reps,
        seed,
    })
}

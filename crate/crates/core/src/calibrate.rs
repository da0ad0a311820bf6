//! Null calibration `(m_{H₀}, σ_{H₀})` and the level-α decision rule.
//!
//! The asymptotic variance formulas and the exact means are closed forms;
//! the Monte Carlo calibration path lives in the `hdcov` companion crate.

use crate::dist::{digamma, z_alpha};
use crate::error::{Error, Result};
use crate::stats::{
    sample_cov_known_mean, sample_cov_unknown_mean, statistic, SampleShape, TestKind,
};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMethod {
    Asymptotic,
    Exact,
    MonteCarlo,
}

impl CalibrationMethod {
    pub fn name(self) -> &'static str {
        match self {
            CalibrationMethod::Asymptotic => "asymptotic",
            CalibrationMethod::Exact => "exact",
            CalibrationMethod::MonteCarlo => "monte_carlo",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "asymptotic" => Ok(CalibrationMethod::Asymptotic),
            "exact" => Ok(CalibrationMethod::Exact),
            "monte_carlo" => Ok(CalibrationMethod::MonteCarlo),
            _ => Err(Error::bad_arg("unknown calibration method")),
        }
    }
}

/// Null mean and standard deviation of a test statistic at sample count `n`
/// (so `N = n - 1`), with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct NullCalibration {
    pub kind: TestKind,
    pub n: usize,
    pub p: usize,
    pub m: f64,
    pub sigma: f64,
    pub method: CalibrationMethod,
    /// Zero unless `method == MonteCarlo`.
    pub reps: u64,
    /// Zero unless `method == MonteCarlo`.
    pub seed: u64,
}

impl NullCalibration {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::bad_arg("calibration sigma must be positive"));
        }
        SampleShape::new(self.n, self.p)?.check_kind(self.kind)
    }
}

/// Leading-order null variance `σ²_{H₀}`.
///
/// The log-determinant tests use `(N²/2)[-y - log(1-y)]` with `y = p/N`;
/// the trace tests use `p²/4`.
pub fn null_variance_asymptotic(kind: TestKind, n: usize, p: usize) -> Result<f64> {
    let shape = SampleShape::new(n, p)?;
    let n_eff = shape.n_eff() as f64;
    let pf = p as f64;
    match kind {
        TestKind::LrtIdentity | TestKind::LrtSphericity => {
            if p >= shape.n_eff() {
                return Err(Error::degenerate("asymptotic LRT variance requires p < N"));
            }
            let y = pf / n_eff;
            Ok(0.5 * n_eff * n_eff * (-y - libm::log(1.0 - y)))
        }
        TestKind::Nagao | TestKind::John => Ok(pf * pf / 4.0),
    }
}

/// Exact null mean where a closed form exists.
///
/// The Ledoit-Nagao-Wolf mean `(p/4)(1 - 2/N)` follows from the exact
/// second-moment identities. The log-determinant means use the standard
/// Wishart log-determinant identity (a digamma sum); they are tagged
/// [`CalibrationMethod::Exact`] but callers should cross-check them against
/// Monte Carlo, which the test suite does.
pub fn null_mean_exact(kind: TestKind, n: usize, p: usize) -> Result<f64> {
    let shape = SampleShape::new(n, p)?;
    shape.check_kind(kind)?;
    let n_eff = shape.n_eff();
    let nf = n_eff as f64;
    let pf = p as f64;
    match kind {
        TestKind::Nagao => Ok(0.25 * pf * (1.0 - 2.0 / nf)),
        TestKind::LrtIdentity => {
            // E log det S_Z = Σ ψ((N-i+1)/2) + p log(2/N)
            let mut acc = 0.0;
            for i in 1..=p {
                acc += digamma((n_eff - i + 1) as f64 / 2.0);
            }
            Ok(-0.5 * nf * (acc + pf * libm::log(2.0 / nf)))
        }
        TestKind::LrtSphericity => {
            let mut acc = 0.0;
            for i in 1..=p {
                acc += digamma((n_eff - i + 1) as f64 / 2.0);
            }
            Ok(0.5 * nf * (pf * digamma(nf * pf / 2.0) - acc - pf * libm::log(pf)))
        }
        TestKind::John => Err(Error::Unsupported(
            "no closed-form null mean for John's statistic; use Monte Carlo".into(),
        )),
    }
}

/// Mean-handling convention when computing a statistic from raw data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanMode {
    /// Rows are mean-zero observations; `S = N⁻¹XᵀX` with `N = rows`.
    Known,
    /// Rows are centered at the sample mean; `N = rows - 1`.
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub statistic: f64,
    pub zscore: f64,
    pub reject: bool,
}

/// Level-α decision: reject iff `(T(X) - m)/σ > z_α` (strict).
pub fn decide(
    kind: TestKind,
    x: &Matrix,
    calib: &NullCalibration,
    alpha: f64,
    mode: MeanMode,
) -> Result<Decision> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::bad_arg("alpha must lie in (0, 1)"));
    }
    calib.validate()?;
    if calib.kind != kind {
        return Err(Error::bad_arg(
            "calibration was computed for a different test",
        ));
    }
    let (s, n_eff, n) = match mode {
        MeanMode::Known => (sample_cov_known_mean(x), x.nrows(), x.nrows() + 1),
        MeanMode::Unknown => {
            let (_, s) = sample_cov_unknown_mean(x)?;
            (s, x.nrows() - 1, x.nrows())
        }
    };
    if x.ncols() != calib.p {
        return Err(Error::BadDimension {
            expected: calib.p,
            got: x.ncols(),
        });
    }
    if n != calib.n {
        return Err(Error::BadDimension {
            expected: calib.n,
            got: n,
        });
    }
    let t = statistic(kind, &s, n_eff)?;
    decide_statistic(t, calib, alpha)
}

/// Decision rule applied to an already-computed statistic value.
pub fn decide_statistic(t: f64, calib: &NullCalibration, alpha: f64) -> Result<Decision> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::bad_arg("alpha must lie in (0, 1)"));
    }
    let zscore = (t - calib.m) / calib.sigma;
    Ok(Decision {
        statistic: t,
        zscore,
        reject: zscore > z_alpha(alpha)?,
    })
}

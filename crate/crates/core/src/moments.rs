//! Exact Wishart trace moments and related deterministic bounds.
//!
//! `S_Z = N⁻¹ Σ Z_iZ_iᵀ` denotes the sample covariance of `N` standard
//! normal rows; the general-`Σ` moments refer to `Σ^{1/2} S_Z Σ^{1/2}`.

use crate::error::{Error, Result};
use crate::Matrix;

/// The closed-form trace moments provided by this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceMoment {
    /// `E tr(S²)`, general `Σ`.
    ETrS2,
    /// `E tr²(S)`, general `Σ`.
    ETr2S,
    /// `E tr(S³)`, identity `Σ` only.
    ETrS3,
    /// `E tr³(S)`, identity `Σ` only.
    ETr3S,
    /// `E tr(S)tr(S²)`, identity `Σ` only.
    ETrSTrS2,
    /// `E tr²(S²)`, identity `Σ` only.
    ETr2S2,
    /// `E tr(S)tr(S³)`, identity `Σ` only.
    ETrSTrS3,
}

impl TraceMoment {
    pub const ALL: [TraceMoment; 7] = [
        TraceMoment::ETrS2,
        TraceMoment::ETr2S,
        TraceMoment::ETrS3,
        TraceMoment::ETr3S,
        TraceMoment::ETrSTrS2,
        TraceMoment::ETr2S2,
        TraceMoment::ETrSTrS3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TraceMoment::ETrS2 => "E_tr_S2",
            TraceMoment::ETr2S => "E_tr2_S",
            TraceMoment::ETrS3 => "E_tr_S3",
            TraceMoment::ETr3S => "E_tr3_S",
            TraceMoment::ETrSTrS2 => "E_trS_trS2",
            TraceMoment::ETr2S2 => "E_tr2_S2",
            TraceMoment::ETrSTrS3 => "E_trS_trS3",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::UnknownMoment(name.into()))
    }

    /// The higher-order moments have closed forms only at `Σ = I`.
    pub fn identity_only(self) -> bool {
        !matches!(self, TraceMoment::ETrS2 | TraceMoment::ETr2S)
    }
}

/// Exact closed-form value of the named trace moment.
///
/// For [`TraceMoment::ETrS2`]/[`TraceMoment::ETr2S`] any PSD `Σ` is
/// accepted; the remaining moments require the identity.
pub fn wishart_trace_oracle(name: TraceMoment, sigma: &Matrix, n_eff: usize) -> Result<f64> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::BadDimension {
            expected: p,
            got: sigma.ncols(),
        });
    }
    if n_eff == 0 {
        return Err(Error::bad_arg("n_eff must be positive"));
    }
    let nf = n_eff as f64;
    if name.identity_only() {
        let is_identity = (sigma - Matrix::identity(p, p)).norm() <= 1e-12 * (p as f64);
        if !is_identity {
            return Err(Error::Unsupported(alloc::format!(
                "{} is available only for the identity covariance",
                name.name()
            )));
        }
        return Ok(identity_moment(name, n_eff, p));
    }
    let tr = sigma.trace();
    let tr2 = sigma.norm_squared(); // tr(Σ²) for symmetric Σ
    Ok(match name {
        TraceMoment::ETrS2 => (1.0 + 1.0 / nf) * tr2 + tr * tr / nf,
        TraceMoment::ETr2S => tr * tr + 2.0 * tr2 / nf,
        _ => unreachable!(),
    })
}

fn identity_moment(name: TraceMoment, n_eff: usize, p: usize) -> f64 {
    let nf = n_eff as f64;
    let pf = p as f64;
    let y = pf / nf;
    match name {
        TraceMoment::ETrS3 => pf * y * y + 3.0 * pf * y + pf + 3.0 * y * y + 3.0 * y + 4.0 * y / nf,
        TraceMoment::ETr3S => pf * pf * pf + 6.0 * pf * y + 8.0 * y / nf,
        TraceMoment::ETrSTrS2 => pf * pf * y + pf * pf + pf * y + 4.0 * (y * y + y) + 4.0 * y / nf,
        TraceMoment::ETr2S2 => {
            let n1 = nf - 1.0;
            let n2 = nf - 2.0;
            let n3 = nf - 3.0;
            (nf * pf * (pf + 2.0) * (pf + 4.0) * (pf + 6.0)
                + nf * n1 * (pf * (pf + 2.0)) * (pf * (pf + 2.0))
                + 2.0 * nf * n1 * 3.0 * pf * (pf + 2.0)
                + 4.0 * nf * n1 * pf * (pf + 2.0) * (pf + 4.0)
                + 4.0 * nf * n1 * n2 * pf * (pf + 2.0)
                + 2.0 * nf * n1 * n2 * pf * pf * (pf + 2.0)
                + nf * n1 * n2 * n3 * pf * pf)
                / (nf * nf * nf * nf)
        }
        TraceMoment::ETrSTrS3 => {
            let n1 = nf - 1.0;
            let n2 = nf - 2.0;
            let n3 = nf - 3.0;
            (nf * pf * (pf + 2.0) * (pf + 4.0) * (pf + 6.0)
                + nf * n1 * pf * pf * (pf + 2.0) * (pf + 4.0)
                + 3.0 * nf * n1 * pf * (pf + 2.0) * (pf + 2.0)
                + 3.0 * nf * n1 * pf * (pf + 2.0) * (pf + 4.0)
                + 3.0 * nf * n1 * n2 * pf * (pf + 2.0)
                + 3.0 * nf * n1 * n2 * pf * pf * (pf + 2.0)
                + nf * n1 * n2 * n3 * pf * pf)
                / (nf * nf * nf * nf)
        }
        TraceMoment::ETrS2 | TraceMoment::ETr2S => unreachable!(),
    }
}

/// Deterministic side of the fourth-moment inequality
/// `E‖ZA‖_F⁴ ≤ 4N‖AᵀA‖_F² + N²‖A‖_F⁴`.
pub fn fourth_moment_bound(a: &Matrix, n_eff: usize) -> f64 {
    let nf = n_eff as f64;
    let ata = a.tr_mul(a);
    let fro2 = a.norm_squared();
    4.0 * nf * ata.norm_squared() + nf * nf * fro2 * fro2
}

//! Standard normal CDF/quantile and the digamma function.
//!
//! The quantile uses Wichura's PPND16 rational approximations (absolute
//! error well below 1e-9 over the full open unit interval), which keeps the
//! crate free of a heavyweight distributions dependency while meeting the
//! accuracy needed for power predictions.

use crate::error::{Error, Result};

const SQRT_2: f64 = core::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

/// Standard normal CDF `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density `φ(x)`.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Inverse standard normal CDF: returns `x` with `Φ(x) = prob`.
pub fn normal_quantile(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::bad_arg("quantile probability must lie in (0, 1)"));
    }
    Ok(ppnd16(prob))
}

/// Upper-tail normal quantile `z_α`, defined by `P(N(0,1) > z_α) = α`.
pub fn z_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::bad_arg("alpha must lie in (0, 1)"));
    }
    // Φ⁻¹(1-α) evaluated as -Φ⁻¹(α) to keep full precision for small α.
    Ok(-ppnd16(alpha))
}

// Wichura's algorithm AS 241, PPND16 variant. Coefficients kept at full
// published precision.
#[allow(clippy::excessive_precision)]
fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.3871328727963666080e0,
        1.3314166789178437745e+2,
        1.9715909503065514427e+3,
        1.3731693765509461125e+4,
        4.5921953931549871457e+4,
        6.7265770927008700853e+4,
        3.3430575583588128105e+4,
        2.5090809287301226727e+3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.2313330701600911252e+1,
        6.8718700749205790830e+2,
        5.3941960214247511077e+3,
        2.1213794301586595867e+4,
        3.9307895800092710610e+4,
        2.8729085735721942674e+4,
        5.2264952788528545610e+3,
    ];
    const C: [f64; 8] = [
        1.42343711074968357734e0,
        4.63033784615654529590e0,
        5.76949722146069140550e0,
        3.64784832476320460504e0,
        1.27045825245236838258e0,
        2.41780725177450611770e-1,
        2.27238449892691845833e-2,
        7.74545014278341407640e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.05319162663775882187e0,
        1.67638483018380384940e0,
        6.89767334985100004550e-1,
        1.48103976427480074590e-1,
        1.51986665636164571966e-2,
        5.47593808499534494600e-4,
        1.05075007164441684324e-9,
    ];
    const E: [f64; 8] = [
        6.65790464350110377720e0,
        5.46378491116411436990e0,
        1.78482653991729133580e0,
        2.96560571828504891230e-1,
        2.65321895265761230930e-2,
        1.24266094738807843860e-3,
        2.71155556874348757815e-5,
        2.01033439929228813265e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.99832206555887937690e-1,
        1.36929880922735805310e-1,
        1.48753612908506148525e-2,
        7.86869131145613259100e-4,
        1.84631831751005468180e-5,
        1.42151175831644588870e-7,
        2.04426310338993978564e-15,
    ];

    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = libm::sqrt(-libm::log(r));
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Digamma function `ψ(x)` for `x > 0`.
///
/// Recurrence shift to `x >= 10`, then the asymptotic Bernoulli series.
pub fn digamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "digamma requires a positive argument");
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ψ(x) ~ ln x - 1/(2x) - Σ B_{2n} / (2n x^{2n})
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + libm::log(x) - 0.5 * inv - series
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cdf_spot_values() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.96), 0.9750021048517796, epsilon = 1e-14);
        assert_abs_diff_eq!(normal_cdf(-1.0), 0.15865525393145705, epsilon = 1e-14);
    }

    #[test]
    fn quantile_spot_values() {
        assert_abs_diff_eq!(z_alpha(0.05).unwrap(), 1.6448536269514722, epsilon = 1e-12);
        assert_abs_diff_eq!(z_alpha(0.025).unwrap(), 1.959963984540054, epsilon = 1e-12);
        assert_abs_diff_eq!(z_alpha(0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            normal_quantile(0.975).unwrap(),
            1.959963984540054,
            epsilon = 1e-12
        );
    }

    #[test]
    fn quantile_round_trip_to_1e9() {
        // The contract: absolute error <= 1e-9 over alpha in [1e-8, 1-1e-8].
        let mut alpha = 1e-8;
        while alpha < 1.0 - 1e-8 {
            let z = normal_quantile(alpha).unwrap();
            let back = normal_cdf(z);
            assert!(
                (back - alpha).abs() <= 1e-9 * (alpha.min(1.0 - alpha)).max(1e-6),
                "round trip failed at alpha={alpha}: got {back}"
            );
            alpha = (alpha * 1.37 + 1e-4).min(1.0 - 1e-8 / 2.0);
        }
    }

    proptest::proptest! {
        #[test]
        fn quantile_round_trip_anywhere(alpha in 1e-8f64..=1.0 - 1e-8) {
            let z = normal_quantile(alpha).unwrap();
            proptest::prop_assert!((normal_cdf(z) - alpha).abs() <= 1e-9);
        }

        #[test]
        fn quantile_is_monotone(a in 1e-6f64..0.999, delta in 1e-6f64..1e-3) {
            let lo = normal_quantile(a).unwrap();
            let hi = normal_quantile((a + delta).min(1.0 - 1e-9)).unwrap();
            proptest::prop_assert!(hi >= lo);
        }
    }

    #[test]
    fn quantile_matches_statrs() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        for &p in &[1e-8, 1e-4, 0.01, 0.3, 0.5, 0.72, 0.95, 0.999, 1.0 - 1e-8] {
            assert_abs_diff_eq!(
                normal_quantile(p).unwrap(),
                n.inverse_cdf(p),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn quantile_rejects_endpoints() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(z_alpha(-0.1).is_err());
    }

    #[test]
    fn digamma_known_values() {
        const EULER_GAMMA: f64 = 0.5772156649015329;
        assert_abs_diff_eq!(digamma(1.0), -EULER_GAMMA, epsilon = 1e-12);
        assert_abs_diff_eq!(
            digamma(0.5),
            -EULER_GAMMA - 2.0 * core::f64::consts::LN_2,
            epsilon = 1e-12
        );
        // ψ(n) = -γ + Σ_{k<n} 1/k
        assert_abs_diff_eq!(
            digamma(5.0),
            -EULER_GAMMA + 1.0 + 0.5 + 1.0 / 3.0 + 0.25,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(digamma(4.25), 1.3246832187604867, epsilon = 1e-12);
    }

    #[test]
    fn digamma_recurrence_property() {
        let mut x = 0.3;
        while x < 40.0 {
            assert_abs_diff_eq!(digamma(x + 1.0), digamma(x) + 1.0 / x, epsilon = 1e-11);
            x += 0.7;
        }
    }

    #[test]
    fn digamma_matches_statrs() {
        for &x in &[0.5, 1.0, 2.5, 7.0, 30.5, 200.0] {
            assert_abs_diff_eq!(
                digamma(x),
                statrs::function::gamma::digamma(x),
                epsilon = 1e-10
            );
        }
    }
}

//! Seeded Gaussian sampling with counter-based substreams.

use hdcov_core::model::sym_sqrt;
use hdcov_core::{Matrix, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Per-replicate RNG: the master seed fixes the key, the replicate index
/// selects one of ChaCha's 2^64 independent streams.
pub fn substream(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Deterministically derives a sub-seed for an auxiliary purpose (e.g. a
/// calibration stage that must not share streams with the data stage).
/// SplitMix64 finalizer.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal matrix filled row-major from the given stream.
pub fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut z = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            z[(i, j)] = StandardNormal.sample(rng);
        }
    }
    z
}

/// Draws `rows` observations of `N(μ, Σ)` as `Z·Σ^{1/2} + 1μᵀ` using a
/// precomputed symmetric square root.
pub fn gaussian_sample_with(
    sqrt_sigma: &Matrix,
    mu: Option<&[f64]>,
    rows: usize,
    rng: &mut ChaCha8Rng,
) -> Matrix {
    let p = sqrt_sigma.nrows();
    let z = standard_normal_matrix(rows, p, rng);
    let mut x = z * sqrt_sigma;
    if let Some(mu) = mu {
        for i in 0..rows {
            for j in 0..p {
                x[(i, j)] += mu[j];
            }
        }
    }
    x
}

/// Seeded convenience wrapper: derives `Σ^{1/2}` and samples from stream 0.
pub fn gaussian_sample(
    sigma: &Matrix,
    mu: Option<&[f64]>,
    rows: usize,
    seed: u64,
) -> Result<Matrix> {
    let root = sym_sqrt(sigma)?;
    let mut rng = substream(seed, 0);
    Ok(gaussian_sample_with(&root, mu, rows, &mut rng))
}

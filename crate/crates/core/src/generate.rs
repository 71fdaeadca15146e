//! Seeded test matrices.
//!
//! The generator is SplitMix64 (Steele, Lea and Flood), chosen because it is a
//! few lines in any language, so other implementations can reproduce the
//! exact inputs:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! return z ^ (z >> 31)
//! ```
//!
//! A uniform draw in `[0, 1)` is the top 53 bits of the output times `2^-53`.
//! The state starts at the seed.

use crate::matrix::Matrix;

/// SplitMix64 stream.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// `A = (R + R^T) / 2 + n I` with `R` uniform on `[0, 1)`.
///
/// `R` is drawn column by column. Every off-diagonal entry lies in `[0, 1)`,
/// so Gershgorin puts all eigenvalues at or above 1.
pub fn spd_generate(n: usize, seed: u64) -> Matrix {
    assert!(n >= 1, "matrix order must be positive");
    let mut rng = SplitMix64::new(seed);
    let mut r = vec![0.0; n * n];
    for x in r.iter_mut() {
        *x = rng.next_f64();
    }
    let mut a = Matrix::from_fn(n, n, |i, j| (r[i + j * n] + r[j + i * n]) / 2.0);
    for i in 0..n {
        a.as_mut_slice()[i + i * n] += n as f64;
    }
    a
}

/// [`spd_generate`] scaled so that its largest off-diagonal magnitude equals
/// `target`.
pub fn scaled_spd(n: usize, seed: u64, target: f64) -> Matrix {
    let mut a = spd_generate(n, seed);
    let off = a.max_abs_off_diagonal();
    if off > 0.0 {
        let s = target / off;
        a.as_mut_slice().iter_mut().for_each(|x| *x *= s);
    }
    a
}

/// Graded matrix `D S D` with `S = spd_generate(n, seed)` and
/// `d_i = 10^(lo + (hi - lo) i / (n - 1))`.
///
/// With the defaults of [`extreme_range_spd`] the leading diagonal entries of
/// the Cholesky factor sit below the smallest half-precision subnormal while
/// the trailing entries are many orders of magnitude larger.
pub fn graded_spd(n: usize, seed: u64, lo: f64, hi: f64) -> Matrix {
    let s = spd_generate(n, seed);
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    let d: Vec<f64> = (0..n).map(|i| 10f64.powf(lo + step * i as f64)).collect();
    Matrix::from_fn(n, n, |i, j| d[i] * s[(i, j)] * d[j])
}

/// Graded SPD matrix whose nonzero magnitudes span well over `10^11`.
pub fn extreme_range_spd(n: usize, seed: u64) -> Matrix {
    graded_spd(n, seed, -9.0, -3.0)
}

/// `max |a_ij| / min |a_ij|` over the nonzero entries; 1 for a zero matrix.
pub fn dynamic_range(a: &Matrix) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &x in a.as_slice() {
        if x != 0.0 {
            lo = lo.min(x.abs());
            hi = hi.max(x.abs());
        }
    }
    if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

//! Per-block range scaling for narrow formats.
//!
//! Before an off-diagonal block is converted to its storage format it is
//! divided by `alpha = max(1, max|b_ij| / r_max)`, which brings its largest
//! magnitude inside the format's range. After the block has been solved,
//! multiplying by `alpha` restores the original scale. Blocks already in range
//! get `alpha = 1` and are only rounded.

use crate::matrix::TileViewMut;
use crate::precision::{round_to, PrecisionLevel, RoundingStats};

/// Multiplicative scale removed from a block, always `>= 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ScaleFactor(f64);

impl ScaleFactor {
    pub const ONE: ScaleFactor = ScaleFactor(1.0);

    /// `None` unless `alpha` is finite and at least 1.
    pub fn new(alpha: f64) -> Option<Self> {
        (alpha.is_finite() && alpha >= 1.0).then_some(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_identity(self) -> bool {
        self.0 == 1.0
    }

    /// `max(1, max_abs / r_max(target))`.
    pub fn for_range(max_abs: f64, target: PrecisionLevel) -> Self {
        let alpha = max_abs / target.r_max();
        if alpha > 1.0 && alpha.is_finite() {
            Self(alpha)
        } else {
            Self::ONE
        }
    }
}

/// Result of [`quantize_block`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantized {
    pub scale: ScaleFactor,
    pub stats: RoundingStats,
}

/// Scales `block` into the range of `target` and rounds it there, in place.
///
/// The block must be finite.
pub fn quantize_block(mut block: TileViewMut<'_>, target: PrecisionLevel) -> Quantized {
    let scale = ScaleFactor::for_range(block.max_abs(), target);
    let mut stats = RoundingStats::default();
    let inv = scale.value();
    for j in 0..block.cols() {
        for x in block.col_mut(j) {
            let scaled = if scale.is_identity() { *x } else { *x / inv };
            let r = round_to(scaled, target);
            stats.observe(*x, r);
            *x = r;
        }
    }
    Quantized { scale, stats }
}

/// Multiplies `block` by `scale`, rounding each product to `level`.
pub fn dequantize_block(mut block: TileViewMut<'_>, scale: ScaleFactor, level: PrecisionLevel) -> RoundingStats {
    let mut stats = RoundingStats::default();
    if scale.is_identity() {
        return stats;
    }
    for j in 0..block.cols() {
        for x in block.col_mut(j) {
            let r = round_to(*x * scale.value(), level);
            stats.observe(*x, r);
            *x = r;
        }
    }
    stats
}

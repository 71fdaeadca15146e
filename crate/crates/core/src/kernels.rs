//! Base-case kernels: POTRF, TRSM (right, lower, transposed), SYRK (lower)
//! and the `C <- beta C + alpha A B^T` GEMM.
//!
//! Every kernel evaluates its inner products from zero and applies each one to
//! the destination entry once (the dot-product form of LAPACK's unblocked
//! Cholesky and of matrix-unit GEMM), rather than updating the destination
//! after every product.
//!
//! POTRF and TRSM round the result of every scalar operation to the kernel's
//! level. SYRK and GEMM follow the matrix-unit model in [`GemmPrecision`]:
//! operands are converted to the output format, products and sums are kept in
//! the accumulator format, and the final value is rounded to the output
//! format. For `Single` and `Double` the accumulator is the output format, so
//! every operation is rounded.
//!
//! Operands stored at a higher precision than the kernel level are converted
//! as they are read; no temporary copies are made.

use crate::flops::{Kernel, OpTally};
use crate::matrix::{TileView, TileViewMut};
use crate::precision::{Format, PrecisionLevel, F16, F32, F64};

/// Failure of a base-case kernel. Indices are 1-based rows of the root matrix.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("matrix is not positive definite: pivot {pivot:e} at row {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("triangular factor has diagonal {value:e} at row {index}")]
    SingularDiagonal { index: usize, value: f64 },
}

/// Output and accumulator formats of a SYRK or GEMM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GemmPrecision {
    pub output: PrecisionLevel,
    pub accumulator: PrecisionLevel,
    /// The destination has not been converted to `output` yet: it is read
    /// and written at the accumulator format. Operands are still converted
    /// to `output`.
    pub deferred_store: bool,
}

impl GemmPrecision {
    /// Accumulator used for half-precision products unless overridden.
    pub const DEFAULT_HALF_ACCUMULATOR: PrecisionLevel = PrecisionLevel::Single;

    /// Half output accumulates in `Single`; other levels accumulate in place.
    pub fn new(output: PrecisionLevel) -> Self {
        Self::with_half_accumulator(output, Self::DEFAULT_HALF_ACCUMULATOR)
    }

    /// Like [`GemmPrecision::new`] with a different accumulator for `Half`.
    pub fn with_half_accumulator(output: PrecisionLevel, half_accumulator: PrecisionLevel) -> Self {
        let accumulator = if output == PrecisionLevel::Half {
            half_accumulator
        } else {
            output
        };
        Self {
            output,
            accumulator,
            deferred_store: false,
        }
    }

    /// Same arithmetic, with the destination kept at the accumulator format.
    pub fn with_deferred_store(mut self) -> Self {
        self.deferred_store = true;
        self
    }
}

/// `A <- L` with `L L^T = A`, lower triangle only, every operation rounded to `level`.
///
/// The strictly upper triangle is neither read nor written. A pivot that is
/// not a positive finite number stops the factorization.
pub fn potrf_leaf(
    a: TileViewMut<'_>,
    level: PrecisionLevel,
    tally: &mut impl OpTally,
) -> Result<(), KernelError> {
    assert!(a.is_square(), "POTRF needs a square block");
    match level {
        PrecisionLevel::Half => potrf_impl::<F16>(a, tally),
        PrecisionLevel::Single => potrf_impl::<F32>(a, tally),
        PrecisionLevel::Double => potrf_impl::<F64>(a, tally),
    }
}

/// Rows handled per pass of a kernel; the partial sums live on the stack.
const CHUNK: usize = 64;

fn potrf_impl<F: Format>(mut a: TileViewMut<'_>, tally: &mut impl OpTally) -> Result<(), KernelError> {
    let n = a.rows();
    let mut acc = [0.0f64; CHUNK];
    for j in 0..n {
        let mut ljj = 0.0;
        for r0 in (j..n).step_by(CHUNK) {
            let rows = CHUNK.min(n - r0);
            let acc = &mut acc[..rows];
            acc.fill(0.0);
            for k in 0..j {
                let col = a.col(k);
                let ljk = col[j];
                for (s, &lik) in acc.iter_mut().zip(&col[r0..r0 + rows]) {
                    *s = F::round(*s + F::round(lik * ljk));
                }
            }
            let cj = a.col_mut(j);
            let mut first = 0;
            if r0 == j {
                let pivot = F::round(cj[j] - acc[0]);
                if !(pivot > 0.0 && pivot.is_finite()) {
                    return Err(KernelError::NotPositiveDefinite {
                        index: a.row_off() + j + 1,
                        pivot,
                    });
                }
                ljj = F::round(pivot.sqrt());
                cj[j] = ljj;
                first = 1;
            }
            for (x, &s) in cj[r0 + first..r0 + rows].iter_mut().zip(&acc[first..]) {
                *x = F::round(F::round(*x - s) / ljj);
            }
        }
        tally.record(Kernel::PotrfLeaf, F::LEVEL, ((n - j) * (2 * j + 1)) as u64);
    }
    Ok(())
}

/// `B <- B L^-T` for lower-triangular `L`, by forward substitution over the
/// columns of `B`. `L` is read converted to `level`.
pub fn trsm_leaf(
    b: TileViewMut<'_>,
    l: TileView<'_>,
    level: PrecisionLevel,
    tally: &mut impl OpTally,
) -> Result<(), KernelError> {
    assert!(l.is_square() && l.rows() == b.cols(), "TRSM shapes are not conformal");
    match level {
        PrecisionLevel::Half => trsm_impl::<F16>(b, l, tally),
        PrecisionLevel::Single => trsm_impl::<F32>(b, l, tally),
        PrecisionLevel::Double => trsm_impl::<F64>(b, l, tally),
    }
}

fn trsm_impl<F: Format>(
    mut b: TileViewMut<'_>,
    l: TileView<'_>,
    tally: &mut impl OpTally,
) -> Result<(), KernelError> {
    let (m, k) = (b.rows(), b.cols());
    let mut acc = [0.0f64; CHUNK];
    for j in 0..k {
        let ljj = F::round(l.get(j, j));
        if ljj == 0.0 || !ljj.is_finite() {
            return Err(KernelError::SingularDiagonal {
                index: l.row_off() + j + 1,
                value: ljj,
            });
        }
        for r0 in (0..m).step_by(CHUNK) {
            let rows = CHUNK.min(m - r0);
            let acc = &mut acc[..rows];
            acc.fill(0.0);
            for t in 0..j {
                let ljt = F::round(l.get(j, t));
                for (s, &bit) in acc.iter_mut().zip(&b.col(t)[r0..r0 + rows]) {
                    *s = F::round(*s + F::round(bit * ljt));
                }
            }
            for (x, &s) in b.col_mut(j)[r0..r0 + rows].iter_mut().zip(acc.iter()) {
                *x = F::round(F::round(F::round(*x) - s) / ljj);
            }
        }
        tally.record(Kernel::TrsmLeaf, F::LEVEL, ((2 * j + 1) * m) as u64);
    }
    Ok(())
}

/// Lower triangle of `C <- beta C + alpha A A^T`.
pub fn syrk_leaf(
    c: TileViewMut<'_>,
    a: TileView<'_>,
    alpha: f64,
    beta: f64,
    precision: GemmPrecision,
    tally: &mut impl OpTally,
) {
    syrk_dispatch(c, a, alpha, beta, precision, false, tally)
}

/// `syrk_leaf` for an `A` already representable in the output format.
pub(crate) fn syrk_leaf_representable(
    c: TileViewMut<'_>,
    a: TileView<'_>,
    alpha: f64,
    beta: f64,
    precision: GemmPrecision,
    tally: &mut impl OpTally,
) {
    syrk_dispatch(c, a, alpha, beta, precision, true, tally)
}

/// `C <- beta C + alpha A B^T`.
pub fn gemm_mixed(
    c: TileViewMut<'_>,
    a: TileView<'_>,
    b: TileView<'_>,
    alpha: f64,
    beta: f64,
    precision: GemmPrecision,
    tally: &mut impl OpTally,
) {
    gemm_dispatch(c, a, b, alpha, beta, precision, false, tally)
}

/// `gemm_mixed` for an `A` already representable in the output format.
/// `B` is still converted on read.
pub(crate) fn gemm_representable_a(
    c: TileViewMut<'_>,
    a: TileView<'_>,
    b: TileView<'_>,
    alpha: f64,
    beta: f64,
    precision: GemmPrecision,
    tally: &mut impl OpTally,
) {
    gemm_dispatch(c, a, b, alpha, beta, precision, true, tally)
}

macro_rules! dispatch_formats {
    ($precision:expr, $exact:expr, $func:ident, ($($arg:expr),*)) => {{
        use PrecisionLevel::*;
        macro_rules! go {
            ($o:ty, $acc:ty) => {
                if $exact {
                    $func::<$o, $acc, F64>($($arg),*)
                } else {
                    $func::<$o, $acc, $o>($($arg),*)
                }
            };
        }
        match ($precision.output, $precision.accumulator.max($precision.output)) {
            (Half, Half) => go!(F16, F16),
            (Half, Single) => go!(F16, F32),
            (Half, Double) => go!(F16, F64),
            (Single, Double) => go!(F32, F64),
            (Single, _) => go!(F32, F32),
            (Double, _) => go!(F64, F64),
        }
    }};
}

#[allow(clippy::too_many_arguments)]
fn gemm_dispatch(
    c: TileViewMut<'_>,
    a: TileView<'_>,
    b: TileView<'_>,
    alpha: f64,
    beta: f64,
    precision: GemmPrecision,
    a_exact: bool,
    tally: &mut impl OpTally,
) {
    assert!(
        c.rows() == a.rows() && c.cols() == b.rows() && a.cols() == b.cols(),
        "GEMM shapes are not conformal"
    );
    if alpha == 0.0 && beta == 1.0 {
        return;
    }
    dispatch_formats!(precision, a_exact, gemm_impl, (c, a, b, alpha, beta, precision.deferred_store, tally))
}

fn syrk_dispatch(
    c: TileViewMut<'_>,
    a: TileView<'_>,
    alpha: f64,
    beta: f64,
    precision: GemmPrecision,
    a_exact: bool,
    tally: &mut impl OpTally,
) {
    assert!(
        c.is_square() && c.rows() == a.rows(),
        "SYRK shapes are not conformal"
    );
    if alpha == 0.0 && beta == 1.0 {
        return;
    }
    dispatch_formats!(precision, a_exact, syrk_impl, (c, a, alpha, beta, precision.deferred_store, tally))
}

/// Writes `beta c + alpha dot` back to an output element: the inner product
/// is applied once, after it has been accumulated from zero.
#[inline(always)]
fn epilogue<O: Format, Acc: Format>(c: f64, dot: f64, alpha: f64, beta: f64, deferred: bool) -> f64 {
    let c = if deferred { Acc::round(c) } else { O::round(c) };
    let start = if beta == 0.0 {
        0.0
    } else if beta == 1.0 {
        c
    } else {
        Acc::round(beta * c)
    };
    let update = if alpha == 1.0 {
        dot
    } else if alpha == -1.0 {
        -dot
    } else {
        Acc::round(alpha * dot)
    };
    let out = Acc::round(start + update);
    if deferred {
        out
    } else {
        O::round(out)
    }
}

/// Scalar ops per output element beyond the `2k` multiply-adds.
fn scaling_ops(alpha: f64, beta: f64) -> u64 {
    u64::from(alpha != 1.0 && alpha != -1.0) + u64::from(beta != 0.0 && beta != 1.0)
}

fn gemm_impl<O: Format, Acc: Format, InA: Format>(
    mut c: TileViewMut<'_>,
    a: TileView<'_>,
    b: TileView<'_>,
    alpha: f64,
    beta: f64,
    deferred: bool,
    tally: &mut impl OpTally,
) {
    let (m, p, k) = (c.rows(), c.cols(), a.cols());
    let per_element = 2 * k as u64 + scaling_ops(alpha, beta);
    let mut acc = [0.0f64; CHUNK];
    for j in 0..p {
        for r0 in (0..m).step_by(CHUNK) {
            let rows = CHUNK.min(m - r0);
            let acc = &mut acc[..rows];
            acc.fill(0.0);
            if alpha != 0.0 {
                for l in 0..k {
                    let bjl = O::round(b.get(j, l));
                    for (s, &ail) in acc.iter_mut().zip(&a.col(l)[r0..r0 + rows]) {
                        *s = Acc::round(*s + Acc::round(InA::round(ail) * bjl));
                    }
                }
            }
            for (x, &s) in c.col_mut(j)[r0..r0 + rows].iter_mut().zip(acc.iter()) {
                *x = epilogue::<O, Acc>(*x, s, alpha, beta, deferred);
            }
        }
        tally.record(Kernel::Gemm, O::LEVEL, per_element * m as u64);
    }
}

fn syrk_impl<O: Format, Acc: Format, InA: Format>(
    mut c: TileViewMut<'_>,
    a: TileView<'_>,
    alpha: f64,
    beta: f64,
    deferred: bool,
    tally: &mut impl OpTally,
) {
    let (n, k) = (c.rows(), a.cols());
    let per_element = 2 * k as u64 + scaling_ops(alpha, beta);
    let mut acc = [0.0f64; CHUNK];
    for j in 0..n {
        for r0 in (j..n).step_by(CHUNK) {
            let rows = CHUNK.min(n - r0);
            let acc = &mut acc[..rows];
            acc.fill(0.0);
            if alpha != 0.0 {
                for l in 0..k {
                    let al = a.col(l);
                    let ajl = O::round(al[j]);
                    for (s, &ail) in acc.iter_mut().zip(&al[r0..r0 + rows]) {
                        *s = Acc::round(*s + Acc::round(InA::round(ail) * ajl));
                    }
                }
            }
            for (x, &s) in c.col_mut(j)[r0..r0 + rows].iter_mut().zip(acc.iter()) {
                *x = epilogue::<O, Acc>(*x, s, alpha, beta, deferred);
            }
        }
        tally.record(Kernel::SyrkLeaf, O::LEVEL, per_element * (n - j) as u64);
    }
}

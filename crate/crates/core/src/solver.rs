//! Nested recursive Cholesky over a [`PrecisionTree`].
//!
//! For a split `A = [A11 0; A21 A22]` the factorization runs
//!
//! 1. `tree_potrf(A11)`,
//! 2. scale `A21` into range and convert it to its level,
//! 3. `tree_trsm`: `A21 <- A21 L11^-T`,
//! 4. undo the scaling,
//! 5. `tree_syrk`: `A22 <- A22 - A21 A21^T`,
//! 6. `tree_potrf(A22)`.
//!
//! TRSM and SYRK recurse along the same tree, so every GEMM they issue lands
//! on a block with a known storage format. All updates happen in the caller's
//! buffer; the solver itself never allocates.

use std::fmt;

use crate::flops::OpTally;
use crate::kernels::{
    gemm_representable_a, potrf_leaf, syrk_leaf, syrk_leaf_representable, trsm_leaf, GemmPrecision,
    KernelError,
};
use crate::matrix::{TileView, TileViewMut, Window};
use crate::precision::{round_matrix, PrecisionConfig, PrecisionLevel, RoundingStats};
use crate::quantize::{dequantize_block, quantize_block, ScaleFactor};
use crate::tree::{build_tree, Block, ConversionLoss, PrecisionTree, PrecisionTreeNode};

/// Knobs of a factorization run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverOptions {
    /// Recursion stops once a diagonal block has at most this many rows.
    pub leaf_size: usize,
    /// Scale off-diagonal blocks into range before converting them.
    pub quantize: bool,
    /// Accumulator format for Half GEMM and SYRK.
    pub half_accumulator: PrecisionLevel,
    /// Restore the scale of `A21` before the SYRK consumes it. When false the
    /// SYRK runs on the scaled block with `alpha = -scale^2` and the block is
    /// restored afterwards.
    pub dequantize_before_syrk: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            leaf_size: 64,
            quantize: true,
            half_accumulator: GemmPrecision::DEFAULT_HALF_ACCUMULATOR,
            dequantize_before_syrk: true,
        }
    }
}

impl SolverOptions {
    pub fn with_leaf_size(mut self, leaf_size: usize) -> Self {
        self.leaf_size = leaf_size;
        self
    }

    pub fn with_quantize(mut self, quantize: bool) -> Self {
        self.quantize = quantize;
        self
    }
}

/// Where in the recursion a breakdown was detected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Down-conversion (and scaling) of an off-diagonal block.
    Convert,
    Trsm,
    Dequantize,
    Syrk,
    Potrf,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Convert => "down-conversion",
            Self::Trsm => "triangular solve",
            Self::Dequantize => "dequantization",
            Self::Syrk => "symmetric update",
            Self::Potrf => "diagonal factorization",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BreakdownCause {
    Overflow,
    Underflow,
    NotANumber,
}

impl fmt::Display for BreakdownCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Overflow => "overflow",
            Self::Underflow => "underflow",
            Self::NotANumber => "NaN",
        })
    }
}

/// Loss of representability that made the factorization meaningless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Breakdown {
    pub cause: BreakdownCause,
    pub stage: Stage,
    /// Block in which the failure surfaced.
    pub window: Window,
    pub level: PrecisionLevel,
    /// 1-based row of a failed pivot or unusable factor diagonal.
    pub row: Option<usize>,
    /// First block whose conversion flushed nonzero values to zero.
    pub origin: Option<ConversionLoss>,
}

impl fmt::Display for Breakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "numerical breakdown ({}) during {} of {} block {}",
            self.cause, self.stage, self.level, self.window
        )?;
        if let Some(row) = self.row {
            match self.stage {
                Stage::Trsm => write!(f, "; factor diagonal at row {row} is not usable in {}", self.level)?,
                _ => write!(f, "; pivot at row {row} lost positivity")?,
            }
        }
        if let Some(origin) = self.origin {
            write!(
                f,
                "; {} nonzero values were flushed to zero converting {} block {}",
                origin.stats.flushed_to_zero, origin.block.level, origin.block.window
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not positive definite: pivot {pivot:e} at row {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("triangular factor has diagonal {value:e} at row {index}")]
    SingularDiagonal { index: usize, value: f64 },
    #[error("{0}")]
    NumericalBreakdown(Breakdown),
}

impl From<KernelError> for SolverError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::NotPositiveDefinite { index, pivot } => Self::NotPositiveDefinite { index, pivot },
            KernelError::SingularDiagonal { index, value } => Self::SingularDiagonal { index, value },
        }
    }
}

/// Mutable state threaded through one factorization.
pub struct SolveContext<'t, T: OpTally> {
    options: SolverOptions,
    tally: &'t mut T,
    first_underflow: Option<ConversionLoss>,
}

impl<'t, T: OpTally> SolveContext<'t, T> {
    pub fn new(options: SolverOptions, tally: &'t mut T) -> Self {
        Self {
            options,
            tally,
            first_underflow: None,
        }
    }

    /// Seeds the context with losses recorded when the tree was built.
    pub fn for_tree(tree: &PrecisionTree, options: SolverOptions, tally: &'t mut T) -> Self {
        let mut ctx = Self::new(options, tally);
        for loss in tree.conversion_losses() {
            ctx.note(loss.block, loss.stats);
        }
        ctx
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn first_underflow(&self) -> Option<ConversionLoss> {
        self.first_underflow
    }

    fn note(&mut self, block: Block, stats: RoundingStats) {
        if self.first_underflow.is_none() && stats.flushed_to_zero > 0 {
            self.first_underflow = Some(ConversionLoss { block, stats });
        }
    }

    fn gemm(&self, level: PrecisionLevel) -> GemmPrecision {
        GemmPrecision::with_half_accumulator(level, self.options.half_accumulator)
    }

    fn breakdown(&self, cause: BreakdownCause, stage: Stage, block: Block, row: Option<usize>) -> SolverError {
        SolverError::NumericalBreakdown(Breakdown {
            cause,
            stage,
            window: block.window,
            level: block.level,
            row,
            origin: self.first_underflow,
        })
    }

    fn check_finite(&self, view: TileView<'_>, lower_only: bool, stage: Stage, block: Block) -> Result<(), SolverError> {
        let ok = if lower_only {
            view.lower_is_finite()
        } else {
            view.is_finite()
        };
        if ok {
            return Ok(());
        }
        let has_nan = (0..view.cols())
            .flat_map(|j| view.col(j).iter().skip(if lower_only { j } else { 0 }))
            .any(|x| x.is_nan());
        let cause = if has_nan {
            BreakdownCause::NotANumber
        } else {
            BreakdownCause::Overflow
        };
        Err(self.breakdown(cause, stage, block, None))
    }
}

/// Format of the largest block of a subtree, used to label diagnostics.
fn node_block(node: &PrecisionTreeNode) -> Block {
    match node {
        PrecisionTreeNode::Leaf { block } => *block,
        PrecisionTreeNode::Split { window, offdiag, .. } => Block {
            window: *window,
            level: offdiag.level,
        },
    }
}

/// Factors the region of `a` covered by `node` in place.
///
/// On success the lower triangle holds `L`, each block in its tree format.
pub fn tree_potrf<T: OpTally>(
    node: &PrecisionTreeNode,
    a: TileViewMut<'_>,
    ctx: &mut SolveContext<'_, T>,
) -> Result<(), SolverError> {
    debug_assert_eq!(a.window(), node.window());
    match node {
        PrecisionTreeNode::Leaf { block } => {
            ctx.check_finite(a.rb(), true, Stage::Potrf, *block)?;
            potrf_leaf(a, block.level, ctx.tally).map_err(|e| match e {
                KernelError::NotPositiveDefinite { index, pivot } if pivot.is_nan() => {
                    ctx.breakdown(BreakdownCause::NotANumber, Stage::Potrf, *block, Some(index))
                }
                KernelError::NotPositiveDefinite { index, pivot } if pivot.is_infinite() => {
                    ctx.breakdown(BreakdownCause::Overflow, Stage::Potrf, *block, Some(index))
                }
                KernelError::NotPositiveDefinite { index, .. } if ctx.first_underflow.is_some() => {
                    ctx.breakdown(BreakdownCause::Underflow, Stage::Potrf, *block, Some(index))
                }
                other => other.into(),
            })
        }
        PrecisionTreeNode::Split {
            n1,
            diag1,
            offdiag,
            diag2,
            ..
        } => {
            let (mut a11, mut a21, mut a22) = a.split_lower(*n1);
            tree_potrf(diag1, a11.rb_mut(), ctx)?;

            let level = offdiag.level;
            let scale = if ctx.options.quantize {
                let q = quantize_block(a21.rb_mut(), level);
                ctx.note(*offdiag, q.stats);
                q.scale
            } else {
                let stats = round_matrix(a21.rb_mut(), level);
                ctx.note(*offdiag, stats);
                ScaleFactor::ONE
            };
            ctx.check_finite(a21.rb(), false, Stage::Convert, *offdiag)?;

            tree_trsm(a21.rb_mut(), level, diag1, a11.rb(), ctx).map_err(|e| match e {
                SolverError::SingularDiagonal { index, value } => {
                    let cause = if value == 0.0 {
                        BreakdownCause::Underflow
                    } else if value.is_nan() {
                        BreakdownCause::NotANumber
                    } else {
                        BreakdownCause::Overflow
                    };
                    ctx.breakdown(cause, Stage::Trsm, *offdiag, Some(index))
                }
                other => other,
            })?;
            ctx.check_finite(a21.rb(), false, Stage::Trsm, *offdiag)?;

            let fold_scale = !ctx.options.dequantize_before_syrk && !scale.is_identity();
            if !fold_scale && !scale.is_identity() {
                let stats = dequantize_block(a21.rb_mut(), scale, level);
                ctx.note(*offdiag, stats);
                ctx.check_finite(a21.rb(), false, Stage::Dequantize, *offdiag)?;
            }
            let alpha = if fold_scale { -scale.value() * scale.value() } else { -1.0 };
            tree_syrk(diag2, a22.rb_mut(), a21.rb(), level, alpha, 1.0, ctx);
            if fold_scale {
                let stats = dequantize_block(a21.rb_mut(), scale, level);
                ctx.note(*offdiag, stats);
                ctx.check_finite(a21.rb(), false, Stage::Dequantize, *offdiag)?;
            }
            ctx.check_finite(a22.rb(), true, Stage::Syrk, node_block(diag2))?;

            tree_potrf(diag2, a22, ctx)
        }
    }
}

/// `B <- B L^-T` where `L` is the factored region described by `l_node`.
///
/// All arithmetic runs at `level`, the format of `B`; parts of `L` stored
/// more precisely are converted as they are read.
pub fn tree_trsm<T: OpTally>(
    b: TileViewMut<'_>,
    level: PrecisionLevel,
    l_node: &PrecisionTreeNode,
    l: TileView<'_>,
    ctx: &mut SolveContext<'_, T>,
) -> Result<(), SolverError> {
    debug_assert_eq!(l.window(), l_node.window());
    let (m, n) = (b.rows(), b.cols());
    match l_node {
        PrecisionTreeNode::Split {
            n1, diag1, diag2, ..
        } if m.min(n) > ctx.options.leaf_size => {
            let (mut b1, mut b2) = b.split_cols(*n1);
            let (l11, l21, l22) = l.split_lower(*n1);
            tree_trsm(b1.rb_mut(), level, diag1, l11, ctx)?;
            let precision = ctx.gemm(level);
            gemm_representable_a(b2.rb_mut(), b1.rb(), l21, -1.0, 1.0, precision, ctx.tally);
            tree_trsm(b2, level, diag2, l22, ctx)
        }
        _ => trsm_leaf(b, l, level, ctx.tally).map_err(SolverError::from),
    }
}

/// Lower triangle of `C <- beta C + alpha A A^T` over the diagonal subtree
/// `c_node`. `a_level` is the storage format of `A`.
///
/// Leaves run as SYRK at the leaf format; each off-diagonal piece of `C` is
/// one GEMM at that piece's format. When quantization is on, those pieces
/// have not been converted yet and the GEMM stores its accumulator value.
pub fn tree_syrk<T: OpTally>(
    c_node: &PrecisionTreeNode,
    c: TileViewMut<'_>,
    a: TileView<'_>,
    a_level: PrecisionLevel,
    alpha: f64,
    beta: f64,
    ctx: &mut SolveContext<'_, T>,
) {
    debug_assert_eq!(c.window(), c_node.window());
    match c_node {
        PrecisionTreeNode::Leaf { block } => {
            let precision = ctx.gemm(block.level);
            if a_level <= block.level {
                syrk_leaf_representable(c, a, alpha, beta, precision, ctx.tally);
            } else {
                syrk_leaf(c, a, alpha, beta, precision, ctx.tally);
            }
        }
        PrecisionTreeNode::Split {
            n1,
            diag1,
            offdiag,
            diag2,
            ..
        } => {
            let (c11, mut c21, c22) = c.split_lower(*n1);
            let (a1, a2) = a.split_rows(*n1);
            tree_syrk(diag1, c11, a1, a_level, alpha, beta, ctx);
            // with quantization on, C21 is converted only when its own solve begins
            let mut precision = ctx.gemm(offdiag.level);
            if ctx.options.quantize {
                precision = precision.with_deferred_store();
            }
            if a_level <= offdiag.level {
                gemm_representable_a(c21.rb_mut(), a2, a1, alpha, beta, precision, ctx.tally);
            } else {
                crate::kernels::gemm_mixed(c21.rb_mut(), a2, a1, alpha, beta, precision, ctx.tally);
            }
            tree_syrk(diag2, c22, a2, a_level, alpha, beta, ctx);
        }
    }
}

/// Builds the tree over `a`, converts its blocks and factors it in place.
///
/// Returns the tree describing the storage format of every block of `L`.
pub fn factorize<T: OpTally>(
    mut a: TileViewMut<'_>,
    config: &PrecisionConfig,
    options: &SolverOptions,
    tally: &mut T,
) -> Result<PrecisionTree, SolverError> {
    let tree = build_tree(a.rb_mut(), config, options.leaf_size, options.quantize)
        .map_err(|e| SolverError::InvalidArgument(e.to_string()))?;
    let mut ctx = SolveContext::for_tree(&tree, *options, tally);
    tree_potrf(tree.root(), a, &mut ctx)?;
    Ok(tree)
}

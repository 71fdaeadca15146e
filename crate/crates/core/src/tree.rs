//! The recursive partition of a symmetric matrix and its precision layout.
//!
//! A split at depth `d` cuts an `n x n` diagonal block at `n1 = n / 2` into a
//! leading diagonal block, the off-diagonal block below it, and a trailing
//! diagonal block. The off-diagonal block is stored in
//! `config.level_at(d)`; every leaf is stored in `config.leaf_level()`.
//!
//! Nodes only hold [`Window`]s: offsets and shapes in the root buffer. The
//! numbers themselves stay in the caller's matrix.

use std::fmt;

use crate::matrix::{TileViewMut, Window};
use crate::precision::{round_lower, round_matrix, PrecisionConfig, PrecisionLevel, RoundingStats};

/// A block of the partition together with the format it is stored in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub window: Window,
    pub level: PrecisionLevel,
}

/// One node of the decomposition tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PrecisionTreeNode {
    Leaf {
        block: Block,
    },
    Split {
        /// Diagonal window covered by this node.
        window: Window,
        /// Order of the leading diagonal block.
        n1: usize,
        depth: usize,
        diag1: Box<PrecisionTreeNode>,
        offdiag: Block,
        diag2: Box<PrecisionTreeNode>,
    },
}

impl PrecisionTreeNode {
    fn build(offset: usize, n: usize, depth: usize, leaf: usize, config: &PrecisionConfig) -> Self {
        if n <= leaf {
            return Self::Leaf {
                block: Block {
                    window: Window::diagonal(offset, n),
                    level: config.leaf_level(),
                },
            };
        }
        let n1 = n / 2;
        let n2 = n - n1;
        Self::Split {
            window: Window::diagonal(offset, n),
            n1,
            depth,
            diag1: Box::new(Self::build(offset, n1, depth + 1, leaf, config)),
            offdiag: Block {
                window: Window::new(offset + n1, offset, n2, n1),
                level: config.level_at(depth),
            },
            diag2: Box::new(Self::build(offset + n1, n2, depth + 1, leaf, config)),
        }
    }

    /// Diagonal window covered by the node.
    pub fn window(&self) -> Window {
        match self {
            Self::Leaf { block } => block.window,
            Self::Split { window, .. } => *window,
        }
    }

    /// Order of the diagonal block.
    pub fn order(&self) -> usize {
        self.window().rows
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Self::Leaf { .. })
    }

    /// Leaf blocks, left to right.
    pub fn leaves(&self) -> Vec<Block> {
        let mut out = Vec::new();
        self.visit(&mut |node| {
            if let Self::Leaf { block } = node {
                out.push(*block);
            }
        });
        out
    }

    /// Off-diagonal blocks in pre-order.
    pub fn off_diagonal_blocks(&self) -> Vec<Block> {
        let mut out = Vec::new();
        self.visit(&mut |node| {
            if let Self::Split { offdiag, .. } = node {
                out.push(*offdiag);
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&PrecisionTreeNode)) {
        f(self);
        if let Self::Split { diag1, diag2, .. } = self {
            diag1.visit(f);
            diag2.visit(f);
        }
    }

    pub fn node_count(&self) -> usize {
        let mut count = 0;
        self.visit(&mut |_| count += 1);
        count
    }

    /// Number of split levels below this node.
    pub fn height(&self) -> usize {
        match self {
            Self::Leaf { .. } => 0,
            Self::Split { diag1, diag2, .. } => 1 + diag1.height().max(diag2.height()),
        }
    }
}

/// Errors from [`build_tree`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Values pushed out of range when a block was rounded while the tree was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConversionLoss {
    pub block: Block,
    pub stats: RoundingStats,
}

/// Decomposition tree over an `n x n` matrix.
#[derive(Clone, Debug)]
pub struct PrecisionTree {
    root: PrecisionTreeNode,
    config: PrecisionConfig,
    leaf_size: usize,
    losses: Vec<ConversionLoss>,
}

impl PrecisionTree {
    /// Builds the partition for an `n x n` matrix without touching any data.
    pub fn plan(n: usize, config: &PrecisionConfig, leaf_size: usize) -> Result<Self, TreeError> {
        if n == 0 {
            return Err(TreeError::InvalidArgument("matrix order must be at least 1".into()));
        }
        if leaf_size == 0 {
            return Err(TreeError::InvalidArgument("leaf size must be at least 1".into()));
        }
        Ok(Self {
            root: PrecisionTreeNode::build(0, n, 0, leaf_size, config),
            config: config.clone(),
            leaf_size,
            losses: Vec::new(),
        })
    }

    pub fn root(&self) -> &PrecisionTreeNode {
        &self.root
    }

    pub fn config(&self) -> &PrecisionConfig {
        &self.config
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn order(&self) -> usize {
        self.root.order()
    }

    /// Blocks whose build-time rounding flushed values to zero or overflowed.
    pub fn conversion_losses(&self) -> &[ConversionLoss] {
        &self.losses
    }

    fn record(&mut self, block: Block, stats: RoundingStats) {
        if !stats.is_lossless_in_range() {
            self.losses.push(ConversionLoss { block, stats });
        }
    }
}

impl fmt::Display for PrecisionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn walk(node: &PrecisionTreeNode, indent: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let pad = "  ".repeat(indent);
            match node {
                PrecisionTreeNode::Leaf { block } => {
                    writeln!(f, "{pad}leaf {} [{}]", block.window.rows, block.level)
                }
                PrecisionTreeNode::Split {
                    window,
                    n1,
                    depth,
                    diag1,
                    offdiag,
                    diag2,
                } => {
                    writeln!(
                        f,
                        "{pad}split {} -> ({}, {}) depth {} offdiag {}x{} [{}]",
                        window.rows,
                        n1,
                        window.rows - n1,
                        depth,
                        offdiag.window.rows,
                        offdiag.window.cols,
                        offdiag.level
                    )?;
                    walk(diag1, indent + 1, f)?;
                    walk(diag2, indent + 1, f)
                }
            }
        }
        walk(&self.root, 0, f)
    }
}

/// Partitions the square matrix behind `a` and rounds its lower triangle in
/// place to the formats of the tree.
///
/// Leaves are rounded to the leaf level. Off-diagonal blocks are rounded to
/// their own level unless `defer_off_diagonal` is set, in which case their
/// down-conversion is left to the per-block quantization step that runs
/// right before each block's triangular solve.
pub fn build_tree(
    mut a: TileViewMut<'_>,
    config: &PrecisionConfig,
    leaf_size: usize,
    defer_off_diagonal: bool,
) -> Result<PrecisionTree, TreeError> {
    if !a.is_square() {
        return Err(TreeError::InvalidArgument(format!(
            "matrix must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let mut tree = PrecisionTree::plan(a.rows(), config, leaf_size)?;
    let (row0, col0) = (a.row_off(), a.col_off());
    let local = |w: Window| (w.row_off - row0, w.col_off - col0, w.rows, w.cols);

    for block in tree.root.leaves() {
        let (r, c, m, n) = local(block.window);
        let stats = round_lower(a.rb_mut().submatrix_mut(r, c, m, n), block.level);
        tree.record(block, stats);
    }
    if !defer_off_diagonal {
        for block in tree.root.off_diagonal_blocks() {
            let (r, c, m, n) = local(block.window);
            let stats = round_matrix(a.rb_mut().submatrix_mut(r, c, m, n), block.level);
            tree.record(block, stats);
        }
    }
    Ok(tree)
}

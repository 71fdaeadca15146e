//! Nested recursive mixed-precision Cholesky factorization.
//!
//! Every value lives in an `f64`; narrower formats are emulated by rounding
//! to nearest-even after each operation. A [`PrecisionConfig`] assigns a
//! storage format to the off-diagonal block of every recursion level, and
//! [`factorize`] computes `A = L L^T` in place with each block of `L` held in
//! its format.
//!
//! ```
//! use treechol::{factorize, parse_precision_config, spd_generate, factorization_error, NoTally, SolverOptions};
//!
//! let a = spd_generate(96, 1);
//! let mut l = a.clone();
//! let config = parse_precision_config("[F16, F32]").unwrap();
//! factorize(l.view_mut(), &config, &SolverOptions::default().with_leaf_size(16), &mut NoTally).unwrap();
//! assert!(factorization_error(&a, &l) < 1e-3);
//! ```

pub mod bench;
pub mod flops;
pub mod generate;
pub mod kernels;
pub mod matrix;
pub mod metrics;
pub mod mtx;
pub mod precision;
pub mod quantize;
pub mod report;
pub mod solver;
pub mod tree;

pub use flops::{flop_breakdown, FlopBreakdown, Kernel, NoTally, OpTally};
pub use generate::{dynamic_range, extreme_range_spd, scaled_spd, spd_generate};
pub use matrix::{Matrix, TileView, TileViewMut, Window};
pub use metrics::{digits, factorization_error};
pub use mtx::{load_matrix_market, parse_matrix_market, MtxError};
pub use precision::{parse_precision_config, round_to, ConfigError, PrecisionConfig, PrecisionLevel, RoundingStats};
pub use report::{accuracy_sweep, run_factorization, FactorReport, Status};
pub use quantize::{dequantize_block, quantize_block, ScaleFactor};
pub use solver::{
    factorize, tree_potrf, tree_syrk, tree_trsm, Breakdown, BreakdownCause, SolveContext, SolverError, SolverOptions,
    Stage,
};
pub use tree::{build_tree, Block, PrecisionTree, PrecisionTreeNode};

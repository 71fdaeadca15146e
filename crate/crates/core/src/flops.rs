//! Flop accounting.
//!
//! Two independent routes produce a [`FlopBreakdown`]: [`flop_breakdown`]
//! unfolds the recursion symbolically from the matrix size alone, and the
//! kernels report the scalar operations they actually execute through an
//! [`OpTally`]. A multiply-add pair counts as two flops, a division or a
//! square root as one.

use std::fmt;

use crate::precision::{PrecisionConfig, PrecisionLevel};

/// Base-case kernel classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kernel {
    PotrfLeaf,
    TrsmLeaf,
    SyrkLeaf,
    Gemm,
}

impl Kernel {
    pub const ALL: [Kernel; 4] = [Self::PotrfLeaf, Self::TrsmLeaf, Self::SyrkLeaf, Self::Gemm];

    pub const fn index(self) -> usize {
        match self {
            Self::PotrfLeaf => 0,
            Self::TrsmLeaf => 1,
            Self::SyrkLeaf => 2,
            Self::Gemm => 3,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Self::PotrfLeaf => "POTRF-leaf",
            Self::TrsmLeaf => "TRSM-leaf",
            Self::SyrkLeaf => "SYRK-leaf",
            Self::Gemm => "GEMM",
        }
    }
}

/// Receives operation counts from the kernels.
pub trait OpTally {
    fn record(&mut self, kernel: Kernel, level: PrecisionLevel, flops: u64);
}

/// Discards all counts.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoTally;

impl OpTally for NoTally {
    #[inline(always)]
    fn record(&mut self, _: Kernel, _: PrecisionLevel, _: u64) {}
}

/// Flops per precision level, per kernel, and per (level, kernel) cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlopBreakdown {
    cells: [[u64; 4]; 3],
}

impl OpTally for FlopBreakdown {
    #[inline]
    fn record(&mut self, kernel: Kernel, level: PrecisionLevel, flops: u64) {
        self.cells[level.index()][kernel.index()] += flops;
    }
}

impl FlopBreakdown {
    pub fn cell(&self, level: PrecisionLevel, kernel: Kernel) -> u64 {
        self.cells[level.index()][kernel.index()]
    }

    pub fn by_level(&self, level: PrecisionLevel) -> u64 {
        self.cells[level.index()].iter().sum()
    }

    pub fn by_kernel(&self, kernel: Kernel) -> u64 {
        self.cells.iter().map(|row| row[kernel.index()]).sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    /// Share of all flops executed at `level`, in `[0, 1]`.
    pub fn level_fraction(&self, level: PrecisionLevel) -> f64 {
        ratio(self.by_level(level), self.total())
    }

    pub fn kernel_fraction(&self, kernel: Kernel) -> f64 {
        ratio(self.by_kernel(kernel), self.total())
    }

    /// Share of flops spent outside the diagonal POTRF leaves
    /// (TRSM leaves, SYRK leaves and GEMMs).
    pub fn off_diagonal_fraction(&self) -> f64 {
        1.0 - self.kernel_fraction(Kernel::PotrfLeaf)
    }
}

fn ratio(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

impl fmt::Display for FlopBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let total = self.total();
        writeln!(f, "{:<12} {:>22} {:>8}", "precision", "flops", "share")?;
        for level in PrecisionLevel::ALL {
            let v = self.by_level(level);
            writeln!(f, "{:<12} {:>22} {:>7.2}%", level.label(), v, 100.0 * ratio(v, total))?;
        }
        writeln!(f)?;
        writeln!(f, "{:<12} {:>22} {:>8}", "kernel", "flops", "share")?;
        for kernel in Kernel::ALL {
            let v = self.by_kernel(kernel);
            writeln!(f, "{:<12} {:>22} {:>7.2}%", kernel.name(), v, 100.0 * ratio(v, total))?;
        }
        writeln!(f)?;
        write!(f, "{:<12} {:>22}", "total", total)
    }
}

/// Classical Cholesky flop count `n^3/3 + n^2/2 + n/6`.
pub const fn cholesky_flops(n: u64) -> u64 {
    n * (n + 1) * (2 * n + 1) / 6
}

/// TRSM leaf solving an `m x k` block against a `k x k` triangle.
pub const fn trsm_flops(m: u64, k: u64) -> u64 {
    m * k * k
}

/// SYRK leaf updating the lower half of an `m x m` block with rank `k`.
pub const fn syrk_flops(m: u64, k: u64) -> u64 {
    m * (m + 1) * k
}

/// GEMM of shape `m x p` with inner dimension `k`.
pub const fn gemm_flops(m: u64, k: u64, p: u64) -> u64 {
    2 * m * k * p
}

/// Symbolic flop distribution of a full factorization of an `n x n` matrix
/// with leaf size `leaf` under `config`. No arithmetic on matrix data.
pub fn flop_breakdown(n: usize, leaf: usize, config: &PrecisionConfig) -> FlopBreakdown {
    let mut out = FlopBreakdown::default();
    if n == 0 {
        return out;
    }
    let planner = Planner {
        leaf: leaf.max(1) as u64,
        config,
    };
    planner.potrf(n as u64, 0, &mut out);
    out
}

struct Planner<'c> {
    leaf: u64,
    config: &'c PrecisionConfig,
}

impl Planner<'_> {
    fn potrf(&self, n: u64, depth: usize, out: &mut FlopBreakdown) {
        if n <= self.leaf {
            out.record(Kernel::PotrfLeaf, self.config.leaf_level(), cholesky_flops(n));
            return;
        }
        let n1 = n / 2;
        let n2 = n - n1;
        let level = self.config.level_at(depth);
        self.potrf(n1, depth + 1, out);
        self.trsm(n2, n1, level, out);
        self.syrk(n2, n1, depth + 1, out);
        self.potrf(n2, depth + 1, out);
    }

    /// `B (m x n) <- B L^-T`, every piece executed at the block's `level`.
    fn trsm(&self, m: u64, n: u64, level: PrecisionLevel, out: &mut FlopBreakdown) {
        if m.min(n) <= self.leaf {
            out.record(Kernel::TrsmLeaf, level, trsm_flops(m, n));
            return;
        }
        let n1 = n / 2;
        let n2 = n - n1;
        self.trsm(m, n1, level, out);
        out.record(Kernel::Gemm, level, gemm_flops(m, n1, n2));
        self.trsm(m, n2, level, out);
    }

    /// Rank-`k` update of the `n x n` diagonal block at `depth`.
    fn syrk(&self, n: u64, k: u64, depth: usize, out: &mut FlopBreakdown) {
        if n <= self.leaf {
            out.record(Kernel::SyrkLeaf, self.config.leaf_level(), syrk_flops(n, k));
            return;
        }
        let n1 = n / 2;
        let n2 = n - n1;
        self.syrk(n1, k, depth + 1, out);
        out.record(Kernel::Gemm, self.config.level_at(depth), gemm_flops(n2, k, n1));
        self.syrk(n2, k, depth + 1, out);
    }
}

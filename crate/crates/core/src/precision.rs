//! Floating-point formats and their emulation on an `f64` substrate.
//!
//! Every value in the library is physically an `f64`. A [`PrecisionLevel`]
//! tag says which IEEE 754 binary format the value is supposed to live in,
//! and [`round_to`] snaps an `f64` to the nearest value of that format using
//! round-to-nearest-even, with gradual underflow and overflow to infinity.
//!
//! Rounding an exact `f64` result of `+ - * / sqrt` on operands of a narrower
//! format gives the same answer as doing the operation natively in the narrow
//! format, because `f64` carries more than `2p + 2` significand bits for both
//! binary16 (`p = 11`) and binary32 (`p = 24`).

use std::fmt;
use std::str::FromStr;

use crate::matrix::TileViewMut;

/// One of the three IEEE 754 binary formats the solver can store blocks in.
///
/// The derived ordering is by precision: `Half < Single < Double`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrecisionLevel {
    /// binary16
    Half,
    /// binary32
    Single,
    /// binary64
    Double,
}

const HALF_MAX: f64 = 65504.0;
// Halfway between 65504 and 2^16; ties go to the even significand (2^16),
// which overflows.
const HALF_OVERFLOW_THRESHOLD: f64 = 65520.0;
const HALF_MIN_NORMAL: f64 = 6.103_515_625e-5; // 2^-14
const HALF_SUBNORMAL_QUANTUM: f64 = 5.960_464_477_539_063e-8; // 2^-24
const TWO_POW_24: f64 = 16_777_216.0;

impl PrecisionLevel {
    pub const ALL: [PrecisionLevel; 3] = [Self::Half, Self::Single, Self::Double];

    /// Largest finite representable magnitude.
    pub const fn r_max(self) -> f64 {
        match self {
            Self::Half => HALF_MAX,
            Self::Single => f32::MAX as f64,
            Self::Double => f64::MAX,
        }
    }

    /// Unit roundoff `u = 2^-p` for round-to-nearest.
    pub const fn unit_roundoff(self) -> f64 {
        match self {
            Self::Half => 4.882_812_5e-4,                 // 2^-11
            Self::Single => 5.960_464_477_539_063e-8,     // 2^-24
            Self::Double => 1.110_223_024_625_156_5e-16, // 2^-53
        }
    }

    /// Smallest positive normal value.
    pub const fn min_positive_normal(self) -> f64 {
        match self {
            Self::Half => HALF_MIN_NORMAL,
            Self::Single => f32::MIN_POSITIVE as f64,
            Self::Double => f64::MIN_POSITIVE,
        }
    }

    /// Short label used in configuration strings (`F16`, `F32`, `F64`).
    pub const fn label(self) -> &'static str {
        match self {
            Self::Half => "F16",
            Self::Single => "F32",
            Self::Double => "F64",
        }
    }

    pub const fn bits(self) -> u32 {
        match self {
            Self::Half => 16,
            Self::Single => 32,
            Self::Double => 64,
        }
    }

    /// Index into per-level arrays, `Half = 0`.
    pub const fn index(self) -> usize {
        match self {
            Self::Half => 0,
            Self::Single => 1,
            Self::Double => 2,
        }
    }

    #[inline]
    pub fn round(self, value: f64) -> f64 {
        round_to(value, self)
    }
}

impl fmt::Display for PrecisionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Nearest value of `level` to `value`, ties to even.
///
/// Magnitudes that round past `r_max` become infinities, subnormals of the
/// target format are kept, NaN passes through. Rounding to `Double` is the
/// identity.
#[inline]
pub fn round_to(value: f64, level: PrecisionLevel) -> f64 {
    match level {
        PrecisionLevel::Half => round_half(value),
        PrecisionLevel::Single => round_single(value),
        PrecisionLevel::Double => value,
    }
}

#[inline]
pub(crate) fn round_single(value: f64) -> f64 {
    // `as` is round-to-nearest-even with overflow to infinity.
    value as f32 as f64
}

#[inline]
pub(crate) fn round_half(value: f64) -> f64 {
    let magnitude = value.abs();
    if magnitude.is_nan() {
        return value;
    }
    if magnitude >= HALF_OVERFLOW_THRESHOLD {
        return f64::INFINITY.copysign(value);
    }
    if magnitude >= HALF_MIN_NORMAL {
        // Keep the top 10 of the 52 stored fraction bits. A carry out of the
        // fraction correctly bumps the exponent.
        const DROPPED: u32 = 52 - 10;
        const MASK: u64 = (1 << DROPPED) - 1;
        let bits = value.to_bits();
        let lsb = (bits >> DROPPED) & 1;
        let rounded = (bits + (MASK >> 1) + lsb) & !MASK;
        f64::from_bits(rounded)
    } else {
        // Subnormal range has a fixed quantum of 2^-24; both scalings are exact.
        (value * TWO_POW_24).round_ties_even() * HALF_SUBNORMAL_QUANTUM
    }
}

/// Counts of values that left the representable range while a block was
/// converted to a narrower format.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundingStats {
    /// Nonzero finite values that became (signed) zero.
    pub flushed_to_zero: usize,
    /// Finite values that became infinite.
    pub overflowed: usize,
}

impl RoundingStats {
    pub fn is_lossless_in_range(&self) -> bool {
        self.flushed_to_zero == 0 && self.overflowed == 0
    }

    pub(crate) fn observe(&mut self, before: f64, after: f64) {
        if after == 0.0 && before != 0.0 {
            self.flushed_to_zero += 1;
        } else if after.is_infinite() && before.is_finite() {
            self.overflowed += 1;
        }
    }
}

/// Rounds every element of `tile` to `level` in place.
pub fn round_matrix(mut tile: TileViewMut<'_>, level: PrecisionLevel) -> RoundingStats {
    let mut stats = RoundingStats::default();
    if level == PrecisionLevel::Double {
        return stats;
    }
    for j in 0..tile.cols() {
        for x in tile.col_mut(j) {
            let r = round_to(*x, level);
            stats.observe(*x, r);
            *x = r;
        }
    }
    stats
}

/// Rounds the lower triangle (diagonal included) of a square tile in place.
pub fn round_lower(mut tile: TileViewMut<'_>, level: PrecisionLevel) -> RoundingStats {
    let mut stats = RoundingStats::default();
    if level == PrecisionLevel::Double {
        return stats;
    }
    for j in 0..tile.cols() {
        for x in &mut tile.col_mut(j)[j..] {
            let r = round_to(*x, level);
            stats.observe(*x, r);
            *x = r;
        }
    }
    stats
}

/// Compile-time rounding mode used to monomorphize the kernels' inner loops.
pub(crate) trait Format {
    const LEVEL: PrecisionLevel;
    fn round(x: f64) -> f64;
}

pub(crate) struct F16;
pub(crate) struct F32;
pub(crate) struct F64;

impl Format for F16 {
    const LEVEL: PrecisionLevel = PrecisionLevel::Half;
    #[inline(always)]
    fn round(x: f64) -> f64 {
        round_half(x)
    }
}

impl Format for F32 {
    const LEVEL: PrecisionLevel = PrecisionLevel::Single;
    #[inline(always)]
    fn round(x: f64) -> f64 {
        round_single(x)
    }
}

impl Format for F64 {
    const LEVEL: PrecisionLevel = PrecisionLevel::Double;
    #[inline(always)]
    fn round(x: f64) -> f64 {
        x
    }
}

/// Errors from [`PrecisionConfig`] parsing.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error in precision config {input:?}: {reason}")]
    Syntax { input: String, reason: String },
    #[error(
        "invalid precision config {input:?}: levels must not lose precision from outer to inner \
         ({outer} at level {index} is followed by {inner})"
    )]
    Validation {
        input: String,
        index: usize,
        outer: PrecisionLevel,
        inner: PrecisionLevel,
    },
}

/// Precision assignment by recursion depth, outermost first.
///
/// Entry `d` is the format of the off-diagonal block split off at depth `d`.
/// The last entry also covers every deeper level and all diagonal leaves.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrecisionConfig {
    levels: Vec<PrecisionLevel>,
}

impl PrecisionConfig {
    /// Validates that `levels` is non-empty and non-decreasing in precision.
    pub fn new(levels: Vec<PrecisionLevel>) -> Result<Self, ConfigError> {
        Self::validated(levels, None)
    }

    /// Single-level configuration, e.g. `Pure F32`.
    pub fn pure(level: PrecisionLevel) -> Self {
        Self { levels: vec![level] }
    }

    fn validated(levels: Vec<PrecisionLevel>, input: Option<&str>) -> Result<Self, ConfigError> {
        let show = || input.map(str::to_owned).unwrap_or_else(|| format!("{levels:?}"));
        if levels.is_empty() {
            return Err(ConfigError::Syntax {
                input: show(),
                reason: "empty level list".into(),
            });
        }
        if let Some(i) = levels.windows(2).position(|w| w[0] > w[1]) {
            return Err(ConfigError::Validation {
                input: show(),
                index: i,
                outer: levels[i],
                inner: levels[i + 1],
            });
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[PrecisionLevel] {
        &self.levels
    }

    /// Number of explicitly listed levels.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Level of the off-diagonal block at recursion depth `depth`, saturating
    /// at the last entry.
    pub fn level_at(&self, depth: usize) -> PrecisionLevel {
        self.levels[depth.min(self.levels.len() - 1)]
    }

    /// Level of every diagonal leaf.
    pub fn leaf_level(&self) -> PrecisionLevel {
        *self.levels.last().expect("config is non-empty")
    }

    pub fn is_pure(&self) -> bool {
        self.levels.iter().all(|&l| l == self.levels[0])
    }

    pub fn uses(&self, level: PrecisionLevel) -> bool {
        self.levels.contains(&level)
    }
}

/// Canonical form: `Pure F32` for single-level configs, `[F16, F32]` otherwise.
impl fmt::Display for PrecisionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.levels.len() == 1 {
            return write!(f, "Pure {}", self.levels[0]);
        }
        f.write_str("[")?;
        for (i, level) in self.levels.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(level.label())?;
        }
        f.write_str("]")
    }
}

impl FromStr for PrecisionConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_precision_config(s)
    }
}

fn parse_format(token: &str) -> Option<PrecisionLevel> {
    let t = token.to_ascii_uppercase();
    let digits = t.strip_prefix("FP").or_else(|| t.strip_prefix('F'))?;
    match digits {
        "16" => Some(PrecisionLevel::Half),
        "32" => Some(PrecisionLevel::Single),
        "64" => Some(PrecisionLevel::Double),
        _ => None,
    }
}

/// Parses `[F16, F32]`-style lists and `Pure F64`-style single levels.
///
/// Tokens are `F16`/`FP16`, `F32`/`FP32`, `F64`/`FP64`, case-insensitive.
pub fn parse_precision_config(text: &str) -> Result<PrecisionConfig, ConfigError> {
    let syntax = |reason: &str| ConfigError::Syntax {
        input: text.to_owned(),
        reason: reason.to_owned(),
    };
    let trimmed = text.trim();

    if let Some(body) = trimmed.strip_prefix('[') {
        let body = body
            .strip_suffix(']')
            .ok_or_else(|| syntax("missing closing ']'"))?;
        if body.trim().is_empty() {
            return Err(syntax("empty level list"));
        }
        let mut levels = Vec::new();
        for token in body.split(',') {
            let token = token.trim();
            if token.is_empty() {
                return Err(syntax("empty entry in level list"));
            }
            let level = parse_format(token)
                .ok_or_else(|| syntax(&format!("unknown format token {token:?}")))?;
            levels.push(level);
        }
        return PrecisionConfig::validated(levels, Some(text));
    }

    let mut words = trimmed.split_whitespace();
    match (words.next(), words.next(), words.next()) {
        (Some(first), Some(token), None) if first.eq_ignore_ascii_case("pure") => {
            let level = parse_format(token)
                .ok_or_else(|| syntax(&format!("unknown format token {token:?}")))?;
            Ok(PrecisionConfig::pure(level))
        }
        (None, _, _) => Err(syntax("empty config")),
        _ => Err(syntax("expected `[F16, F32, ...]` or `Pure F64`")),
    }
}

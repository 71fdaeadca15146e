//! Guide listings compiled as doctests.
//!
//! Each chapter of `book/src` becomes the doc comment of an empty module, so
//! `cargo test --doc -p treechol-book` runs every `rust` block in the book.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/precision.md")]
pub mod precision {}
#[doc = include_str!("../../../book/src/configs.md")]
pub mod configs {}
#[doc = include_str!("../../../book/src/tree.md")]
pub mod tree {}
#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}
#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}
#[doc = include_str!("../../../book/src/quantization.md")]
pub mod quantization {}
#[doc = include_str!("../../../book/src/flops.md")]
pub mod flops {}
#[doc = include_str!("../../../book/src/generator.md")]
pub mod generator {}
#[doc = include_str!("../../../book/src/breakdown.md")]
pub mod breakdown {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

//! The user guide, embedded chapter by chapter so that every code block in
//! the rendered book (`book/` at the repository root, built with `mdbook`)
//! is compiled and executed by `cargo test --doc`. The book can never drift
//! out of sync with the library: a snippet that stops compiling or a pinned
//! value that stops holding fails the test suite.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/corrections.md")]
pub mod corrections {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}

#[doc = include_str!("../../../book/src/optimization.md")]
pub mod optimization {}

#[doc = include_str!("../../../book/src/floquet.md")]
pub mod floquet {}

#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

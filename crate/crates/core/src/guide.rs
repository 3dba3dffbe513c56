//! The user guide, embedded from `book/src` so that every example in it
//! compiles and runs as a doc-test. `mdbook build book` renders the same
//! files; `cargo test --doc` keeps them honest.

#[doc = include_str!("../../../book/src/ch01-getting-started.md")]
pub mod ch01_getting_started {}

#[doc = include_str!("../../../book/src/ch02-exchangeable-copies.md")]
pub mod ch02_exchangeable_copies {}

#[doc = include_str!("../../../book/src/ch03-goodness-of-fit.md")]
pub mod ch03_goodness_of_fit {}

#[doc = include_str!("../../../book/src/ch04-conditional-randomization.md")]
pub mod ch04_conditional_randomization {}

#[doc = include_str!("../../../book/src/ch05-benchmarks-and-cli.md")]
pub mod ch05_benchmarks_and_cli {}

//! The guide under `book/`, compiled here so `cargo test` runs its Rust
//! snippets.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/estimators.md")]
pub mod estimators {}

#[doc = include_str!("../../../book/src/theory.md")]
pub mod theory {}

#[doc = include_str!("../../../book/src/tuning.md")]
pub mod tuning {}

#[doc = include_str!("../../../book/src/out-of-core.md")]
pub mod out_of_core {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/reproducibility.md")]
pub mod reproducibility {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}

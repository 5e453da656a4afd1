//! The chapters of the `book/` guide, one module each, so that `cargo test`
//! runs every code block in the book as a doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/aoi-costs.md")]
pub mod aoi_costs {}

#[doc = include_str!("../../../book/src/priors.md")]
pub mod priors {}

#[doc = include_str!("../../../book/src/single-source.md")]
pub mod single_source {}

#[doc = include_str!("../../../book/src/multi-source.md")]
pub mod multi_source {}

#[doc = include_str!("../../../book/src/quantization.md")]
pub mod quantization {}

#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baselines {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

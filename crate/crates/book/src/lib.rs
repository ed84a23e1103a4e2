//! The chapters of the guide in `book/src`, compiled as documentation so
//! that `cargo test` runs every code block in them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/system-model.md")]
pub mod system_model {}

#[doc = include_str!("../../../book/src/precoders.md")]
pub mod precoders {}

#[doc = include_str!("../../../book/src/objective.md")]
pub mod objective {}

#[doc = include_str!("../../../book/src/adaptive.md")]
pub mod adaptive {}

#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baselines {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/reproducibility.md")]
pub mod reproducibility {}

#[doc = include_str!("../../../book/src/known-results.md")]
pub mod known_results {}

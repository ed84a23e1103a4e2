//! Adaptive MSE-based power allocation for the multiuser MIMO downlink.
//!
//! A base station with `N_t` antennas serves `K` users over a flat Rayleigh
//! channel. Streams are shaped by a fixed linear precoder (MF, ZF or MMSE)
//! and scaled by a real allocation vector `a` with `|a|^2 = 1`. The crate
//! provides:
//!
//! - the signal model and imperfect-CSIT channel synthesis ([`channel`],
//!   [`signal`]),
//! - the three precoders ([`precoding`]),
//! - the MSE objective, its gradient and the adaptive allocators M-APA and
//!   RM-APA, plus uniform, random and exhaustive-search baselines
//!   ([`allocation`]),
//! - sum-rate and learning-curve metrics ([`metrics`]),
//! - reproducible Monte Carlo experiments with config and output formats
//!   ([`harness`], [`config`], [`output`]).
//!
//! ```
//! use apa_core::allocation::{mapa, AdaptiveParams};
//! use apa_core::channel::ChannelMatrix;
//! use apa_core::precoding::zf_precoder;
//!
//! let h = ChannelMatrix::identity(4);
//! let p = zf_precoder(&h).unwrap();
//! let trace = mapa(&h, &p, &AdaptiveParams { mu: 0.01, iters: 500, sigma_n2: 1.0 }, None).unwrap();
//! let a = trace.last().unwrap();
//! assert!(a.as_slice().iter().all(|w| (w - 0.5).abs() < 1e-9));
//! ```

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod output;
pub mod parallel;
pub mod precoding;
pub mod rng;
pub mod signal;
pub mod system;

pub use error::{Error, Result};

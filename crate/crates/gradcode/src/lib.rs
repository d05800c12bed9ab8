//! Approximate gradient coding for straggler mitigation in distributed
//! gradient descent.
//!
//! A coding matrix `A` assigns data partitions to workers; each worker
//! returns a linear combination of the partial gradients it holds, and the
//! master recovers (an approximation of) the full gradient from whichever
//! `n - s` results arrive first. This crate provides:
//!
//! - [`matrix`]: the sparse 0/1 coding matrix, received sets, and a
//!   plain-text triplet serialization.
//! - [`schemes`]: constructions — fractional repetition codes (FRC), batch
//!   raptor codes (BRC), the uncoded forget-s baseline, and a Bernoulli
//!   baseline.
//! - [`decode`]: the least-squares decoder and rank test, the FRC
//!   combinatorial decoder, and the batch peeling decoder.
//! - [`bounds`]: closed-form computation-load bounds and the exact FRC
//!   failure probability (big-integer inclusion–exclusion).
//! - [`montecarlo`]: a deterministic, parallel trial harness estimating
//!   `P(err(A_S) > eps * n)`.
//! - [`trainer`]: a desk-scale logistic-regression gradient-descent loop
//!   with simulated stragglers and per-scheme decoding.
//!
//! All randomness flows through [`rng::RngSpec`]: a named seed plus stream
//! id, so every experiment is reproducible and identical across thread
//! counts.

pub mod bounds;
pub mod decode;
pub mod error;
pub mod matrix;
pub mod montecarlo;
pub mod rng;
pub mod schemes;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::{CodingMatrix, ReceivedSet, SchemeTag};
pub use rng::RngSpec;

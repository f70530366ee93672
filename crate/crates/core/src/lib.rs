//! Distribution-free tests of conditional independence `Y ⊥ Z | lambda_theta(X)`.
//!
//! The pipeline maps each observation through empirical Rosenblatt
//! transforms ([`transform`]), forms a weighted empirical process on a grid
//! ([`process`], [`weights`]), reduces it to a Kolmogorov–Smirnov or
//! Cramér–von Mises statistic ([`stats`]) and calibrates the statistic with
//! a two-point wild bootstrap ([`bootstrap`]). [`index`] supplies the single
//! index and its probit fit; [`simulate`] holds the Monte Carlo designs and
//! the rejection-rate harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod error;
pub mod index;
pub mod normal;
pub mod process;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod transform;
pub mod weights;

pub use bootstrap::{run_test, TestConfig, TestResult};
pub use error::{Error, Result};
pub use index::{IndexModel, IndexSpec, ThetaSpec};
pub use stats::Functional;
pub use transform::{Bandwidth, Kernel, Sample, ZKind};
pub use weights::BetaFamily;

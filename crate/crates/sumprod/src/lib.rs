//! Numerical laboratory for additive-multiplicative interactions in the integers.
//!
//! The crate revolves around one weighting scheme: the logarithmic average
//! `E^log_{n<=N} f(n) = (sum_{n<=N} f(n)/n) / H(N)`, with `H(N)` the harmonic
//! sum, next to the plain Cesaro average. On top of it sit
//!
//! * finite truncations of dilation-invariance statements (`E^log f(n)` versus
//!   `E^log q 1_{q|n} f(n/q)`) with explicit error budgets,
//! * a logarithmically weighted Turan-Kubilius inequality and its transfer to
//!   averages along dilated arguments,
//! * a van der Corput style inequality for multiplicative shifts,
//! * correlation sequences, positive-definiteness diagnostics and spectral
//!   mass on rational points,
//! * decompositions of a bounded sequence into a periodic projection and an
//!   aperiodic remainder,
//! * scans for {x + Q(y), xy} configurations inside explicit integer sets,
//!   density reports and a min-max density estimator along divisibility
//!   chains,
//! * exhaustive coloring searches for the smallest N forcing a monochromatic
//!   {x + y, xy} pair.
//!
//! Everything is deterministic: reruns with the same parameters reproduce
//! results bit for bit when executed on one thread.

pub mod avg;
pub mod catalog;
pub mod error;
pub mod ineq;
pub mod patterns;
pub mod poly;
pub mod primes;
pub mod ramsey;
pub mod seq;
pub mod structure;
pub mod spectral;

pub use error::{Error, Result};

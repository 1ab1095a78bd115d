//! Core numerics for inference on high-dimensional non-stationary (HDNS)
//! time series.
//!
//! The crate is organised around one workflow:
//!
//! 1. [`models`] simulates benchmark vector autoregressions with time-varying
//!    coefficients (plus a regression layer with serially dependent errors),
//! 2. [`dependence`] estimates physical-dependence coefficients of those
//!    processes by coupled re-simulation,
//! 3. [`bootstrap`] turns an observed series into overlapping block sums and
//!    Gaussian-multiplier draws whose conditional covariance tracks the
//!    covariance of the scaled partial sum,
//! 4. [`gaussian`] compares Gaussian laws (Wasserstein distance, couplings,
//!    total-variation and matrix-root perturbation bounds), and
//! 5. [`inference`] runs the two regression hypothesis tests (a combined
//!    sup/L2 statistic and a soft-threshold statistic) with bootstrap
//!    critical values.
//!
//! Everything is deterministic: all randomness flows through the
//! counter-based streams in [`rng`], keyed by `(seed, purpose, index,
//! coordinate)`, so any single innovation can be re-addressed and any run can
//! be reproduced bit-for-bit regardless of evaluation order or thread count.
//!
//! The crate is `no_std` (with `alloc`); I/O, file formats, the CLI, and the
//! Monte Carlo experiment harness live in the companion crate `hdns-harness`.

#![no_std]
#![deny(unsafe_code)]
// Negated float comparisons (`!(x > 0.0)`) route NaN into the failure branch,
// which the un-negated form would let through silently.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Indexed loops mirror the matrix algebra and walk several parallel buffers
// with one subscript; iterator rewrites obscure that correspondence.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bootstrap;
pub mod dependence;
pub mod gaussian;
pub mod inference;
pub(crate) mod linalg;
pub mod models;
pub mod rng;

//! Monte Carlo experiment harness and file formats around `hdns-core`.
//!
//! The library half of the `hdns` binary: [`experiment`] runs the rejection
//! and rate experiments over configuration grids with reproducible parallel
//! scheduling, [`report`] fixes the CSV/JSON report schema, and [`io`] holds
//! the series/vector file formats shared by the CLI subcommands.

// Same lint policy as `hdns-core`: negated float comparisons route NaN into
// the failure branch, and indexed loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod experiment;
pub mod io;
pub mod report;

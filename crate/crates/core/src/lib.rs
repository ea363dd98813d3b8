//! Core solver library for designing reinsurance contracts priced under a
//! performance-based premium scheme: the realized premium is a base loading
//! plus a participation `delta` in the deviation of ceded losses from their
//! mean, clamped between a reward floor and a penalty cap.
//!
//! The crate is `no_std` (with `alloc`) so the numerical core stays free of
//! IO concerns; file formats and the command-line driver live in the
//! companion `repremia` crate.

#![no_std]
#![deny(unsafe_code)]
// validation guards are written as negated comparisons (`!(x > 0.0)`) on
// purpose: unlike the un-negated form they reject NaN inputs too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bowley;
pub mod dist;
pub mod error;
pub mod indemnity;
pub mod insurer;
mod math;
mod numeric;
pub mod oracle;
pub mod piecewise;
pub mod premium;
pub mod risk;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

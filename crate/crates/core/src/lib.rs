//! Variable-fidelity Gaussian process surrogate modeling.
//!
//! Four model families built on a shared dense linear-algebra core:
//!
//! - [`gp`] — single-fidelity Gaussian process regression,
//! - [`vfgp`] — exact two-fidelity cokriging,
//! - [`svfgp`] — sparse cokriging via a stabilized Nystrom approximation,
//! - [`bbvfgp`] — cokriging augmented at query time by a low-fidelity
//!   blackbox oracle through incremental Cholesky extension.
//!
//! [`experiments`] holds the analytic benchmark problems, Latin hypercube
//! sampling, RRMS accuracy metrics, and the benchmark runners.

pub mod bbvfgp;
pub mod design;
pub mod experiments;
pub mod gp;
pub mod kernels;
pub(crate) mod mle;
pub mod numerics;
#[cfg(test)]
pub(crate) mod test_support;
pub mod svfgp;
pub mod vfgp;

//! Computable randomness-deficiency estimation for finite binary sequences
//! under Bernoulli models.
//!
//! The crate turns the classical deficiency quantities — how far a concrete
//! sequence x falls short of being a typical outcome of B_{n,p}, how atypical
//! its ones-count is for bin_{n,p}, and how atypical x is inside its own
//! count class — into computable lower-bound estimates built from exact
//! rational arithmetic, explicit prefix codes, and integer-valued tests
//! whose validity (E_P 2^T ≤ 1) is checked by exhaustive enumeration rather
//! than assumed.
//!
//! Module map:
//! - [`bits`]: finite binary sequences.
//! - [`exact`]: exact rational arithmetic, floors of log2, dyadic rounding.
//! - [`measures`]: Bernoulli/binomial measures and count classes.
//! - [`partition`]: the arcsine count partition and the sin² point estimator.
//! - [`qdist`]: the reference distributions tests and deficiencies compare against.
//! - [`codes`]: prefix-code length providers with per-context Kraft checks.
//! - [`rtest`]: integer-valued randomness tests and their mixtures.
//! - [`deficiency`]: the deficiency engine and its decomposition audits.
//! - [`oracle`]: brute-force verification sweeps and the check ledger.

pub mod bits;
pub mod codes;
pub mod deficiency;
pub mod error;
pub mod exact;
pub mod measures;
pub mod oracle;
pub mod partition;
pub mod qdist;
pub mod rtest;

pub use bits::BitString;
pub use error::{Error, Result};

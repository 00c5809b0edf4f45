//! Simulators and verifiers for myopic weighted paging and the allocation
//! problems it reduces to.
//!
//! The crate is organised around a small set of building blocks:
//!
//! * [`trace`] — request traces, weight classes, cost ledgers and the myopic
//!   next-request oracle.
//! * [`belady`] — farthest-in-future simulation at one or all cache sizes,
//!   the induced per-class page ranking, and an exact step-by-step potential
//!   monitor certifying FiF optimality.
//! * [`posseq`] — position sequences, the repeat property, and the inverse
//!   construction from sequences back to traces.
//! * [`canonical`] — profile-driven caching, canonicalization of arbitrary
//!   schedules with a factor-3 guarantee, and randomized rounding.
//! * [`det`] — the deterministic level-based eviction algorithm with its
//!   exact rational potential monitor.
//! * [`alloc`] — the convex allocation dynamics on the simplex with rate
//!   variables, region estimates and the Theta potential monitor.
//! * [`wimp`] — the randomized fractional paging algorithm driven by pointer
//!   sweeps, interval sets and the four-potential monitor.
//! * [`offline`] — exact offline optima by dynamic programming and by
//!   min-cost flow over retention intervals.
//! * [`generate`] / [`experiment`] — instance generators and the experiment
//!   harness used by the command line front end.

pub mod alloc;
pub mod belady;
pub mod canonical;
pub mod det;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod intervals;
pub mod offline;
pub mod oracle;
pub mod posseq;
pub mod trace;
pub mod wimp;

pub use error::Error;
pub use trace::{CostLedger, RequestTrace, WeightTable};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

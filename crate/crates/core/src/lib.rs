//! Erasure coding versus replication for short-lived intermediate data.
//!
//! The crate bundles the pieces needed to study how an intermediate-data
//! cache service behaves when stripes are kept with Reed-Solomon codes
//! instead of full copies:
//!
//! * [`erasure`]: storage policies and a systematic Reed-Solomon codec over GF(2^8).
//! * [`reliability`]: the Weibull lifetime model and the conditional failure rate.
//! * [`mttdl`]: closed-form mean-time-to-data-loss for RAID5/RAID6/RAIDr chains.
//! * [`placement`]: localization-capped selection and MTTDL-driven proactive relocation.
//! * [`sim`]: the deterministic discrete-event cluster simulator.
//! * [`metrics`]: report post-processing and the CSV schemas.
//! * [`battery`]: multi-seed experiment batteries built on [`sim::run`].
//!
//! Analytic code is generic over the scalar type; the aliases below pin the
//! common instantiations.

pub mod battery;
pub mod erasure;
pub mod gf256;
pub mod metrics;
pub mod mttdl;
pub mod placement;
pub mod reliability;
pub mod scalar;
pub mod sim;

pub use erasure::{decode, encode, redundancy, CodecError, PolicyKind, StoragePolicy, Stripe};
pub use metrics::SimReport;
pub use scalar::{Real, Scalar};
pub use sim::{run, SimConfig};

/// Exact rational scalar, used to check the MTTDL algebra without rounding.
pub type Exact = num_rational::BigRational;

pub type Weibull = reliability::WeibullParams<f64>;
pub type FailureRateQuery = reliability::FailureRateQuery<f64>;
pub type MarkovParams = mttdl::MarkovParams<f64>;
pub type Mttdl = mttdl::MttdlResult<f64>;
pub type ExactMarkovParams = mttdl::MarkovParams<Exact>;
pub type ExactMttdl = mttdl::MttdlResult<Exact>;

//! Deterministic discrete-event simulator of the cache cluster.
//!
//! A master hands each client cache to a manager daemon, which encodes it and
//! spreads the redundancy units over workers in several VMs (network domains).
//! Daemons die after Weibull lifetimes and are replaced at the next check
//! tick. Managers check their workers every `check_interval`, rebuild missing
//! units while at least `k` survive, and the cache is adjudicated when its
//! lease expires.
//!
//! One run is strictly single-threaded; the only randomness comes from
//! seeded ChaCha streams, so identical configs give identical reports.

mod cluster;
mod config;
mod engine;
mod event;

pub use cluster::{Cache, CacheD, CacheStatus, CachedState};
pub use config::{ConfigError, SimConfig, KEYS, MIB};
pub use engine::run;
pub use event::{Event, EventKind};

use crate::placement::CachedId;

/// One side of a transfer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Endpoint<'a> {
    pub cached: CachedId,
    pub domain: &'a str,
}

/// Seconds needed to move `bytes` between two daemons.
///
/// Same daemon: free. Same domain: the remote time scaled by `local_time_ratio`.
pub fn transfer_cost(bytes: u64, src: Endpoint<'_>, dst: Endpoint<'_>, config: &SimConfig) -> f64 {
    if src.cached == dst.cached {
        return 0.0;
    }
    let remote = bytes as f64 / MIB * config.remote_unit_transfer_time;
    if src.domain == dst.domain {
        remote * config.local_time_ratio
    } else {
        remote
    }
}

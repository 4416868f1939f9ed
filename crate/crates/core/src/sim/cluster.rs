use std::collections::BTreeSet;

use crate::erasure::{StoragePolicy, Stripe};
use crate::placement::CachedId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CachedState {
    Alive,
    /// Flagged for relocation; still serves its units but takes no new ones.
    Proactive,
    Down,
}

/// A simulated storage daemon.
#[derive(Clone, Debug)]
pub struct CacheD {
    pub id: CachedId,
    /// Index into the domain table.
    pub domain: usize,
    pub boot_time: f64,
    pub death_time: f64,
    pub state: CachedState,
    /// `(cache id, unit index)` pairs held by this daemon.
    pub stored_units: BTreeSet<(usize, usize)>,
    /// Held a unit past the relocation age because no fresh daemon was free.
    pub unprotected: bool,
}

impl CacheD {
    pub fn is_up(&self) -> bool {
        self.state != CachedState::Down
    }

    pub fn age(&self, now: f64) -> f64 {
        now - self.boot_time
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Healthy,
    /// Some units could not be re-placed yet.
    Degraded,
    Lost,
    Succeeded,
}

impl CacheStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self, CacheStatus::Lost | CacheStatus::Succeeded)
    }
}

/// One intermediate-data object and where its units live.
#[derive(Clone, Debug)]
pub struct Cache {
    pub id: usize,
    pub created_at: f64,
    pub lease_expiry: f64,
    pub policy: StoragePolicy,
    pub manager: CachedId,
    /// Unit index the manager holds.
    pub manager_unit: usize,
    /// Unit index to holder; `None` once a loss has been detected and not yet re-placed.
    pub placements: Vec<Option<CachedId>>,
    pub status: CacheStatus,
    pub ended_at: Option<f64>,
    pub checks_done: usize,
    /// Original bytes and encoded units, kept only when payload verification is on.
    pub payload: Option<(Vec<u8>, Vec<Stripe>)>,
}

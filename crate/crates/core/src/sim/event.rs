use std::cmp::Ordering;

use crate::metrics::TransferRecord;
use crate::placement::CachedId;

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    CachedDeath(CachedId),
    CachedSpawn { domain: usize },
    TransferComplete(TransferRecord),
    LeaseExpiry(usize),
    AvailabilityCheck(usize),
    ClientSchedule,
}

impl EventKind {
    /// Tie-break at equal times: deaths, spawns, transfers, expiries, checks, schedules.
    fn priority(&self) -> u8 {
        match self {
            EventKind::CachedDeath(_) => 0,
            EventKind::CachedSpawn { .. } => 1,
            EventKind::TransferComplete(_) => 2,
            EventKind::LeaseExpiry(_) => 3,
            EventKind::AvailabilityCheck(_) => 4,
            EventKind::ClientSchedule => 5,
        }
    }
}

/// A timestamped event. Ordered by `(time, kind priority, seq)` so that the
/// queue is a total order independent of insertion details.
#[derive(Clone, Debug)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.time, self.kind.priority(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, pa, sa) = self.key();
        let (tb, pb, sb) = other.key();
        ta.total_cmp(&tb).then(pa.cmp(&pb)).then(sa.cmp(&sb))
    }
}

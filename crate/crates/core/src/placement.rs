//! Choosing which storage daemons hold a cache's redundancy units.
//!
//! Two policies live here:
//!
//! * localization: daemons are bucketed by network domain and no domain may
//!   hold more than `cap = round(pct/100 * n)` units of one cache. Higher
//!   percentages pack a stripe into fewer domains, trading balance for cheaper
//!   local transfers. Used for both the write path and the recovery path.
//! * proactive relocation: a worker whose age-dependent MTTDL falls below a
//!   threshold is flagged and its units are copied elsewhere before it dies.
//!
//! Every function here is a pure function of its inputs; ties are broken by
//! domain name and then daemon id so the simulator stays deterministic.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Identifier of a simulated storage daemon. Ids are never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CachedId(pub usize);

impl fmt::Display for CachedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cached{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlacementError {
    #[error("cluster has {available} eligible daemons, {needed} required")]
    InsufficientCluster { available: usize, needed: usize },
    #[error("localization percentage must be one of 25, 50, 75, 100; got {0}")]
    InvalidPercentage(u32),
}

/// Eligible daemons of one network domain, sorted by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainBucket {
    pub domain: String,
    pub available: Vec<CachedId>,
}

impl DomainBucket {
    pub fn new(domain: impl Into<String>, mut available: Vec<CachedId>) -> Self {
        available.sort();
        Self { domain: domain.into(), available }
    }
}

/// Group `(daemon, domain)` pairs into buckets ordered by domain name.
pub fn bucketize<'a>(daemons: impl IntoIterator<Item = (CachedId, &'a str)>) -> Vec<DomainBucket> {
    let mut by_domain: BTreeMap<&str, Vec<CachedId>> = BTreeMap::new();
    for (id, domain) in daemons {
        by_domain.entry(domain).or_default().push(id);
    }
    by_domain.into_iter().map(|(d, ids)| DomainBucket::new(d, ids)).collect()
}

/// Per-domain cap on the units of one cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalizationPolicy {
    pct: Option<u32>,
    cap: usize,
}

impl LocalizationPolicy {
    pub const PERCENTAGES: [u32; 4] = [25, 50, 75, 100];

    pub fn new(pct: u32, n: usize) -> Result<Self, PlacementError> {
        if !Self::PERCENTAGES.contains(&pct) {
            return Err(PlacementError::InvalidPercentage(pct));
        }
        let cap = ((pct as f64 / 100.0) * n as f64).round() as usize;
        Ok(Self { pct: Some(pct), cap: cap.clamp(1, n.max(1)) })
    }

    /// No locality constraint: any domain may hold the whole stripe.
    pub fn unconstrained(n: usize) -> Self {
        Self { pct: None, cap: n.max(1) }
    }

    pub fn pct(&self) -> Option<u32> {
        self.pct
    }

    pub fn cap(&self) -> usize {
        self.cap
    }
}

/// Daemons picked for a set of units. `cap_relaxed` is set when the cap had
/// to be ignored to place every unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub cacheds: Vec<CachedId>,
    pub cap_relaxed: bool,
}

fn total_available(buckets: &[DomainBucket]) -> usize {
    buckets.iter().map(|b| b.available.len()).sum()
}

/// Walk `order`, taking up to `allowed(bucket)` unused daemons from each
/// bucket until `remaining` reaches zero.
fn take_in_order(
    buckets: &[DomainBucket],
    order: &[usize],
    taken: &mut [usize],
    out: &mut Vec<CachedId>,
    remaining: &mut usize,
    allowed: impl Fn(usize) -> usize,
) {
    for &b in order {
        if *remaining == 0 {
            break;
        }
        let bucket = &buckets[b];
        let free = bucket.available.len() - taken[b];
        let want = allowed(b).min(free).min(*remaining);
        out.extend_from_slice(&bucket.available[taken[b]..taken[b] + want]);
        taken[b] += want;
        *remaining -= want;
    }
}

/// Pick `n` daemons for a fresh stripe.
///
/// The tightest domain that can hold a full `cap` share takes it; the rest
/// is drawn from the remaining domains in descending order of availability,
/// at most `cap` each. When no domain can hold a full share the descending
/// walk starts immediately.
pub fn write_path_select(
    buckets: &[DomainBucket],
    n: usize,
    loc: &LocalizationPolicy,
) -> Result<Selection, PlacementError> {
    let available = total_available(buckets);
    if available < n {
        return Err(PlacementError::InsufficientCluster { available, needed: n });
    }
    let cap = loc.cap().min(n);
    let mut taken = vec![0usize; buckets.len()];
    let mut out = Vec::with_capacity(n);
    let mut remaining = n;

    let best_fit = (0..buckets.len())
        .filter(|&b| buckets[b].available.len() >= cap)
        .min_by(|&x, &y| {
            let (bx, by) = (&buckets[x], &buckets[y]);
            bx.available.len().cmp(&by.available.len()).then_with(|| bx.domain.cmp(&by.domain))
        });
    if let Some(b) = best_fit {
        take_in_order(buckets, &[b], &mut taken, &mut out, &mut remaining, |_| cap);
    }

    let mut order: Vec<usize> = (0..buckets.len()).filter(|&b| Some(b) != best_fit).collect();
    order.sort_by(|&x, &y| {
        let (bx, by) = (&buckets[x], &buckets[y]);
        by.available.len().cmp(&bx.available.len()).then_with(|| bx.domain.cmp(&by.domain))
    });
    let used = taken.clone();
    take_in_order(buckets, &order, &mut taken, &mut out, &mut remaining, |b| cap - used[b]);

    let cap_relaxed = remaining > 0;
    if cap_relaxed {
        let mut all: Vec<usize> = best_fit.into_iter().chain(order).collect();
        all.dedup();
        take_in_order(buckets, &all, &mut taken, &mut out, &mut remaining, |_| usize::MAX);
    }
    debug_assert_eq!(remaining, 0);
    Ok(Selection { cacheds: out, cap_relaxed })
}

/// Pick `needed` replacement daemons for a damaged stripe.
///
/// Domains are ranked by how many surviving units they already hold
/// (descending, ties by name); domains without survivors come last, by
/// availability descending. Each domain accepts new units only while
/// `survivors + new <= cap`. If that cannot place everything, the cap is
/// dropped for the remainder.
pub fn recovery_path_select(
    survivor_domains: &[&str],
    buckets: &[DomainBucket],
    needed: usize,
    loc: &LocalizationPolicy,
) -> Result<Selection, PlacementError> {
    let available = total_available(buckets);
    if available < needed {
        return Err(PlacementError::InsufficientCluster { available, needed });
    }
    let mut occurrence: BTreeMap<&str, usize> = BTreeMap::new();
    for d in survivor_domains {
        *occurrence.entry(d).or_default() += 1;
    }
    let held = |b: usize| occurrence.get(buckets[b].domain.as_str()).copied().unwrap_or(0);

    let mut order: Vec<usize> = (0..buckets.len()).collect();
    order.sort_by(|&x, &y| {
        let (hx, hy) = (held(x), held(y));
        let (bx, by) = (&buckets[x], &buckets[y]);
        match (hx > 0, hy > 0) {
            (true, true) => hy.cmp(&hx).then_with(|| bx.domain.cmp(&by.domain)),
            (true, false) => std::cmp::Ordering::Less,
            (false, true) => std::cmp::Ordering::Greater,
            (false, false) => by
                .available
                .len()
                .cmp(&bx.available.len())
                .then_with(|| bx.domain.cmp(&by.domain)),
        }
    });

    let cap = loc.cap();
    let mut taken = vec![0usize; buckets.len()];
    let mut out = Vec::with_capacity(needed);
    let mut remaining = needed;
    take_in_order(buckets, &order, &mut taken, &mut out, &mut remaining, |b| cap.saturating_sub(held(b)));
    let cap_relaxed = remaining > 0;
    if cap_relaxed {
        take_in_order(buckets, &order, &mut taken, &mut out, &mut remaining, |_| usize::MAX);
    }
    Ok(Selection { cacheds: out, cap_relaxed })
}

/// MTTDL threshold below which workers are relocated away from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProactivePolicy {
    pub mttdl_threshold: f64,
    pub enabled: bool,
}

impl ProactivePolicy {
    pub fn new(mttdl_threshold: f64) -> Self {
        Self { mttdl_threshold, enabled: true }
    }

    pub fn disabled() -> Self {
        Self { mttdl_threshold: 0.0, enabled: false }
    }
}

/// A worker holding one unit of the cache being scanned.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerView {
    pub unit: usize,
    pub cached: CachedId,
    pub domain: String,
    pub boot_time: f64,
    /// Already flagged while scanning another cache.
    pub proactive: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relocation {
    pub unit: usize,
    pub from: CachedId,
    pub to: CachedId,
    pub cap_relaxed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScanOutcome {
    /// Workers that crossed the threshold during this scan.
    pub newly_flagged: Vec<CachedId>,
    pub relocations: Vec<Relocation>,
    /// Units left in place because no eligible target existed.
    pub stranded: Vec<usize>,
}

/// Scan one cache's workers and plan relocations.
///
/// `manager_domain` is counted as a surviving unit when ranking target
/// domains. `buckets` must already exclude every daemon holding a unit of
/// this cache.
#[allow(clippy::too_many_arguments)]
pub fn proactive_scan(
    workers: &[WorkerView],
    manager_domain: &str,
    now: f64,
    policy: &ProactivePolicy,
    mttdl_at_age: impl Fn(f64) -> f64,
    buckets: &[DomainBucket],
    loc: &LocalizationPolicy,
) -> ScanOutcome {
    let mut outcome = ScanOutcome::default();
    if !policy.enabled {
        return outcome;
    }
    let mut flagged = Vec::new();
    for w in workers {
        let flag = w.proactive || mttdl_at_age((now - w.boot_time).max(0.0)) < policy.mttdl_threshold;
        if flag {
            if !w.proactive {
                outcome.newly_flagged.push(w.cached);
            }
            flagged.push(w);
        }
    }
    if flagged.is_empty() {
        return outcome;
    }

    let mut staying: Vec<&str> = workers
        .iter()
        .filter(|w| !flagged.iter().any(|f| f.unit == w.unit))
        .map(|w| w.domain.as_str())
        .collect();
    staying.push(manager_domain);
    let mut buckets = buckets.to_vec();
    let mut placed_domains: Vec<String> = Vec::new();
    for w in flagged {
        let survivors: Vec<&str> = staying.iter().copied().chain(placed_domains.iter().map(String::as_str)).collect();
        match recovery_path_select(&survivors, &buckets, 1, loc) {
            Ok(sel) => {
                let to = sel.cacheds[0];
                for b in &mut buckets {
                    if let Some(pos) = b.available.iter().position(|c| *c == to) {
                        b.available.remove(pos);
                        placed_domains.push(b.domain.clone());
                    }
                }
                outcome.relocations.push(Relocation { unit: w.unit, from: w.cached, to, cap_relaxed: sel.cap_relaxed });
            }
            Err(_) => outcome.stranded.push(w.unit),
        }
    }
    outcome
}

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cluster::{Cache, CacheD, CacheStatus, CachedState};
use super::config::{ConfigError, SimConfig};
use super::event::{Event, EventKind};
use super::{transfer_cost, Endpoint};
use crate::erasure::{self, CodecError, StoragePolicy};
use crate::metrics::{
    CacheOutcome, CacheRecord, Counters, LossEvent, SimReport, TransferCategory, TransferRecord, VmCount,
    VM_WINDOW_MIN,
};
use crate::metrics::DeadWorker;
use crate::mttdl::{crossing_age, mttdl_at_age};
use crate::placement::{
    bucketize, proactive_scan, recovery_path_select, write_path_select, CachedId, DomainBucket,
    LocalizationPolicy, ProactivePolicy, WorkerView,
};
use crate::reliability::sample_lifetime;

// Independent random streams so that, for a given seed, daemon lifetimes do
// not depend on placement decisions.
const STREAM_LIFETIMES: u64 = 1;
const STREAM_MANAGER: u64 = 2;
const STREAM_PLACEMENT: u64 = 3;
const STREAM_PAYLOAD: u64 = 4;

/// Crossing age of the MTTDL threshold, or infinity when proactive relocation is off.
fn relocation_age(cfg: &SimConfig) -> f64 {
    let Some(threshold) = cfg.proactive_threshold else { return f64::INFINITY };
    let horizon = cfg.weibull.scale() * 100.0;
    crossing_age(&cfg.policy, threshold, cfg.check_interval_min, &cfg.weibull, horizon)
        .ok()
        .flatten()
        .unwrap_or(f64::INFINITY)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Run one simulation to completion.
///
/// Scheduling stops at `duration`; the run continues until every cache has
/// been adjudicated and every transfer has completed.
pub fn run(config: &SimConfig) -> Result<SimReport, ConfigError> {
    config.validate()?;
    let mut sim = Sim::new(config.clone());
    sim.start();
    sim.event_loop();
    Ok(sim.into_report())
}

struct Sim {
    cfg: SimConfig,
    policy: StoragePolicy,
    unit_bytes: u64,
    domains: Vec<String>,
    cacheds: Vec<CacheD>,
    caches: Vec<Cache>,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: f64,
    rng_life: ChaCha8Rng,
    rng_manager: ChaCha8Rng,
    rng_place: ChaCha8Rng,
    rng_payload: ChaCha8Rng,
    schedules_left: usize,
    /// Age past which a daemon is no longer a relocation or placement target.
    relocation_age: f64,
    open_caches: usize,
    transfers_in_flight: usize,
    transfers: Vec<TransferRecord>,
    /// `(time, domain index)` of every unit placement.
    placements_log: Vec<(f64, usize)>,
    losses: Vec<LossEvent>,
    counters: Counters,
}

impl Sim {
    fn new(cfg: SimConfig) -> Self {
        let policy = cfg.policy;
        let seed = cfg.seed;
        Self {
            unit_bytes: policy.unit_size(cfg.cache_size) as u64,
            domains: (1..=cfg.vm_count).map(|i| format!("condorworker{i}")).collect(),
            schedules_left: cfg.schedule_count(),
            relocation_age: relocation_age(&cfg),
            policy,
            cfg,
            cacheds: Vec::new(),
            caches: Vec::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            rng_life: stream(seed, STREAM_LIFETIMES),
            rng_manager: stream(seed, STREAM_MANAGER),
            rng_place: stream(seed, STREAM_PLACEMENT),
            rng_payload: stream(seed, STREAM_PAYLOAD),
            open_caches: 0,
            transfers_in_flight: 0,
            transfers: Vec::new(),
            placements_log: Vec::new(),
            losses: Vec::new(),
            counters: Counters::default(),
        }
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse(Event { time, seq: self.seq, kind }));
    }

    fn start(&mut self) {
        for domain in 0..self.cfg.vm_count {
            for _ in 0..self.cfg.cacheds_per_vm {
                self.spawn(domain);
            }
        }
        if self.schedules_left > 0 {
            self.push(0.0, EventKind::ClientSchedule);
        }
    }

    fn finished(&self) -> bool {
        self.schedules_left == 0 && self.open_caches == 0 && self.transfers_in_flight == 0
    }

    fn event_loop(&mut self) {
        while !self.finished() {
            let Some(Reverse(ev)) = self.queue.pop() else { break };
            self.now = ev.time;
            match ev.kind {
                EventKind::CachedDeath(id) => self.on_death(id),
                EventKind::CachedSpawn { domain } => {
                    self.spawn(domain);
                }
                EventKind::TransferComplete(record) => {
                    self.transfers_in_flight -= 1;
                    self.transfers.push(record);
                }
                EventKind::LeaseExpiry(cache) => self.lease_expiry(cache),
                EventKind::AvailabilityCheck(cache) => self.availability_check(cache),
                EventKind::ClientSchedule => self.on_schedule(),
            }
        }
    }

    fn spawn(&mut self, domain: usize) -> CachedId {
        let id = CachedId(self.cacheds.len());
        let lifetime = sample_lifetime(&self.cfg.weibull, &mut self.rng_life).max(1e-9);
        let death_time = self.now + lifetime;
        self.cacheds.push(CacheD {
            id,
            domain,
            boot_time: self.now,
            death_time,
            state: CachedState::Alive,
            stored_units: Default::default(),
            unprotected: false,
        });
        if death_time.is_finite() {
            self.push(death_time, EventKind::CachedDeath(id));
        }
        id
    }

    fn on_death(&mut self, id: CachedId) {
        let d = &mut self.cacheds[id.0];
        d.state = CachedState::Down;
        let domain = d.domain;
        let ci = self.cfg.check_interval_min;
        let tick = ((self.now / ci).floor() + 1.0) * ci;
        self.push(tick, EventKind::CachedSpawn { domain });
    }

    fn cached(&self, id: CachedId) -> &CacheD {
        &self.cacheds[id.0]
    }

    fn domain_of(&self, id: CachedId) -> &str {
        &self.domains[self.cached(id).domain]
    }

    fn localization(&self) -> Option<LocalizationPolicy> {
        self.cfg.localization_pct.map(|pct| {
            LocalizationPolicy::new(pct, self.policy.n()).expect("percentage validated with the config")
        })
    }

    fn is_fresh(&self, d: &CacheD) -> bool {
        d.state == CachedState::Alive && d.age(self.now) < self.relocation_age
    }

    /// Daemons that accept new units, excluding `exclude`, sorted by id.
    fn eligible(&self, exclude: &[CachedId]) -> Vec<CachedId> {
        self.cacheds.iter().filter(|d| self.is_fresh(d) && !exclude.contains(&d.id)).map(|d| d.id).collect()
    }

    /// [`Sim::eligible`] topped up to `wanted` with the youngest remaining up daemons.
    fn candidates(&self, exclude: &[CachedId], wanted: usize) -> Vec<CachedId> {
        let mut pool = self.eligible(exclude);
        if pool.len() < wanted {
            let mut stale: Vec<&CacheD> =
                self.cacheds.iter().filter(|d| d.is_up() && !self.is_fresh(d) && !exclude.contains(&d.id)).collect();
            stale.sort_by(|a, b| b.boot_time.total_cmp(&a.boot_time).then(a.id.cmp(&b.id)));
            pool.extend(stale.iter().take(wanted - pool.len()).map(|d| d.id));
            pool.sort();
        }
        pool
    }

    fn buckets(&self, ids: &[CachedId]) -> Vec<DomainBucket> {
        bucketize(ids.iter().map(|id| (*id, self.domain_of(*id))))
    }

    fn transfer(&mut self, bytes: u64, src: CachedId, dst: CachedId, category: TransferCategory) {
        let seconds = transfer_cost(
            bytes,
            Endpoint { cached: src, domain: self.domain_of(src) },
            Endpoint { cached: dst, domain: self.domain_of(dst) },
            &self.cfg,
        );
        if src == dst {
            return;
        }
        let record = TransferRecord {
            time_min: self.now + seconds / 60.0,
            bytes,
            seconds,
            category,
            src_domain: self.domain_of(src).to_string(),
            dst_domain: self.domain_of(dst).to_string(),
        };
        self.transfers_in_flight += 1;
        self.push(record.time_min, EventKind::TransferComplete(record));
    }

    fn place(&mut self, cache: usize, unit: usize, holder: CachedId) {
        if let Some(prev) = self.caches[cache].placements[unit] {
            self.cacheds[prev.0].stored_units.remove(&(cache, unit));
        }
        self.caches[cache].placements[unit] = Some(holder);
        if !self.is_fresh(self.cached(holder)) {
            self.cacheds[holder.0].unprotected = true;
        }
        self.cacheds[holder.0].stored_units.insert((cache, unit));
        self.placements_log.push((self.now, self.cacheds[holder.0].domain));
    }

    fn on_schedule(&mut self) {
        self.schedules_left -= 1;
        if self.schedules_left > 0 {
            let next = (self.cfg.schedule_count() - self.schedules_left) as f64 * self.cfg.schedule_interval_min();
            self.push(next, EventKind::ClientSchedule);
        }
        self.schedule_cache();
    }

    /// Pick a manager and workers for a new cache, encode it and ship the units.
    fn schedule_cache(&mut self) {
        let n = self.policy.n();
        let alive = self.candidates(&[], n);
        if alive.len() < n {
            self.counters.schedules_skipped += 1;
            return;
        }
        let (manager, workers) = match self.localization() {
            Some(loc) => {
                let sel = write_path_select(&self.buckets(&alive), n, &loc).expect("cluster size checked above");
                if sel.cap_relaxed {
                    self.counters.cap_relaxations += 1;
                }
                let m = self.rng_manager.gen_range(0..n);
                let mut cluster = sel.cacheds;
                let manager = cluster.remove(m);
                (manager, cluster)
            }
            None => {
                let manager = alive[self.rng_manager.gen_range(0..alive.len())];
                let rest: Vec<CachedId> = alive.into_iter().filter(|c| *c != manager).collect();
                let workers = sample(&mut self.rng_place, rest.len(), n - 1).into_iter().map(|i| rest[i]).collect();
                (manager, workers)
            }
        };

        let id = self.caches.len();
        let payload = self.cfg.verify_payloads.then(|| {
            let mut data = vec![0u8; self.cfg.cache_size];
            self.rng_payload.fill_bytes(&mut data);
            let units = erasure::encode(&data, &self.policy).expect("payload is non-empty and policy valid");
            (data, units)
        });
        self.caches.push(Cache {
            id,
            created_at: self.now,
            lease_expiry: self.now + self.cfg.lease_period_min,
            policy: self.policy,
            manager,
            manager_unit: 0,
            placements: vec![None; n],
            status: CacheStatus::Healthy,
            ended_at: None,
            checks_done: 0,
            payload,
        });
        self.counters.caches_created += 1;
        self.open_caches += 1;

        self.place(id, 0, manager);
        for (i, w) in workers.into_iter().enumerate() {
            self.place(id, i + 1, w);
            self.transfer(self.unit_bytes, manager, w, TransferCategory::Write);
        }
        self.push(self.caches[id].lease_expiry, EventKind::LeaseExpiry(id));
        self.schedule_next_check(id);
    }

    fn schedule_next_check(&mut self, cache: usize) {
        let c = &self.caches[cache];
        let next = c.created_at + (c.checks_done + 1) as f64 * self.cfg.check_interval_min;
        if next < c.lease_expiry {
            self.push(next, EventKind::AvailabilityCheck(cache));
        }
    }

    /// Units whose holder is still up.
    fn live_units(&self, cache: usize) -> Vec<(usize, CachedId)> {
        self.caches[cache]
            .placements
            .iter()
            .enumerate()
            .filter_map(|(u, p)| p.filter(|id| self.cached(*id).is_up()).map(|id| (u, id)))
            .collect()
    }

    fn finish(&mut self, cache: usize, status: CacheStatus) {
        let c = &mut self.caches[cache];
        c.status = status;
        c.ended_at = Some(self.now);
        self.open_caches -= 1;
        match status {
            CacheStatus::Succeeded => self.counters.succeeded += 1,
            CacheStatus::Lost => {
                self.counters.data_losses += 1;
                let c = &self.caches[cache];
                let dead_workers = c
                    .placements
                    .iter()
                    .enumerate()
                    .filter_map(|(u, p)| p.map(|id| (u, id)))
                    .filter(|(u, id)| *u != c.manager_unit && !self.cached(*id).is_up())
                    .map(|(_, id)| {
                        let d = self.cached(id);
                        DeadWorker { age_min: d.death_time - d.boot_time, unprotected: d.unprotected }
                    })
                    .collect();
                self.losses.push(LossEvent {
                    cache,
                    time_min: self.now,
                    dead_workers,
                    manager_died: !self.cached(c.manager).is_up(),
                });
            }
            _ => unreachable!("only terminal states finish a cache"),
        }
        self.verify_verdict(cache);
    }

    /// With payloads on, the verdict must agree with what the codec can do.
    fn verify_verdict(&self, cache: usize) {
        let c = &self.caches[cache];
        let Some((data, units)) = &c.payload else { return };
        let held: Vec<_> = self.live_units(cache).into_iter().map(|(u, _)| units[u].clone()).collect();
        match erasure::decode(&held, &c.policy, data.len()) {
            Ok(bytes) => {
                assert_eq!(c.status, CacheStatus::Succeeded, "cache {cache} decodable but marked lost");
                assert_eq!(&bytes, data, "cache {cache} decoded to different bytes");
            }
            Err(CodecError::InsufficientUnits { .. }) => {
                assert_eq!(c.status, CacheStatus::Lost, "cache {cache} undecodable but marked succeeded")
            }
            Err(e) => panic!("cache {cache}: unexpected codec error {e}"),
        }
    }

    fn lease_expiry(&mut self, cache: usize) {
        if self.caches[cache].status.is_terminal() {
            return;
        }
        let status = if self.live_units(cache).len() >= self.policy.k() {
            CacheStatus::Succeeded
        } else {
            CacheStatus::Lost
        };
        self.finish(cache, status);
    }

    fn availability_check(&mut self, cache: usize) {
        if self.caches[cache].status.is_terminal() {
            return;
        }
        self.caches[cache].checks_done += 1;
        let k = self.policy.k();
        let live = self.live_units(cache);
        if live.len() < k {
            self.finish(cache, CacheStatus::Lost);
            return;
        }

        // Newly detected failures.
        let dead: Vec<(usize, CachedId)> = self.caches[cache]
            .placements
            .iter()
            .enumerate()
            .filter_map(|(u, p)| p.filter(|id| !self.cached(*id).is_up()).map(|id| (u, id)))
            .collect();
        self.counters.temporary_failures += dead.len();
        for (u, id) in &dead {
            self.cacheds[id.0].stored_units.remove(&(cache, *u));
            self.caches[cache].placements[*u] = None;
        }
        if !self.cached(self.caches[cache].manager).is_up() {
            let (unit, heir) = *live.iter().min_by_key(|(_, id)| *id).expect("live units checked above");
            let c = &mut self.caches[cache];
            c.manager = heir;
            c.manager_unit = unit;
            self.counters.manager_promotions += 1;
        }

        self.recover(cache, &live);
        if self.cfg.proactive_threshold.is_some() {
            self.proactive(cache);
        }
        self.schedule_next_check(cache);
    }

    /// Rebuild every missing unit on the manager and push it to a new holder.
    fn recover(&mut self, cache: usize, live: &[(usize, CachedId)]) {
        let missing: Vec<usize> =
            (0..self.policy.n()).filter(|u| self.caches[cache].placements[*u].is_none()).collect();
        if missing.is_empty() {
            self.caches[cache].status = CacheStatus::Healthy;
            return;
        }
        let manager = self.caches[cache].manager;

        // A replica manager already holds the whole cache. A coded stripe is
        // rebuilt from every surviving worker's unit.
        if !self.policy.is_replication() {
            let sources: Vec<CachedId> = live.iter().map(|(_, id)| *id).filter(|id| *id != manager).collect();
            for src in sources {
                self.transfer(self.unit_bytes, src, manager, TransferCategory::Recovery);
            }
        }
        if let Some((data, units)) = &self.caches[cache].payload {
            let held: Vec<_> = live.iter().map(|(u, _)| units[*u].clone()).collect();
            let rebuilt = erasure::decode(&held, &self.policy, data.len()).expect("k live units decode");
            assert_eq!(&rebuilt, data, "cache {cache}: recovery rebuilt different bytes");
            let again = erasure::encode(&rebuilt, &self.policy).expect("re-encode");
            for u in &missing {
                assert_eq!(again[*u], units[*u], "cache {cache}: re-encoded unit {u} differs");
            }
        }

        let holders: Vec<CachedId> = live.iter().map(|(_, id)| *id).collect();
        let pool = self.candidates(&holders, missing.len());
        let needed = missing.len().min(pool.len());
        let targets: Vec<CachedId> = if needed == 0 {
            Vec::new()
        } else {
            match self.localization() {
                Some(loc) => {
                    let survivors: Vec<&str> = holders.iter().map(|id| self.domain_of(*id)).collect();
                    let sel = recovery_path_select(&survivors, &self.buckets(&pool), needed, &loc)
                        .expect("needed bounded by pool size");
                    if sel.cap_relaxed {
                        self.counters.cap_relaxations += 1;
                    }
                    sel.cacheds
                }
                None => sample(&mut self.rng_place, pool.len(), needed).into_iter().map(|i| pool[i]).collect(),
            }
        };
        let stranded = missing.len() - targets.len();
        for (unit, target) in missing.into_iter().zip(targets) {
            self.place(cache, unit, target);
            self.transfer(self.unit_bytes, manager, target, TransferCategory::Recovery);
        }
        self.counters.stranded_units += stranded;
        self.caches[cache].status = if stranded > 0 { CacheStatus::Degraded } else { CacheStatus::Healthy };
    }

    fn proactive(&mut self, cache: usize) {
        let Some(threshold) = self.cfg.proactive_threshold else { return };
        let c = &self.caches[cache];
        let manager = c.manager;
        let workers: Vec<WorkerView> = c
            .placements
            .iter()
            .enumerate()
            .filter_map(|(u, p)| p.map(|id| (u, id)))
            .filter(|(_, id)| *id != manager && self.cached(*id).is_up())
            .map(|(unit, id)| {
                let d = self.cached(id);
                WorkerView {
                    unit,
                    cached: id,
                    domain: self.domains[d.domain].clone(),
                    boot_time: d.boot_time,
                    proactive: d.state == CachedState::Proactive,
                }
            })
            .collect();
        let holders: Vec<CachedId> = c.placements.iter().flatten().copied().collect();
        let buckets = self.buckets(&self.eligible(&holders));
        let loc = self.localization().unwrap_or_else(|| LocalizationPolicy::unconstrained(self.policy.n()));
        let policy = self.policy;
        let (ci, weibull) = (self.cfg.check_interval_min, self.cfg.weibull);
        let curve = |age: f64| {
            mttdl_at_age(&policy, age, ci, &weibull).map(|m| m.mttdl).unwrap_or(f64::INFINITY)
        };
        let outcome = proactive_scan(
            &workers,
            self.domain_of(manager),
            self.now,
            &ProactivePolicy::new(threshold),
            curve,
            &buckets,
            &loc,
        );
        for id in outcome.newly_flagged {
            if self.cacheds[id.0].state == CachedState::Alive {
                self.cacheds[id.0].state = CachedState::Proactive;
            }
        }
        for unit in outcome.stranded {
            if let Some(id) = self.caches[cache].placements[unit] {
                self.cacheds[id.0].unprotected = true;
            }
            self.counters.stranded_units += 1;
        }
        for r in outcome.relocations {
            if r.cap_relaxed {
                self.counters.cap_relaxations += 1;
            }
            self.place(cache, r.unit, r.to);
            self.transfer(self.unit_bytes, r.from, r.to, TransferCategory::Proactive);
            self.counters.proactive_relocations += 1;
        }
    }

    fn into_report(self) -> SimReport {
        let caches: Vec<CacheRecord> = self
            .caches
            .iter()
            .map(|c| CacheRecord {
                id: c.id,
                policy: c.policy,
                outcome: match c.status {
                    CacheStatus::Succeeded => CacheOutcome::Succeeded,
                    CacheStatus::Lost => CacheOutcome::Lost,
                    s => unreachable!("cache {} left in state {s:?}", c.id),
                },
                created_min: c.created_at,
                ended_min: c.ended_at.expect("terminal caches have an end time"),
                stored_units: c.policy.n(),
                stored_bytes: c.policy.stored_size(self.cfg.cache_size) as u64,
            })
            .collect();

        let end_min = caches.iter().map(|c| c.ended_min).fold(self.cfg.duration_min, f64::max);
        let windows = if caches.is_empty() { 0 } else { (end_min / VM_WINDOW_MIN).ceil().max(1.0) as usize };
        let mut counts = vec![0u64; windows * self.domains.len()];
        for (t, d) in &self.placements_log {
            let w = ((t / VM_WINDOW_MIN).floor() as usize).min(windows.saturating_sub(1));
            counts[w * self.domains.len() + d] += 1;
        }
        let vm_counts = counts
            .iter()
            .enumerate()
            .map(|(i, c)| VmCount {
                window_start_min: (i / self.domains.len()) as f64 * VM_WINDOW_MIN,
                domain: self.domains[i % self.domains.len()].clone(),
                unit_count: *c,
            })
            .collect();

        SimReport {
            policy: self.policy,
            seed: self.cfg.seed,
            domains: self.domains,
            caches,
            transfers: self.transfers,
            vm_counts,
            counters: self.counters,
            end_min,
            losses: self.losses,
        }
    }
}

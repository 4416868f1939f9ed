use ecsim::battery::five_policies;
use ecsim::metrics::{storage_cost, vm_variance, CacheOutcome, TransferCategory};
use ecsim::mttdl::crossing_age;
use ecsim::{redundancy, run, SimConfig, StoragePolicy, Weibull};
use proptest::prelude::*;

fn policy() -> impl Strategy<Value = StoragePolicy> {
    prop::sample::select(five_policies())
}

fn config(p: StoragePolicy, seed: u64) -> SimConfig {
    SimConfig { policy: p, seed, duration_min: 40.0, ..SimConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_cache_is_adjudicated_once(p in policy(), seed in any::<u64>(), pct in prop::option::of(prop::sample::select(vec![25u32, 50, 75, 100]))) {
        let cfg = SimConfig { localization_pct: pct, ..config(p, seed) };
        let r = run(&cfg).unwrap();
        let c = &r.counters;
        prop_assert_eq!(c.caches_created + c.schedules_skipped, cfg.schedule_count());
        prop_assert_eq!(c.succeeded + c.data_losses, c.caches_created);
        prop_assert_eq!(r.caches.len(), c.caches_created);
        prop_assert_eq!(r.losses.len(), c.data_losses);
        let lost = r.caches.iter().filter(|x| x.outcome == CacheOutcome::Lost).count();
        prop_assert_eq!(lost, c.data_losses);
        for cache in &r.caches {
            prop_assert!(cache.ended_min >= cache.created_min);
            prop_assert!(cache.ended_min <= cache.created_min + cfg.lease_period_min + 1e-9);
        }
    }

    #[test]
    fn traffic_is_conserved(p in policy(), seed in any::<u64>(), proactive in any::<bool>()) {
        let cfg = SimConfig { proactive_threshold: proactive.then_some(60.0), ..config(p, seed) };
        let r = run(&cfg).unwrap();
        let b = r.bytes();
        let sum: u64 = r.transfers.iter().map(|t| t.bytes).sum();
        prop_assert_eq!(b.write + b.recovery + b.proactive, sum);
        let unit = p.unit_size(cfg.cache_size) as u64;
        prop_assert!(r.transfers.iter().all(|t| t.bytes == unit));
        let writes = r.transfers.iter().filter(|t| t.category == TransferCategory::Write).count();
        prop_assert_eq!(writes, r.counters.caches_created * (p.n() - 1));
        if !proactive {
            prop_assert_eq!(b.proactive, 0);
        }
        if p.n() == 1 {
            prop_assert_eq!(b.recovery, 0);
            prop_assert_eq!(r.counters.temporary_failures, 0);
        }
        for t in &r.transfers {
            let remote = t.bytes as f64 / (1u64 << 20) as f64 * cfg.remote_unit_transfer_time;
            let want = if t.src_domain == t.dst_domain { remote * cfg.local_time_ratio } else { remote };
            prop_assert!((t.seconds - want).abs() < 1e-12);
        }
    }

    #[test]
    fn runs_are_reproducible(p in policy(), seed in any::<u64>()) {
        let cfg = SimConfig { localization_pct: Some(50), proactive_threshold: Some(60.0), ..config(p, seed) };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        prop_assert_eq!(a.transfers_csv(), b.transfers_csv());
        prop_assert_eq!(a.caches_csv(), b.caches_csv());
        prop_assert_eq!(a.vm_counts_csv(), b.vm_counts_csv());
        prop_assert_eq!(a.summary_csv(), b.summary_csv());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn real_payloads_agree_with_verdicts(p in policy(), seed in any::<u64>(), proactive in any::<bool>()) {
        // The engine asserts decodability against every verdict and recovery.
        let cfg = SimConfig {
            cache_size: 4099,
            verify_payloads: true,
            proactive_threshold: proactive.then_some(60.0),
            ..config(p, seed)
        };
        run(&cfg).unwrap();
    }

    #[test]
    fn storage_cost_is_redundancy_times_size(p in policy(), seed in any::<u64>(), size in 1usize..5_000_000) {
        let cfg = SimConfig { cache_size: size, duration_min: 5.0, ..config(p, seed) };
        let r = run(&cfg).unwrap();
        let (units, bytes) = storage_cost(&r).unwrap();
        prop_assert_eq!(units, p.n() as f64);
        // Zero padding is below k bytes of data, so stored bytes exceed
        // n/k * size by less than n/k * k = n.
        let ideal = redundancy::<f64>(&p) * size as f64;
        prop_assert!(bytes >= ideal - 1e-6 && bytes < ideal + p.n() as f64);
        prop_assert!(vm_variance(&r) >= 0.0);
    }
}

#[test]
fn proactive_losses_never_involve_a_protected_stale_worker() {
    let policy: StoragePolicy = "ec3+1".parse().unwrap();
    let ci = 2.0;
    let crossing = crossing_age(&policy, 60.0, ci, &Weibull::default(), 5000.0).unwrap().unwrap();
    let mut losses = 0;
    for seed in 0..40 {
        let cfg = SimConfig {
            policy,
            seed,
            lease_period_min: 100.0,
            duration_min: 50.0,
            proactive_threshold: Some(60.0),
            ..SimConfig::default()
        };
        let r = run(&cfg).unwrap();
        for loss in &r.losses {
            losses += 1;
            for w in &loss.dead_workers {
                assert!(
                    w.age_min <= crossing + ci || w.unprotected,
                    "seed {seed}: cache {} lost a worker aged {} (crossing {crossing})",
                    loss.cache,
                    w.age_min
                );
            }
        }
    }
    assert!(losses > 0);
}

#[test]
fn immortal_daemons_never_fail() {
    for p in five_policies() {
        let cfg = SimConfig { policy: p, weibull: Weibull::new(2.0, 1e12).unwrap(), ..SimConfig::default() };
        let r = run(&cfg).unwrap();
        assert_eq!(r.counters.caches_created, 240);
        assert_eq!(r.counters.temporary_failures, 0);
        assert_eq!(r.counters.data_losses, 0);
        assert_eq!(r.bytes().recovery, 0);
    }
}

#[test]
fn single_daemon_cluster_skips_wide_stripes() {
    let cfg = SimConfig {
        policy: "ec3+2".parse().unwrap(),
        vm_count: 1,
        cacheds_per_vm: 4,
        duration_min: 10.0,
        ..SimConfig::default()
    };
    let r = run(&cfg).unwrap();
    assert_eq!(r.counters.caches_created, 0);
    assert_eq!(r.counters.schedules_skipped, 20);
}

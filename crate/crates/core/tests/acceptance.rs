//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use common::{exact, oracle, rel_err, to_f64};
use ecsim::battery::{default_seeds, five_policies, run_battery, BatteryName, BatteryResult, PROACTIVE_HORIZON_MIN};
use ecsim::erasure::{decode, encode, StoragePolicy, Stripe};
use ecsim::metrics::{lifetime_cdf, CacheOutcome};
use ecsim::mttdl::{crossing_age, mttdl_general, mttdl_raid5, mttdl_raid6, MarkovParams};
use ecsim::placement::{write_path_select, CachedId, DomainBucket, LocalizationPolicy};
use ecsim::reliability::{conditional_failure_rate, pdf, sample_lifetime, FailureRateQuery, WeibullParams};
use ecsim::{Exact, Weibull};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 30;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ec(k: usize, r: usize) -> StoragePolicy {
    StoragePolicy::erasure(k, r).unwrap()
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

fn codec_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DEC);
    let mut decodes = 0usize;
    let mut failures = Vec::new();
    for case in 0..100 {
        let size = match case {
            0 => 1,
            1 => 2,
            2 => 4 << 20,
            _ => rng.gen_range(1..=4 << 20),
        };
        let mut data = vec![0u8; size];
        rng.fill_bytes(&mut data);
        for p in five_policies() {
            let units = encode(&data, &p).unwrap();
            for keep in k_subsets(p.n(), p.k()) {
                let subset: Vec<Stripe> = keep.iter().map(|i| units[*i].clone()).collect();
                decodes += 1;
                match decode(&subset, &p, size) {
                    Ok(out) if out == data => {}
                    _ => failures.push(format!("{p} size {size} units {keep:?}")),
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        failures.is_empty() && elapsed < Duration::from_secs(60),
        format!("{decodes} subset decodes, {} mismatches, {:.1}s (limit 60s) {:?}", failures.len(), elapsed.as_secs_f64(), failures.first()),
    )
}

fn mttdl_closed_forms() -> Outcome {
    let start = Instant::now();
    let lambdas = [0.01, 0.05, 0.1, 0.3, 0.5];
    let mus = [0.5, 1.0, 2.0];
    let mut worst_raid = 0.0f64;
    for n in 2..=10 {
        for &l in &lambdas {
            for &mu in &mus {
                let g5 = mttdl_general(&MarkovParams::new(n, 1, l, mu).unwrap()).mttdl;
                worst_raid = worst_raid.max(rel_err(g5, mttdl_raid5(n, l, mu).unwrap().mttdl));
                if n >= 3 {
                    let g6 = mttdl_general(&MarkovParams::new(n, 2, l, mu).unwrap()).mttdl;
                    worst_raid = worst_raid.max(rel_err(g6, mttdl_raid6(n, l, mu).unwrap().mttdl));
                }
            }
        }
    }
    let mut worst_chain = 0.0f64;
    let mut cells = 0;
    for n in 1..=8 {
        for r in 0..n {
            for &l in &lambdas {
                for &mu in &mus {
                    let closed = mttdl_general(&MarkovParams::new(n, r, l, mu).unwrap()).mttdl;
                    let solved = to_f64(&oracle::mttdl::<Exact>(n, r, &exact(l), &exact(mu)));
                    worst_chain = worst_chain.max(rel_err(closed, solved));
                    cells += 1;
                }
            }
        }
    }
    check(
        worst_raid <= 1e-12 && worst_chain <= 1e-9,
        format!(
            "max rel err vs RAID5/6 forms {worst_raid:.2e} (limit 1e-12), vs chain solve {worst_chain:.2e} over {cells} cells (limit 1e-9), {:.2}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn mttdl_gap(lambda: f64) -> f64 {
    let ec32 = mttdl_general(&MarkovParams::new(5, 2, lambda, 1.0).unwrap()).mttdl;
    let rep2 = mttdl_general(&MarkovParams::new(2, 1, lambda, 1.0).unwrap()).mttdl;
    ec32 - rep2
}

fn specific_values() -> Outcome {
    let a = mttdl_general(&MarkovParams::new(2, 1, 0.1, 1.0).unwrap()).mttdl;
    let b = mttdl_general(&MarkovParams::new(5, 2, 0.1, 1.0).unwrap()).mttdl;
    let (mut lo, mut hi) = (1e-4, 0.9);
    let sign_lo = mttdl_gap(lo) > 0.0;
    let bracketed = sign_lo != (mttdl_gap(hi) > 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if (mttdl_gap(mid) > 0.0) == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let star = 0.5 * (lo + hi);
    check(
        rel_err(a, 65.0) <= 1e-9 && rel_err(b, 377.0 / 6.0) <= 1e-9 && bracketed && star > 0.05 && star < 0.1,
        format!("MTTDL(2,1)={a}, MTTDL(5,2)={b:.10}, EC3+2/Replica2 crossing lambda*={star:.5} (need 0.05..0.1)"),
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn failure_rate_math() -> Outcome {
    let mut worst = 0.0f64;
    let grid: Vec<f64> = (0..=30).map(|i| 5.0 * i as f64).collect();
    for (a, b) in [(2.0, 50.0), (1.5, 30.0), (3.0, 80.0)] {
        let w = WeibullParams::new(a, b).unwrap();
        for &t0 in &grid {
            // t = t0 + u^2 keeps the integrand smooth at t = 0 for shapes below 2
            let g = |u: f64| 2.0 * u * pdf(t0 + u * u, &w).unwrap();
            for dt in [0.5f64, 2.0, 10.0, 30.0] {
                let window = simpson(g, 0.0, dt.sqrt(), 20_000);
                let survival = simpson(g, 0.0, (12.0 * b).sqrt(), 200_000);
                let closed = conditional_failure_rate(&FailureRateQuery::new(t0, dt).unwrap(), &w);
                worst = worst.max((window / survival - closed).abs());
            }
        }
    }
    let w = Weibull::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let n = 100_000;
    let mut xs: Vec<f64> = (0..n).map(|_| sample_lifetime(&w, &mut rng)).collect();
    xs.sort_by(f64::total_cmp);
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = w.cdf(*x);
            (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
        })
        .fold(0.0, f64::max);
    check(worst <= 1e-8 && ks < 0.01, format!("max |closed - quadrature| {worst:.2e} (limit 1e-8), KS distance {ks:.4} at 1e5 samples (limit 0.01)"))
}

fn threshold_geometry() -> Outcome {
    let age = crossing_age(&ec(3, 1), 60.0, 2.0, &Weibull::default(), 150.0).unwrap();
    check(
        age.is_some_and(|a| (22.0..=28.0).contains(&a)),
        format!("EC3+1 MTTDL crosses 60 at age {age:?} min (need 22..28)"),
    )
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

fn availability_trends() -> Outcome {
    let start = Instant::now();
    let b = BatteryName::Availability;
    let res = run_battery(b, &b.preset(), &default_seeds(SEEDS)).unwrap();
    let sc = &res.scenarios[0];
    let temp: Vec<f64> = five_policies().iter().map(|p| sc.aggregate(p).temp_failures).collect();
    let rep2 = sc.aggregate(&StoragePolicy::replication(2).unwrap()).lost;
    let ec32 = sc.aggregate(&ec(3, 2)).lost;
    let elapsed = start.elapsed();
    let ordered = strictly_increasing(&temp);
    let close = (ec32 - rep2).abs() <= 0.2 * rep2;
    check(
        ordered && close && elapsed < Duration::from_secs(300),
        format!(
            "mean temporary failures R1..EC3+2 {temp:.1?} (strictly increasing: {ordered}); mean losses EC3+2 {ec32:.2} vs Replica2 {rep2:.2}, ratio {:.2} (need 0.8..1.2: {close}); {:.1}s",
            ec32 / rep2,
            elapsed.as_secs_f64()
        ),
    )
}

fn recovery_portion_trend() -> Outcome {
    let b = BatteryName::Network;
    let res = run_battery(b, &b.preset(), &default_seeds(SEEDS)).unwrap();
    let sc = &res.scenarios[0];
    let policies = [StoragePolicy::replication(2).unwrap(), ec(2, 1), ec(3, 1), ec(3, 2)];
    let reference = [0.092, 0.112, 0.164, 0.226];
    let means: Vec<f64> = policies.iter().map(|p| sc.aggregate(p).recovery_portion).collect();
    let inside: Vec<bool> = means.iter().zip(reference).map(|(m, r)| *m >= 0.5 * r && *m <= 2.0 * r).collect();
    let increasing = strictly_increasing(&means);
    check(
        increasing && inside.iter().all(|b| *b),
        format!("mean recovery portion Replica2/EC2+1/EC3+1/EC3+2 {means:.3?}; increasing: {increasing}; inside [0.5x, 2x] of {reference:?}: {inside:?}"),
    )
}

fn proactive_battery() -> Outcome {
    let b = BatteryName::Proactive;
    let base = b.preset();
    let res = run_battery(b, &base, &default_seeds(SEEDS)).unwrap();
    let on = res.scenario("proactive").unwrap();
    let off = res.scenario("baseline").unwrap();
    let (a_on, a_off) = (on.aggregate(&base.policy), off.aggregate(&base.policy));
    let crossing =
        crossing_age(&base.policy, 60.0, base.check_interval_min, &base.weibull, 150.0).unwrap().unwrap();

    let fewer_losses = a_on.loss_fraction < a_off.loss_fraction;
    let baseline_by_horizon = lifetime_cdf(&off.reports, PROACTIVE_HORIZON_MIN).at(PROACTIVE_HORIZON_MIN);
    let late: Vec<f64> = on
        .reports
        .iter()
        .flat_map(|r| r.caches.iter())
        .filter(|c| c.outcome == CacheOutcome::Lost)
        .map(|c| c.lifetime())
        .filter(|age| *age >= crossing)
        .collect();
    let lost_on = (a_on.lost * a_on.runs as f64).round();
    let bytes_delta = 100.0 * (a_on.bytes_total / a_off.bytes_total - 1.0);
    let recovery_delta = 100.0 * (a_on.bytes_recovery / a_off.bytes_recovery - 1.0);
    let bytes_ok = bytes_delta > 0.0 && (bytes_delta - 49.5).abs() <= 20.0;
    let recovery_ok = recovery_delta < 0.0 && (recovery_delta + 30.0).abs() <= 20.0;
    let verdicts = [fewer_losses, baseline_by_horizon > 0.9, late.is_empty(), bytes_ok, recovery_ok];
    check(
        verdicts.iter().all(|v| *v),
        format!(
            "loss fraction proactive {:.3} vs baseline {:.3} ({}); baseline lost by {PROACTIVE_HORIZON_MIN} min {:.3} (need > 0.9: {}); \
             {} of {lost_on} proactive losses at cache age >= crossing {crossing:.1} min ({}); \
             total bytes {bytes_delta:+.1}% (need +29.5..+69.5: {bytes_ok}); recovery bytes {recovery_delta:+.1}% (need -50..-10: {recovery_ok})",
            a_on.loss_fraction,
            a_off.loss_fraction,
            fewer_losses,
            baseline_by_horizon,
            verdicts[1],
            late.len(),
            verdicts[2],
        ),
    )
}

fn localization_battery() -> Outcome {
    let b = BatteryName::Localization;
    let base = b.preset();
    let res = run_battery(b, &base, &default_seeds(SEEDS)).unwrap();
    let aggs: Vec<_> = res.scenarios.iter().map(|s| s.aggregate(&base.policy)).collect();
    let bytes: Vec<f64> = aggs.iter().map(|a| a.bytes_total).collect();
    let secs: Vec<f64> = aggs.iter().map(|a| a.transfer_seconds).collect();
    let var: Vec<f64> = aggs.iter().map(|a| a.vm_variance).collect();
    let mean = bytes.iter().sum::<f64>() / bytes.len() as f64;
    let spread = bytes.iter().map(|b| (b / mean - 1.0).abs()).fold(0.0, f64::max);
    let bytes_ok = spread <= 0.05;
    let secs_ok = secs.windows(2).all(|w| w[1] < w[0]);
    let var_ok = strictly_increasing(&var) && var[3] >= 2.0 * var[0];
    let mib: Vec<f64> = bytes.iter().map(|b| b / (1 << 20) as f64).collect();
    check(
        bytes_ok && secs_ok && var_ok,
        format!(
            "pct 25/50/75/100: total MiB {mib:.1?}, max deviation from mean {:.1}% (limit 5%: {bytes_ok}); transfer seconds {secs:.1?} (strictly decreasing: {secs_ok}); vm variance {var:.3?} (increasing, 100% >= 2x 25%: {var_ok})",
            100.0 * spread
        ),
    )
}

fn placement_fixture() -> Outcome {
    let ids = |r: std::ops::Range<usize>| r.map(CachedId).collect::<Vec<_>>();
    let cluster = vec![
        DomainBucket::new("condorworker1", ids(0..4)),
        DomainBucket::new("condorworker2", ids(4..5)),
        DomainBucket::new("condorworker3", ids(5..8)),
        DomainBucket::new("condorworker4", ids(8..12)),
    ];
    let domain = |id: CachedId| cluster.iter().find(|b| b.available.contains(&id)).unwrap().domain.clone();
    let expected: [(u32, &[(&str, usize)]); 4] = [
        (100, &[("condorworker1", 4)]),
        (75, &[("condorworker3", 3), ("condorworker1", 1)]),
        (50, &[("condorworker3", 2), ("condorworker1", 2)]),
        (25, &[("condorworker1", 1), ("condorworker2", 1), ("condorworker3", 1), ("condorworker4", 1)]),
    ];
    let mut bad = Vec::new();
    for (pct, want) in expected {
        let sel = write_path_select(&cluster, 4, &LocalizationPolicy::new(pct, 4).unwrap()).unwrap();
        let mut got: BTreeMap<String, usize> = BTreeMap::new();
        for id in &sel.cacheds {
            *got.entry(domain(*id)).or_default() += 1;
        }
        let want: BTreeMap<String, usize> = want.iter().map(|(d, c)| (d.to_string(), *c)).collect();
        if got != want || sel.cap_relaxed {
            bad.push(format!("pct {pct}: got {got:?}"));
        }
    }
    let caps: Vec<usize> = [25, 50, 75, 100].iter().map(|p| LocalizationPolicy::new(*p, 4).unwrap().cap()).collect();
    check(
        bad.is_empty() && caps == [1, 2, 3, 4],
        format!("write-path selections on the (4,1,3,4) cluster {}; EC3+1 caps {caps:?}", if bad.is_empty() { "match".to_string() } else { bad.join("; ") }),
    )
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn write_battery(res: &BatteryResult, dir: &Path) -> BTreeMap<String, Vec<u8>> {
    res.write(dir).unwrap();
    read_tree(dir)
}

fn determinism() -> Outcome {
    let seeds = default_seeds(5);
    let mut files = 0;
    let mut differing = Vec::new();
    for b in BatteryName::ALL {
        let a = tempfile::tempdir().unwrap();
        let c = tempfile::tempdir().unwrap();
        let first = write_battery(&run_battery(b, &b.preset(), &seeds).unwrap(), a.path());
        let second = write_battery(&run_battery(b, &b.preset(), &seeds).unwrap(), c.path());
        files += first.len();
        if first != second {
            differing.push(b.to_string());
        }
    }
    check(differing.is_empty(), format!("{files} CSV files across 5 batteries compared byte for byte; differing batteries: {differing:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("codec exactness", codec_exactness),
        ("MTTDL closed forms", mttdl_closed_forms),
        ("specific MTTDL values", specific_values),
        ("failure-rate math", failure_rate_math),
        ("proactive threshold geometry", threshold_geometry),
        ("availability trends", availability_trends),
        ("recovery portion trend", recovery_portion_trend),
        ("proactive battery", proactive_battery),
        ("localization battery", localization_battery),
        ("placement fixture", placement_fixture),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        match f() {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(detail) => {
                println!("FAIL {n:>2} {name}: {detail}");
                failed.push(n);
            }
        }
    }
    println!("acceptance: {} passed, {} failed {failed:?}", criteria.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

//! Simulation reports and the quantities derived from them.
//!
//! CSV schemas (all with a header row):
//!
//! | file            | columns                                                   |
//! |-----------------|-----------------------------------------------------------|
//! | `transfers.csv` | `time_min,bytes,seconds,category,src_domain,dst_domain`   |
//! | `caches.csv`    | `id,policy,outcome,created_min,ended_min`                 |
//! | `vm_counts.csv` | `window_start_min,domain,unit_count`                      |
//! | `summary.csv`   | [`SUMMARY_HEADER`]                                        |

use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::Path;

use crate::erasure::StoragePolicy;

/// Window used for per-VM unit counts, in minutes.
pub const VM_WINDOW_MIN: f64 = 0.5;

pub const SUMMARY_LINE_HEADER: &str =
    "policy,caches,succeeded,lost,temp_failures,bytes_write,bytes_recovery,bytes_proactive,transfer_seconds";
pub const SUMMARY_HEADER: &str = "policy,seed,caches,succeeded,lost,temp_failures,bytes_write,bytes_recovery,bytes_proactive,transfer_seconds,schedules_skipped,manager_promotions,proactive_relocations,cap_relaxations";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransferCategory {
    Write,
    Recovery,
    Proactive,
}

impl fmt::Display for TransferCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferCategory::Write => "WRITE",
            TransferCategory::Recovery => "RECOVERY",
            TransferCategory::Proactive => "PROACTIVE",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferRecord {
    /// Completion time.
    pub time_min: f64,
    pub bytes: u64,
    pub seconds: f64,
    pub category: TransferCategory,
    pub src_domain: String,
    pub dst_domain: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheOutcome {
    Succeeded,
    Lost,
}

impl fmt::Display for CacheOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CacheOutcome::Succeeded => "SUCCEEDED",
            CacheOutcome::Lost => "LOST",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CacheRecord {
    pub id: usize,
    pub policy: StoragePolicy,
    pub outcome: CacheOutcome,
    pub created_min: f64,
    /// Lease expiry for successes, loss time for losses.
    pub ended_min: f64,
    pub stored_units: usize,
    pub stored_bytes: u64,
}

impl CacheRecord {
    pub fn loss_time(&self) -> Option<f64> {
        (self.outcome == CacheOutcome::Lost).then_some(self.ended_min)
    }

    pub fn lifetime(&self) -> f64 {
        self.ended_min - self.created_min
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VmCount {
    pub window_start_min: f64,
    pub domain: String,
    pub unit_count: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub caches_created: usize,
    pub schedules_skipped: usize,
    pub succeeded: usize,
    pub data_losses: usize,
    pub temporary_failures: usize,
    pub manager_promotions: usize,
    pub proactive_relocations: usize,
    /// Placements that had to ignore the localization cap.
    pub cap_relaxations: usize,
    /// Recoveries or relocations that found no target daemon.
    pub stranded_units: usize,
}

/// Everything one simulation run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub policy: StoragePolicy,
    pub seed: u64,
    pub domains: Vec<String>,
    pub caches: Vec<CacheRecord>,
    pub transfers: Vec<TransferRecord>,
    pub vm_counts: Vec<VmCount>,
    pub counters: Counters,
    /// End of the observed span, minutes.
    pub end_min: f64,
    /// Loss events with the age of every daemon whose unit went missing.
    pub losses: Vec<LossEvent>,
}

/// Diagnostic record of one data loss.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEvent {
    pub cache: usize,
    pub time_min: f64,
    /// Workers (not the manager) whose units were missing.
    pub dead_workers: Vec<DeadWorker>,
    pub manager_died: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeadWorker {
    pub age_min: f64,
    /// The daemon held a unit past the relocation age for lack of a fresh target.
    pub unprotected: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ByteTotals {
    pub write: u64,
    pub recovery: u64,
    pub proactive: u64,
}

impl ByteTotals {
    pub fn total(&self) -> u64 {
        self.write + self.recovery + self.proactive
    }
}

impl SimReport {
    pub fn bytes(&self) -> ByteTotals {
        let mut t = ByteTotals::default();
        for tr in &self.transfers {
            match tr.category {
                TransferCategory::Write => t.write += tr.bytes,
                TransferCategory::Recovery => t.recovery += tr.bytes,
                TransferCategory::Proactive => t.proactive += tr.bytes,
            }
        }
        t
    }

    pub fn transfer_seconds(&self) -> f64 {
        self.transfers.iter().fold(0.0, |acc, t| acc + t.seconds)
    }

    pub fn summary_line(&self) -> String {
        let b = self.bytes();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.counters.caches_created,
            self.counters.succeeded,
            self.counters.data_losses,
            self.counters.temporary_failures,
            b.write,
            b.recovery,
            b.proactive,
            self.transfer_seconds()
        )
    }

    pub fn summary_row(&self) -> String {
        let b = self.bytes();
        let c = &self.counters;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.seed,
            c.caches_created,
            c.succeeded,
            c.data_losses,
            c.temporary_failures,
            b.write,
            b.recovery,
            b.proactive,
            self.transfer_seconds(),
            c.schedules_skipped,
            c.manager_promotions,
            c.proactive_relocations,
            c.cap_relaxations
        )
    }

    pub fn transfers_csv(&self) -> String {
        let mut s = String::from("time_min,bytes,seconds,category,src_domain,dst_domain\n");
        for t in &self.transfers {
            let _ = writeln!(s, "{},{},{},{},{},{}", t.time_min, t.bytes, t.seconds, t.category, t.src_domain, t.dst_domain);
        }
        s
    }

    pub fn caches_csv(&self) -> String {
        let mut s = String::from("id,policy,outcome,created_min,ended_min\n");
        for c in &self.caches {
            let _ = writeln!(s, "{},{},{},{},{}", c.id, c.policy, c.outcome, c.created_min, c.ended_min);
        }
        s
    }

    pub fn vm_counts_csv(&self) -> String {
        let mut s = String::from("window_start_min,domain,unit_count\n");
        for v in &self.vm_counts {
            let _ = writeln!(s, "{},{},{}", v.window_start_min, v.domain, v.unit_count);
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        format!("{SUMMARY_HEADER}\n{}\n", self.summary_row())
    }

    /// Write the four per-run CSV files into `dir`, creating it if needed.
    pub fn write_csvs(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("transfers.csv"), self.transfers_csv())?;
        fs::write(dir.join("caches.csv"), self.caches_csv())?;
        fs::write(dir.join("vm_counts.csv"), self.vm_counts_csv())?;
        fs::write(dir.join("summary.csv"), self.summary_csv())
    }
}

/// Share of transferred bytes spent on recovery; `None` without any traffic.
pub fn recovery_portion(report: &SimReport) -> Option<f64> {
    let b = report.bytes();
    (b.total() > 0).then(|| b.recovery as f64 / b.total() as f64)
}

/// Population variance of `values`.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Time-averaged population variance of per-VM unit counts over the report's windows.
pub fn vm_variance(report: &SimReport) -> f64 {
    let per_window = report.domains.len().max(1);
    let windows: Vec<f64> = report
        .vm_counts
        .chunks(per_window)
        .map(|w| population_variance(&w.iter().map(|v| v.unit_count as f64).collect::<Vec<_>>()))
        .collect();
    if windows.is_empty() {
        0.0
    } else {
        windows.iter().sum::<f64>() / windows.len() as f64
    }
}

/// Empirical CDF of cache lifetimes where surviving caches are censored at `horizon_min`.
#[derive(Clone, Debug, PartialEq)]
pub struct LifetimeCdf {
    pub horizon_min: f64,
    pub caches: usize,
    /// Sorted lifetimes of caches lost no later than the horizon.
    pub losses: Vec<f64>,
}

impl LifetimeCdf {
    /// Fraction of all caches lost within `t` minutes of creation.
    pub fn at(&self, t: f64) -> f64 {
        if self.caches == 0 {
            return 0.0;
        }
        let t = t.min(self.horizon_min);
        self.losses.partition_point(|l| *l <= t) as f64 / self.caches as f64
    }

    /// `(minute, fraction)` rows on a one-minute grid up to the horizon.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        (0..=self.horizon_min.floor() as usize).map(|m| (m as f64, self.at(m as f64))).collect()
    }
}

pub fn lifetime_cdf<'a>(reports: impl IntoIterator<Item = &'a SimReport>, horizon_min: f64) -> LifetimeCdf {
    let mut caches = 0;
    let mut losses = Vec::new();
    for r in reports {
        caches += r.caches.len();
        losses.extend(
            r.caches
                .iter()
                .filter(|c| c.outcome == CacheOutcome::Lost)
                .map(CacheRecord::lifetime)
                .filter(|l| *l <= horizon_min),
        );
    }
    losses.sort_by(f64::total_cmp);
    LifetimeCdf { horizon_min, caches, losses }
}

/// Average redundancy-unit count and stored bytes per created cache.
pub fn storage_cost(report: &SimReport) -> Option<(f64, f64)> {
    if report.caches.is_empty() {
        return None;
    }
    let n = report.caches.len() as f64;
    let units = report.caches.iter().map(|c| c.stored_units as f64).sum::<f64>() / n;
    let bytes = report.caches.iter().map(|c| c.stored_bytes as f64).sum::<f64>() / n;
    Some((units, bytes))
}

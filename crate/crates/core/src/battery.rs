//! Multi-seed experiment batteries.
//!
//! A battery is a list of [`Scenario`]s. Each scenario fixes one setting
//! (a localization percentage, proactive on or off, ...) and sweeps a list
//! of policies over a list of seeds. Runs are independent, so they execute
//! in parallel; results are always reported in `(scenario, policy, seed)`
//! order so output does not depend on scheduling.

use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::erasure::StoragePolicy;
use crate::metrics::{self, lifetime_cdf, recovery_portion, storage_cost, vm_variance, CacheOutcome, SimReport};
use crate::sim::{self, ConfigError, SimConfig};

/// Observation horizon for the proactive lifetime CDF, in minutes.
pub const PROACTIVE_HORIZON_MIN: f64 = 90.0;
pub const PROACTIVE_THRESHOLD: f64 = 60.0;
pub const DEFAULT_SEED_COUNT: u64 = 30;

#[derive(Debug, Error)]
pub enum BatteryError {
    #[error("unknown battery `{0}` (expected one of storage, availability, network, proactive, localization)")]
    UnknownBattery(String),
    #[error("scenario `{0}` needs at least one seed and one policy")]
    EmptyScenario(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BatteryName {
    Storage,
    Availability,
    Network,
    Proactive,
    Localization,
}

impl BatteryName {
    pub const ALL: [BatteryName; 5] = [
        BatteryName::Storage,
        BatteryName::Availability,
        BatteryName::Network,
        BatteryName::Proactive,
        BatteryName::Localization,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BatteryName::Storage => "storage",
            BatteryName::Availability => "availability",
            BatteryName::Network => "network",
            BatteryName::Proactive => "proactive",
            BatteryName::Localization => "localization",
        }
    }

    /// Base configuration of the battery before user overrides.
    pub fn preset(&self) -> SimConfig {
        let mut cfg = SimConfig::default();
        match self {
            BatteryName::Storage | BatteryName::Availability | BatteryName::Network => {}
            BatteryName::Proactive => {
                cfg.policy = ec(3, 1);
                cfg.lease_period_min = 100.0;
                cfg.duration_min = 50.0;
            }
            BatteryName::Localization => {
                cfg.policy = ec(3, 1);
                cfg.cacheds_per_vm = 4;
            }
        }
        cfg
    }

    /// Expand `base` into the battery's scenarios.
    pub fn scenarios(&self, base: &SimConfig, seeds: &[u64]) -> Result<Vec<Scenario>, BatteryError> {
        let mk = |name: &str, cfg: SimConfig, policies: Vec<StoragePolicy>| {
            Scenario::new(name, cfg, seeds.to_vec(), policies)
        };
        match self {
            BatteryName::Storage | BatteryName::Availability | BatteryName::Network => {
                Ok(vec![mk(self.as_str(), base.clone(), five_policies())?])
            }
            BatteryName::Proactive => {
                let on = SimConfig { proactive_threshold: Some(PROACTIVE_THRESHOLD), ..base.clone() };
                let off = SimConfig { proactive_threshold: None, ..base.clone() };
                Ok(vec![mk("proactive", on, vec![base.policy])?, mk("baseline", off, vec![base.policy])?])
            }
            BatteryName::Localization => crate::placement::LocalizationPolicy::PERCENTAGES
                .iter()
                .map(|pct| {
                    let cfg = SimConfig { localization_pct: Some(*pct), ..base.clone() };
                    mk(&format!("pct{pct}"), cfg, vec![base.policy])
                })
                .collect(),
        }
    }
}

impl fmt::Display for BatteryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BatteryName {
    type Err = BatteryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BatteryName::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| BatteryError::UnknownBattery(s.to_string()))
    }
}

fn ec(k: usize, r: usize) -> StoragePolicy {
    StoragePolicy::erasure(k, r).expect("literal policy is valid")
}

/// Replica1, Replica2, EC2+1, EC3+1 and EC3+2, in increasing stripe width.
pub fn five_policies() -> Vec<StoragePolicy> {
    vec![
        StoragePolicy::replication(1).expect("valid"),
        StoragePolicy::replication(2).expect("valid"),
        ec(2, 1),
        ec(3, 1),
        ec(3, 2),
    ]
}

/// `0..count`.
pub fn default_seeds(count: u64) -> Vec<u64> {
    (0..count).collect()
}

/// One setting of a battery swept over policies and seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub base: SimConfig,
    pub seeds: Vec<u64>,
    pub policies: Vec<StoragePolicy>,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        base: SimConfig,
        seeds: Vec<u64>,
        policies: Vec<StoragePolicy>,
    ) -> Result<Self, BatteryError> {
        let name = name.into();
        if seeds.is_empty() || policies.is_empty() {
            return Err(BatteryError::EmptyScenario(name));
        }
        base.validate()?;
        Ok(Self { name, base, seeds, policies })
    }

    /// Every run configuration, policy-major.
    pub fn configs(&self) -> Vec<SimConfig> {
        self.policies
            .iter()
            .flat_map(|p| self.seeds.iter().map(move |s| SimConfig { policy: *p, seed: *s, ..self.base.clone() }))
            .collect()
    }
}

/// Reports of one scenario, in [`Scenario::configs`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub reports: Vec<SimReport>,
}

impl ScenarioResult {
    pub fn reports_for(&self, policy: &StoragePolicy) -> impl Iterator<Item = &SimReport> {
        let policy = *policy;
        self.reports.iter().filter(move |r| r.policy == policy)
    }

    pub fn aggregate(&self, policy: &StoragePolicy) -> Aggregate {
        Aggregate::over(self.reports_for(policy))
    }
}

/// Seed-averaged numbers for one `(scenario, policy)` cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Aggregate {
    pub runs: usize,
    pub caches: f64,
    pub succeeded: f64,
    pub lost: f64,
    pub temp_failures: f64,
    pub bytes_write: f64,
    pub bytes_recovery: f64,
    pub bytes_proactive: f64,
    pub bytes_total: f64,
    pub transfer_seconds: f64,
    /// Mean over runs that moved any bytes.
    pub recovery_portion: f64,
    pub vm_variance: f64,
    pub loss_fraction: f64,
    pub units_per_cache: f64,
    pub stored_bytes_per_cache: f64,
}

impl Aggregate {
    pub const CSV_HEADER: &'static str = "scenario,policy,runs,caches,succeeded,lost,temp_failures,bytes_write,bytes_recovery,bytes_proactive,bytes_total,transfer_seconds,recovery_portion,vm_variance,loss_fraction,units_per_cache,stored_bytes_per_cache";

    pub fn over<'a>(reports: impl IntoIterator<Item = &'a SimReport>) -> Self {
        let reports: Vec<&SimReport> = reports.into_iter().collect();
        let n = reports.len();
        if n == 0 {
            return Self::default();
        }
        let mean = |f: &dyn Fn(&SimReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n as f64;
        let mean_opt = |f: &dyn Fn(&SimReport) -> Option<f64>| {
            let v: Vec<f64> = reports.iter().filter_map(|r| f(r)).collect();
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let created: usize = reports.iter().map(|r| r.caches.len()).sum();
        let lost: usize = reports
            .iter()
            .map(|r| r.caches.iter().filter(|c| c.outcome == CacheOutcome::Lost).count())
            .sum();
        Self {
            runs: n,
            caches: mean(&|r| r.counters.caches_created as f64),
            succeeded: mean(&|r| r.counters.succeeded as f64),
            lost: mean(&|r| r.counters.data_losses as f64),
            temp_failures: mean(&|r| r.counters.temporary_failures as f64),
            bytes_write: mean(&|r| r.bytes().write as f64),
            bytes_recovery: mean(&|r| r.bytes().recovery as f64),
            bytes_proactive: mean(&|r| r.bytes().proactive as f64),
            bytes_total: mean(&|r| r.bytes().total() as f64),
            transfer_seconds: mean(&|r| r.transfer_seconds()),
            recovery_portion: mean_opt(&recovery_portion),
            vm_variance: mean(&vm_variance),
            loss_fraction: if created == 0 { 0.0 } else { lost as f64 / created as f64 },
            units_per_cache: mean_opt(&|r| storage_cost(r).map(|c| c.0)),
            stored_bytes_per_cache: mean_opt(&|r| storage_cost(r).map(|c| c.1)),
        }
    }

    fn csv_row(&self, scenario: &str, policy: &StoragePolicy) -> String {
        format!(
            "{scenario},{policy},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.runs,
            self.caches,
            self.succeeded,
            self.lost,
            self.temp_failures,
            self.bytes_write,
            self.bytes_recovery,
            self.bytes_proactive,
            self.bytes_total,
            self.transfer_seconds,
            self.recovery_portion,
            self.vm_variance,
            self.loss_fraction,
            self.units_per_cache,
            self.stored_bytes_per_cache,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatteryResult {
    pub name: BatteryName,
    pub scenarios: Vec<ScenarioResult>,
}

impl BatteryResult {
    pub fn scenario(&self, name: &str) -> Option<&ScenarioResult> {
        self.scenarios.iter().find(|s| s.scenario.name == name)
    }

    /// One row per `(scenario, policy)`.
    pub fn aggregate_csv(&self) -> String {
        let mut s = String::from(Aggregate::CSV_HEADER);
        s.push('\n');
        for sc in &self.scenarios {
            for p in &sc.scenario.policies {
                let _ = writeln!(s, "{}", sc.aggregate(p).csv_row(&sc.scenario.name, p));
            }
        }
        s
    }

    /// Per-run summary rows of every scenario.
    pub fn summary_csv(&self) -> String {
        let mut s = format!("scenario,{}\n", metrics::SUMMARY_HEADER);
        for sc in &self.scenarios {
            for r in &sc.reports {
                let _ = writeln!(s, "{},{}", sc.scenario.name, r.summary_row());
            }
        }
        s
    }

    /// Pooled lifetime CDF per scenario on a one-minute grid.
    pub fn lifetime_cdf_csv(&self, horizon_min: f64) -> String {
        let mut s = String::from("scenario,age_min,lost_fraction\n");
        for sc in &self.scenarios {
            for (t, f) in lifetime_cdf(&sc.reports, horizon_min).grid() {
                let _ = writeln!(s, "{},{t},{f}", sc.scenario.name);
            }
        }
        s
    }

    /// Write `<dir>/<scenario>/<policy>/seed<k>/` per run plus aggregate files in `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), BatteryError> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| BatteryError::Io { path, source }
        };
        for sc in &self.scenarios {
            for r in &sc.reports {
                let run_dir = dir.join(&sc.scenario.name).join(r.policy.to_string()).join(format!("seed{}", r.seed));
                r.write_csvs(&run_dir).map_err(io_err(&run_dir))?;
            }
        }
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut files = vec![("aggregate.csv", self.aggregate_csv()), ("summary.csv", self.summary_csv())];
        if self.name == BatteryName::Proactive {
            files.push(("lifetime_cdf.csv", self.lifetime_cdf_csv(PROACTIVE_HORIZON_MIN)));
        }
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

/// Run every scenario of `name` on `base`, in parallel.
pub fn run_battery(name: BatteryName, base: &SimConfig, seeds: &[u64]) -> Result<BatteryResult, BatteryError> {
    let scenarios = name.scenarios(base, seeds)?;
    let scenarios = scenarios
        .into_iter()
        .map(|scenario| {
            let reports = scenario.configs().par_iter().map(sim::run).collect::<Result<Vec<_>, _>>()?;
            Ok(ScenarioResult { scenario, reports })
        })
        .collect::<Result<Vec<_>, BatteryError>>()?;
    Ok(BatteryResult { name, scenarios })
}

use std::fmt::Write as _;

use thiserror::Error;

use crate::erasure::StoragePolicy;
use crate::reliability::WeibullParams;

pub const MIB: f64 = 1024.0 * 1024.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
}

impl ConfigError {
    /// The config key the error is about, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::InvalidValue { key, .. } | ConfigError::UnknownKey(key) => Some(key),
            ConfigError::Syntax { .. } => None,
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { key: key.to_string(), reason: reason.into() }
}

/// Parameters of one simulation run.
///
/// Durations are stored in the unit named by the field; the engine converts
/// seconds to minutes internally.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub duration_min: f64,
    pub schedule_interval_s: f64,
    pub cache_size: usize,
    pub lease_period_min: f64,
    pub check_interval_min: f64,
    pub weibull: WeibullParams<f64>,
    pub policy: StoragePolicy,
    pub localization_pct: Option<u32>,
    pub proactive_threshold: Option<f64>,
    pub vm_count: usize,
    pub cacheds_per_vm: usize,
    /// Seconds to move one MiB between domains.
    pub remote_unit_transfer_time: f64,
    pub local_time_ratio: f64,
    pub seed: u64,
    /// Carry real payloads through the codec and verify every recovery.
    pub verify_payloads: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration_min: 120.0,
            schedule_interval_s: 30.0,
            cache_size: 1 << 20,
            lease_period_min: 10.0,
            check_interval_min: 2.0,
            weibull: WeibullParams::default(),
            policy: StoragePolicy::erasure(3, 1).expect("EC3+1 is valid"),
            localization_pct: None,
            proactive_threshold: None,
            vm_count: 4,
            cacheds_per_vm: 3,
            remote_unit_transfer_time: 1.0,
            local_time_ratio: 0.3,
            seed: 0,
            verify_payloads: false,
        }
    }
}

/// Keys accepted by [`SimConfig::set`], in file order.
pub const KEYS: [&str; 16] = [
    "duration",
    "schedule_interval",
    "cache_size",
    "lease_period",
    "check_interval",
    "weibull_a",
    "weibull_b",
    "policy",
    "localization_pct",
    "proactive_threshold",
    "vm_count",
    "cacheds_per_vm",
    "remote_unit_transfer_time",
    "local_time_ratio",
    "seed",
    "verify_payloads",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| invalid(key, format!("cannot parse {value:?}")))
}

fn is_disabled(value: &str) -> bool {
    matches!(value.to_ascii_lowercase().as_str(), "disabled" | "off" | "none")
}

impl SimConfig {
    /// Apply one `key = value` setting. Values are not range-checked until [`SimConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "duration" => self.duration_min = parse(key, value)?,
            "schedule_interval" => self.schedule_interval_s = parse(key, value)?,
            "cache_size" => self.cache_size = parse(key, value)?,
            "lease_period" => self.lease_period_min = parse(key, value)?,
            "check_interval" => self.check_interval_min = parse(key, value)?,
            "weibull_a" | "weibull_b" => {
                let x: f64 = parse(key, value)?;
                let (a, b) = if key == "weibull_a" { (x, self.weibull.scale()) } else { (self.weibull.shape(), x) };
                self.weibull = WeibullParams::new(a, b).map_err(|e| invalid(key, e.to_string()))?;
            }
            "policy" => self.policy = value.parse().map_err(|e: crate::CodecError| invalid(key, e.to_string()))?,
            "localization_pct" => {
                self.localization_pct = if is_disabled(value) { None } else { Some(parse(key, value)?) }
            }
            "proactive_threshold" => {
                self.proactive_threshold = if is_disabled(value) { None } else { Some(parse(key, value)?) }
            }
            "vm_count" => self.vm_count = parse(key, value)?,
            "cacheds_per_vm" => self.cacheds_per_vm = parse(key, value)?,
            "remote_unit_transfer_time" => self.remote_unit_transfer_time = parse(key, value)?,
            "local_time_ratio" => self.local_time_ratio = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "verify_payloads" => self.verify_payloads = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Apply a flat `key = value` file on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<String>| v.unwrap_or_else(|| "disabled".into());
        let _ = writeln!(s, "duration = {}", self.duration_min);
        let _ = writeln!(s, "schedule_interval = {}", self.schedule_interval_s);
        let _ = writeln!(s, "cache_size = {}", self.cache_size);
        let _ = writeln!(s, "lease_period = {}", self.lease_period_min);
        let _ = writeln!(s, "check_interval = {}", self.check_interval_min);
        let _ = writeln!(s, "weibull_a = {}", self.weibull.shape());
        let _ = writeln!(s, "weibull_b = {}", self.weibull.scale());
        let _ = writeln!(s, "policy = {}", self.policy);
        let _ = writeln!(s, "localization_pct = {}", opt(self.localization_pct.map(|p| p.to_string())));
        let _ = writeln!(s, "proactive_threshold = {}", opt(self.proactive_threshold.map(|p| p.to_string())));
        let _ = writeln!(s, "vm_count = {}", self.vm_count);
        let _ = writeln!(s, "cacheds_per_vm = {}", self.cacheds_per_vm);
        let _ = writeln!(s, "remote_unit_transfer_time = {}", self.remote_unit_transfer_time);
        let _ = writeln!(s, "local_time_ratio = {}", self.local_time_ratio);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "verify_payloads = {}", self.verify_payloads);
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite_nonneg = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(key, format!("must be a non-negative number, got {v}")))
            }
        };
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive, got {v}")))
            }
        };
        finite_nonneg("duration", self.duration_min)?;
        positive("schedule_interval", self.schedule_interval_s)?;
        positive("lease_period", self.lease_period_min)?;
        positive("check_interval", self.check_interval_min)?;
        if self.cache_size == 0 {
            return Err(invalid("cache_size", "must be positive"));
        }
        if let Some(pct) = self.localization_pct {
            if !crate::placement::LocalizationPolicy::PERCENTAGES.contains(&pct) {
                return Err(invalid("localization_pct", format!("must be 25, 50, 75, 100 or disabled, got {pct}")));
            }
        }
        if let Some(t) = self.proactive_threshold {
            finite_nonneg("proactive_threshold", t)?;
        }
        if self.vm_count == 0 {
            return Err(invalid("vm_count", "must be at least 1"));
        }
        if self.cacheds_per_vm == 0 {
            return Err(invalid("cacheds_per_vm", "must be at least 1"));
        }
        finite_nonneg("remote_unit_transfer_time", self.remote_unit_transfer_time)?;
        if !(self.local_time_ratio > 0.0 && self.local_time_ratio <= 1.0) {
            return Err(invalid("local_time_ratio", format!("must lie in (0, 1], got {}", self.local_time_ratio)));
        }
        Ok(())
    }

    pub fn schedule_interval_min(&self) -> f64 {
        self.schedule_interval_s / 60.0
    }

    /// Number of client schedules issued during `duration`.
    pub fn schedule_count(&self) -> usize {
        let step = self.schedule_interval_min();
        let mut count = 0usize;
        while (count as f64) * step < self.duration_min {
            count += 1;
        }
        count
    }
}

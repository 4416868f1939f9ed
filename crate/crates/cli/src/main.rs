use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ecsim::battery::{self, BatteryError, BatteryName};
use ecsim::erasure::{self, CodecError};
use ecsim::mttdl::{chain_shape, mttdl_general, MarkovParams, MttdlError};
use ecsim::reliability::{conditional_failure_rate, FailureRateQuery, WeibullParams};
use ecsim::sim::ConfigError;
use ecsim::{SimConfig, StoragePolicy};

const SEED_ENV: &str = "ECSIM_SEED";

#[derive(Parser, Debug)]
#[command(name = "ecsim", version, about = "Erasure coding vs replication for short-lived intermediate data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write its CSV reports.
    Simulate {
        #[command(flatten)]
        overrides: Overrides,
        /// Directory for transfers.csv, caches.csv, vm_counts.csv and summary.csv.
        #[arg(long, default_value = "ecsim-out")]
        out: PathBuf,
    },
    /// Print MTTDL against CacheD age (or against a fixed failure rate) as CSV.
    MttdlCurve(CurveArgs),
    /// Run a named experiment battery over a seed sweep.
    Battery {
        /// storage, availability, network, proactive or localization.
        name: String,
        /// Number of seeds per setting.
        #[arg(long, default_value_t = battery::DEFAULT_SEED_COUNT)]
        seeds: u64,
        /// First seed of the sweep; falls back to $ECSIM_SEED, then 0.
        #[arg(long)]
        seed_start: Option<u64>,
        #[command(flatten)]
        overrides: Overrides,
        /// Parent directory; results go to `<out>/<name>`.
        #[arg(long, default_value = "ecsim-out")]
        out: PathBuf,
    },
    /// Encode a file into redundancy units or rebuild it from them.
    #[command(subcommand)]
    Codec(CodecCommand),
}

#[derive(Subcommand, Debug)]
enum CodecCommand {
    /// Write `<output>.unit<i>` for every unit plus `<output>.header`.
    Encode {
        #[arg(long)]
        policy: StoragePolicy,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rebuild from whichever `<input>.unit<i>` files remain.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Settings layered on top of the defaults: `$ECSIM_SEED`, then the config
/// file, then the flags, then `--set` pairs.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_name = "MIN")]
    duration_min: Option<String>,
    #[arg(long, value_name = "SECONDS")]
    schedule_interval_s: Option<String>,
    #[arg(long, value_name = "BYTES")]
    cache_size: Option<String>,
    #[arg(long, value_name = "MIN")]
    lease_period_min: Option<String>,
    #[arg(long, value_name = "MIN")]
    check_interval_min: Option<String>,
    #[arg(long)]
    weibull_a: Option<String>,
    #[arg(long)]
    weibull_b: Option<String>,
    /// `replica<N>` or `ec<K>+<R>`.
    #[arg(long)]
    policy: Option<String>,
    /// 25, 50, 75, 100 or `disabled`.
    #[arg(long)]
    localization_pct: Option<String>,
    /// MTTDL threshold, or `disabled`.
    #[arg(long)]
    proactive_threshold: Option<String>,
    #[arg(long)]
    vm_count: Option<String>,
    #[arg(long)]
    cacheds_per_vm: Option<String>,
    /// Seconds per MiB between domains.
    #[arg(long)]
    remote_unit_transfer_time: Option<String>,
    #[arg(long)]
    local_time_ratio: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Carry real payloads through the codec and check every recovery.
    #[arg(long)]
    verify_payloads: bool,
    /// Any config key, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn flags(&self) -> Vec<(&'static str, &str)> {
        let pairs: [(&'static str, &Option<String>); 15] = [
            ("duration", &self.duration_min),
            ("schedule_interval", &self.schedule_interval_s),
            ("cache_size", &self.cache_size),
            ("lease_period", &self.lease_period_min),
            ("check_interval", &self.check_interval_min),
            ("weibull_a", &self.weibull_a),
            ("weibull_b", &self.weibull_b),
            ("policy", &self.policy),
            ("localization_pct", &self.localization_pct),
            ("proactive_threshold", &self.proactive_threshold),
            ("vm_count", &self.vm_count),
            ("cacheds_per_vm", &self.cacheds_per_vm),
            ("remote_unit_transfer_time", &self.remote_unit_transfer_time),
            ("local_time_ratio", &self.local_time_ratio),
            ("seed", &self.seed),
        ];
        let mut out: Vec<_> = pairs.into_iter().filter_map(|(k, v)| v.as_deref().map(|v| (k, v))).collect();
        if self.verify_payloads {
            out.push(("verify_payloads", "true"));
        }
        out
    }

    fn apply(&self, cfg: &mut SimConfig) -> Result<(), CliError> {
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.set("seed", &seed)?;
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for (key, value) in self.flags() {
            cfg.set(key, value)?;
        }
        for pair in &self.set {
            let (key, value) =
                pair.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {pair:?}")))?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(())
    }
}

#[derive(Args, Debug)]
struct CurveArgs {
    /// Comma-separated policies.
    #[arg(long, value_delimiter = ',', default_value = "replica1,replica2,ec2+1,ec3+1,ec3+2")]
    policies: Vec<StoragePolicy>,
    #[arg(long, default_value_t = 150.0)]
    age_max: f64,
    #[arg(long, default_value_t = 1.0)]
    age_step: f64,
    #[arg(long, default_value_t = 2.0)]
    weibull_a: f64,
    #[arg(long, default_value_t = 50.0)]
    weibull_b: f64,
    /// Failure-rate window in minutes; one window is one MTTDL time unit.
    #[arg(long, default_value_t = 2.0)]
    check_interval: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Fixed failure rates; replaces the age sweep (age_min is left empty).
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Usage(String),
    Failed(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<MttdlError> for CliError {
    fn from(e: MttdlError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<BatteryError> for CliError {
    fn from(e: BatteryError) -> Self {
        match e {
            BatteryError::Config(c) => CliError::Config(c),
            BatteryError::UnknownBattery(_) | BatteryError::EmptyScenario(_) => CliError::Usage(e.to_string()),
            BatteryError::Io { .. } => CliError::Failed(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { overrides, out } => simulate(&overrides, &out),
        Command::MttdlCurve(args) => {
            print!("{}", mttdl_curve(&args)?);
            Ok(())
        }
        Command::Battery { name, seeds, seed_start, overrides, out } => {
            run_battery(&name, seeds, seed_start, &overrides, &out)
        }
        Command::Codec(cmd) => codec(cmd),
    }
}

fn simulate(overrides: &Overrides, out: &Path) -> Result<(), CliError> {
    let mut cfg = SimConfig::default();
    overrides.apply(&mut cfg)?;
    let report = ecsim::run(&cfg)?;
    report.write_csvs(out).map_err(|e| CliError::Failed(format!("writing {}: {e}", out.display())))?;
    println!("{}", report.summary_line());
    Ok(())
}

fn mttdl_curve(args: &CurveArgs) -> Result<String, CliError> {
    let weibull = WeibullParams::new(args.weibull_a, args.weibull_b)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if !(args.age_step > 0.0 && args.age_max >= 0.0) {
        return Err(CliError::Usage("age range needs age_step > 0 and age_max >= 0".into()));
    }
    let mut s = String::from("age_min,policy,lambda,mttdl,data_loss_rate\n");
    let row = |s: &mut String, age: Option<f64>, p: &StoragePolicy, lambda: f64| -> Result<(), CliError> {
        let (n, r) = chain_shape(p);
        let m = mttdl_general(&MarkovParams::new(n, r, lambda, args.mu)?);
        let age = age.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{age},{p},{lambda},{},{}", m.mttdl, m.data_loss_rate);
        Ok(())
    };
    if !args.lambda.is_empty() {
        for p in &args.policies {
            for lambda in &args.lambda {
                row(&mut s, None, p, *lambda)?;
            }
        }
        return Ok(s);
    }
    let steps = (args.age_max / args.age_step + 1e-9).floor() as usize;
    for p in &args.policies {
        for i in 0..=steps {
            let age = i as f64 * args.age_step;
            let q = FailureRateQuery::new(age, args.check_interval).map_err(|e| CliError::Usage(e.to_string()))?;
            row(&mut s, Some(age), p, conditional_failure_rate(&q, &weibull))?;
        }
    }
    Ok(s)
}

fn run_battery(
    name: &str,
    seeds: u64,
    seed_start: Option<u64>,
    overrides: &Overrides,
    out: &Path,
) -> Result<(), CliError> {
    let name: BatteryName = name.parse()?;
    let mut base = name.preset();
    overrides.apply(&mut base)?;
    let start = match seed_start {
        Some(s) => s,
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v.parse().map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an integer, got {v:?}")))?,
            Err(_) => 0,
        },
    };
    let seeds: Vec<u64> = (start..start + seeds).collect();
    let result = battery::run_battery(name, &base, &seeds)?;
    let dir = out.join(name.as_str());
    result.write(&dir)?;
    print!("{}", result.aggregate_csv());
    Ok(())
}

fn codec(cmd: CodecCommand) -> Result<(), CliError> {
    match cmd {
        CodecCommand::Encode { policy, input, output } => {
            let h = erasure::encode_file(&input, &output, &policy)?;
            println!("{}: {} bytes into {} units of {} bytes", h.policy, h.original_size, h.policy.n(), h.policy.unit_size(h.original_size));
        }
        CodecCommand::Decode { input, output } => {
            let h = erasure::decode_file(&input, &output)?;
            println!("{}: rebuilt {} bytes", h.policy, h.original_size);
        }
    }
    Ok(())
}

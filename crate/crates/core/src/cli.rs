//! Command-line front end.
//!
//! Subcommands: `run`, `compare`, `sweep`, `gen-data`, `validate`. Failures
//! exit with 1 (configuration), 2 (data) or 3 (runtime) after printing one
//! line of the form `error kind=<kind> message=<json string>` to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{self, Dataset};
use crate::error::Error;
use crate::scenarios::{
    delay_sweep, prepare_dataset, run_scenario_on, RoundTrace, ScenarioConfig, ScenarioKind, ScenarioRun, SweepRow,
};

pub const TRACE_HEADER: [&str; 6] = [
    "round",
    "scenario",
    "accuracy",
    "participants",
    "total_energy",
    "per_node_energy_json",
];

/// Delay-per-meter values used by `sweep` when none are given.
pub const DEFAULT_SWEEP: [f64; 5] = [0.85e-3, 0.9e-3, 0.95e-3, 1.0e-3, 1.05e-3];

#[derive(Debug, Parser)]
#[command(name = "dbfl", version, about = "Clustered federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its trace.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<ScenarioKind>,
    },
    /// Run all three scenarios with a shared seed.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Total energy of every scenario across delay-per-meter values.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        delay_sweep: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write the synthetic dataset a run would use to CSV.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Row count; defaults to the device partitions plus the test split.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a configuration file and exit.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Failure {
    Config,
    Data,
    Runtime,
}

impl Failure {
    fn code(self) -> i32 {
        match self {
            Failure::Config => 1,
            Failure::Data => 2,
            Failure::Runtime => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Failure::Config => "config",
            Failure::Data => "data",
            Failure::Runtime => "runtime",
        }
    }
}

#[derive(Debug)]
struct CliError {
    kind: Failure,
    message: String,
}

impl CliError {
    fn new(kind: Failure, message: impl ToString) -> Self {
        Self {
            kind,
            message: message.to_string(),
        }
    }

    fn from_sim(e: Error) -> Self {
        let kind = match e {
            Error::InvalidConfig(_) | Error::DuplicateDevice(_) => Failure::Config,
            Error::Parse { .. } | Error::SchemaMismatch(_) | Error::Csv(_) | Error::EmptyDataset => Failure::Data,
            _ => Failure::Runtime,
        };
        Self::new(kind, e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string();
            let line = first
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            report(&CliError::new(Failure::Config, line));
            return Failure::Config.code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            report(&e);
            e.kind.code()
        }
    }
}

fn report(e: &CliError) {
    let msg = serde_json::to_string(&e.message).unwrap_or_else(|_| "\"\"".into());
    eprintln!("error kind={} message={msg}", e.kind.name());
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run { common, scenario } => {
            let mut cfg = resolve(&common)?;
            if let Some(k) = scenario {
                cfg.kind = k;
            }
            let data = load_data(&cfg)?;
            let started = now();
            let run = run_scenario_on(&cfg, Some(&data)).map_err(CliError::from_sim)?;
            let mut outputs = vec![write_trace(&common.out, &run)?];
            outputs.push(write_summary(&common.out, std::slice::from_ref(&run))?);
            write_manifest(&common.out, "run", &cfg, started, &outputs)
        }
        Command::Compare { common, jobs } => {
            let cfg = resolve(&common)?;
            let data = load_data(&cfg)?;
            let started = now();
            let runs = compare(&cfg, &data, jobs)?;
            let mut outputs = Vec::new();
            for run in &runs {
                outputs.push(write_trace(&common.out, run)?);
            }
            outputs.push(write_summary(&common.out, &runs)?);
            write_manifest(&common.out, "compare", &cfg, started, &outputs)
        }
        Command::Sweep {
            common,
            delay_sweep: sweep,
            jobs,
        } => {
            let cfg = resolve(&common)?;
            let sweep = sweep.unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
            let started = now();
            let rows = delay_sweep(&cfg, &sweep, jobs).map_err(CliError::from_sim)?;
            let outputs = vec![write_sweep(&common.out, &rows)?];
            write_manifest(&common.out, "sweep", &cfg, started, &outputs)
        }
        Command::GenData {
            config,
            seed,
            samples,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.data.csv = None;
            cfg.validate().map_err(CliError::from_sim)?;
            let dataset = match samples {
                Some(n) => data::gen_synthetic_with(
                    &cfg.data.schema,
                    &cfg.data.synthetic,
                    n,
                    crate::rng::derive_seed(cfg.seed, &[crate::rng::tag::DATA]),
                ),
                None => prepare_dataset(&cfg),
            }
            .map_err(CliError::from_sim)?;
            let file = create(&out)?;
            data::write_csv(file, &dataset).map_err(|e| CliError::new(Failure::Runtime, e))
        }
        Command::Validate { config } => {
            let cfg = load_config(Some(&config))?;
            cfg.validate().map_err(CliError::from_sim)?;
            println!("ok");
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ScenarioConfig> {
    let Some(path) = path else {
        return Ok(ScenarioConfig::default());
    };
    let text =
        fs::read_to_string(path).map_err(|e| CliError::new(Failure::Config, format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        let at = e
            .span()
            .map(|s| {
                let line = text[..s.start].matches('\n').count() + 1;
                format!(" (line {line})")
            })
            .unwrap_or_default();
        CliError::new(
            Failure::Config,
            format!("{}: {}{at}", path.display(), e.message().trim_end()),
        )
    })
}

/// Config file values, then flag overrides, then validation.
fn resolve(common: &Common) -> CliResult<ScenarioConfig> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(d) = &common.data {
        cfg.data.csv = Some(d.clone());
    }
    if let Some(r) = common.rounds {
        cfg.rounds = r;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(CliError::from_sim)?;
    Ok(cfg)
}

fn load_data(cfg: &ScenarioConfig) -> CliResult<Dataset> {
    prepare_dataset(cfg).map_err(|e| match e {
        Error::InvalidConfig(_) => CliError::new(Failure::Config, e),
        other => CliError::new(Failure::Data, other),
    })
}

fn compare(cfg: &ScenarioConfig, data: &Dataset, jobs: usize) -> CliResult<Vec<ScenarioRun>> {
    let run = |kind: ScenarioKind| run_scenario_on(&cfg.with_kind(kind), Some(data));
    let results: Vec<_> = if jobs <= 1 {
        ScenarioKind::ALL.into_iter().map(run).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = ScenarioKind::ALL.into_iter().map(|k| s.spawn(move || run(k))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scenario worker panicked"))
                .collect()
        })
    };
    results.into_iter().map(|r| r.map_err(CliError::from_sim)).collect()
}

fn create(path: &Path) -> CliResult<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::new(Failure::Runtime, format!("{}: {e}", dir.display())))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::new(Failure::Runtime, format!("{}: {e}", path.display())))
}

fn io_err(e: impl ToString) -> CliError {
    CliError::new(Failure::Runtime, e)
}

pub fn trace_file_name(kind: ScenarioKind) -> String {
    format!("trace_{}.csv", kind.name())
}

/// One CSV row per round, in the fixed trace header order.
pub fn trace_record(trace: &RoundTrace) -> [String; 6] {
    let participants: Vec<String> = trace.participants.iter().map(u32::to_string).collect();
    let per_node = serde_json::to_string(&trace.energy).expect("energy map serializes");
    [
        trace.round.to_string(),
        trace.kind.name().to_string(),
        trace.accuracy.map(|a| a.to_string()).unwrap_or_default(),
        participants.join(";"),
        trace.total_energy().to_string(),
        per_node,
    ]
}

pub fn write_trace_csv<W: Write>(out: W, traces: &[RoundTrace]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for t in traces {
        w.write_record(trace_record(t))?;
    }
    w.flush()?;
    Ok(())
}

fn write_trace(dir: &Path, run: &ScenarioRun) -> CliResult<PathBuf> {
    let path = dir.join(trace_file_name(run.kind));
    write_trace_csv(create(&path)?, &run.traces).map_err(io_err)?;
    Ok(path)
}

fn write_summary(dir: &Path, runs: &[ScenarioRun]) -> CliResult<PathBuf> {
    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["scenario", "final_accuracy", "total_energy"])
        .map_err(io_err)?;
    for run in runs {
        let acc = run.final_accuracy().map(|a| a.to_string()).unwrap_or_default();
        w.write_record([run.kind.name().to_string(), acc, run.total_energy().to_string()])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(path)
}

fn write_sweep(dir: &Path, rows: &[SweepRow]) -> CliResult<PathBuf> {
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["delay_per_meter", "scenario", "total_energy"])
        .map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.delay_per_meter_s.to_string(),
            r.kind.name().to_string(),
            r.total_energy.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(path)
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub config_sha256: String,
    pub seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<String>,
    pub config: &'a ScenarioConfig,
}

/// SHA-256 of the resolved config's compact JSON form.
pub fn config_digest(cfg: &ScenarioConfig) -> String {
    let canonical = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&canonical))
}

fn now() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &ScenarioConfig,
    started: u128,
    outputs: &[PathBuf],
) -> CliResult<()> {
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: config_digest(cfg),
        seed: cfg.seed,
        started_unix_ms: started,
        finished_unix_ms: now(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        config: cfg,
    };
    let mut w = create(&dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(io_err)?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err)
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twr_aab::harness::{self, ConfigEntries, Experiment, SweepSpec};
use twr_aab::relay_delay::DelayMode;
use twr_aab::Result;

/// Two-way relay AAB protocol simulator.
#[derive(Debug, Parser)]
#[command(name = "twr-aab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean relay delay against the surplus fraction theta (upper-bound rates).
    ThetaSweep(DelayArgs),
    /// Mean relay delay of the suboptimal scheme against SNR.
    SnrDelay(DelayArgs),
    /// Ergodic sum-rates against SNR.
    Esr(CommonArgs),
    /// Source and relay delays of AAB and DNF against packet arrival rate.
    ParSweep(CommonArgs),
    /// Cross-check the relay buffer against the delay recursion.
    OracleCheck(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp so identical inputs give identical bytes.
    #[arg(long)]
    reproducible: bool,
    /// Override one config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct DelayArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write a per-round buffer trace for the first sweep point.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn resolve(experiment: Experiment, args: &CommonArgs) -> Result<SweepSpec> {
    let mut entries = match &args.config {
        Some(path) => ConfigEntries::load(path)?,
        None => ConfigEntries::default(),
    };
    for pair in &args.set {
        entries.set_pair(pair)?;
    }
    if let Some(seed) = args.seed {
        entries.set("seed", &seed.to_string(), "--seed")?;
    }
    let mut spec = SweepSpec::from_entries(experiment, &entries)?;
    if let Some(out) = &args.out {
        spec.output_path = Some(out.clone());
    }
    Ok(spec)
}

fn write_trace(spec: &SweepSpec, path: &PathBuf) -> Result<()> {
    let first = spec.axis[0];
    let (fading, mode) = match spec.experiment {
        Experiment::ThetaSweep => (spec.fading, DelayMode::upper_bound(first)?),
        _ => (spec.fading.with_snr_db(first), DelayMode::Suboptimal),
    };
    let file = BufWriter::new(File::create(path)?);
    harness::write_delay_trace(file, &fading, mode, spec.trace_rounds)
}

fn execute(cli: Cli) -> Result<bool> {
    let (experiment, common, trace) = match &cli.command {
        Command::ThetaSweep(a) => (Experiment::ThetaSweep, &a.common, a.trace.as_ref()),
        Command::SnrDelay(a) => (Experiment::SnrDelay, &a.common, a.trace.as_ref()),
        Command::Esr(a) => (Experiment::Esr, a, None),
        Command::ParSweep(a) => (Experiment::ParSweep, a, None),
        Command::OracleCheck(a) => (Experiment::OracleCheck, a, None),
    };
    let spec = resolve(experiment, common)?;
    let report = harness::run(&spec)?;
    match &spec.output_path {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            report.result.write_csv(&mut file, common.reproducible)?;
            file.flush()?;
        }
        None => report
            .result
            .write_csv(io::stdout().lock(), common.reproducible)?,
    }
    if let Some(path) = trace {
        write_trace(&spec, path)?;
    }
    for f in &report.failures {
        eprint!("{}", f.reproducer(spec.fading.seed));
    }
    Ok(report.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

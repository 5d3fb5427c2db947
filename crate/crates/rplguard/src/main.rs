use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rplguard::config::{self, ConfigFileError};
use rplguard::output::{self, OutputError};
use rplguard::plan::{self, Axis, Detection, PlanError, RunPlan};
use rplguard_core::engine::{EngineError, RunOptions, TraceLevel};

#[derive(Parser, Debug)]
#[command(name = "rplguard", version, about = "Sinkhole and RREQ-flood detection simulator for RPL networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and print its metrics row.
    Run {
        /// Preset name or scenario file.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        detection: Option<OnOff>,
        /// Also write the full event transcript (needs --out).
        #[arg(long, requires = "out")]
        trace: bool,
        /// Directory for runs.csv, verdicts.csv and trace.ndjson.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep over several seeds and print the summary.
    Sweep {
        #[arg(long, default_value = "scenario3_small")]
        scenario: String,
        #[arg(long)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Defaults to the scenario's own seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, value_enum)]
        detection: Option<SweepDetection>,
        /// Directory for runs.csv and summary.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-aggregate a directory's runs.csv into a summary.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Where to write summary.csv; printed only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SweepDetection {
    On,
    Off,
    Both,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    ConfigFile(#[from] ConfigFileError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigFile(ConfigFileError::Io { .. }) => 2,
            CliError::ConfigFile(_) => 1,
            CliError::Plan(PlanError::Engine {
                source: EngineError::Config(_),
                ..
            }) => 1,
            CliError::Plan(
                PlanError::NoSeeds | PlanError::NoValues(_) | PlanError::BadCell { .. } | PlanError::Config(_),
            ) => 1,
            _ => 2,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn print(text: &str) {
    let mut stdout = io::stdout().lock();
    // A closed pipe is not worth failing the run over.
    let _ = stdout.write_all(text.as_bytes());
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            detection,
            trace,
            out,
        } => {
            let mut cfg = config::load_scenario(&scenario)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(d) = detection {
                cfg.detection_enabled = matches!(d, OnOff::On);
            }
            let options = RunOptions {
                trace: if trace { TraceLevel::Full } else { TraceLevel::Summary },
            };
            let transcript = plan::run_one(&cfg, options)?;
            let rows = vec![plan::row_for(&cfg, &transcript)?];
            let csv = output::rows_to_string(&rows)?;
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                create(&dir.join(output::RUNS_FILE))?
                    .write_all(csv.as_bytes())
                    .map_err(|source| CliError::Io {
                        path: dir.join(output::RUNS_FILE),
                        source,
                    })?;
                output::write_verdicts(create(&dir.join(output::VERDICTS_FILE))?, &transcript.verdicts)?;
                if trace {
                    output::write_trace(create(&dir.join(output::TRACE_FILE))?, &transcript)?;
                }
            }
            print(&csv);
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            seeds,
            jobs,
            detection,
            out,
        } => {
            let base = config::load_scenario(&scenario)?;
            let seeds = if seeds.is_empty() { vec![base.seed] } else { seeds };
            let plan = RunPlan {
                base,
                sweep: Some((axis, values)),
                seeds,
                detection: match detection {
                    None => Detection::AsConfigured,
                    Some(SweepDetection::On) => Detection::On,
                    Some(SweepDetection::Off) => Detection::Off,
                    Some(SweepDetection::Both) => Detection::Both,
                },
            };
            let rows = plan.execute(jobs)?;
            let summary = output::summarize(&rows);
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                output::write_rows(create(&dir.join(output::RUNS_FILE))?, &rows)?;
                output::write_rows(create(&dir.join(output::SUMMARY_FILE))?, &summary)?;
            }
            print(&output::rows_to_string(&summary)?);
        }
        Command::Report { input, out } => {
            let rows = output::read_runs(&input.join(output::RUNS_FILE))?;
            let summary = output::summarize(&rows);
            match out {
                Some(dir) => {
                    ensure_dir(&dir)?;
                    output::write_rows(create(&dir.join(output::SUMMARY_FILE))?, &summary)?;
                }
                None => print(&output::rows_to_string(&summary)?),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("{}", config::schema_hint());
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == 1 {
                eprintln!("{}", config::schema_hint());
            }
            ExitCode::from(e.exit_code())
        }
    }
}

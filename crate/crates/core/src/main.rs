//! Command-line entry point.
//!
//! Exit codes: 0 controllable, 1 usage error, 2 input/assertion error,
//! 3 not controllable, 4 inconclusive, 5 sampling error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use orbitrank::cli::{
    self, exit_code, exit_code_for_error, input_digest, ReportDocument, ScheduleDocument,
    SystemDocument,
};
use orbitrank::error::{Error, Result};
use orbitrank::orbit;

#[derive(Parser)]
#[command(name = "orbitrank", version, about = "Controllability of bilinear systems on group orbits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the system document (JSON).
    system: PathBuf,
    /// Override the document's probe point, comma-separated coordinates.
    #[arg(long, value_parser = parse_probe)]
    probe: Option<Probe>,
    /// Override the document's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the relative rank tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
}

/// Newtype so clap treats the comma-separated list as one value.
#[derive(Clone)]
struct Probe(Vec<f64>);

fn parse_probe(s: &str) -> std::result::Result<Probe, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<Vec<f64>, String>>()
        .map(Probe)
}

#[derive(Subcommand)]
enum Command {
    /// Decide controllability via the single-point rank condition.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Decide controllability of an edge-generated system via connectivity.
    Graph {
        #[command(flatten)]
        common: CommonArgs,
        /// Also run the rank condition and fail on disagreement.
        #[arg(long)]
        cross_check: bool,
    },
    /// Sample the orbit through the probe point and verify rank constancy.
    Orbit {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of orbit points to sample.
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Flow-time horizon per word letter.
        #[arg(long, default_value_t = orbit::DEFAULT_HORIZON)]
        horizon: f64,
        /// Write the sampled orbit as CSV to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a piecewise-constant control schedule exactly.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Path to the schedule document (JSON).
        #[arg(long)]
        schedule: PathBuf,
        /// Extra sample points per schedule interval.
        #[arg(long, default_value_t = 0)]
        oversample: usize,
        /// Write the trajectory as CSV to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_system(common: &CommonArgs) -> Result<(SystemDocument, String)> {
    let bytes = fs::read(&common.system).map_err(|e| {
        Error::Input(format!("cannot read {}: {e}", common.system.display()))
    })?;
    let digest = input_digest(&bytes);
    let mut doc = SystemDocument::parse(&bytes)?;
    if let Some(p) = &common.probe {
        doc.probe = Some(p.0.clone());
    }
    if let Some(s) = common.seed {
        doc.seed = s;
    }
    if let Some(t) = common.tolerance {
        doc.tolerance = Some(t);
    }
    Ok((doc, digest))
}

/// Writes via a temp file in the target directory, then renames, so readers
/// never observe a partial file.
fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().and_then(|f| f.to_str()).unwrap_or("out")
        )),
        None => PathBuf::from(format!(
            ".{}.tmp",
            path.file_name().and_then(|f| f.to_str()).unwrap_or("out")
        )),
    };
    let io_err = |e: std::io::Error| Error::Input(format!("cannot write {}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(body.as_bytes()).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

fn emit(mut report: ReportDocument, started: Instant) -> i32 {
    report.timing_ms = started.elapsed().as_millis() as u64;
    let code = report.exit_code();
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    code
}

fn run() -> std::result::Result<i32, Error> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on usage errors by default; the contract says 1
            let _ = e.print();
            return Ok(if e.use_stderr() {
                exit_code::USAGE
            } else {
                // --help / --version
                0
            });
        }
    };
    let started = Instant::now();
    match cli.command {
        Command::Analyze { common } => {
            let (doc, digest) = load_system(&common)?;
            let report = cli::cmd_analyze(&doc, &digest)?;
            Ok(emit(report, started))
        }
        Command::Graph {
            common,
            cross_check,
        } => {
            let (doc, digest) = load_system(&common)?;
            let report = cli::cmd_graph(&doc, &digest, cross_check)?;
            Ok(emit(report, started))
        }
        Command::Orbit {
            common,
            count,
            horizon,
            out,
        } => {
            let (doc, digest) = load_system(&common)?;
            let (report, csv) = cli::cmd_orbit(&doc, &digest, count, horizon)?;
            if let Some(path) = out {
                write_atomic(&path, &csv)?;
            }
            // orbit reports do not carry a controllability verdict
            emit(report, started);
            Ok(0)
        }
        Command::Simulate {
            common,
            schedule,
            oversample,
            out,
        } => {
            let (doc, digest) = load_system(&common)?;
            let bytes = fs::read(&schedule)
                .map_err(|e| Error::Input(format!("cannot read {}: {e}", schedule.display())))?;
            let sched = ScheduleDocument::parse(&bytes)?;
            let (report, csv) = cli::cmd_simulate(&doc, &digest, &sched, oversample)?;
            if let Some(path) = out {
                write_atomic(&path, &csv)?;
            }
            emit(report, started);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for_error(&e) as u8)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agesirs::harness::{self, SuiteOptions};
use agesirs::report::{write_atomic, Report};
use agesirs::scenario::load_scenario;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

/// Age-structured SIRS solvers and verification suites.
#[derive(Parser)]
#[command(name = "agesirs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to `solver.output` in the scenario, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of age cells.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Direct solver; writes trajectory.csv and simulate.json.
    Simulate(Common),
    /// Picard iteration; writes picard_trajectory.csv, picard_iterations.csv and picard.json.
    Picard(Common),
    /// Every check, with a coverage manifest.
    Validate(Common),
    #[command(name = "resolvent-check")]
    ResolventCheck(Common),
    #[command(name = "semigroup-check")]
    SemigroupCheck(Common),
    #[command(name = "equivalence-check")]
    EquivalenceCheck(Common),
    /// Refinement study on J, 2J, 4J cells.
    Convergence(Common),
    /// Continuous dependence on the initial state.
    Depend(Common),
}

fn out_dir(common: &Common, config_out: Option<&Path>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config_out.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_report(dir: &Path, report: &Report) -> Result<()> {
    let path = dir.join(format!("{}.json", report.suite));
    write_atomic(&path, report.to_json()?.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    for failure in report.failures() {
        eprintln!(
            "FAIL {}: {} {} {} ({})",
            failure.name,
            failure.value,
            serde_json::to_string(&failure.relation)?.trim_matches('"'),
            failure.bound,
            failure.detail
        );
    }
    println!(
        "{}: {} ({} assertions, {} failed) -> {}",
        report.suite,
        if report.passed { "pass" } else { "FAIL" },
        report.assertions.len(),
        report.failures().count(),
        path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let (common, name) = match &cli.command {
        Command::Simulate(c) => (c, "simulate"),
        Command::Picard(c) => (c, "picard"),
        Command::Validate(c) => (c, "validate"),
        Command::ResolventCheck(c) => (c, "resolvent-check"),
        Command::SemigroupCheck(c) => (c, "semigroup-check"),
        Command::EquivalenceCheck(c) => (c, "equivalence-check"),
        Command::Convergence(c) => (c, "convergence"),
        Command::Depend(c) => (c, "depend"),
    };
    let config = load_scenario(&common.config).with_context(|| format!("loading {}", common.config.display()))?;
    let dir = out_dir(common, config.solver.output.as_deref());
    let opts = SuiteOptions {
        cells: common.grid,
        seed: common.seed,
    };
    let report = match name {
        "simulate" => {
            let (traj, report) = harness::simulate(&config, &opts)?;
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            write_atomic(&dir.join("trajectory.csv"), &buf)?;
            report
        }
        "picard" => {
            let (outcome, report) = harness::picard(&config, &opts)?;
            let mut buf = Vec::new();
            outcome.trajectory.write_csv(&mut buf)?;
            write_atomic(&dir.join("picard_trajectory.csv"), &buf)?;
            let mut log = Vec::new();
            harness::write_iteration_log(&outcome.deltas, &mut log)?;
            write_atomic(&dir.join("picard_iterations.csv"), &log)?;
            report
        }
        "validate" => harness::validate_suite(&config, &opts)?,
        "resolvent-check" => harness::resolvent_suite(&config, &opts)?,
        "semigroup-check" => harness::semigroup_suite(&config, &opts)?,
        "equivalence-check" => harness::equivalence_suite(&config, &opts)?,
        "convergence" => harness::convergence_suite(&config, &opts)?,
        _ => harness::dependence_suite(&config, &opts)?,
    };
    write_report(&dir, &report)?;
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

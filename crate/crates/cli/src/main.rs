use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use peakref_cli::commands;
use peakref_cli::output::{emit, to_json};
use peakref_cli::{verify, CliError, CliResult, Format, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "peakref", version, about = "Consumption and investment with a reference to past peak consumption")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Print the derived constants and check the parameters.
    Validate,
    /// Wealth boundaries over the reference grid, with the coincidence regime.
    Boundaries,
    /// Value and controls over the (h, x) grid.
    PolicyTable,
    /// Value, controls and boundaries at h = 1 across a parameter sweep.
    Sensitivity,
    /// Monte Carlo value and budget calibration.
    Simulate,
    /// Expected hitting times, closed form against simulation.
    HittingTimes,
    /// Large-wealth ratios and long-run fraction candidates.
    Asymptotics,
    /// Run the acceptance checks and write a JSON report.
    Verify,
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.sim.seed = s;
    }
    if let Some(n) = cli.paths {
        cfg.sim.n_paths = n;
    }
    if let Some(dt) = cli.dt {
        cfg.sim.dt = dt;
    }
    if let Some(t) = cli.horizon {
        cfg.sim.horizon = t;
    }
    if cli.out.is_some() {
        cfg.output_path = cli.out.clone();
    }
    if cli.format.is_some() {
        cfg.format = cli.format;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = load(cli)?;
    let out = cfg.output_path.as_deref();
    if let Command::Verify = cli.command {
        let report = verify::run(&cfg)?;
        emit(&to_json(&report)?, out)?;
        for c in &report.checks {
            eprintln!(
                "{} check {} ({}): measured {} tolerance {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.name,
                c.measured,
                c.tolerance
            );
        }
        return if report.passed {
            Ok(())
        } else {
            Err(CliError::ChecksFailed(report.failed))
        };
    }
    let table = match cli.command {
        Command::Validate => commands::validate_cmd(&cfg)?,
        Command::Boundaries => commands::boundaries(&cfg)?,
        Command::PolicyTable => commands::policy_table(&cfg)?,
        Command::Sensitivity => commands::sensitivity(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
        Command::HittingTimes => commands::hitting_times(&cfg)?,
        Command::Asymptotics => commands::asymptotics(&cfg)?,
        Command::Verify => unreachable!(),
    };
    emit(&table.render(cfg.format.unwrap_or(Format::Csv))?, out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::ChecksFailed(_) => 1,
                _ => 2,
            })
        }
    }
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use coincidence_lab::runner::{self, RunOptions};
use coincidence_lab::scenario::{parse_scenario, Format};

#[derive(Parser)]
#[command(name = "coincidence-lab", version, about = "Coincidence detection of two particles by finite-width detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its table plus a manifest
    Run {
        scenario: PathBuf,
        /// Worker threads (default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
        /// Output path (default: from the scenario, else <name>.<format>)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Parse and validate a scenario without running it
    Validate { scenario: PathBuf },
    /// List wavefunction families and their length scales
    Catalog,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

const CATALOG: &str = "\
family         parameters                          lambda (smallest length scale)
box            n >= 1, length > 0                   length / n
oscillator     n >= 0, sigma > 0                    sigma / sqrt(2n + 1)
plane          k = 2 pi m / length, phase, length   2 pi / k
local_regular  amplitude != 0, slope, x0            none (local model)
local_node     derivative != 0, x0                  none (local model)

Complex parameters are written as [re, im].";

fn load(path: &PathBuf) -> anyhow::Result<coincidence_lab::Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_scenario(&text)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Catalog => {
            println!("{CATALOG}");
            Ok(0)
        }
        Command::Validate { scenario } => load(&scenario).map(|s| {
            println!("ok: {} ({})", scenario.display(), s.experiment.tag());
            for w in runner::warnings(&s) {
                println!("warning: {w}");
            }
            0
        }),
        Command::Run { scenario, jobs, out, format } => load(&scenario).and_then(|s| {
            let opts = RunOptions { jobs, out, format: format.map(Into::into) };
            let outcome = runner::run(&s, &scenario, &opts)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {} and {}", outcome.output_path.display(), outcome.manifest_path.display());
            if outcome.status == runner::ExitStatus::Partial {
                eprintln!("some rows did not converge; see the manifest");
            }
            Ok(outcome.status.code())
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(runner::ExitStatus::Failed.code() as u8)
        }
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use kg_hierarchy::cli::{self, Command, Format, EXIT_ERROR};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    Spectrum,
    Wavefunction,
    Verify,
    Sweep,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Klein-Gordon bound states of the q-deformed Hulthen potential.
#[derive(Debug, Parser)]
#[command(name = "kg-hierarchy", version)]
struct Args {
    command: CommandArg,
    /// key=value config file
    #[arg(long)]
    config: PathBuf,
    /// Output file (stdout if omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Worker threads for sweeps (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Shift every mu by this amount before the residual check (testing aid)
    #[arg(long, hide = true, allow_hyphen_values = true)]
    perturb_mu: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        CommandArg::Spectrum => Command::Spectrum,
        CommandArg::Wavefunction => Command::Wavefunction,
        CommandArg::Verify => Command::Verify,
        CommandArg::Sweep => Command::Sweep,
    };
    let code = match execute(&args, command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}

fn execute(args: &Args, command: Command) -> kg_hierarchy::Result<i32> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = cli::parse_config(&text, command)?;
    cfg.format = match args.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    cfg.jobs = args.jobs;
    cfg.perturb_mu = args.perturb_mu;
    cfg.output_path = args.output.clone();
    let mut err = io::stderr().lock();
    let code = match &cfg.output_path {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            let code = cli::run(&cfg, &mut out, &mut err);
            out.flush()?;
            code
        }
        None => {
            let mut out = io::stdout().lock();
            cli::run(&cfg, &mut out, &mut err)
        }
    };
    Ok(code)
}

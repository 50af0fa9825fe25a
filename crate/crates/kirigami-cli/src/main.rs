mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes: 0 success, 2 config, 3 generation stall, 4 verification, 5 infeasible input.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }

    pub fn infeasible(msg: impl Into<String>) -> Self {
        Self { code: 5, msg: msg.into() }
    }

    pub fn io(e: std::io::Error) -> Self {
        Self { code: 2, msg: format!("io error: {e}") }
    }
}

impl From<kirigami::Error> for CliError {
    fn from(e: kirigami::Error) -> Self {
        use kirigami::Error as E;
        let code = match &e {
            E::Stall { .. } => 3,
            E::Verification { .. } => 4,
            E::Config(_) | E::Argument(_) | E::Domain(_) | E::Parse { .. } | E::Io(_) | E::Json(_)
            | E::UnsupportedEntity(_) => 2,
            E::Contract(_) | E::Metric(_) | E::Numeric { .. } => 1,
        };
        Self { code, msg: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "kirigami", version, about = "Inverse design of parallelogram-void kirigami")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Shared options. Flags override `--config`; unset values fall back to the profile defaults.
#[derive(Args, Clone, Default)]
pub struct Common {
    /// key=value lines, or a JSON config echo from an earlier run
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// full or desk
    #[arg(long, global = true)]
    pub profile: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// N or MxN
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Deployment angle in radians
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    /// Mask side in pixels
    #[arg(long, global = true)]
    pub raster: Option<usize>,
    #[arg(long, global = true)]
    pub tau_ov: Option<f64>,
    #[arg(long, global = true)]
    pub tau_siou: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate and verify a dataset
    Gen(commands::GenArgs),
    /// Run a solver over dataset or built-in targets
    Solve(commands::SolveArgs),
    /// Score a stored field or mask against a target mask
    Eval(commands::EvalArgs),
    /// Train the mean-field policy with group-relative updates
    Grpo(commands::GrpoArgs),
    /// Time solvers across grid sizes
    Bench(commands::BenchArgs),
    /// Decode a field and write a DXF cut file
    Export(commands::ExportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gen(a) => commands::gen(&cli.common, a),
        Cmd::Solve(a) => commands::solve(&cli.common, a),
        Cmd::Eval(a) => commands::eval(&cli.common, a),
        Cmd::Grpo(a) => commands::grpo(&cli.common, a),
        Cmd::Bench(a) => commands::bench(&cli.common, a),
        Cmd::Export(a) => commands::export(&cli.common, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nullwave_cli::commands::{cmd_check_null, cmd_fit_decay, cmd_run, EXIT_IO};
use nullwave_cli::config::parse_config;
use nullwave_cli::verify::cmd_verify;

#[derive(Parser)]
#[command(name = "nullwave", version, about = "Exterior-domain null-form wave simulator")]
struct Cli {
    /// Worker threads; falls back to NULLWAVE_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write series.csv, extras.csv, meta.json, fits.json and plot.gp.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override output.dir from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a coefficient tensor file for the null condition.
    CheckNull { tensor: PathBuf },
    /// Fit a power law to a CSV column over [t_lo, t_hi].
    FitDecay {
        series: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long)]
        t_lo: f64,
        #[arg(long)]
        t_hi: f64,
    },
    /// Run the built-in property checks and print a pass/fail table.
    Verify {
        /// Run only the named checks.
        names: Vec<String>,
    },
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("NULLWAVE_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("NULLWAVE_THREADS = '{v}' is not a thread count")),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match threads(cli.threads) {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_IO as u8);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_IO as u8);
        }
    }
    let mut stdout = std::io::stdout();
    let code = match cli.command {
        Command::Run { config, out } => match parse_config(&config) {
            Ok(mut cfg) => {
                if let Some(dir) = out {
                    cfg.output.dir = dir.display().to_string();
                }
                cmd_run(&cfg, &mut stdout).exit_code
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_IO
            }
        },
        Command::CheckNull { tensor } => cmd_check_null(&tensor, &mut stdout),
        Command::FitDecay {
            series,
            column,
            t_lo,
            t_hi,
        } => cmd_fit_decay(&series, &column, t_lo, t_hi, &mut stdout),
        Command::Verify { names } => cmd_verify(&names, &mut stdout),
    };
    ExitCode::from(code as u8)
}

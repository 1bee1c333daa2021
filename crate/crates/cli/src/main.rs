use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kirchhoff_core::run::{check_lemmas, load_config, oracle_report, run, verify, ResultBundle};
use kirchhoff_core::Error;

#[derive(Parser)]
#[command(name = "kirchhoff", version, about = "Sign-changing solutions of Kirchhoff-type problems by spectral Galerkin search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the shell search described by a TOML config and write the result bundle.
    Run {
        config: PathBuf,
        /// Overrides the configured output directory (and the environment).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Recompute energies and residuals of a stored bundle from its coefficients.
    Verify {
        bundle: PathBuf,
        /// Also require the bundle to come from this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sample the operator inequalities used by the descent flow.
    CheckLemmas { config: PathBuf },
    /// Shoot a pure-power 1D profile and rescale it to the Kirchhoff problem.
    Oracle {
        #[arg(long, default_value_t = std::f64::consts::PI)]
        length: f64,
        #[arg(long, default_value_t = 1)]
        zeros: usize,
        #[arg(long, default_value_t = 6.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        b: f64,
        /// Write the rescaled profile as `x,u` CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print a config with every default filled in.
    EchoConfig { config: PathBuf },
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Serde(e.to_string()))
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, output } => {
            let parsed = load_config(&config)?;
            for w in &parsed.warnings {
                log::warn!("{w}");
            }
            let cfg = parsed.config;
            let dir = output.unwrap_or_else(|| cfg.resolved_output_dir());
            let bundle = run(&cfg)?;
            let written = bundle.write(&dir)?;
            print!("{}", bundle.summary());
            println!("wrote {} files to {}", written.len(), dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { bundle, config } => {
            let b = ResultBundle::load(&bundle)?;
            let cfg = match config {
                Some(p) => Some(load_config(&p)?.config),
                None => None,
            };
            let report = verify(&b, cfg.as_ref())?;
            println!("{}", to_json(&report)?);
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(5) })
        }
        Command::CheckLemmas { config } => {
            let cfg = load_config(&config)?.config;
            let (report, mu) = check_lemmas(&cfg)?;
            println!("{}", to_json(&report)?);
            println!("mu = {mu:e}");
            Ok(if report.holds() { ExitCode::SUCCESS } else { ExitCode::from(5) })
        }
        Command::Oracle {
            length,
            zeros,
            p,
            a,
            b,
            csv,
        } => {
            let report = oracle_report(length, zeros, p, a, b, csv.as_deref())?;
            println!("{}", to_json(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::EchoConfig { config } => {
            let parsed = load_config(&config)?;
            for w in &parsed.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", parsed.config.to_toml()?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}

//! `capstab`: generate capillary profiles, check identities, classify
//! stability and sweep families from the command line.

mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "capstab",
    version,
    about = "Capillary surfaces of revolution: profiles, identities, stability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Write sampled profiles and a manifest.
    Generate,
    /// Residuals and convergence orders of the integral identities.
    CheckIdentities,
    /// Second-variation spectrum and verdict per parameter value.
    Stability,
    /// Test functions and their index forms.
    Testfn,
    /// Stability verdicts over a parameter range.
    Sweep,
    /// Merge sweep outputs under --out into report.json.
    Report,
    /// Print the resolved configuration and defaults.
    Config,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(&cli.overrides)?;
    match cli.command {
        Command::Generate => commands::generate(&cfg),
        Command::CheckIdentities => commands::check_identities(&cfg),
        Command::Stability => commands::stability(&cfg),
        Command::Testfn => commands::testfn(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Report => commands::report(&cfg),
        Command::Config => {
            let doc = serde_json::json!({
                "config": cfg,
                "config_hash": cfg.hash(),
                "defaults": config::Defaults::table(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pki_forge::scenarios;

/// Deterministic test PKI generator.
#[derive(Parser)]
#[command(name = "pki-forge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forge a PKI from a topology spec file.
    Build {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit a built-in scenario, or `all` for the whole catalog in one repository.
    Scenario {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the built-in scenarios.
    ListScenarios,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Build { spec, out } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| anyhow::anyhow!("{}: {e}", spec.display()))?;
            let forged = pki_forge::build(&text, &out)?;
            println!(
                "{} certificates, {} CRLs written to {}",
                forged.certs.len(),
                forged.crls.len(),
                out.display()
            );
        }
        Command::Scenario { name, out } if name == scenarios::ALL => {
            let all = scenarios::write_catalog(&out)?;
            println!("{} scenarios written to {}", all.len(), out.display());
        }
        Command::Scenario { name, out } => {
            let forged = scenarios::scenario(&name, &out)?;
            println!(
                "{name}: {} certificates, {} CRLs written to {}",
                forged.certs.len(),
                forged.crls.len(),
                out.display()
            );
        }
        Command::ListScenarios => {
            for s in scenarios::CATALOG {
                println!("{:<26} {}", s.name, s.description());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pki-forge: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use cvs_server::{serve, Overrides, Service, Settings};
use tracing_subscriber::EnvFilter;

/// Certificate validation server.
#[derive(Parser)]
#[command(name = "cvs-server", version)]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Listen address, e.g. 127.0.0.1:8080.
    #[arg(long)]
    listen: Option<String>,
    /// Fixed clock as GeneralizedTime (YYYYMMDDHHMMSSZ).
    #[arg(long)]
    clock_fixed: Option<String>,
    /// Repository directory.
    #[arg(long)]
    repository: Option<PathBuf>,
    /// Server name (distinguished name) checked against dvcsName.
    #[arg(long)]
    name: Option<String>,
    /// File holding the response serial high-water mark.
    #[arg(long)]
    serial_file: Option<PathBuf>,
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let overrides = Overrides {
        listen: cli.listen,
        clock_fixed: cli.clock_fixed,
        repository: cli.repository,
        name: cli.name,
        serial_file: cli.serial_file,
    };
    let settings = Settings::load(&cli.config, &overrides).context("loading configuration")?;
    let listen = settings.listen.clone();
    let service = Arc::new(Service::new(settings).context("starting service")?);
    for (path, why) in &service.repository().snapshot().skipped {
        tracing::warn!(file = %path.display(), reason = %why, "skipped repository file");
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&listen)
            .await
            .with_context(|| format!("binding {listen}"))?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        serve(listener, service, shutdown_signal()).await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cvs-server: {e:#}");
            ExitCode::FAILURE
        }
    }
}

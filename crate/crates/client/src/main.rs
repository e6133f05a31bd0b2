use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use certval_core::vpm::render_any;
use certval_core::x509::parse_certificate;
use certval_core::GeneralizedTime;
use clap::{Args, Parser, Subcommand};
use rp_client::{Client, ClientProfile, HttpTransport, Invocation, ProfileSettings, Target};

#[derive(Parser)]
#[command(
    name = "rp-client",
    version,
    about = "Ask a validation server about certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate certificates. Exit 0 if all are valid, 2 if any is invalid, 3 if
    /// any is unknown, 1 on errors.
    Validate(Box<ValidateArgs>),
    /// Print a request, response, certificate, CRL or status reply.
    Inspect { file: PathBuf },
}

#[derive(Args)]
struct ValidateArgs {
    /// Profile file (TOML); flags override its keys.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    server_url: Option<String>,
    /// Expected server name, e.g. "O=Test,CN=CVS".
    #[arg(long)]
    server_name: Option<String>,
    /// Acceptable policy OIDs.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["weak_usage", "any_policy"])]
    strict_policy: Option<Vec<String>>,
    /// Intended usage for a weak requirement, e.g. e-mail.
    #[arg(long, conflicts_with = "any_policy")]
    weak_usage: Option<String>,
    /// Leave the policy fields blank, dropping any policy requirement from the profile.
    #[arg(long)]
    any_policy: bool,
    #[arg(long)]
    explicit_policy: bool,
    #[arg(long)]
    inhibit_mapping: bool,
    #[arg(long)]
    request_policy: Option<String>,
    /// Evidence to return: chain, crls, online-replies, time.
    #[arg(long)]
    want: Option<String>,
    /// Validate as of this time (YYYYMMDDHHMMSSZ).
    #[arg(long)]
    validation_time: Option<String>,
    #[arg(long)]
    requester: Option<String>,
    /// Sign requests with this key file.
    #[arg(long)]
    sign_key: Option<PathBuf>,
    #[arg(long, requires = "sign_key")]
    sign_cert: Option<PathBuf>,
    #[arg(long)]
    trust_unsigned: bool,
    /// pinned, online or none.
    #[arg(long)]
    server_cert_check: Option<String>,
    /// Pin the server's signing certificate to this SHA-256 fingerprint.
    #[arg(long)]
    pin: Option<String>,
    #[arg(long)]
    signer_validator: Option<String>,
    /// Directory for the request, response and returned CRLs.
    #[arg(long)]
    store_evidence: Option<PathBuf>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Thin client: skip local evidence checks and online checks of the server certificate.
    #[arg(long)]
    thin: bool,
    /// Extra certificates offered to the server for chain building.
    #[arg(long = "supply")]
    supplied: Vec<PathBuf>,
    /// Request time to claim instead of the clock (for servers on a fixed clock).
    #[arg(long)]
    request_time: Option<String>,
    #[arg(required = true)]
    targets: Vec<PathBuf>,
}

impl ValidateArgs {
    fn settings(&self) -> anyhow::Result<ProfileSettings> {
        let mut base = match &self.profile {
            Some(p) => ProfileSettings::from_file(p)?,
            None => ProfileSettings::default(),
        };
        // A policy choice on the command line replaces the profile's, whatever its mode.
        if self.strict_policy.is_some() || self.weak_usage.is_some() || self.any_policy {
            base.strict_policies = None;
            base.weak_usage = None;
        }
        let flag = |b: bool| b.then_some(true);
        let flags = ProfileSettings {
            server_url: self.server_url.clone(),
            server_name: self.server_name.clone(),
            strict_policies: self.strict_policy.clone(),
            weak_usage: self.weak_usage.clone(),
            explicit_policy: flag(self.explicit_policy),
            inhibit_mapping: flag(self.inhibit_mapping),
            request_policy: self.request_policy.clone(),
            want_backs: self.want.clone(),
            validation_time: self.validation_time.clone(),
            requester: self.requester.clone(),
            sign_request: self.sign_key.as_ref().map(|_| true),
            signing_key: self.sign_key.clone(),
            signing_cert: self.sign_cert.clone(),
            trust_unsigned: flag(self.trust_unsigned),
            server_cert_check: self.server_cert_check.clone(),
            server_fingerprint: self.pin.clone(),
            signer_validator_url: self.signer_validator.clone(),
            store_evidence: self.store_evidence.clone(),
            timeout_ms: self.timeout_ms,
            thin: flag(self.thin),
        };
        Ok(base.merge(flags))
    }
}

fn validate(args: &ValidateArgs) -> anyhow::Result<i32> {
    let profile = ClientProfile::from_settings(args.settings()?)?;
    let targets = args
        .targets
        .iter()
        .map(|p| Target::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut supplied = Vec::new();
    for path in &args.supplied {
        let bytes = std::fs::read(path).with_context(|| path.display().to_string())?;
        supplied.push(parse_certificate(&bytes).with_context(|| path.display().to_string())?);
    }
    let mut at = Invocation::now();
    if let Some(t) = &args.request_time {
        at.request_time = t.parse::<GeneralizedTime>().context("--request-time")?;
    }
    let transport = HttpTransport::new(profile.timeout);
    let client = Client {
        profile: &profile,
        transport: &transport,
        supplied,
    };
    let outcome = client.validate(targets, at)?;
    print!("{}", outcome.report());
    Ok(outcome.exit_code())
}

fn inspect(file: &PathBuf) -> anyhow::Result<i32> {
    let bytes = std::fs::read(file).with_context(|| file.display().to_string())?;
    let text = render_any(&bytes).with_context(|| file.display().to_string())?;
    print!("{text}");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(args) => validate(args),
        Command::Inspect { file } => inspect(file),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("rp-client: {e:#}");
            ExitCode::from(1)
        }
    }
}

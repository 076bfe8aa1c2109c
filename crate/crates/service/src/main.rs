use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use delaymid_api::{app, ServiceConfig};
use log::{error, info};

#[derive(Parser, Debug)]
#[command(name = "delaymid-service", version, about = "HTTP service for delaymid")]
struct Flags {
    /// TOML file with `bind`, `port`, `budget_secs` and `cors_origins`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    /// Default compute budget per request, in seconds.
    #[arg(long)]
    budget_secs: Option<f64>,
    /// Allowed CORS origin; repeat for several. Any origin when absent.
    #[arg(long = "cors-origin")]
    cors_origins: Vec<String>,
}

fn load_config(flags: &Flags) -> Result<ServiceConfig, String> {
    let mut config = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
            ServiceConfig::from_toml(&text).map_err(|e| format!("parsing {}: {e}", path.display()))?
        }
        None => ServiceConfig::default(),
    };
    if let Some(bind) = &flags.bind {
        config.bind = bind.clone();
    }
    if let Some(port) = flags.port {
        config.port = port;
    }
    if let Some(budget) = flags.budget_secs {
        config.budget_secs = budget;
    }
    if !flags.cors_origins.is_empty() {
        config.cors_origins = flags.cors_origins.clone();
    }
    if !(config.budget_secs.is_finite() && config.budget_secs > 0.0) {
        return Err(format!("budget_secs must be positive, got {}", config.budget_secs));
    }
    Ok(config)
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let flags = Flags::parse();
    let config = match load_config(&flags) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(2);
        }
    };
    let addr: SocketAddr = match format!("{}:{}", config.bind, config.port).parse() {
        Ok(a) => a,
        Err(e) => {
            error!("bad bind address {}:{}: {e}", config.bind, config.port);
            return ExitCode::from(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            error!("cannot listen on {addr}: {e}");
            return ExitCode::from(1);
        }
    };
    info!("listening on {addr}");
    match axum::serve(listener, app(&config)).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use catbox_service::{app, Overrides, ServiceConfig};
use clap::Parser;

/// Serve catbox campaigns over HTTP.
#[derive(Debug, Parser)]
#[command(name = "catbox-service", version)]
struct Args {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Listen address, e.g. 127.0.0.1:8080.
    #[arg(long)]
    addr: Option<String>,
    /// Directory holding one JSON file per campaign.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Directory of static console assets to serve at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let flags = Overrides { addr: args.addr, store: args.store, static_dir: args.static_dir };
    let config = match ServiceConfig::resolve(args.config.as_deref(), |k| std::env::var(k).ok(), flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("catbox-service: {e}");
            return ExitCode::FAILURE;
        }
    };
    let router = match app(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("catbox-service: cannot open store {}: {e}", config.store.display());
            return ExitCode::FAILURE;
        }
    };
    let listener = match tokio::net::TcpListener::bind(config.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("catbox-service: cannot bind {}: {e}", config.addr);
            return ExitCode::FAILURE;
        }
    };
    // The bound address goes to stdout so callers using port 0 can find it.
    println!("listening on {}", listener.local_addr().expect("bound socket"));
    log::info!("store at {}", config.store.display());
    if let Err(e) = axum::serve(listener, router).await {
        eprintln!("catbox-service: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}

use std::io::IsTerminal;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use kgchat_cli::{format_fact, router, Repl};
use kgchat_core::engine::{Engine, EngineConfig};
use kgchat_core::fixture_dir;
use kgchat_core::validate::validate_data;

#[derive(Parser)]
#[command(name = "engine", version, about = "Knowledge-graph grounded dialogue engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP conversation API.
    Serve {
        #[arg(long, default_value_os_t = fixture_dir())]
        data_dir: PathBuf,
        #[arg(long)]
        store_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Chat on stdin/stdout.
    Repl {
        #[arg(long, default_value_os_t = fixture_dir())]
        data_dir: PathBuf,
        #[arg(long)]
        store_dir: Option<PathBuf>,
        #[arg(long, default_value = "user")]
        user: String,
        #[arg(long)]
        debug: bool,
    },
    /// Check a data pack.
    Validate {
        #[arg(long, default_value_os_t = fixture_dir())]
        data_dir: PathBuf,
    },
    /// Print a user's learned facts.
    Profile {
        #[arg(long, default_value_os_t = fixture_dir())]
        data_dir: PathBuf,
        #[arg(long)]
        store_dir: PathBuf,
        #[arg(long)]
        user: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ENGINE_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn open(data_dir: &Path, store_dir: Option<&Path>) -> Result<Engine> {
    Engine::open(data_dir, store_dir, EngineConfig::default())
        .with_context(|| format!("loading data pack {}", data_dir.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve {
            data_dir,
            store_dir,
            host,
            port,
        } => {
            let engine = Arc::new(open(&data_dir, store_dir.as_deref())?);
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad listen address")?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                log::info!("listening on {addr}");
                eprintln!("listening on http://{addr}");
                axum::serve(listener, router(engine))
                    .with_graceful_shutdown(async {
                        tokio::signal::ctrl_c().await.ok();
                    })
                    .await
                    .context("serving")
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Repl {
            data_dir,
            store_dir,
            user,
            debug,
        } => {
            let engine = open(&data_dir, store_dir.as_deref())?;
            let mut repl = Repl::new(&engine, &user, debug)?;
            let stdin = std::io::stdin();
            let prompt = stdin.is_terminal();
            repl.run(stdin.lock(), std::io::stdout().lock(), prompt)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { data_dir } => {
            let report = validate_data(&data_dir).with_context(|| format!("loading {}", data_dir.display()))?;
            println!(
                "{} entities, {} properties, {} builtin facts, {} structures, {} pairs",
                report.stats.entities, report.stats.properties, report.stats.builtin_triples, report.structures, report.pairs
            );
            for v in &report.pair_violations {
                println!("pair violation: {v}");
            }
            for r in &report.realization {
                println!("realization: {r}");
            }
            println!("{} violations", report.violations());
            Ok(if report.violations() == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Profile {
            data_dir,
            store_dir,
            user,
        } => {
            let engine = open(&data_dir, Some(store_dir.as_path()))?;
            for t in engine.profile(&user)? {
                println!("{}", format_fact(&t));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

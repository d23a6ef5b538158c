use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use grow_core::clock::SystemClock;
use grow_core::domain::UserId;
use grow_core::engine::EngineConfig;
use grow_core::gateway::{load_script, HttpBackend, HttpConfig, LlmGateway, LlmParams, ScriptedBackend};
use grow_core::providers::{EmailProvider, InMemoryCalendar, ProviderError};
use grow_core::resources::ResourceCatalog;
use grow_core::service::{GrowService, ServiceConfig};
use grow_core::store::ProfileStore;
use grow_server::{router, AppState};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "grow", version, about = "GROW goal-coaching service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON snapshot file for the profile store; in-memory when omitted.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Scripted model responses; otherwise the live endpoint configured by
    /// GROW_LLM_API_KEY / GROW_LLM_ENDPOINT is used.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, env = "GROW_LLM_MODEL", default_value = "gpt-4o-mini")]
    model: String,
    /// Support resource catalog (list of {title, description, url, category}).
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, default_value = "http://localhost:8080/dashboard")]
    dashboard_url: String,
    /// Transcript retention in days.
    #[arg(long, default_value_t = grow_core::store::DEFAULT_RETENTION_DAYS)]
    retention_days: i64,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Seconds between reminder worker passes; 0 disables the worker.
        #[arg(long, default_value_t = 3600)]
        reminder_interval: u64,
        /// Enable POST /api/session, which hands out tokens for any user id.
        #[arg(long)]
        dev_login: bool,
    },
    /// Feed user turns through a session and print the exchange and the
    /// resulting dashboard.
    Replay {
        #[command(flatten)]
        common: Common,
        /// JSON list of user messages, or an object of lists keyed by phase.
        #[arg(long)]
        turns: PathBuf,
        #[arg(long, default_value = "replay-user")]
        user: String,
    },
    /// Run one pass of the reminder worker.
    Remind {
        #[command(flatten)]
        common: Common,
    },
}

/// Reminder delivery that only logs. Real mail transports plug in behind
/// the same trait.
struct LogMailbox;

impl EmailProvider for LogMailbox {
    fn send(&self, user: &UserId, subject: &str, _body: &str) -> Result<(), ProviderError> {
        tracing::info!(user = %user, subject, "reminder email");
        Ok(())
    }
}

fn gateway(common: &Common) -> Result<Arc<dyn LlmGateway>> {
    if let Some(path) = &common.script {
        return Ok(Arc::new(ScriptedBackend::new(load_script(path)?)));
    }
    match HttpConfig::from_env() {
        Some(cfg) => Ok(Arc::new(HttpBackend::new(cfg))),
        None => bail!("no model configured: pass --script or set GROW_LLM_API_KEY"),
    }
}

fn build_service(common: &Common) -> Result<GrowService> {
    let store = match &common.store {
        Some(path) => ProfileStore::open(path).with_context(|| format!("opening {}", path.display()))?,
        None => ProfileStore::in_memory(),
    }
    .with_retention_days(common.retention_days);
    let mut service = GrowService::new(
        Arc::new(store),
        gateway(common)?,
        Arc::new(InMemoryCalendar::new()),
        Arc::new(LogMailbox),
        Arc::new(SystemClock),
    );
    if let Some(path) = &common.catalog {
        service = service.with_catalog(ResourceCatalog::load(path)?);
    }
    let engine = EngineConfig {
        params: LlmParams { model_name: common.model.clone(), ..LlmParams::default() },
        ..EngineConfig::default()
    };
    Ok(service.with_config(ServiceConfig { engine, dashboard_url: common.dashboard_url.clone(), ..Default::default() }))
}

const PHASE_ORDER: [&str; 4] = ["introduction", "values_check_in", "goal_setting", "active_coaching"];

fn read_turns(path: &Path) -> Result<Vec<String>> {
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let list = |v: &Value| -> Result<Vec<String>> { Ok(serde_json::from_value(v.clone())?) };
    match &doc {
        Value::Array(_) => list(&doc),
        Value::Object(map) => {
            if let Some(k) = map.keys().find(|k| !PHASE_ORDER.contains(&k.as_str())) {
                bail!("unknown phase key `{k}` in turns file");
            }
            let mut out = Vec::new();
            for phase in PHASE_ORDER {
                if let Some(v) = map.get(phase) {
                    out.extend(list(v)?);
                }
            }
            Ok(out)
        }
        _ => bail!("turns file must be a list or an object of lists"),
    }
}

async fn serve(service: GrowService, addr: SocketAddr, reminder_interval: u64, dev_login: bool) -> Result<()> {
    let service = Arc::new(service);
    if reminder_interval > 0 {
        let worker = service.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(reminder_interval));
            loop {
                tick.tick().await;
                let svc = worker.clone();
                match tokio::task::spawn_blocking(move || svc.run_reminders()).await {
                    Ok(Ok(sent)) => tracing::info!(count = sent.len(), "reminder pass"),
                    Ok(Err(e)) => tracing::warn!(error = %e, "reminder pass failed"),
                    Err(e) => tracing::warn!(error = %e, "reminder worker panicked"),
                }
            }
        });
    }
    let app = router(AppState { service, dev_login });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Serve { common, addr, reminder_interval, dev_login } => {
            let service = build_service(&common)?;
            tokio::runtime::Runtime::new()?.block_on(serve(service, addr, reminder_interval, dev_login))
        }
        Command::Replay { common, turns, user } => {
            let service = build_service(&common)?;
            let user = UserId::new(user);
            service.issue_token(&user)?;
            for text in read_turns(&turns)? {
                let out = service.chat(&user, &text)?;
                println!("user  [{}] {text}", out.display_phase);
                println!("coach [{}] {}", out.output.phase, out.output.reply_text);
                if let Some(footer) = &out.resource_footer {
                    println!("      {footer}");
                }
            }
            println!("{}", serde_json::to_string_pretty(&service.dashboard(&user)?)?);
            Ok(())
        }
        Command::Remind { common } => {
            let service = build_service(&common)?;
            for user in service.run_reminders()? {
                println!("{user}");
            }
            Ok(())
        }
    }
}

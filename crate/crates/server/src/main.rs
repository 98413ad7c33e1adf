use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use bimodal_core::dataset::DatasetSource;
use bimodal_core::llm::Provider;
use bimodal_core::narrative::{ground_check, DEFAULT_TOLERANCE};
use bimodal_core::schema::{schema, SCHEMA_NAMES};
use bimodal_core::service::{
    build_provider, create_session, load_session, replay, save_session, DatasetEntry, ProviderConfig, ReplayScript,
    ServiceConfig, ServiceError,
};
use bimodal_server::{router, AppState};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "bimodal", version, about = "Bimodal data-exploration engine")]
struct Cli {
    /// JSON config file. Flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use the fixture-backed mock provider with responses from this directory.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Chat-completions endpoint for the remote provider.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Name of the environment variable holding the provider API key.
    #[arg(long, global = true)]
    api_key_env: Option<String>,
    /// Repair attempts after the first invalid provider response.
    #[arg(long, global = true)]
    max_retries: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API (and static UI assets when configured).
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        session_dir: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Register a dataset as ID=SOURCE_JSON. Repeatable.
        #[arg(long = "dataset", value_parser = parse_dataset_entry)]
        datasets: Vec<DatasetEntry>,
    },
    /// Generate the initial narrative for a dataset and goal.
    Generate {
        /// Dataset id from the config, or a path to a dataset source JSON.
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        goal: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Also write the new session to this file.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Run a replay script and print the step log.
    Replay {
        script: PathBuf,
        /// Write the final session to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the numeric claims of a saved session against its data.
    Check {
        session: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Print a JSON schema, or the list of schema names.
    Schema { name: Option<String> },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// One paragraph per line.
    Text,
    /// Each leaf prefixed with its level.
    Tagged,
    /// The narrative document as JSON.
    Json,
}

fn parse_dataset_entry(s: &str) -> Result<DatasetEntry, String> {
    let (id, source) = s.split_once('=').ok_or("expected ID=SOURCE_JSON")?;
    Ok(DatasetEntry {
        id: id.to_string(),
        source: source.into(),
    })
}

/// Failures with the exit code they map to.
struct Failure {
    code: &'static str,
    message: String,
    exit: u8,
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        Self {
            code: e.code(),
            message: e.to_string(),
            exit: e.exit_code() as u8,
        }
    }
}

fn config_failure(message: impl Into<String>) -> Failure {
    ServiceError::Config(message.into()).into()
}

impl Cli {
    fn config(&self) -> Result<Option<ServiceConfig>, Failure> {
        self.config
            .as_deref()
            .map(ServiceConfig::from_file)
            .transpose()
            .map_err(Failure::from)
    }

    /// Provider selection: explicit flags win over the config file.
    fn provider_config(&self, config: Option<&ServiceConfig>) -> Result<ProviderConfig, Failure> {
        if let Some(dir) = &self.fixtures {
            return Ok(ProviderConfig::Mock {
                fixtures_dir: dir.clone(),
            });
        }
        let base = config.map(|c| c.provider.clone());
        if self.endpoint.is_none() && self.model.is_none() && self.api_key_env.is_none() {
            return base.ok_or_else(|| config_failure("no provider: pass --config, --fixtures or --endpoint"));
        }
        let (endpoint, model, key_env, timeout_secs, json_mode) = match base {
            Some(ProviderConfig::Remote {
                endpoint,
                model,
                api_key_env,
                timeout_secs,
                json_mode,
            }) => (Some(endpoint), Some(model), Some(api_key_env), timeout_secs, json_mode),
            _ => (None, None, None, 60, true),
        };
        Ok(ProviderConfig::Remote {
            endpoint: self.endpoint.clone().or(endpoint).ok_or_else(|| config_failure("--endpoint is required"))?,
            model: self.model.clone().or(model).ok_or_else(|| config_failure("--model is required"))?,
            api_key_env: self
                .api_key_env
                .clone()
                .or(key_env)
                .ok_or_else(|| config_failure("--api-key-env is required"))?,
            timeout_secs,
            json_mode,
        })
    }

    fn provider(&self, config: Option<&ServiceConfig>) -> Result<Arc<dyn Provider>, Failure> {
        Ok(build_provider(&self.provider_config(config)?)?)
    }

    fn max_retries(&self, config: Option<&ServiceConfig>) -> u32 {
        self.max_retries
            .or(config.map(|c| c.max_retries))
            .unwrap_or(bimodal_core::llm::DEFAULT_MAX_RETRIES)
    }
}

/// Prints a line; a closed pipe (`bimodal schema | head`) is not an error.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn write_json(value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ServiceError::Json(e.to_string()))?;
    emit(&text);
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let config = cli.config()?;
    match &cli.command {
        Command::Serve {
            bind,
            session_dir,
            static_dir,
            datasets,
        } => {
            let mut cfg = match config.clone() {
                Some(c) => c,
                None => ServiceConfig {
                    provider: cli.provider_config(None)?,
                    max_retries: bimodal_core::llm::DEFAULT_MAX_RETRIES,
                    datasets: Vec::new(),
                    session_dir: "sessions".into(),
                    bind: "127.0.0.1:8080".into(),
                    static_dir: None,
                },
            };
            cfg.provider = cli.provider_config(Some(&cfg))?;
            cfg.max_retries = cli.max_retries(Some(&cfg));
            cfg.datasets.extend(datasets.iter().cloned());
            if let Some(b) = bind {
                cfg.bind = b.clone();
            }
            if let Some(d) = session_dir {
                cfg.session_dir = d.clone();
            }
            if static_dir.is_some() {
                cfg.static_dir = static_dir.clone();
            }
            serve(cfg)
        }
        Command::Generate {
            dataset,
            goal,
            format,
            save,
        } => {
            let provider = cli.provider(config.as_ref())?;
            let source_path = match config.as_ref().map(|c| c.dataset_source(dataset)) {
                Some(Ok(p)) => p.to_path_buf(),
                _ => PathBuf::from(dataset),
            };
            let ds = DatasetSource::from_json_file(&source_path)
                .and_then(|s| s.load(None))
                .map_err(ServiceError::from)?;
            let session = create_session(ds, goal, &*provider, cli.max_retries(config.as_ref()))?;
            if let Some(path) = save {
                save_session(&session, path)?;
            }
            let doc = session.document();
            match format {
                Format::Json => write_json(doc)?,
                Format::Text => {
                    for p in &doc.paragraphs {
                        emit(&p.plain_text());
                    }
                }
                Format::Tagged => {
                    for p in &doc.paragraphs {
                        let line: Vec<String> = p.leaves().map(|l| format!("[L{}] {}", l.level as u8, l.text)).collect();
                        emit(&line.join(" "));
                    }
                }
            }
            Ok(0)
        }
        Command::Replay { script, out } => {
            let provider = cli.provider(config.as_ref())?;
            let script = ReplayScript::from_file(script)?;
            match replay(&script, &*provider, cli.max_retries(config.as_ref())) {
                Ok(log) => {
                    if let Some(path) = out {
                        save_session(&log.session, path)?;
                    }
                    write_json(&json!({
                        "session_id": log.session.id(),
                        "paragraphs": log.session.document().paragraphs.len(),
                        "charts": log.session.charts().len(),
                        "steps": log.steps,
                    }))?;
                    Ok(0)
                }
                Err(failure) => {
                    write_json(&json!({
                        "failed_step": failure.step,
                        "label": failure.label,
                        "error": {"code": failure.error.code(), "message": failure.error.to_string()},
                        "steps": failure.completed,
                    }))?;
                    Err(Failure {
                        code: failure.error.code(),
                        message: failure.to_string(),
                        exit: failure.error.exit_code() as u8,
                    })
                }
            }
        }
        Command::Check { session, tolerance } => {
            let session = load_session(session)?;
            let report = ground_check(session.document(), session.dataset(), *tolerance);
            write_json(&report)?;
            Ok(if report.is_clean() { 0 } else { 1 })
        }
        Command::Schema { name } => match name {
            None => {
                for n in SCHEMA_NAMES {
                    emit(n);
                }
                Ok(0)
            }
            Some(n) => match schema(n) {
                Some(s) => write_json(&s).map(|_| 0),
                None => Err(Failure {
                    code: "unknown_schema",
                    message: format!("no schema named {n}; run `bimodal schema` for the list"),
                    exit: 1,
                }),
            },
        },
    }
}

fn serve(config: ServiceConfig) -> Result<u8, Failure> {
    let state = Arc::new(AppState::from_config(&config)?);
    let app = router(state, config.static_dir.as_deref().filter(|d| Path::new(d).is_dir()));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| config_failure(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.bind)
            .await
            .map_err(|e| config_failure(format!("bind {}: {e}", config.bind)))?;
        let addr = listener.local_addr().map_err(|e| config_failure(e.to_string()))?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| config_failure(e.to_string()))?;
        Ok(0)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            ExitCode::from(f.exit)
        }
    }
}

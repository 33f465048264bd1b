//! Command-line interface. Exit codes: 0 success, 1 user error, 2 internal
//! error.

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use marketlens_core::agent::{AgentTurn, TurnStatus};
use marketlens_core::ingestion::SourceSpec;

use crate::app::{open_store, AppError, AppState};
use crate::config::AppConfig;
use crate::sessions::SessionStore;

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "marketlens", version, about = "Job-market intelligence over scraped postings")]
struct Cli {
    /// TOML config file; built-in defaults apply when omitted
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest a file, directory or URL, then extract, label and load new postings
    Ingest {
        #[arg(long, value_name = "PATH|URL")]
        source: String,
    },
    /// Load a skill library and relabel every stored job
    Enrich {
        #[arg(long, value_name = "PATH")]
        skills: PathBuf,
    },
    /// Serve the HTTP API
    Serve {
        /// Overrides the configured bind address
        #[arg(long)]
        bind: Option<String>,
    },
    /// Ask the agent one question
    Ask {
        question: String,
        /// Continue an existing session
        #[arg(long)]
        session: Option<String>,
        /// Print the thought/action/observation trace after the answer
        #[arg(long)]
        trace: bool,
    },
    /// Print the skills linked to the most postings
    TopSkills {
        #[arg(short = 'n', default_value_t = 10)]
        n: usize,
    },
    /// Write a stored chart spec as JSON
    ExportChart {
        chart_id: String,
        #[arg(short = 'o', long = "output", value_name = "FILE")]
        output: PathBuf,
    },
    /// Print dataset statistics as JSON
    Stats,
    /// Write every store table as JSON files into a directory
    Dump {
        #[arg(short = 'o', long = "output", value_name = "DIR")]
        output: PathBuf,
    },
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<AppConfig, AppError> {
    match path {
        Some(p) => AppConfig::load(p).map_err(|e| AppError::Config(e.to_string())),
        None => Ok(AppConfig::default()),
    }
}

fn execute(cli: Cli) -> Result<(), AppError> {
    let mut config = load_config(cli.config.as_ref())?;
    match cli.command {
        Command::Ingest { source } => {
            let spec = SourceSpec::infer(&source).map_err(|e| AppError::BadRequest(e.to_string()))?;
            let state = AppState::from_config(&config)?;
            let summary = state.run_ingest(&spec)?;
            print_json(&summary)
        }
        Command::Enrich { skills } => {
            if !skills.is_file() {
                return Err(AppError::BadRequest(format!("no such file: {}", skills.display())));
            }
            config.skills_path = Some(skills);
            let state = AppState::from_config(&config)?;
            let n = state.relabel()?;
            let skills = state.library().map_or(0, |l| l.len());
            out!("relabeled {n} jobs against {skills} skills");
            Ok(())
        }
        Command::Serve { bind } => {
            if let Some(bind) = bind {
                config.bind = bind;
            }
            let state = Arc::new(AppState::from_config(&config)?);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| AppError::Internal(e.to_string()))?;
            runtime
                .block_on(crate::api::serve(state, &config.bind))
                .map_err(|e| AppError::Internal(format!("server on {}: {e}", config.bind)))
        }
        Command::Ask { question, session, trace } => {
            let state = AppState::from_config(&config)?;
            let session_id = match session {
                Some(id) => state.session(&id)?.session_id,
                None => state.create_session()?.session_id,
            };
            eprintln!("session: {session_id}");
            let report = state.post_message(&session_id, &question)?;
            print_turn(&report.turn, trace);
            match (report.turn.status, report.provider_error) {
                (TurnStatus::ProviderError, Some(e)) => Err(AppError::Upstream(e.to_string())),
                (TurnStatus::StepLimit, _) => {
                    eprintln!("step limit reached without a final answer");
                    Ok(())
                }
                _ => Ok(()),
            }
        }
        Command::TopSkills { n } => {
            if n == 0 {
                return Err(AppError::BadRequest("-n must be at least 1".into()));
            }
            let store = open_store(&config)?;
            let rows = store.top_skills(n)?;
            if rows.is_empty() {
                eprintln!("no skills labeled yet");
            }
            for (name, count) in rows {
                out!("{name} {count}");
            }
            Ok(())
        }
        Command::ExportChart { chart_id, output } => {
            let sessions = SessionStore::open(&config.sessions_path)?;
            let chart = sessions
                .chart(&chart_id)?
                .ok_or_else(|| AppError::NotFound(format!("no chart {chart_id}")))?;
            let json = serde_json::to_string_pretty(&chart).map_err(|e| AppError::Internal(e.to_string()))?;
            std::fs::write(&output, json + "\n")
                .map_err(|e| AppError::BadRequest(format!("{}: {e}", output.display())))
        }
        Command::Stats => print_json(&open_store(&config)?.stats()?),
        Command::Dump { output } => {
            open_store(&config)?.dump(&output)?;
            out!("wrote tables to {}", output.display());
            Ok(())
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), AppError> {
    let json = serde_json::to_string_pretty(value).map_err(|e| AppError::Internal(e.to_string()))?;
    out!("{json}");
    Ok(())
}

fn print_turn(turn: &AgentTurn, trace: bool) {
    if !turn.final_answer.is_empty() {
        out!("{}", turn.final_answer);
    }
    for chart in &turn.charts {
        out!("chart: {}", chart.chart_id);
    }
    if !trace {
        return;
    }
    out!();
    out!("trace ({} steps, status {:?}):", turn.steps.len(), turn.status);
    for step in &turn.steps {
        out!("[{}] thought: {}", step.index, step.thought);
        out!("    action: {} {}", step.tool, step.args);
        for (i, line) in step.observation.lines().enumerate() {
            let label = if i == 0 { "observation:" } else { "            " };
            out!("    {label} {line}");
        }
    }
}

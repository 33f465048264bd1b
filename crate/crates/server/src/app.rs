//! Shared application state behind both the HTTP API and the CLI.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use marketlens_core::agent::{run_react, AgentConfig, Session, ToolRegistry, TurnReport};
use marketlens_core::chart::ChartSpec;
use marketlens_core::enrichment::SkillLibrary;
use marketlens_core::fixtures::{library_embedder, load_document_script};
use marketlens_core::ingestion::{SourceError, SourceSpec};
use marketlens_core::par::Execution;
use marketlens_core::pipeline::{relabel_all, Pipeline, PipelineError, PipelineSummary};
use marketlens_core::provider::{
    ChatProvider, DocumentScriptedChat, EmbeddingProvider, RemoteProvider, ScriptedChat,
};
use marketlens_core::store::{DatasetStats, Store, StoreError};
use marketlens_core::toolbox::Toolbox;
use thiserror::Error;

use crate::config::{AgentSettings, AppConfig, ChatKind, EmbedderKind};
use crate::sessions::{SessionError, SessionRecord, SessionStore};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("an ingest run is already in progress")]
    Busy,
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Upstream(String),
    #[error("{0}")]
    Internal(String),
}

impl AppError {
    pub fn code(&self) -> &'static str {
        match self {
            AppError::NotFound(_) => "not_found",
            AppError::BadRequest(_) => "bad_request",
            AppError::Unprocessable(_) => "unprocessable",
            AppError::Busy => "busy",
            AppError::Config(_) => "config",
            AppError::Upstream(_) => "upstream",
            AppError::Internal(_) => "internal",
        }
    }

    /// Process exit code: 1 for problems the user can fix, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Upstream(_) | AppError::Internal(_) => 2,
            _ => 1,
        }
    }
}

impl From<StoreError> for AppError {
    fn from(e: StoreError) -> Self {
        AppError::Internal(e.to_string())
    }
}

impl From<SessionError> for AppError {
    fn from(e: SessionError) -> Self {
        AppError::Internal(e.to_string())
    }
}

impl From<PipelineError> for AppError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Source(SourceError::Invalid(_) | SourceError::Unenumerable { .. }) => {
                AppError::BadRequest(e.to_string())
            }
            PipelineError::Source(SourceError::Unreachable { .. }) => AppError::Upstream(e.to_string()),
            other => AppError::Internal(other.to_string()),
        }
    }
}

/// The model-facing dependencies of the application.
pub struct Providers {
    pub agent: Arc<dyn ChatProvider>,
    pub advisor: Arc<dyn ChatProvider>,
    pub extraction: Arc<dyn ChatProvider>,
    pub embedder: Arc<dyn EmbeddingProvider>,
}

pub struct AppState {
    store: Arc<Store>,
    sessions: SessionStore,
    registry: ToolRegistry,
    agent_chat: Arc<dyn ChatProvider>,
    extraction_chat: Arc<dyn ChatProvider>,
    embedder: Arc<dyn EmbeddingProvider>,
    library: Option<SkillLibrary>,
    settings: AgentSettings,
    cors_origins: Vec<String>,
    session_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    ingest_busy: AtomicBool,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState")
            .field("agent", &self.agent_chat.name())
            .field("extraction", &self.extraction_chat.name())
            .field("embedder", &self.embedder.name())
            .field("skills", &self.library.as_ref().map_or(0, SkillLibrary::len))
            .finish_non_exhaustive()
    }
}

/// Clears the busy flag when an ingest run ends.
#[derive(Debug)]
pub struct IngestGuard<'a>(&'a AtomicBool);

impl Drop for IngestGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

fn read_script(path: &std::path::Path) -> Result<Vec<String>, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| AppError::Config(format!("{}: expected a JSON array of strings: {e}", path.display())))
}

impl AppState {
    pub fn new(
        store: Arc<Store>,
        sessions: SessionStore,
        providers: Providers,
        library: Option<SkillLibrary>,
        settings: AgentSettings,
    ) -> Result<Self, AppError> {
        let toolbox = Arc::new(Toolbox::new(store.clone(), providers.embedder.clone(), providers.advisor));
        let registry = toolbox.registry().map_err(|e| AppError::Internal(e.to_string()))?;
        Ok(Self {
            store,
            sessions,
            registry,
            agent_chat: providers.agent,
            extraction_chat: providers.extraction,
            embedder: providers.embedder,
            library,
            settings,
            cors_origins: Vec::new(),
            session_locks: Mutex::new(HashMap::new()),
            ingest_busy: AtomicBool::new(false),
        })
    }

    pub fn with_cors_origins(mut self, origins: Vec<String>) -> Self {
        self.cors_origins = origins;
        self
    }

    pub fn from_config(config: &AppConfig) -> Result<Self, AppError> {
        let store = open_store(config)?;
        let sessions = SessionStore::open(&config.sessions_path)?;
        let p = &config.provider;
        let remote = || Arc::new(RemoteProvider::new(p.remote()));

        let (agent, advisor, extraction): (Arc<dyn ChatProvider>, Arc<dyn ChatProvider>, Arc<dyn ChatProvider>) =
            match p.chat {
                ChatKind::Remote => (remote(), remote(), remote()),
                ChatKind::Scripted => {
                    let agent = match &p.agent_script {
                        Some(path) => read_script(path)?,
                        None => Vec::new(),
                    };
                    let advisor = match &p.advisor_script {
                        Some(path) => read_script(path)?,
                        None => Vec::new(),
                    };
                    let extraction = match &p.extraction_script {
                        Some(path) => load_document_script(path).map_err(AppError::Config)?,
                        None => DocumentScriptedChat::new(),
                    };
                    (
                        Arc::new(ScriptedChat::new(agent).with_name("scripted agent")),
                        Arc::new(ScriptedChat::new(advisor).with_name("scripted advisor")),
                        Arc::new(extraction),
                    )
                }
            };

        let entries = match &config.skills_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
                Some(SkillLibrary::parse_entries(&text).map_err(|e| AppError::Config(e.to_string()))?)
            }
            None => Some(store.skill_entries()?).filter(|e| !e.is_empty()),
        };
        let embedder: Arc<dyn EmbeddingProvider> = match p.embedder {
            EmbedderKind::Remote => remote(),
            EmbedderKind::BagOfTokens => {
                if entries.is_none() {
                    tracing::warn!("no skill library configured or stored; bag-of-tokens embedder has no vocabulary");
                }
                Arc::new(library_embedder(entries.as_deref().unwrap_or(&[])))
            }
        };
        let library = entries
            .map(|e| SkillLibrary::build(e, embedder.as_ref(), Execution::default()))
            .transpose()
            .map_err(|e| AppError::Upstream(e.to_string()))?;

        let providers = Providers { agent, advisor, extraction, embedder };
        Ok(Self::new(Arc::new(store), sessions, providers, library, config.agent.clone())?
            .with_cors_origins(config.cors_origins.clone()))
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn cors_origins(&self) -> &[String] {
        &self.cors_origins
    }

    pub fn library(&self) -> Option<&SkillLibrary> {
        self.library.as_ref()
    }

    pub fn create_session(&self) -> Result<SessionRecord, AppError> {
        let id = format!("sess-{}", uuid::Uuid::new_v4().simple());
        Ok(self.sessions.create(&id)?)
    }

    pub fn session(&self, session_id: &str) -> Result<SessionRecord, AppError> {
        self.sessions
            .get(session_id)?
            .ok_or_else(|| AppError::NotFound(format!("no session {session_id}")))
    }

    pub fn chart(&self, chart_id: &str) -> Result<ChartSpec, AppError> {
        self.sessions
            .chart(chart_id)?
            .ok_or_else(|| AppError::NotFound(format!("no chart {chart_id}")))
    }

    fn session_lock(&self, session_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.session_locks.lock().unwrap_or_else(|p| p.into_inner());
        locks.entry(session_id.to_string()).or_default().clone()
    }

    /// Runs one agent turn and persists it. Turns of one session run one at
    /// a time.
    pub fn post_message(&self, session_id: &str, message: &str) -> Result<TurnReport, AppError> {
        let lock = self.session_lock(session_id);
        let _held = lock.lock().unwrap_or_else(|p| p.into_inner());
        let record = self.session(session_id)?;
        if message.trim().is_empty() {
            return Err(AppError::Unprocessable("message must not be empty".into()));
        }
        let session = Session {
            session_id: record.session_id,
            turns: record.turns,
        };
        let config = AgentConfig {
            max_steps: self.settings.max_steps,
            max_observation_chars: self.settings.max_observation_chars,
        };
        let report = run_react(&session, message, &self.registry, self.agent_chat.as_ref(), &config)
            .map_err(|e| AppError::Internal(e.to_string()))?;
        self.sessions.append_turn(&report.turn)?;
        Ok(report)
    }

    pub fn begin_ingest(&self) -> Result<IngestGuard<'_>, AppError> {
        self.ingest_busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map_err(|_| AppError::Busy)?;
        Ok(IngestGuard(&self.ingest_busy))
    }

    /// Ingest, extract, label and load. One run at a time.
    pub fn run_ingest(&self, source: &SourceSpec) -> Result<PipelineSummary, AppError> {
        source.check().map_err(|e| AppError::BadRequest(e.to_string()))?;
        let _guard = self.begin_ingest()?;
        let mut pipeline = Pipeline::new(&self.store, self.extraction_chat.as_ref(), self.embedder.as_ref());
        pipeline.k = self.settings.k_labels;
        if let Some(library) = &self.library {
            pipeline = pipeline.with_library(library);
        }
        Ok(pipeline.run(source)?)
    }

    /// Re-embeds and relabels every stored job from the loaded library.
    pub fn relabel(&self) -> Result<usize, AppError> {
        let library = self
            .library
            .as_ref()
            .ok_or_else(|| AppError::Config("no skill library loaded".into()))?;
        let _guard = self.begin_ingest()?;
        Ok(relabel_all(
            &self.store,
            library,
            self.embedder.as_ref(),
            self.settings.k_labels,
            Execution::default(),
        )?)
    }

    pub fn stats(&self) -> Result<DatasetStats, AppError> {
        Ok(self.store.stats()?)
    }
}

pub fn open_store(config: &AppConfig) -> Result<Store, AppError> {
    let store = if config.store_path.as_os_str() == ":memory:" {
        Store::open_in_memory()?
    } else {
        Store::open(&config.store_path)?
    };
    Ok(store.with_config(config.agent.store_config()))
}

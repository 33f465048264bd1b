//! Persistent chat sessions and chart specs.
//!
//! Turns and charts are stored as the exact JSON returned by the API so a
//! restarted server serves identical bodies.

use std::path::Path;
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use marketlens_core::agent::AgentTurn;
use marketlens_core::chart::ChartSpec;
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session storage: {0}")]
    Storage(String),
    #[error("stored record is corrupt: {0}")]
    Corrupt(String),
}

impl From<rusqlite::Error> for SessionError {
    fn from(e: rusqlite::Error) -> Self {
        SessionError::Storage(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub created_at: String,
    pub turns: Vec<AgentTurn>,
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS sessions (
    session_id TEXT PRIMARY KEY,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS turns (
    session_id TEXT NOT NULL REFERENCES sessions(session_id),
    seq INTEGER NOT NULL,
    body TEXT NOT NULL,
    PRIMARY KEY (session_id, seq)
);
CREATE TABLE IF NOT EXISTS charts (
    chart_id TEXT PRIMARY KEY,
    body TEXT NOT NULL
);
";

#[derive(Debug)]
pub struct SessionStore {
    conn: Mutex<Connection>,
}

impl SessionStore {
    pub fn open(path: &Path) -> Result<Self, SessionError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| SessionError::Storage(format!("{}: {e}", dir.display())))?;
        }
        Self::init(Connection::open(path)?)
    }

    pub fn open_in_memory() -> Result<Self, SessionError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, SessionError> {
        conn.execute_batch(SCHEMA)?;
        Ok(Self { conn: Mutex::new(conn) })
    }

    fn conn(&self) -> std::sync::MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn create(&self, session_id: &str) -> Result<SessionRecord, SessionError> {
        let created_at = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
        self.conn().execute(
            "INSERT INTO sessions (session_id, created_at) VALUES (?1, ?2)",
            params![session_id, created_at],
        )?;
        Ok(SessionRecord {
            session_id: session_id.to_string(),
            created_at,
            turns: Vec::new(),
        })
    }

    pub fn get(&self, session_id: &str) -> Result<Option<SessionRecord>, SessionError> {
        let conn = self.conn();
        let created_at: Option<String> = conn
            .query_row(
                "SELECT created_at FROM sessions WHERE session_id = ?1",
                [session_id],
                |r| r.get(0),
            )
            .optional()?;
        let Some(created_at) = created_at else {
            return Ok(None);
        };
        let mut stmt = conn.prepare("SELECT body FROM turns WHERE session_id = ?1 ORDER BY seq")?;
        let bodies = stmt
            .query_map([session_id], |r| r.get::<_, String>(0))?
            .collect::<Result<Vec<_>, _>>()?;
        let turns = bodies
            .iter()
            .map(|b| serde_json::from_str(b).map_err(|e| SessionError::Corrupt(e.to_string())))
            .collect::<Result<Vec<AgentTurn>, _>>()?;
        Ok(Some(SessionRecord {
            session_id: session_id.to_string(),
            created_at,
            turns,
        }))
    }

    /// Appends a turn and stores its charts in one transaction.
    pub fn append_turn(&self, turn: &AgentTurn) -> Result<(), SessionError> {
        let body = serde_json::to_string(turn).map_err(|e| SessionError::Corrupt(e.to_string()))?;
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let seq: i64 = tx.query_row(
            "SELECT COALESCE(MAX(seq), 0) + 1 FROM turns WHERE session_id = ?1",
            [&turn.session_id],
            |r| r.get(0),
        )?;
        tx.execute(
            "INSERT INTO turns (session_id, seq, body) VALUES (?1, ?2, ?3)",
            params![turn.session_id, seq, body],
        )?;
        for chart in &turn.charts {
            let body = serde_json::to_string(chart).map_err(|e| SessionError::Corrupt(e.to_string()))?;
            tx.execute(
                "INSERT OR IGNORE INTO charts (chart_id, body) VALUES (?1, ?2)",
                params![chart.chart_id, body],
            )?;
        }
        tx.commit()?;
        Ok(())
    }

    pub fn chart(&self, chart_id: &str) -> Result<Option<ChartSpec>, SessionError> {
        let body: Option<String> = self
            .conn()
            .query_row("SELECT body FROM charts WHERE chart_id = ?1", [chart_id], |r| r.get(0))
            .optional()?;
        body.map(|b| serde_json::from_str(&b).map_err(|e| SessionError::Corrupt(e.to_string())))
            .transpose()
    }
}

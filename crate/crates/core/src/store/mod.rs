//! Persistent job-market store.
//!
//! Backed by SQLite. Writes go through the typed upsert operations; the only
//! SQL surface exposed to callers is [`Store::execute_query`], which accepts
//! nothing but a [`ValidatedQuery`] and additionally runs with
//! `query_only` set and rejects any prepared statement SQLite does not
//! consider read-only.

mod guard;
mod schema;
mod vector;

pub use guard::{classify_statement, validate_readonly, GuardError, StatementKind, ValidatedQuery};
pub use schema::{SCHEMA, TABLES};
pub use vector::{VectorHit, VectorIndex};

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{Duration, Instant};

use chrono::{DateTime, NaiveDate, Utc};
use rusqlite::types::{Value as SqlValue, ValueRef};
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{
    check_label_order, validate_job_record, ContentType, EmbeddingVector, JobId, JobRecord, RawDocument,
    SkillEntry, SkillLabel,
};
use crate::ingestion::ContentKey;
use crate::par::Execution;

pub const DEFAULT_MAX_ROWS: usize = 500;
pub const DEFAULT_QUERY_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("storage error: {0}")]
    Storage(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid range: {from} is after {to}")]
    InvalidRange { from: NaiveDate, to: NaiveDate },
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        StoreError::Storage(e.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("query failed: {0}")]
    Engine(String),
    #[error("query exceeded the {limit_ms} ms time limit")]
    Timeout { limit_ms: u128 },
    #[error("statement is not read-only")]
    NotReadOnly,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("query has dimension {query}, index has {index}")]
    DimensionMismatch { query: usize, index: usize },
    #[error("vector index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentStatus {
    Pending,
    Extracted,
    Quarantined,
}

impl DocumentStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DocumentStatus::Pending => "pending",
            DocumentStatus::Extracted => "extracted",
            DocumentStatus::Quarantined => "quarantined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Integer,
    Real,
    Date,
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Null => f.write_str("NULL"),
            Cell::Integer(i) => write!(f, "{i}"),
            Cell::Real(r) => write!(f, "{r}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub row_count: usize,
    pub truncated: bool,
}

/// SHA-256 over the canonical serialization of every table, lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StoreChecksum(pub String);

/// Dataset-wide counts in the shape of a descriptive statistics table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total_postings: u64,
    pub unique_companies: u64,
    pub unique_expertise: u64,
    pub unique_skills_linked: u64,
    pub date_min: Option<String>,
    pub date_max: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreConfig {
    pub max_rows: usize,
    pub query_timeout: Duration,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            max_rows: DEFAULT_MAX_ROWS,
            query_timeout: DEFAULT_QUERY_TIMEOUT,
        }
    }
}

/// A job ready to be written: record, its labels and requirements embedding.
#[derive(Debug, Clone)]
pub struct JobUpsert {
    pub record: JobRecord,
    pub labels: Vec<SkillLabel>,
    pub embedding: EmbeddingVector,
}

pub struct Store {
    conn: Mutex<Connection>,
    config: StoreConfig,
    index: RwLock<Option<Arc<VectorIndex>>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("config", &self.config).finish_non_exhaustive()
    }
}

/// Normalized grouping key for titles and company names.
pub fn normalize_name(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn company_id(company_name: &str) -> String {
    let digest = Sha256::digest(normalize_name(company_name).as_bytes());
    format!("co-{}", &hex::encode(digest)[..16])
}

impl Store {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| StoreError::Storage(e.to_string()))?;
        }
        Self::from_connection(Connection::open(path)?)
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        Self::from_connection(Connection::open_in_memory()?)
    }

    fn from_connection(conn: Connection) -> Result<Self, StoreError> {
        conn.execute_batch("PRAGMA foreign_keys = ON;")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
            config: StoreConfig::default(),
            index: RwLock::new(None),
        })
    }

    pub fn with_config(mut self, config: StoreConfig) -> Self {
        self.config = config;
        self
    }

    pub fn config(&self) -> StoreConfig {
        self.config
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn invalidate_index(&self) {
        *self.index.write().unwrap_or_else(|p| p.into_inner()) = None;
    }

    // ---- read-only SQL -------------------------------------------------

    /// Runs a guarded query with the row cap and wall-clock limit applied.
    pub fn execute_query(&self, query: &ValidatedQuery) -> Result<ResultTable, QueryError> {
        let conn = self.conn();
        let limit = self.config.query_timeout;
        let timed_out = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&timed_out);
        let deadline = Instant::now() + limit;
        conn.progress_handler(
            1_000,
            Some(move || {
                let expired = Instant::now() >= deadline;
                if expired {
                    flag.store(true, Ordering::Relaxed);
                }
                expired
            }),
        );
        let engine = |e: rusqlite::Error| QueryError::Engine(e.to_string());
        let result = conn
            .pragma_update(None, "query_only", true)
            .map_err(engine)
            .and_then(|_| run_readonly(&conn, query.sql(), self.config.max_rows));
        conn.progress_handler(0, None::<fn() -> bool>);
        let _ = conn.pragma_update(None, "query_only", false);
        match result {
            Err(_) if timed_out.load(Ordering::Relaxed) => Err(QueryError::Timeout {
                limit_ms: limit.as_millis(),
            }),
            other => other,
        }
    }

    // ---- vector search -------------------------------------------------

    fn vector_index(&self) -> Result<Arc<VectorIndex>, StoreError> {
        if let Some(idx) = self.index.read().unwrap_or_else(|p| p.into_inner()).as_ref() {
            return Ok(Arc::clone(idx));
        }
        let built = {
            let conn = self.conn();
            let mut stmt = conn.prepare("SELECT job_id, dim, vector FROM job_embeddings ORDER BY job_id")?;
            let rows = stmt.query_map([], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)?, r.get::<_, Vec<u8>>(2)?))
            })?;
            let mut index: Option<VectorIndex> = None;
            for row in rows {
                let (id, dim, bytes) = row?;
                let v = EmbeddingVector::from_le_bytes(&bytes)
                    .map_err(|e| StoreError::Storage(format!("embedding of {id}: {e}")))?;
                if v.dim() as i64 != dim {
                    return Err(StoreError::Storage(format!("embedding of {id} has wrong dim")));
                }
                index.get_or_insert_with(|| VectorIndex::new(v.dim())).push(JobId(id), &v);
            }
            Arc::new(index.unwrap_or_default())
        };
        *self.index.write().unwrap_or_else(|p| p.into_inner()) = Some(Arc::clone(&built));
        Ok(built)
    }

    /// Exhaustive cosine search over all stored job embeddings.
    pub fn vector_search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<VectorHit>, SearchError> {
        self.vector_search_with(query, k, Execution::default())
    }

    pub fn vector_search_with(
        &self,
        query: &EmbeddingVector,
        k: usize,
        exec: Execution,
    ) -> Result<Vec<VectorHit>, SearchError> {
        if k == 0 {
            return Err(SearchError::InvalidK);
        }
        let index = self.vector_index()?;
        if index.is_empty() {
            return Err(SearchError::EmptyIndex);
        }
        if index.dim() != query.dim() {
            return Err(SearchError::DimensionMismatch {
                query: query.dim(),
                index: index.dim(),
            });
        }
        let top = index.search(query, k, exec);
        let conn = self.conn();
        let mut stmt = conn
            .prepare_cached("SELECT job_title, expertise_category FROM jobs WHERE job_id = ?1")
            .map_err(StoreError::from)?;
        top.into_iter()
            .map(|(score, job_id)| {
                let (job_title, expertise_category) = stmt
                    .query_row([job_id.as_str()], |r| Ok((r.get(0)?, r.get(1)?)))
                    .map_err(StoreError::from)?;
                Ok(VectorHit { job_id, score, job_title, expertise_category })
            })
            .collect()
    }

    // ---- aggregations --------------------------------------------------

    /// Skills by number of distinct linked jobs, then name.
    pub fn top_skills(&self, n: usize) -> Result<Vec<(String, u64)>, StoreError> {
        if n == 0 {
            return Err(StoreError::InvalidArgument("n must be at least 1".into()));
        }
        let conn = self.conn();
        let mut stmt = conn.prepare_cached(
            "SELECT skill_name, COUNT(DISTINCT job_id) AS postings FROM job_skills \
             GROUP BY skill_name ORDER BY postings DESC, skill_name ASC LIMIT ?1",
        )?;
        let rows = stmt.query_map([n as i64], |r| Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)? as u64)))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    /// Job titles (trimmed, case-folded) by posting count, then title.
    pub fn top_jobs(&self, n: usize) -> Result<Vec<(String, u64)>, StoreError> {
        if n == 0 {
            return Err(StoreError::InvalidArgument("n must be at least 1".into()));
        }
        let titles: Vec<String> = {
            let conn = self.conn();
            let mut stmt = conn.prepare_cached("SELECT job_title FROM jobs")?;
            let rows = stmt.query_map([], |r| r.get(0))?;
            rows.collect::<Result<_, _>>()?
        };
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for t in titles {
            *counts.entry(normalize_name(&t)).or_default() += 1;
        }
        let mut ranked: Vec<_> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(n);
        Ok(ranked)
    }

    /// One entry per day in `[from, to]`, zero-filled.
    pub fn postings_per_day(&self, from: NaiveDate, to: NaiveDate) -> Result<Vec<(NaiveDate, u64)>, StoreError> {
        if from > to {
            return Err(StoreError::InvalidRange { from, to });
        }
        let counts: HashMap<String, u64> = {
            let conn = self.conn();
            let mut stmt = conn.prepare_cached(
                "SELECT posted_date, COUNT(*) FROM jobs WHERE posted_date BETWEEN ?1 AND ?2 GROUP BY posted_date",
            )?;
            let rows = stmt.query_map(params![from.to_string(), to.to_string()], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)? as u64))
            })?;
            rows.collect::<Result<_, _>>()?
        };
        Ok(from
            .iter_days()
            .take_while(|d| *d <= to)
            .map(|d| (d, counts.get(&d.to_string()).copied().unwrap_or(0)))
            .collect())
    }

    pub fn stats(&self) -> Result<DatasetStats, StoreError> {
        let conn = self.conn();
        let count = |sql: &str| conn.query_row(sql, [], |r| r.get::<_, i64>(0)).map(|c| c as u64);
        let (date_min, date_max) = conn.query_row(
            "SELECT MIN(posted_date), MAX(posted_date) FROM jobs",
            [],
            |r| Ok((r.get(0)?, r.get(1)?)),
        )?;
        Ok(DatasetStats {
            total_postings: count("SELECT COUNT(*) FROM jobs")?,
            unique_companies: count("SELECT COUNT(DISTINCT company_id) FROM jobs")?,
            unique_expertise: count("SELECT COUNT(DISTINCT expertise_category) FROM jobs")?,
            unique_skills_linked: count("SELECT COUNT(DISTINCT skill_name) FROM job_skills")?,
            date_min,
            date_max,
        })
    }

    // ---- writes --------------------------------------------------------

    /// Inserts or replaces (by source URL) one job with its labels and
    /// embedding.
    pub fn upsert_job(
        &self,
        record: &JobRecord,
        labels: &[SkillLabel],
        embedding: &EmbeddingVector,
    ) -> Result<JobId, StoreError> {
        let job = JobUpsert {
            record: record.clone(),
            labels: labels.to_vec(),
            embedding: embedding.clone(),
        };
        Ok(self.upsert_jobs(std::slice::from_ref(&job))?.remove(0))
    }

    /// Upserts a batch atomically: either every job is written or none.
    pub fn upsert_jobs(&self, jobs: &[JobUpsert]) -> Result<Vec<JobId>, StoreError> {
        for job in jobs {
            check_upsert(job)?;
        }
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let stored_dim: Option<i64> = tx
            .query_row("SELECT dim FROM job_embeddings LIMIT 1", [], |r| r.get(0))
            .optional()?;
        let mut ids = Vec::with_capacity(jobs.len());
        for job in jobs {
            let dim = job.embedding.dim() as i64;
            if stored_dim.is_some_and(|d| d != dim) || jobs[0].embedding.dim() as i64 != dim {
                return Err(StoreError::Precondition(format!(
                    "embedding dimension {dim} does not match the stored dimension"
                )));
            }
            ids.push(write_job(&tx, job)?);
        }
        tx.commit()?;
        drop(conn);
        self.invalidate_index();
        Ok(ids)
    }

    /// Replaces the labels of an existing job.
    pub fn replace_labels(&self, job_id: &JobId, labels: &[SkillLabel]) -> Result<(), StoreError> {
        check_labels(job_id, labels)?;
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let exists: Option<i64> = tx
            .query_row("SELECT 1 FROM jobs WHERE job_id = ?1", [job_id.as_str()], |r| r.get(0))
            .optional()?;
        if exists.is_none() {
            return Err(StoreError::Precondition(format!("unknown job {job_id}")));
        }
        tx.execute("DELETE FROM job_skills WHERE job_id = ?1", [job_id.as_str()])?;
        insert_labels(&tx, labels)?;
        tx.commit()?;
        Ok(())
    }

    /// Replaces the skills table with `entries`.
    pub fn store_skills(&self, entries: &[SkillEntry]) -> Result<(), StoreError> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute("DELETE FROM skills", [])?;
        {
            let mut stmt = tx.prepare("INSERT INTO skills (skill_name, aliases) VALUES (?1, ?2)")?;
            for e in entries {
                let aliases = serde_json::to_string(&e.aliases).expect("string list serializes");
                stmt.execute(params![e.skill_name, aliases])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    pub fn skill_entries(&self) -> Result<Vec<SkillEntry>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT skill_name, aliases FROM skills ORDER BY skill_name")?;
        let rows = stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?;
        rows.map(|row| {
            let (skill_name, aliases) = row?;
            let aliases = serde_json::from_str(&aliases)
                .map_err(|e| StoreError::Storage(format!("aliases of {skill_name}: {e}")))?;
            Ok(SkillEntry { skill_name, aliases })
        })
        .collect()
    }

    // ---- raw documents -------------------------------------------------

    pub fn has_document(&self, key: &ContentKey) -> Result<bool, StoreError> {
        let conn = self.conn();
        let found: Option<i64> = conn
            .query_row("SELECT 1 FROM raw_documents WHERE content_key = ?1", [key.as_str()], |r| r.get(0))
            .optional()?;
        Ok(found.is_some())
    }

    /// Stores a pending document; returns false if the key already exists.
    pub fn insert_document(&self, key: &ContentKey, doc: &RawDocument) -> Result<bool, StoreError> {
        let conn = self.conn();
        let n = conn.execute(
            "INSERT OR IGNORE INTO raw_documents \
             (content_key, source_url, fetched_at, content_type, status, content) \
             VALUES (?1, ?2, ?3, ?4, 'pending', ?5)",
            params![
                key.as_str(),
                doc.source_url,
                doc.fetched_at.to_rfc3339(),
                doc.content_type.as_str(),
                doc.content
            ],
        )?;
        Ok(n == 1)
    }

    /// Documents with the given status, ordered by key.
    pub fn documents(&self, status: DocumentStatus) -> Result<Vec<(ContentKey, RawDocument)>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT content_key, source_url, fetched_at, content_type, content FROM raw_documents \
             WHERE status = ?1 ORDER BY content_key",
        )?;
        let rows = stmt.query_map([status.as_str()], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
            ))
        })?;
        rows.map(|row| {
            let (key, source_url, fetched_at, content_type, content) = row?;
            let bad = |what: &str| StoreError::Storage(format!("document {key}: bad {what}"));
            Ok((
                ContentKey::from_hex(&key).map_err(|_| bad("content key"))?,
                RawDocument {
                    source_url,
                    fetched_at: DateTime::parse_from_rfc3339(&fetched_at)
                        .map_err(|_| bad("fetched_at"))?
                        .with_timezone(&Utc),
                    content_type: content_type.parse::<ContentType>().map_err(|_| bad("content_type"))?,
                    content,
                },
            ))
        })
        .collect()
    }

    pub fn set_document_status(
        &self,
        key: &ContentKey,
        status: DocumentStatus,
        note: Option<&str>,
    ) -> Result<(), StoreError> {
        let conn = self.conn();
        conn.execute(
            "UPDATE raw_documents SET status = ?2, note = ?3 WHERE content_key = ?1",
            params![key.as_str(), status.as_str(), note],
        )?;
        Ok(())
    }

    // ---- job reads -----------------------------------------------------

    pub fn job_count(&self) -> Result<u64, StoreError> {
        let conn = self.conn();
        Ok(conn.query_row("SELECT COUNT(*) FROM jobs", [], |r| r.get::<_, i64>(0))? as u64)
    }

    /// Every job, ordered by id.
    pub fn jobs(&self) -> Result<Vec<JobRecord>, StoreError> {
        self.query_jobs("ORDER BY j.job_id", &[])
    }

    pub fn job(&self, job_id: &JobId) -> Result<Option<JobRecord>, StoreError> {
        Ok(self
            .query_jobs("WHERE j.job_id = ?1", &[&job_id.as_str()])?
            .into_iter()
            .next())
    }

    fn query_jobs(&self, tail: &str, args: &[&dyn rusqlite::ToSql]) -> Result<Vec<JobRecord>, StoreError> {
        let conn = self.conn();
        let sql = format!(
            "SELECT j.job_id, j.job_title, c.company_name, c.company_information, j.job_description, \
             j.job_requirements, j.expertise_category, j.location, j.salary_min, j.salary_max, \
             j.salary_currency, j.posted_date, j.source_url \
             FROM jobs j JOIN companies c ON c.company_id = j.company_id {tail}"
        );
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt.query_map(args, |r| {
            Ok(JobRecord {
                job_id: JobId(r.get(0)?),
                job_title: r.get(1)?,
                company_name: r.get(2)?,
                company_information: r.get(3)?,
                job_description: r.get(4)?,
                job_requirements: r.get(5)?,
                expertise_category: r.get(6)?,
                location: r.get(7)?,
                salary_min: r.get(8)?,
                salary_max: r.get(9)?,
                salary_currency: r.get(10)?,
                posted_date: r
                    .get::<_, Option<String>>(11)?
                    .and_then(|d| NaiveDate::parse_from_str(&d, "%Y-%m-%d").ok()),
                source_url: r.get(12)?,
            })
        })?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    /// Labels of one job in rank order.
    pub fn labels_for(&self, job_id: &JobId) -> Result<Vec<SkillLabel>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare_cached(
            "SELECT skill_name, score, rank FROM job_skills WHERE job_id = ?1 ORDER BY rank",
        )?;
        let rows = stmt.query_map([job_id.as_str()], |r| {
            Ok(SkillLabel {
                job_id: job_id.clone(),
                skill_name: r.get(0)?,
                score: r.get(1)?,
                rank: r.get::<_, i64>(2)? as u32,
            })
        })?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    // ---- verification --------------------------------------------------

    /// Deterministic digest of every row of every table.
    pub fn checksum(&self) -> Result<StoreChecksum, StoreError> {
        let conn = self.conn();
        let mut hasher = Sha256::new();
        for (table, order) in TABLES {
            hasher.update(table.as_bytes());
            hasher.update([0xff]);
            let mut stmt = conn.prepare(&format!("SELECT * FROM {table} ORDER BY {order}"))?;
            let ncols = stmt.column_count();
            let mut rows = stmt.query([])?;
            while let Some(row) = rows.next()? {
                for i in 0..ncols {
                    hash_value(&mut hasher, row.get_ref(i)?);
                }
                hasher.update([0xfe]);
            }
        }
        Ok(StoreChecksum(hex::encode(hasher.finalize())))
    }

    /// Writes `<table>.jsonl` for every table into `dir`.
    pub fn dump(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir).map_err(|e| StoreError::Storage(e.to_string()))?;
        let conn = self.conn();
        for (table, order) in TABLES {
            let mut stmt = conn.prepare(&format!("SELECT * FROM {table} ORDER BY {order}"))?;
            let names: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
            let mut out = String::new();
            let mut rows = stmt.query([])?;
            while let Some(row) = rows.next()? {
                let mut obj = serde_json::Map::new();
                for (i, name) in names.iter().enumerate() {
                    obj.insert(name.clone(), json_value(row.get_ref(i)?));
                }
                out.push_str(&serde_json::Value::Object(obj).to_string());
                out.push('\n');
            }
            fs::write(dir.join(format!("{table}.jsonl")), out).map_err(|e| StoreError::Storage(e.to_string()))?;
        }
        Ok(())
    }
}

fn check_labels(job_id: &JobId, labels: &[SkillLabel]) -> Result<(), StoreError> {
    if let Some(l) = labels.iter().find(|l| &l.job_id != job_id) {
        return Err(StoreError::Precondition(format!(
            "label for '{}' references job {} instead of {job_id}",
            l.skill_name, l.job_id
        )));
    }
    check_label_order(labels).map_err(StoreError::Precondition)
}

fn check_upsert(job: &JobUpsert) -> Result<(), StoreError> {
    let report = validate_job_record(&job.record);
    if !report.valid {
        return Err(StoreError::Precondition(format!("invalid job record: {}", report.summary())));
    }
    if job.record.job_id.as_str().is_empty() {
        return Err(StoreError::Precondition("job_id is empty".into()));
    }
    if job.record.source_url.trim().is_empty() {
        return Err(StoreError::Precondition("source_url is empty".into()));
    }
    check_labels(&job.record.job_id, &job.labels)
}

fn write_job(tx: &rusqlite::Transaction<'_>, job: &JobUpsert) -> Result<JobId, StoreError> {
    let r = &job.record;
    // replace any prior row for the same posting
    let previous: Vec<(String, String)> = {
        let mut stmt = tx.prepare("SELECT job_id, company_id FROM jobs WHERE source_url = ?1 OR job_id = ?2")?;
        let rows = stmt.query_map(params![r.source_url, r.job_id.as_str()], |row| Ok((row.get(0)?, row.get(1)?)))?;
        rows.collect::<Result<_, _>>()?
    };
    for (old_id, _) in &previous {
        tx.execute("DELETE FROM job_skills WHERE job_id = ?1", [old_id])?;
        tx.execute("DELETE FROM job_embeddings WHERE job_id = ?1", [old_id])?;
        tx.execute("DELETE FROM jobs WHERE job_id = ?1", [old_id])?;
    }
    let cid = company_id(&r.company_name);
    tx.execute(
        "INSERT INTO companies (company_id, company_name, company_information) VALUES (?1, ?2, ?3) \
         ON CONFLICT(company_id) DO UPDATE SET company_information = excluded.company_information \
         WHERE companies.company_information = ''",
        params![cid, r.company_name.trim(), r.company_information],
    )?;
    tx.execute(
        "INSERT INTO jobs (job_id, company_id, job_title, job_description, job_requirements, \
         expertise_category, location, salary_min, salary_max, salary_currency, posted_date, source_url) \
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12)",
        params![
            r.job_id.as_str(),
            cid,
            r.job_title,
            r.job_description,
            r.job_requirements,
            r.expertise_category,
            r.location,
            r.salary_min,
            r.salary_max,
            r.salary_currency,
            r.posted_date.map(|d| d.to_string()),
            r.source_url,
        ],
    )?;
    insert_labels(tx, &job.labels)?;
    tx.execute(
        "INSERT INTO job_embeddings (job_id, dim, vector) VALUES (?1, ?2, ?3)",
        params![r.job_id.as_str(), job.embedding.dim() as i64, job.embedding.to_le_bytes()],
    )?;
    for (_, old_company) in previous {
        tx.execute(
            "DELETE FROM companies WHERE company_id = ?1 AND NOT EXISTS \
             (SELECT 1 FROM jobs WHERE company_id = ?1)",
            [old_company],
        )?;
    }
    Ok(r.job_id.clone())
}

fn insert_labels(tx: &rusqlite::Transaction<'_>, labels: &[SkillLabel]) -> Result<(), StoreError> {
    let mut stmt =
        tx.prepare_cached("INSERT INTO job_skills (job_id, skill_name, score, rank) VALUES (?1, ?2, ?3, ?4)")?;
    for l in labels {
        stmt.execute(params![l.job_id.as_str(), l.skill_name, l.score, l.rank as i64])?;
    }
    Ok(())
}

fn run_readonly(conn: &Connection, sql: &str, max_rows: usize) -> Result<ResultTable, QueryError> {
    let engine = |e: rusqlite::Error| QueryError::Engine(e.to_string());
    let mut stmt = conn.prepare(sql).map_err(engine)?;
    if !stmt.readonly() {
        return Err(QueryError::NotReadOnly);
    }
    let declared: Vec<(String, Option<ColumnType>)> = stmt
        .columns()
        .iter()
        .map(|c| (c.name().to_string(), c.decl_type().and_then(declared_type)))
        .collect();
    let ncols = declared.len();
    let mut rows = Vec::new();
    let mut truncated = false;
    let mut cursor = stmt.query([]).map_err(engine)?;
    while let Some(row) = cursor.next().map_err(engine)? {
        if rows.len() == max_rows {
            truncated = true;
            break;
        }
        let mut cells = Vec::with_capacity(ncols);
        for i in 0..ncols {
            cells.push(match row.get_ref(i).map_err(engine)? {
                ValueRef::Null => Cell::Null,
                ValueRef::Integer(v) => Cell::Integer(v),
                ValueRef::Real(v) => Cell::Real(v),
                ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
                ValueRef::Blob(b) => Cell::Text(hex::encode(b)),
            });
        }
        rows.push(cells);
    }
    let columns = declared
        .into_iter()
        .enumerate()
        .map(|(i, (name, decl))| Column {
            name,
            column_type: decl.unwrap_or_else(|| inferred_type(rows.iter().map(|r| &r[i]))),
        })
        .collect();
    Ok(ResultTable { columns, row_count: rows.len(), rows, truncated })
}

fn declared_type(decl: &str) -> Option<ColumnType> {
    let d = decl.to_ascii_uppercase();
    if d.contains("DATE") {
        Some(ColumnType::Date)
    } else if d.contains("INT") {
        Some(ColumnType::Integer)
    } else if d.contains("REAL") || d.contains("FLOA") || d.contains("DOUB") {
        Some(ColumnType::Real)
    } else if d.contains("TEXT") || d.contains("CHAR") || d.contains("CLOB") || d.contains("BLOB") {
        Some(ColumnType::Text)
    } else {
        None
    }
}

fn inferred_type<'a>(cells: impl Iterator<Item = &'a Cell>) -> ColumnType {
    let mut ty = ColumnType::Null;
    for c in cells {
        ty = match (ty, c) {
            (t, Cell::Null) => t,
            (ColumnType::Null, Cell::Integer(_)) => ColumnType::Integer,
            (ColumnType::Integer | ColumnType::Null, Cell::Real(_)) | (ColumnType::Real, Cell::Integer(_)) => {
                ColumnType::Real
            }
            (ColumnType::Null, Cell::Text(_)) => ColumnType::Text,
            (t, _) if t == ColumnType::Text => t,
            (t, c) if matches!((t, c), (ColumnType::Integer, Cell::Integer(_)) | (ColumnType::Real, Cell::Real(_))) => t,
            _ => ColumnType::Text,
        };
    }
    ty
}

fn hash_value(hasher: &mut Sha256, v: ValueRef<'_>) {
    match v {
        ValueRef::Null => hasher.update([0]),
        ValueRef::Integer(i) => {
            hasher.update([1]);
            hasher.update(i.to_le_bytes());
        }
        ValueRef::Real(r) => {
            hasher.update([2]);
            hasher.update(r.to_bits().to_le_bytes());
        }
        ValueRef::Text(t) => {
            hasher.update([3]);
            hasher.update((t.len() as u64).to_le_bytes());
            hasher.update(t);
        }
        ValueRef::Blob(b) => {
            hasher.update([4]);
            hasher.update((b.len() as u64).to_le_bytes());
            hasher.update(b);
        }
    }
}

fn json_value(v: ValueRef<'_>) -> serde_json::Value {
    match SqlValue::from(v) {
        SqlValue::Null => serde_json::Value::Null,
        SqlValue::Integer(i) => i.into(),
        SqlValue::Real(r) => r.into(),
        SqlValue::Text(t) => t.into(),
        SqlValue::Blob(b) => hex::encode(b).into(),
    }
}

//! Acquisition of raw postings from local corpora and plain HTTP pages.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{ContentType, RawDocument};
use crate::par::Execution;
use crate::store::{Store, StoreError};

pub const HTTP_TIMEOUT: Duration = Duration::from_secs(30);
pub const POLITE_DELAY: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    File,
    Directory,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub locator: String,
    #[serde(default)]
    pub content_type_hint: Option<ContentType>,
}

impl SourceSpec {
    pub fn new(kind: SourceKind, locator: impl Into<String>) -> Result<Self, SourceError> {
        let spec = SourceSpec {
            kind,
            locator: locator.into(),
            content_type_hint: None,
        };
        spec.check()?;
        Ok(spec)
    }

    /// Picks the kind from the locator: URLs are http, existing directories
    /// are directories, anything else is a file.
    pub fn infer(locator: &str) -> Result<Self, SourceError> {
        let kind = if has_url_scheme(locator) {
            SourceKind::Http
        } else if Path::new(locator).is_dir() {
            SourceKind::Directory
        } else {
            SourceKind::File
        };
        Self::new(kind, locator)
    }

    pub fn with_hint(mut self, hint: ContentType) -> Self {
        self.content_type_hint = Some(hint);
        self
    }

    pub fn check(&self) -> Result<(), SourceError> {
        if self.locator.trim().is_empty() {
            return Err(SourceError::Invalid("locator is empty".into()));
        }
        if self.kind == SourceKind::Http && !has_url_scheme(&self.locator) {
            return Err(SourceError::Invalid(format!("'{}' has no URL scheme", self.locator)));
        }
        Ok(())
    }
}

fn has_url_scheme(s: &str) -> bool {
    url::Url::parse(s).is_ok_and(|u| u.scheme() == "http" || u.scheme() == "https")
}

/// SHA-256 of canonical source URL, a zero byte and the content.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentKey(String);

impl ContentKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        if s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(ContentKey(s.to_string()))
        } else {
            Err(format!("'{s}' is not a 64-character lowercase hex digest"))
        }
    }
}

impl fmt::Debug for ContentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentKey({})", self.0)
    }
}

impl fmt::Display for ContentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parses and re-serializes URLs (lowercased scheme and host, default port
/// dropped, empty path becomes `/`); other strings are only trimmed.
pub fn canonical_url(source_url: &str) -> String {
    let trimmed = source_url.trim();
    match url::Url::parse(trimmed) {
        Ok(u) => u.to_string(),
        Err(_) => trimmed.to_string(),
    }
}

pub fn dedup_key(raw: &RawDocument) -> ContentKey {
    let mut h = Sha256::new();
    h.update(canonical_url(&raw.source_url).as_bytes());
    h.update([0u8]);
    h.update(raw.content.as_bytes());
    ContentKey(hex::encode(h.finalize()))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("{locator}: not found")]
    NotFound { locator: String },
    #[error("{locator}: {message}")]
    Network { locator: String, message: String },
    #[error("{locator}: timed out")]
    Timeout { locator: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("invalid source: {0}")]
    Invalid(String),
    #[error("source {locator} cannot be enumerated: {message}")]
    Unenumerable { locator: String, message: String },
    #[error("host of {locator} is unreachable: {message}")]
    Unreachable { locator: String, message: String },
    #[error("document sink failed: {0}")]
    Sink(#[from] StoreError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestFailure {
    pub locator: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub fetched: usize,
    pub stored: usize,
    pub duplicates_skipped: usize,
    pub failures: Vec<IngestFailure>,
}

impl IngestReport {
    pub fn is_balanced(&self) -> bool {
        self.fetched == self.stored + self.duplicates_skipped + self.failures.len()
    }
}

/// Destination for fetched documents. Implementations serialize writes.
pub trait DocumentSink {
    /// Stores `doc` under `key`; returns false when the key is already present.
    fn put(&self, key: &ContentKey, doc: &RawDocument) -> Result<bool, StoreError>;
}

impl DocumentSink for Store {
    fn put(&self, key: &ContentKey, doc: &RawDocument) -> Result<bool, StoreError> {
        self.insert_document(key, doc)
    }
}

/// In-memory sink, ordered by key.
#[derive(Debug, Default)]
pub struct MemorySink {
    docs: Mutex<BTreeMap<ContentKey, RawDocument>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.docs.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn documents(&self) -> Vec<(ContentKey, RawDocument)> {
        let docs = self.docs.lock().unwrap_or_else(|p| p.into_inner());
        docs.iter().map(|(k, d)| (k.clone(), d.clone())).collect()
    }
}

impl DocumentSink for MemorySink {
    fn put(&self, key: &ContentKey, doc: &RawDocument) -> Result<bool, StoreError> {
        let mut docs = self.docs.lock().unwrap_or_else(|p| p.into_inner());
        if docs.contains_key(key) {
            return Ok(false);
        }
        docs.insert(key.clone(), doc.clone());
        Ok(true)
    }
}

/// One line of a JSONL corpus file.
#[derive(Debug, Clone, Deserialize)]
struct CorpusLine {
    source_url: String,
    fetched_at: DateTime<Utc>,
    content: String,
    content_type: ContentType,
}

/// Plain GET fetcher with a fixed per-host delay between requests.
pub struct HttpFetcher {
    agent: ureq::Agent,
    delay: Duration,
    last_request: Mutex<HashMap<String, Instant>>,
}

impl fmt::Debug for HttpFetcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpFetcher").field("delay", &self.delay).finish_non_exhaustive()
    }
}

impl Default for HttpFetcher {
    fn default() -> Self {
        Self::new(HTTP_TIMEOUT, POLITE_DELAY)
    }
}

impl HttpFetcher {
    pub fn new(timeout: Duration, delay: Duration) -> Self {
        Self {
            agent: ureq::AgentBuilder::new().timeout(timeout).redirects(5).build(),
            delay,
            last_request: Mutex::new(HashMap::new()),
        }
    }

    fn wait_for_host(&self, host: &str) {
        loop {
            let wait = {
                let mut last = self.last_request.lock().unwrap_or_else(|p| p.into_inner());
                let now = Instant::now();
                match last.get(host) {
                    Some(&t) if now < t + self.delay => t + self.delay - now,
                    _ => {
                        last.insert(host.to_string(), now);
                        return;
                    }
                }
            };
            std::thread::sleep(wait);
        }
    }

    pub fn get(&self, locator: &str) -> Result<(String, Option<ContentType>), FetchError> {
        let host = url::Url::parse(locator)
            .ok()
            .and_then(|u| u.host_str().map(str::to_string))
            .unwrap_or_default();
        self.wait_for_host(&host);
        tracing::debug!(url = locator, "fetching");
        let response = match self.agent.get(locator).call() {
            Ok(r) => r,
            Err(ureq::Error::Status(404 | 410, _)) => {
                return Err(FetchError::NotFound { locator: locator.to_string() })
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(FetchError::Network {
                    locator: locator.to_string(),
                    message: format!("HTTP status {code}"),
                })
            }
            Err(ureq::Error::Transport(t)) if crate::provider::is_timeout(&t) => {
                return Err(FetchError::Timeout { locator: locator.to_string() })
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(FetchError::Network {
                    locator: locator.to_string(),
                    message: t.to_string(),
                })
            }
        };
        let declared = match response.content_type() {
            "text/html" | "application/xhtml+xml" => Some(ContentType::Html),
            "text/plain" => Some(ContentType::Text),
            _ => None,
        };
        let body = response.into_string().map_err(|e| FetchError::Network {
            locator: locator.to_string(),
            message: e.to_string(),
        })?;
        Ok((body, declared))
    }
}

/// Fetches one document named by `locator` under `source`.
pub fn fetch_document(source: &SourceSpec, locator: &str) -> Result<RawDocument, FetchError> {
    fetch_with(&HttpFetcher::default(), source, locator)
}

fn fetch_with(http: &HttpFetcher, source: &SourceSpec, locator: &str) -> Result<RawDocument, FetchError> {
    let (content, declared, source_url) = match source.kind {
        SourceKind::Http => {
            let (body, declared) = http.get(locator)?;
            (body, declared, locator.to_string())
        }
        SourceKind::File | SourceKind::Directory => {
            let path = Path::new(locator);
            let bytes = fs::read(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => FetchError::NotFound { locator: locator.to_string() },
                _ => FetchError::Network {
                    locator: locator.to_string(),
                    message: e.to_string(),
                },
            })?;
            let content = String::from_utf8(bytes).map_err(|_| FetchError::Network {
                locator: locator.to_string(),
                message: "content is not valid UTF-8".into(),
            })?;
            (content, None, file_url(path))
        }
    };
    let content_type = source
        .content_type_hint
        .or(declared)
        .unwrap_or_else(|| ContentType::sniff(&content));
    Ok(RawDocument {
        source_url,
        fetched_at: Utc::now(),
        content,
        content_type,
    })
}

fn file_url(path: &Path) -> String {
    let abs = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    url::Url::from_file_path(&abs)
        .map(|u| u.to_string())
        .unwrap_or_else(|_| format!("file://{}", abs.display()))
}

enum Item {
    Locator(String),
    Loaded(Result<RawDocument, IngestFailure>),
}

fn is_corpus_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn enumerate(source: &SourceSpec) -> Result<Vec<Item>, SourceError> {
    match source.kind {
        SourceKind::Http => Ok(vec![Item::Locator(source.locator.clone())]),
        SourceKind::File => {
            let path = Path::new(&source.locator);
            if !path.is_file() {
                return Err(SourceError::Unenumerable {
                    locator: source.locator.clone(),
                    message: "no such file".into(),
                });
            }
            if is_corpus_file(path) {
                read_corpus(path)
            } else {
                Ok(vec![Item::Locator(source.locator.clone())])
            }
        }
        SourceKind::Directory => {
            let entries = fs::read_dir(&source.locator).map_err(|e| SourceError::Unenumerable {
                locator: source.locator.clone(),
                message: e.to_string(),
            })?;
            let mut files: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "html" || e == "txt"))
                .collect();
            files.sort();
            Ok(files
                .into_iter()
                .map(|p| Item::Locator(p.to_string_lossy().into_owned()))
                .collect())
        }
    }
}

fn read_corpus(path: &Path) -> Result<Vec<Item>, SourceError> {
    let text = fs::read_to_string(path).map_err(|e| SourceError::Unenumerable {
        locator: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let locator = format!("{}:{}", path.display(), i + 1);
            Item::Loaded(
                serde_json::from_str::<CorpusLine>(line)
                    .map(|c| RawDocument {
                        source_url: c.source_url,
                        fetched_at: c.fetched_at,
                        content: c.content,
                        content_type: c.content_type,
                    })
                    .map_err(|e| IngestFailure { locator, message: e.to_string() }),
            )
        })
        .collect())
}

/// Ingests every document of `source` into `sink`.
pub fn ingest_source(source: &SourceSpec, sink: &dyn DocumentSink) -> Result<IngestReport, SourceError> {
    ingest_with(&HttpFetcher::default(), source, sink, Execution::default())
}

/// Fetches concurrently (per `exec`) and writes sequentially in
/// enumeration order.
pub fn ingest_with(
    http: &HttpFetcher,
    source: &SourceSpec,
    sink: &dyn DocumentSink,
    exec: Execution,
) -> Result<IngestReport, SourceError> {
    source.check()?;
    let fetched: Vec<Result<RawDocument, IngestFailure>> = if source.kind == SourceKind::Http {
        match fetch_with(http, source, &source.locator) {
            Err(FetchError::Network { message, .. }) => {
                return Err(SourceError::Unreachable { locator: source.locator.clone(), message })
            }
            other => vec![other.map_err(|e| IngestFailure {
                locator: source.locator.clone(),
                message: e.to_string(),
            })],
        }
    } else {
        let items = enumerate(source)?;
        exec.map(&items, |item| match item {
            Item::Loaded(r) => r.clone(),
            Item::Locator(locator) => fetch_with(http, source, locator).map_err(|e| IngestFailure {
                locator: locator.clone(),
                message: e.to_string(),
            }),
        })
    };
    let ingest_time = Utc::now();
    let mut report = IngestReport::default();
    for result in fetched {
        report.fetched += 1;
        let doc = match result.and_then(|doc| {
            doc.check(ingest_time)
                .map(|_| doc.clone())
                .map_err(|message| IngestFailure { locator: doc.source_url.clone(), message })
        }) {
            Ok(doc) => doc,
            Err(failure) => {
                tracing::warn!(locator = %failure.locator, message = %failure.message, "document failed");
                report.failures.push(failure);
                continue;
            }
        };
        if sink.put(&dedup_key(&doc), &doc)? {
            report.stored += 1;
        } else {
            report.duplicates_skipped += 1;
        }
    }
    debug_assert!(report.is_balanced());
    tracing::info!(
        fetched = report.fetched,
        stored = report.stored,
        duplicates = report.duplicates_skipped,
        failures = report.failures.len(),
        "ingest finished"
    );
    Ok(report)
}

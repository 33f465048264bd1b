//! Ingest, extract, enrich and load in one run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{JobRecord, DEFAULT_LABELS_PER_JOB};
use crate::enrichment::{enrich_job, SkillLibrary};
use crate::extraction::{extract_job, ExtractionOutcome};
use crate::ingestion::{ingest_with, HttpFetcher, IngestFailure, SourceError, SourceSpec};
use crate::par::Execution;
use crate::provider::{ChatProvider, EmbeddingProvider, ProviderError};
use crate::store::{DocumentStatus, JobUpsert, Store, StoreError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("k must be at least 1")]
    InvalidK,
}

/// Per-stage counts of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub fetched: usize,
    pub stored: usize,
    pub duplicates_skipped: usize,
    pub extracted: usize,
    pub quarantined: usize,
    pub labeled: usize,
    /// Documents left pending because the provider failed; retried next run.
    pub deferred: usize,
    pub failures: Vec<IngestFailure>,
    pub provider_errors: Vec<String>,
}

pub struct Pipeline<'a> {
    pub store: &'a Store,
    pub chat: &'a dyn ChatProvider,
    pub embedder: &'a dyn EmbeddingProvider,
    pub library: Option<&'a SkillLibrary>,
    pub k: usize,
    pub exec: Execution,
    pub http: HttpFetcher,
}

impl<'a> Pipeline<'a> {
    pub fn new(store: &'a Store, chat: &'a dyn ChatProvider, embedder: &'a dyn EmbeddingProvider) -> Self {
        Self {
            store,
            chat,
            embedder,
            library: None,
            k: DEFAULT_LABELS_PER_JOB,
            exec: Execution::default(),
            http: HttpFetcher::default(),
        }
    }

    pub fn with_library(mut self, library: &'a SkillLibrary) -> Self {
        self.library = Some(library);
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Ingests `source`, then processes every pending document.
    pub fn run(&self, source: &SourceSpec) -> Result<PipelineSummary, PipelineError> {
        if self.k == 0 {
            return Err(PipelineError::InvalidK);
        }
        let report = ingest_with(&self.http, source, self.store, self.exec)?;
        let mut summary = self.process_pending()?;
        summary.fetched = report.fetched;
        summary.stored = report.stored;
        summary.duplicates_skipped = report.duplicates_skipped;
        summary.failures = report.failures;
        Ok(summary)
    }

    /// Extracts, enriches and loads every pending raw document. Failed
    /// extractions are quarantined with the failure as a note.
    pub fn process_pending(&self) -> Result<PipelineSummary, PipelineError> {
        let mut summary = PipelineSummary::default();
        if let Some(lib) = self.library {
            self.store.store_skills(lib.entries())?;
        }
        let docs = self.store.documents(DocumentStatus::Pending)?;
        let outcomes: Vec<Result<ExtractionOutcome, ProviderError>> =
            self.exec.map(&docs, |(_, doc)| extract_job(doc, self.chat));

        let mut records: Vec<(usize, JobRecord)> = Vec::new();
        for (i, outcome) in outcomes.into_iter().enumerate() {
            let key = &docs[i].0;
            match outcome {
                Ok(ExtractionOutcome { record: Some(record), .. }) => records.push((i, record)),
                Ok(ExtractionOutcome { failure, attempts, .. }) => {
                    let note = failure
                        .map(|f| format!("{:?} failure after {attempts} attempts: {}", f.stage, f.message).to_lowercase())
                        .unwrap_or_default();
                    self.store.set_document_status(key, DocumentStatus::Quarantined, Some(&note))?;
                    summary.quarantined += 1;
                }
                Err(e) => {
                    summary.deferred += 1;
                    summary.provider_errors.push(e.to_string());
                }
            }
        }

        let enriched = self
            .exec
            .map(&records, |(_, record)| enrich_job(record, self.library, self.embedder, self.k));
        let mut batch = Vec::new();
        let mut loaded = Vec::new();
        for ((i, record), result) in records.into_iter().zip(enriched) {
            match result {
                Ok((embedding, labels)) => {
                    loaded.push(i);
                    batch.push(JobUpsert { record, labels, embedding });
                }
                Err(e) => {
                    let note = format!("enrichment failure: {e}");
                    self.store.set_document_status(&docs[i].0, DocumentStatus::Quarantined, Some(&note))?;
                    summary.quarantined += 1;
                }
            }
        }
        summary.labeled = batch.iter().filter(|j| !j.labels.is_empty()).count();
        self.store.upsert_jobs(&batch)?;
        for i in loaded {
            self.store.set_document_status(&docs[i].0, DocumentStatus::Extracted, None)?;
            summary.extracted += 1;
        }
        tracing::info!(
            extracted = summary.extracted,
            quarantined = summary.quarantined,
            deferred = summary.deferred,
            "processed pending documents"
        );
        Ok(summary)
    }
}

/// Re-embeds every stored job and replaces its labels from `library`.
/// Returns the number of jobs relabeled.
pub fn relabel_all(
    store: &Store,
    library: &SkillLibrary,
    embedder: &dyn EmbeddingProvider,
    k: usize,
    exec: Execution,
) -> Result<usize, PipelineError> {
    if k == 0 {
        return Err(PipelineError::InvalidK);
    }
    store.store_skills(library.entries())?;
    let jobs = store.jobs()?;
    let results = exec.map(&jobs, |job| enrich_job(job, Some(library), embedder, k));
    let mut batch = Vec::with_capacity(jobs.len());
    for (record, result) in jobs.into_iter().zip(results) {
        match result {
            Ok((embedding, labels)) => batch.push(JobUpsert { record, labels, embedding }),
            Err(e) => tracing::warn!(job = %record.job_id, error = %e, "could not relabel job"),
        }
    }
    store.upsert_jobs(&batch)?;
    Ok(batch.len())
}

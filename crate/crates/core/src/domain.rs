//! Shared vocabulary: raw documents, structured job records, skills,
//! embeddings and labels, plus record validation.

use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Number of skill labels linked to each job unless configured otherwise.
pub const DEFAULT_LABELS_PER_JOB: usize = 10;

/// Tolerance on the Euclidean norm of a stored embedding.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentType {
    Html,
    Text,
}

impl ContentType {
    pub fn as_str(self) -> &'static str {
        match self {
            ContentType::Html => "html",
            ContentType::Text => "text",
        }
    }

    /// Leading `<` (after whitespace) means HTML; anything else is text.
    pub fn sniff(content: &str) -> Self {
        match content.trim_start().chars().next() {
            Some('<') => ContentType::Html,
            _ => ContentType::Text,
        }
    }
}

impl std::str::FromStr for ContentType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "html" => Ok(ContentType::Html),
            "text" => Ok(ContentType::Text),
            other => Err(format!("unknown content type '{other}'")),
        }
    }
}

/// One fetched posting before structuring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub source_url: String,
    pub fetched_at: DateTime<Utc>,
    pub content: String,
    pub content_type: ContentType,
}

impl RawDocument {
    /// Checks the document invariants against the time the document is
    /// being ingested.
    pub fn check(&self, ingest_time: DateTime<Utc>) -> Result<(), String> {
        if self.source_url.trim().is_empty() {
            return Err("source_url is empty".into());
        }
        if self.content.trim().is_empty() {
            return Err("content is empty".into());
        }
        if self.fetched_at > ingest_time {
            return Err(format!(
                "fetched_at {} is in the future",
                self.fetched_at.to_rfc3339()
            ));
        }
        Ok(())
    }
}

/// Opaque job identifier, derived from the posting's source URL so that
/// re-ingesting the same posting always maps to the same row.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub String);

impl JobId {
    pub fn from_source_url(source_url: &str) -> Self {
        let digest = Sha256::digest(source_url.trim().as_bytes());
        JobId(format!("job-{}", &hex::encode(digest)[..16]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for JobId {
    fn from(s: &str) -> Self {
        JobId(s.to_string())
    }
}

/// One structured job posting.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: JobId,
    pub job_title: String,
    pub company_name: String,
    pub company_information: String,
    pub job_description: String,
    pub job_requirements: String,
    pub expertise_category: Option<String>,
    pub location: Option<String>,
    /// Monthly, in currency units.
    pub salary_min: Option<f64>,
    pub salary_max: Option<f64>,
    /// ISO-4217 code.
    pub salary_currency: Option<String>,
    pub posted_date: Option<NaiveDate>,
    pub source_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Lists every invariant violation of `record`.
pub fn validate_job_record(record: &JobRecord) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |field: &str, message: &str| {
        violations.push(Violation {
            field: field.to_string(),
            message: message.to_string(),
        })
    };

    for (field, value) in [
        ("job_title", &record.job_title),
        ("company_name", &record.company_name),
        ("job_requirements", &record.job_requirements),
    ] {
        if value.trim().is_empty() {
            push(field, "must be non-empty");
        }
    }
    for (field, value) in [("salary_min", record.salary_min), ("salary_max", record.salary_max)] {
        if let Some(v) = value {
            if !v.is_finite() {
                push(field, "must be a finite number");
            } else if v < 0.0 {
                push(field, "must not be negative");
            }
        }
    }
    if let (Some(lo), Some(hi)) = (record.salary_min, record.salary_max) {
        if lo > hi {
            push("salary_min", "must not exceed salary_max");
        }
    }
    if let Some(code) = &record.salary_currency {
        if code.len() != 3 || !code.chars().all(|c| c.is_ascii_uppercase()) {
            push("salary_currency", "must be a three-letter ISO-4217 code");
        }
    }
    ValidationReport::from_violations(violations)
}

/// A canonical skill and the alternative spellings that map to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillEntry {
    #[serde(rename = "name")]
    pub skill_name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl SkillEntry {
    pub fn new(name: impl Into<String>, aliases: &[&str]) -> Self {
        SkillEntry {
            skill_name: name.into(),
            aliases: aliases.iter().map(|a| a.to_string()).collect(),
        }
    }

    /// Text embedded for this skill: the name followed by its aliases.
    pub fn embedding_text(&self) -> String {
        std::iter::once(self.skill_name.as_str())
            .chain(self.aliases.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding is empty")]
    Empty,
    #[error("embedding contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("embedding norm {0} is not within tolerance of 1")]
    NotNormalized(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Unit-norm dense vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Scales `raw` to unit Euclidean norm.
    pub fn normalize(raw: Vec<f64>) -> Result<Self, EmbeddingError> {
        if raw.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(i));
        }
        let norm = l2_norm(&raw);
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbeddingError::ZeroNorm);
        }
        Ok(EmbeddingVector {
            values: raw.into_iter().map(|v| v / norm).collect(),
        })
    }

    /// Wraps values that are already unit-norm, e.g. read back from storage.
    pub fn from_unit(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(i));
        }
        let norm = l2_norm(&values);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(EmbeddingError::NotNormalized(norm));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        if bytes.len() % 8 != 0 {
            return Err(EmbeddingError::Empty);
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::from_unit(values)
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            values: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        EmbeddingVector::from_unit(raw.values).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Link between a job and one of its top-k most similar skills.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillLabel {
    pub job_id: JobId,
    pub skill_name: String,
    pub score: f64,
    pub rank: u32,
}

/// Checks the per-job label invariants: contiguous ranks from 1,
/// non-increasing scores and name-ascending ties.
pub fn check_label_order(labels: &[SkillLabel]) -> Result<(), String> {
    for (i, label) in labels.iter().enumerate() {
        if label.rank as usize != i + 1 {
            return Err(format!("label {i} has rank {}", label.rank));
        }
        if !(-1.0..=1.0).contains(&label.score) {
            return Err(format!("score {} outside [-1, 1]", label.score));
        }
        if i > 0 {
            let prev = &labels[i - 1];
            if prev.job_id != label.job_id {
                return Err("labels reference more than one job".into());
            }
            if prev.score < label.score
                || (prev.score == label.score && prev.skill_name >= label.skill_name)
            {
                return Err(format!(
                    "labels at ranks {} and {} are out of order",
                    prev.rank, label.rank
                ));
            }
        }
    }
    Ok(())
}

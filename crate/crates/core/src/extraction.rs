//! Structuring raw postings into job records through a chat provider.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::domain::{validate_job_record, JobId, JobRecord, RawDocument};
use crate::jsonscan::{first_json_object, ScanError};
use crate::provider::{ChatMessage, ChatProvider, DecodingParams, ProviderError};

/// The frozen system prompt. Scripted replays depend on it, so edits need a
/// new version rather than an in-place change.
pub const EXTRACTION_PROMPT_V1: &str = include_str!("../assets/extraction_prompt_v1.txt");
pub const EXTRACTION_SCHEMA_ID: &str = "job-record/v1";
pub const DEFAULT_CHAR_BUDGET: usize = 20_000;
pub const TRUNCATION_MARKER: &str = "\n[... content truncated ...]";

pub const REQUIRED_KEYS: [&str; 5] = [
    "job_title",
    "company_name",
    "company_information",
    "job_description",
    "job_requirements",
];
pub const OPTIONAL_KEYS: [&str; 6] = [
    "expertise_category",
    "location",
    "salary_min",
    "salary_max",
    "salary_currency",
    "posted_date",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub system: String,
    pub user: String,
    pub expected_schema: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResponseError {
    #[error("no decodable JSON object in response (offset {offset}): {message}")]
    Parse { offset: usize, message: String },
    #[error("schema error at key '{key}': {message}")]
    Schema { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureStage {
    Parse,
    Schema,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionFailure {
    pub stage: FailureStage,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    pub record: Option<JobRecord>,
    pub attempts: u32,
    pub failure: Option<ExtractionFailure>,
}

impl ExtractionOutcome {
    fn success(record: JobRecord, attempts: u32) -> Self {
        Self { record: Some(record), attempts, failure: None }
    }

    fn failed(stage: FailureStage, message: String, attempts: u32) -> Self {
        Self {
            record: None,
            attempts,
            failure: Some(ExtractionFailure { stage, message }),
        }
    }
}

/// Truncates `content` to `budget` characters, appending the marker when cut.
pub fn truncate_content(content: &str, budget: usize) -> String {
    match content.char_indices().nth(budget) {
        None => content.to_string(),
        Some((cut, _)) => format!("{}{TRUNCATION_MARKER}", &content[..cut]),
    }
}

pub fn build_extraction_prompt(raw: &RawDocument) -> PromptEnvelope {
    build_extraction_prompt_with_budget(raw, DEFAULT_CHAR_BUDGET)
}

pub fn build_extraction_prompt_with_budget(raw: &RawDocument, budget: usize) -> PromptEnvelope {
    PromptEnvelope {
        system: EXTRACTION_PROMPT_V1.to_string(),
        user: truncate_content(&raw.content, budget),
        expected_schema: EXTRACTION_SCHEMA_ID.to_string(),
    }
}

fn schema_err(key: &str, message: impl Into<String>) -> ResponseError {
    ResponseError::Schema { key: key.to_string(), message: message.into() }
}

fn required_string(obj: &Map<String, Value>, key: &str) -> Result<String, ResponseError> {
    match obj.get(key) {
        None => Err(schema_err(key, "missing required key")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(schema_err(key, format!("expected string, found {}", type_name(other)))),
    }
}

fn optional_string(obj: &Map<String, Value>, key: &str) -> Result<Option<String>, ResponseError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(schema_err(key, format!("expected string or null, found {}", type_name(other)))),
    }
}

fn optional_number(obj: &Map<String, Value>, key: &str) -> Result<Option<f64>, ResponseError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => Ok(n.as_f64()),
        Some(other) => Err(schema_err(key, format!("expected number or null, found {}", type_name(other)))),
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Decodes the first JSON object in `text` into a record. `job_id` and
/// `source_url` are left empty for the caller.
pub fn parse_extraction_response(text: &str) -> Result<JobRecord, ResponseError> {
    let obj = first_json_object(text).map_err(|e| match e {
        ScanError::NoObject => ResponseError::Parse {
            offset: text.len(),
            message: "no JSON object found".into(),
        },
        ScanError::Undecodable { offset, message } => ResponseError::Parse { offset, message },
    })?;
    let posted_date = optional_string(&obj, "posted_date")?
        .map(|s| {
            NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
                .map_err(|_| schema_err("posted_date", format!("'{s}' is not a YYYY-MM-DD date")))
        })
        .transpose()?;
    Ok(JobRecord {
        job_id: JobId::default(),
        job_title: required_string(&obj, "job_title")?,
        company_name: required_string(&obj, "company_name")?,
        company_information: required_string(&obj, "company_information")?,
        job_description: required_string(&obj, "job_description")?,
        job_requirements: required_string(&obj, "job_requirements")?,
        expertise_category: optional_string(&obj, "expertise_category")?,
        location: optional_string(&obj, "location")?,
        salary_min: optional_number(&obj, "salary_min")?,
        salary_max: optional_number(&obj, "salary_max")?,
        salary_currency: optional_string(&obj, "salary_currency")?,
        posted_date,
        source_url: String::new(),
    })
}

fn repair_prompt(error: &ResponseError) -> String {
    format!(
        "Your previous reply could not be used: {error}. \
         Reply again with a single corrected JSON object containing exactly the keys listed in the instructions."
    )
}

/// Runs the extraction conversation for one document, with at most one
/// repair re-prompt.
pub fn extract_job(raw: &RawDocument, chat: &dyn ChatProvider) -> Result<ExtractionOutcome, ProviderError> {
    extract_job_with_budget(raw, chat, DEFAULT_CHAR_BUDGET)
}

pub fn extract_job_with_budget(
    raw: &RawDocument,
    chat: &dyn ChatProvider,
    budget: usize,
) -> Result<ExtractionOutcome, ProviderError> {
    let envelope = build_extraction_prompt_with_budget(raw, budget);
    let params = DecodingParams::default();
    let mut messages = vec![ChatMessage::system(envelope.system), ChatMessage::user(envelope.user)];
    let mut attempts = 0;
    loop {
        attempts += 1;
        let reply = chat.chat(&messages, &params)?;
        match parse_extraction_response(&reply) {
            Ok(mut record) => {
                record.source_url = raw.source_url.clone();
                record.job_id = JobId::from_source_url(&raw.source_url);
                let report = validate_job_record(&record);
                return Ok(if report.valid {
                    ExtractionOutcome::success(record, attempts)
                } else {
                    ExtractionOutcome::failed(FailureStage::Validation, report.summary(), attempts)
                });
            }
            Err(e) if attempts >= 2 => {
                let stage = match e {
                    ResponseError::Parse { .. } => FailureStage::Parse,
                    ResponseError::Schema { .. } => FailureStage::Schema,
                };
                tracing::debug!(url = %raw.source_url, error = %e, "extraction failed after repair");
                return Ok(ExtractionOutcome::failed(stage, e.to_string(), attempts));
            }
            Err(e) => {
                tracing::debug!(url = %raw.source_url, error = %e, "re-prompting for repair");
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(repair_prompt(&e)));
            }
        }
    }
}

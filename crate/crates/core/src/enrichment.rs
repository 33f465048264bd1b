//! Skill library, embedding and top-k skill labeling.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::path::Path;

use thiserror::Error;

use crate::domain::{EmbeddingError, EmbeddingVector, JobRecord, SkillEntry, SkillLabel};
use crate::par::Execution;
use crate::provider::{EmbeddingProvider, ProviderError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LibraryFormatError {
    #[error("cannot read skill library {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed skill library: {0}")]
    Malformed(String),
    #[error("skill library is empty")]
    Empty,
    #[error("skill entry {0} has an empty name")]
    EmptyName(usize),
    #[error("duplicate skill name '{0}'")]
    DuplicateName(String),
    #[error("alias '{alias}' of '{entry}' collides with another skill's name")]
    AliasCollision { alias: String, entry: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("degenerate embedding: {0}")]
    Degenerate(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnrichError {
    #[error(transparent)]
    Format(#[from] LibraryFormatError),
    #[error("embedding '{text}' failed: {source}")]
    Embed { text: String, source: EmbedError },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("dimension mismatch: job {job} vs library {library}")]
    DimensionMismatch { job: usize, library: usize },
    #[error("job has empty requirements")]
    EmptyRequirements,
}

/// Canonical skills with one pre-computed embedding each.
#[derive(Debug, Clone)]
pub struct SkillLibrary {
    entries: Vec<SkillEntry>,
    embeddings: Vec<EmbeddingVector>,
    by_name: HashMap<String, usize>,
}

impl SkillLibrary {
    /// Decodes a JSON array of `{"name", "aliases"}` and checks the
    /// uniqueness rules.
    pub fn parse_entries(json: &str) -> Result<Vec<SkillEntry>, LibraryFormatError> {
        let entries: Vec<SkillEntry> =
            serde_json::from_str(json).map_err(|e| LibraryFormatError::Malformed(e.to_string()))?;
        check_entries(&entries)?;
        Ok(entries)
    }

    /// Embeds every entry and assembles the library.
    pub fn build(
        entries: Vec<SkillEntry>,
        embedder: &dyn EmbeddingProvider,
        exec: Execution,
    ) -> Result<Self, EnrichError> {
        check_entries(&entries)?;
        let embeddings = exec
            .map(&entries, |e| {
                let text = e.embedding_text();
                embed_text(embedder, &text).map_err(|source| EnrichError::Embed { text, source })
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = embeddings.first() {
            if let Some(bad) = embeddings.iter().find(|e| e.dim() != first.dim()) {
                return Err(EnrichError::DimensionMismatch {
                    job: bad.dim(),
                    library: first.dim(),
                });
            }
        }
        let by_name = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.skill_name.to_lowercase(), i))
            .collect();
        Ok(Self { entries, embeddings, by_name })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[SkillEntry] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.embeddings.first().map_or(0, EmbeddingVector::dim)
    }

    /// Case-insensitive lookup of a skill's embedding.
    pub fn embedding(&self, skill_name: &str) -> Option<&EmbeddingVector> {
        self.by_name
            .get(&skill_name.to_lowercase())
            .map(|&i| &self.embeddings[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SkillEntry, &EmbeddingVector)> {
        self.entries.iter().zip(&self.embeddings)
    }
}

fn check_entries(entries: &[SkillEntry]) -> Result<(), LibraryFormatError> {
    if entries.is_empty() {
        return Err(LibraryFormatError::Empty);
    }
    let mut names = HashSet::new();
    for (i, e) in entries.iter().enumerate() {
        if e.skill_name.trim().is_empty() {
            return Err(LibraryFormatError::EmptyName(i));
        }
        if !names.insert(e.skill_name.to_lowercase()) {
            return Err(LibraryFormatError::DuplicateName(e.skill_name.clone()));
        }
    }
    for e in entries {
        let own = e.skill_name.to_lowercase();
        for alias in &e.aliases {
            let alias_lc = alias.to_lowercase();
            if alias_lc != own && names.contains(&alias_lc) {
                return Err(LibraryFormatError::AliasCollision {
                    alias: alias.clone(),
                    entry: e.skill_name.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Reads a skill library file and embeds every entry.
pub fn load_skill_library(
    path: &Path,
    embedder: &dyn EmbeddingProvider,
) -> Result<SkillLibrary, EnrichError> {
    let json = std::fs::read_to_string(path).map_err(|e| LibraryFormatError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let entries = SkillLibrary::parse_entries(&json)?;
    SkillLibrary::build(entries, embedder, Execution::default())
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
///
/// Zero vectors have no direction; their similarity to anything is 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Cosine of two stored (unit-norm) embeddings: their dot product.
pub fn unit_cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    // +0.0 folds -0.0 so that exact ties compare equal under total ordering
    Ok(dot.clamp(-1.0, 1.0) + 0.0)
}

/// Embeds `text` and re-normalizes the provider's output.
pub fn embed_text(embedder: &dyn EmbeddingProvider, text: &str) -> Result<EmbeddingVector, EmbedError> {
    if text.trim().is_empty() {
        return Err(EmbedError::Degenerate("text is empty".into()));
    }
    let raw = match embedder.embed(text) {
        Ok(raw) => raw,
        Err(ProviderError::DegenerateEmbedding { provider }) => {
            return Err(EmbedError::Degenerate(format!("{provider} produced a zero vector")))
        }
        Err(e) => return Err(EmbedError::Provider(e)),
    };
    EmbeddingVector::normalize(raw).map_err(|e| EmbedError::Degenerate(e.to_string()))
}

/// Orders by score descending, then key ascending.
pub(crate) fn rank_order<K: Ord>(a: &(f64, K), b: &(f64, K)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1))
}

/// The `k` best entries of `scored` under [`rank_order`], sorted.
pub(crate) fn top_k<K: Ord>(mut scored: Vec<(f64, K)>, k: usize) -> Vec<(f64, K)> {
    if k == 0 {
        return Vec::new();
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);
    scored
}

/// Labels a job whose requirements embedding is already known.
pub fn label_with_embedding(
    job: &JobRecord,
    job_vec: &EmbeddingVector,
    library: &SkillLibrary,
    k: usize,
) -> Result<Vec<SkillLabel>, EnrichError> {
    if k == 0 {
        return Err(EnrichError::InvalidK);
    }
    if job_vec.dim() != library.dim() {
        return Err(EnrichError::DimensionMismatch {
            job: job_vec.dim(),
            library: library.dim(),
        });
    }
    let scored = library
        .iter()
        .map(|(entry, emb)| {
            let score = unit_cosine(job_vec, emb).expect("dimensions checked");
            (score, entry.skill_name.as_str())
        })
        .collect();
    Ok(top_k(scored, k)
        .into_iter()
        .enumerate()
        .map(|(i, (score, name))| SkillLabel {
            job_id: job.job_id.clone(),
            skill_name: name.to_string(),
            score,
            rank: i as u32 + 1,
        })
        .collect())
}

/// Embeds the job's requirements and links its `k` most similar skills.
pub fn label_job_skills(
    job: &JobRecord,
    library: &SkillLibrary,
    embedder: &dyn EmbeddingProvider,
    k: usize,
) -> Result<Vec<SkillLabel>, EnrichError> {
    enrich_job(job, Some(library), embedder, k).map(|(_, labels)| labels)
}

/// Requirements embedding plus labels (empty without a library).
pub fn enrich_job(
    job: &JobRecord,
    library: Option<&SkillLibrary>,
    embedder: &dyn EmbeddingProvider,
    k: usize,
) -> Result<(EmbeddingVector, Vec<SkillLabel>), EnrichError> {
    if k == 0 {
        return Err(EnrichError::InvalidK);
    }
    if job.job_requirements.trim().is_empty() {
        return Err(EnrichError::EmptyRequirements);
    }
    let job_vec = embed_text(embedder, &job.job_requirements).map_err(|source| EnrichError::Embed {
        text: job.job_requirements.chars().take(80).collect(),
        source,
    })?;
    let labels = match library {
        Some(lib) => label_with_embedding(job, &job_vec, lib, k)?,
        None => Vec::new(),
    };
    Ok((job_vec, labels))
}

/// Enriches a batch of jobs, one result per job in input order.
pub fn enrich_jobs(
    jobs: &[JobRecord],
    library: Option<&SkillLibrary>,
    embedder: &dyn EmbeddingProvider,
    k: usize,
    exec: Execution,
) -> Vec<Result<(EmbeddingVector, Vec<SkillLabel>), EnrichError>> {
    exec.map(jobs, |job| enrich_job(job, library, embedder, k))
}

//! Seeded datasets and replay scripts for tests, benches and offline demos.
//!
//! The bundled corpus under `fixtures/` holds 50 JSONL documents (45
//! distinct, 5 exact duplicates) with matching extraction scripts; the
//! strict script makes two documents fail extraction twice.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::domain::{EmbeddingVector, JobId, JobRecord, SkillEntry, SkillLabel};
use crate::enrichment::{enrich_job, SkillLibrary};
use crate::par::Execution;
use crate::provider::{BagOfTokensEmbedder, DocumentScriptedChat};
use crate::store::{JobUpsert, Store, StoreError};

pub const TABLE3_TOTAL_POSTINGS: usize = 3_745;
pub const TABLE3_COMPANIES: usize = 755;
pub const TABLE3_EXPERTISE: usize = 220;
pub const TABLE3_SKILLS: usize = 288;
pub const COLLECTION_START: (i32, u32, u32) = (2025, 7, 1);
pub const COLLECTION_DAYS: u32 = 39;

/// Link counts of the ten most linked skills in the seeded store. The
/// first three are the published figures; the rest are filler.
pub const TABLE3_TOP_SKILLS: [(&str, u64); 10] = [
    ("Requirements Analysis", 1583),
    ("Business Analysis", 1571),
    ("English", 1538),
    ("Communication", 1422),
    ("SQL", 1317),
    ("Agile", 1204),
    ("Problem Solving", 1120),
    ("Project Management", 1015),
    ("Teamwork", 987),
    ("Python", 942),
];

const FIXTURE_DIM: usize = 16;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn corpus_path() -> PathBuf {
    fixtures_dir().join("corpus.jsonl")
}

pub fn skills_path() -> PathBuf {
    fixtures_dir().join("skills.json")
}

/// The strict script quarantines two documents; the clean one extracts all.
pub fn extraction_script_path(strict: bool) -> PathBuf {
    fixtures_dir().join(if strict { "extraction_script.json" } else { "extraction_script_clean.json" })
}

#[derive(Debug, Deserialize)]
struct ScriptEntry {
    document_sha256: String,
    responses: Vec<String>,
}

/// Parses a per-document extraction script: a JSON array of
/// `{"document_sha256", "responses", ...}` objects.
pub fn parse_document_script(json: &str) -> Result<DocumentScriptedChat, serde_json::Error> {
    let entries: Vec<ScriptEntry> = serde_json::from_str(json)?;
    let mut chat = DocumentScriptedChat::new();
    for e in entries {
        chat.insert_digest(e.document_sha256, e.responses);
    }
    Ok(chat)
}

pub fn load_document_script(path: &Path) -> Result<DocumentScriptedChat, String> {
    let json = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_document_script(&json).map_err(|e| format!("{}: {e}", path.display()))
}

/// Bag-of-tokens embedder over the texts of a skill library.
pub fn library_embedder(entries: &[SkillEntry]) -> BagOfTokensEmbedder {
    BagOfTokensEmbedder::from_corpus(entries.iter().map(SkillEntry::embedding_text))
}

/// Deterministic unit vector derived from `seed`.
fn hashed_unit_vector(seed: &str, dim: usize) -> EmbeddingVector {
    let mut values = Vec::with_capacity(dim);
    let mut block = 0u32;
    while values.len() < dim {
        let digest = Sha256::digest(format!("{seed}/{block}").as_bytes());
        for chunk in digest.chunks(4) {
            if values.len() == dim {
                break;
            }
            let n = u32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
            values.push(n as f64 / u32::MAX as f64 - 0.5);
        }
        block += 1;
    }
    EmbeddingVector::normalize(values).expect("hashed vector has non-zero norm")
}

fn tail_skill_names() -> Vec<String> {
    (1..=TABLE3_SKILLS - TABLE3_TOP_SKILLS.len())
        .map(|i| format!("Skill {i:03}"))
        .collect()
}

/// Skill entries of the seeded store: the ten top skills plus filler.
pub fn table3_skill_entries() -> Vec<SkillEntry> {
    TABLE3_TOP_SKILLS
        .iter()
        .map(|(name, _)| SkillEntry::new(*name, &[]))
        .chain(tail_skill_names().into_iter().map(|n| SkillEntry::new(n, &[])))
        .collect()
}

/// Jobs, labels and embeddings of a store shaped like the published
/// dataset: 3,745 postings from 755 companies in 220 expertise categories
/// over Jul 1 to Aug 8 2025, 288 linked skills, and top-skill link counts
/// as in [`TABLE3_TOP_SKILLS`].
pub fn table3_jobs() -> Vec<JobUpsert> {
    let start = NaiveDate::from_ymd_opt(COLLECTION_START.0, COLLECTION_START.1, COLLECTION_START.2)
        .expect("valid date");
    let tail = tail_skill_names();
    let first_untagged = TABLE3_TOP_SKILLS[0].1 as usize;
    (0..TABLE3_TOTAL_POSTINGS)
        .map(|j| {
            let source_url = format!("https://fixture.example/table3/{j:04}");
            let job_id = JobId::from_source_url(&source_url);
            let record = JobRecord {
                job_id: job_id.clone(),
                job_title: format!("Role {:02}", j % 40),
                company_name: format!("Company {:03}", j % TABLE3_COMPANIES),
                company_information: String::new(),
                job_description: format!("Fixture posting {j}."),
                job_requirements: format!("Fixture requirements {j}."),
                expertise_category: Some(format!("Expertise {:03}", j % TABLE3_EXPERTISE)),
                location: None,
                salary_min: None,
                salary_max: None,
                salary_currency: None,
                posted_date: Some(start + chrono::Days::new((j % COLLECTION_DAYS as usize) as u64)),
                source_url,
            };
            // Top skills form a prefix for low indices; jobs past the largest
            // count get three filler skills each.
            let mut names: Vec<(f64, String)> = TABLE3_TOP_SKILLS
                .iter()
                .enumerate()
                .filter(|(_, (_, count))| j < *count as usize)
                .map(|(i, (name, _))| (0.9 - 0.02 * i as f64, name.to_string()))
                .collect();
            if j >= first_untagged {
                let mut picks: Vec<&String> = (0..3).map(|m| &tail[(j * 3 + m) % tail.len()]).collect();
                picks.sort();
                picks.dedup();
                names.extend(picks.into_iter().enumerate().map(|(m, n)| (0.5 - 0.02 * m as f64, n.clone())));
            }
            let labels = names
                .into_iter()
                .enumerate()
                .map(|(r, (score, skill_name))| SkillLabel {
                    job_id: job_id.clone(),
                    skill_name,
                    score,
                    rank: r as u32 + 1,
                })
                .collect();
            JobUpsert {
                record,
                labels,
                embedding: hashed_unit_vector(job_id.as_str(), FIXTURE_DIM),
            }
        })
        .collect()
}

/// Fills `store` with the [`table3_jobs`] dataset in one transaction.
pub fn seed_table3(store: &Store) -> Result<(), StoreError> {
    store.store_skills(&table3_skill_entries())?;
    store.upsert_jobs(&table3_jobs())?;
    Ok(())
}

pub const DESIGN_CATEGORY: &str = "UI/UX Designer";
pub const BACKEND_CATEGORY: &str = "Backend Development";
pub const CAREER_QUERY: &str = "creative work and design";

/// Five design and five backend postings. Backend requirements share no
/// token with [`CAREER_QUERY`].
pub fn career_jobs() -> Vec<JobRecord> {
    let design = [
        ("UI/UX Designer", "Creative portfolio of product design work; Figma and wireframing."),
        ("Product Designer", "Visual design and interaction design for mobile apps; user research."),
        ("UI Designer", "Creative visual design work across web products; Figma."),
        ("UX Designer", "User research, wireframing and usability design work."),
        ("Graphic Designer", "Creative graphic design and branding work; Adobe tools."),
    ];
    let backend = [
        ("Backend Developer", "Go services with PostgreSQL, Docker; REST APIs."),
        ("Backend Engineer", "Java, Spring Boot, MySQL; Kafka streaming."),
        ("Backend Developer", "Node.js APIs, Redis caching, PostgreSQL tuning."),
        ("Platform Engineer", "Kubernetes, Terraform, Linux administration, on-call."),
        ("Backend Developer", "Python services, SQL, Docker, CI pipelines."),
    ];
    design
        .iter()
        .map(|(t, r)| (t, r, DESIGN_CATEGORY, 1500.0))
        .chain(backend.iter().map(|(t, r)| (t, r, BACKEND_CATEGORY, 2000.0)))
        .enumerate()
        .map(|(i, (title, req, category, base))| {
            let source_url = format!("https://fixture.example/career/{i:02}");
            JobRecord {
                job_id: JobId::from_source_url(&source_url),
                job_title: title.to_string(),
                company_name: format!("Studio {}", i % 3),
                company_information: String::new(),
                job_description: format!("{title} position."),
                job_requirements: req.to_string(),
                expertise_category: Some(category.to_string()),
                location: Some("Ho Chi Minh City".into()),
                salary_min: Some(base + 100.0 * i as f64),
                salary_max: Some(base + 100.0 * i as f64 + 800.0),
                salary_currency: Some("USD".into()),
                posted_date: NaiveDate::from_ymd_opt(2025, 7, 1 + i as u32),
                source_url,
            }
        })
        .collect()
}

pub fn career_skill_entries() -> Vec<SkillEntry> {
    vec![
        SkillEntry::new("Figma", &[]),
        SkillEntry::new("User Research", &["usability"]),
        SkillEntry::new("Wireframing", &[]),
        SkillEntry::new("Visual Design", &["graphic design", "branding"]),
        SkillEntry::new("Go", &[]),
        SkillEntry::new("PostgreSQL", &["SQL", "MySQL"]),
        SkillEntry::new("Docker", &["Kubernetes"]),
        SkillEntry::new("REST APIs", &["APIs"]),
    ]
}

/// Bag-of-tokens embedder whose vocabulary spans the career fixture's
/// requirement texts and skill entries.
pub fn career_embedder() -> BagOfTokensEmbedder {
    let jobs = career_jobs();
    BagOfTokensEmbedder::from_corpus(
        jobs.iter()
            .map(|j| j.job_requirements.clone())
            .chain(career_skill_entries().iter().map(SkillEntry::embedding_text)),
    )
}

/// Embeds, labels and stores the career fixture; returns the embedder used.
pub fn seed_career(store: &Store) -> Result<BagOfTokensEmbedder, StoreError> {
    let embedder = career_embedder();
    let entries = career_skill_entries();
    let library = SkillLibrary::build(entries.clone(), &embedder, Execution::Sequential)
        .map_err(|e| StoreError::Precondition(e.to_string()))?;
    let batch = career_jobs()
        .into_iter()
        .map(|record| {
            let (embedding, labels) = enrich_job(&record, Some(&library), &embedder, 5)
                .map_err(|e| StoreError::Precondition(e.to_string()))?;
            Ok(JobUpsert { record, labels, embedding })
        })
        .collect::<Result<Vec<_>, StoreError>>()?;
    store.store_skills(&entries)?;
    store.upsert_jobs(&batch)?;
    Ok(embedder)
}

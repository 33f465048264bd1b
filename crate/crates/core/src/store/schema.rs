/// Relational schema. Table and column names are part of the agent's
/// contract: generated SQL targets them verbatim.
pub const SCHEMA: &str = r#"
CREATE TABLE IF NOT EXISTS companies (
    company_id          TEXT PRIMARY KEY,
    company_name        TEXT NOT NULL,
    company_information TEXT NOT NULL DEFAULT ''
);
CREATE TABLE IF NOT EXISTS jobs (
    job_id             TEXT PRIMARY KEY,
    company_id         TEXT NOT NULL REFERENCES companies(company_id),
    job_title          TEXT NOT NULL,
    job_description    TEXT NOT NULL,
    job_requirements   TEXT NOT NULL,
    expertise_category TEXT,
    location           TEXT,
    salary_min         REAL,
    salary_max         REAL,
    salary_currency    TEXT,
    posted_date        DATE,
    source_url         TEXT NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS skills (
    skill_name TEXT PRIMARY KEY COLLATE NOCASE,
    aliases    TEXT NOT NULL DEFAULT '[]'
);
CREATE TABLE IF NOT EXISTS job_skills (
    job_id     TEXT NOT NULL,
    skill_name TEXT NOT NULL,
    score      REAL NOT NULL,
    rank       INTEGER NOT NULL,
    PRIMARY KEY (job_id, rank)
);
CREATE TABLE IF NOT EXISTS raw_documents (
    content_key  TEXT PRIMARY KEY,
    source_url   TEXT NOT NULL,
    fetched_at   TEXT NOT NULL,
    content_type TEXT NOT NULL,
    status       TEXT NOT NULL CHECK (status IN ('pending', 'extracted', 'quarantined')),
    content      TEXT NOT NULL,
    note         TEXT
);
CREATE TABLE IF NOT EXISTS job_embeddings (
    job_id TEXT PRIMARY KEY,
    dim    INTEGER NOT NULL,
    vector BLOB NOT NULL
);
CREATE INDEX IF NOT EXISTS job_skills_by_skill ON job_skills(skill_name);
CREATE INDEX IF NOT EXISTS jobs_by_posted_date ON jobs(posted_date);
"#;

/// Tables covered by checksums and dumps, with their canonical row order.
pub const TABLES: &[(&str, &str)] = &[
    ("companies", "company_id"),
    ("jobs", "job_id"),
    ("skills", "skill_name"),
    ("job_skills", "job_id, rank"),
    ("raw_documents", "content_key"),
    ("job_embeddings", "job_id"),
];

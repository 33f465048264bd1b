//! Reference implementations for the vector-math tests: exact rational
//! cosine and exhaustive-sort rankings over randomized instances.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::HashMap;

use marketlens_core::domain::{EmbeddingVector, JobId, JobRecord, SkillEntry, SkillLabel};
use marketlens_core::enrichment::{cosine_similarity, label_job_skills, SkillLibrary};
use marketlens_core::par::Execution;
use marketlens_core::provider::{EmbeddingProvider, ProviderError};
use marketlens_core::store::{JobUpsert, Store};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const COSINE_TOLERANCE: f64 = 1e-9;

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// Cosine of `a` and `b` from exact rational arithmetic. Only the final
/// square root is approximated, to 40 decimal digits before rounding to f64.
pub fn exact_cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (BigRational::zero(), BigRational::zero(), BigRational::zero());
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (exact(*x), exact(*y));
        dot += &x * &y;
        na += &x * &x;
        nb += &y * &y;
    }
    if na.is_zero() || nb.is_zero() {
        return 0.0;
    }
    let sq = &dot * &dot / (na * nb);
    let scale = BigInt::from(10u32).pow(40);
    let root = (sq.numer() * &scale * &scale / sq.denom()).sqrt();
    let magnitude = BigRational::new(root, scale).to_f64().expect("bounded");
    if dot.is_negative() {
        -magnitude
    } else {
        magnitude
    }
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let scale = 10f64.powi(rng.gen_range(-3..=3));
    (0..dim).map(|_| rng.gen_range(-1.0..1.0) * scale).collect()
}

/// Largest |cosine_similarity - exact| over `n` random pairs. Every tenth
/// pair is (near-)parallel, anti-parallel or involves a zero vector.
pub fn max_cosine_error(seed: u64, n: usize, dim: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let a = random_vector(&mut rng, dim);
        let b = match i % 10 {
            0 => a.iter().map(|x| x * 3.5).collect(),
            1 => a.iter().map(|x| -x * 0.25).collect(),
            2 => vec![0.0; dim],
            3 => a.iter().map(|x| x + rng.gen_range(-1e-6..1e-6)).collect(),
            _ => random_vector(&mut rng, dim),
        };
        let got = cosine_similarity(&a, &b).expect("same dimension");
        let want = exact_cosine(&a, &b);
        worst = worst.max((got - want).abs());
    }
    worst
}

/// Plain left-to-right dot product, clamped and with -0.0 folded.
fn naive_score(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s.clamp(-1.0, 1.0) + 0.0
}

fn by_score_then_key<K: Ord>(a: &(f64, K), b: &(f64, K)) -> Ordering {
    match b.0.partial_cmp(&a.0).expect("no NaN scores") {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    }
}

/// Vectors on a small integer grid so that exact duplicates (and thus
/// score ties) are common.
fn grid_vector(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2i32..=2) as f64).collect();
        if raw.iter().any(|v| *v != 0.0) {
            return EmbeddingVector::normalize(raw).expect("non-zero");
        }
    }
}

fn fixture_job(source_url: String, requirements: String) -> JobRecord {
    JobRecord {
        job_id: JobId::from_source_url(&source_url),
        job_title: "Analyst".into(),
        company_name: "Acme".into(),
        job_requirements: requirements,
        source_url,
        ..JobRecord::default()
    }
}

/// Checks `Store::vector_search_with` (both execution modes) against a full
/// sort on `instances` random stores. Returns the first mismatch.
pub fn check_vector_search(seed: u64, instances: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for inst in 0..instances {
        let dim = rng.gen_range(2..=6);
        let n = rng.gen_range(1..=40);
        let store = Store::open_in_memory().map_err(|e| e.to_string())?;
        let mut pool: Vec<EmbeddingVector> = (0..rng.gen_range(1..=8)).map(|_| grid_vector(&mut rng, dim)).collect();
        let batch: Vec<JobUpsert> = (0..n)
            .map(|j| {
                if rng.gen_bool(0.3) {
                    pool.push(grid_vector(&mut rng, dim));
                }
                let embedding = pool.choose(&mut rng).expect("non-empty").clone();
                let record = fixture_job(format!("https://oracle.example/{inst}/{j}"), format!("req {j}"));
                JobUpsert { record, labels: Vec::new(), embedding }
            })
            .collect();
        store.upsert_jobs(&batch).map_err(|e| e.to_string())?;
        let query = if rng.gen_bool(0.5) {
            batch.choose(&mut rng).expect("non-empty").embedding.clone()
        } else {
            grid_vector(&mut rng, dim)
        };
        let k = rng.gen_range(1..=n + 3);

        let mut expected: Vec<(f64, String)> = batch
            .iter()
            .map(|j| (naive_score(j.embedding.values(), query.values()), j.record.job_id.0.clone()))
            .collect();
        expected.sort_by(by_score_then_key);
        expected.truncate(k);

        for exec in [Execution::Sequential, Execution::Parallel] {
            let hits = store.vector_search_with(&query, k, exec).map_err(|e| e.to_string())?;
            let got: Vec<(f64, String)> = hits.into_iter().map(|h| (h.score, h.job_id.0)).collect();
            if got != expected {
                return Err(format!("instance {inst} ({exec:?}, n={n}, k={k}): got {got:?}, want {expected:?}"));
            }
        }
    }
    Ok(())
}

/// Embedder answering from a fixed text-to-vector table.
struct TableEmbedder(HashMap<String, Vec<f64>>);

impl EmbeddingProvider for TableEmbedder {
    fn name(&self) -> &str {
        "table"
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        self.0.get(text).cloned().ok_or_else(|| ProviderError::InvalidRequest {
            provider: "table".into(),
            message: format!("unknown text {text:?}"),
        })
    }
}

/// Checks `label_job_skills` against a full sort of every library skill on
/// `instances` random libraries and jobs.
pub fn check_labels(seed: u64, instances: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for inst in 0..instances {
        let dim = rng.gen_range(2..=6);
        let size = rng.gen_range(1..=30);
        let mut table = HashMap::new();
        let mut names: Vec<String> = (0..size).map(|i| format!("skill-{i:02}")).collect();
        names.shuffle(&mut rng);
        let mut raws: Vec<Vec<f64>> = Vec::new();
        let entries: Vec<SkillEntry> = names
            .iter()
            .map(|name| {
                let raw = if !raws.is_empty() && rng.gen_bool(0.4) {
                    raws.choose(&mut rng).expect("non-empty").clone()
                } else {
                    grid_vector(&mut rng, dim).values().to_vec()
                };
                raws.push(raw.clone());
                let entry = SkillEntry::new(name.clone(), &[]);
                table.insert(entry.embedding_text(), raw);
                entry
            })
            .collect();
        let requirements = format!("requirements {inst}");
        let job_raw: Vec<f64> = if rng.gen_bool(0.3) {
            raws.choose(&mut rng).expect("non-empty").clone()
        } else {
            (0..dim).map(|_| rng.gen_range(-3i32..=3) as f64 + 0.5).collect()
        };
        table.insert(requirements.clone(), job_raw.clone());
        let embedder = TableEmbedder(table);
        let library = SkillLibrary::build(entries, &embedder, Execution::Sequential).map_err(|e| e.to_string())?;
        let job = fixture_job(format!("https://oracle.example/labels/{inst}"), requirements);
        let k = rng.gen_range(1..=size + 3);

        let job_vec = EmbeddingVector::normalize(job_raw).map_err(|e| e.to_string())?;
        let mut expected: Vec<(f64, String)> = library
            .iter()
            .map(|(entry, emb)| (naive_score(job_vec.values(), emb.values()), entry.skill_name.clone()))
            .collect();
        expected.sort_by(by_score_then_key);
        expected.truncate(k);
        let expected: Vec<SkillLabel> = expected
            .into_iter()
            .enumerate()
            .map(|(i, (score, skill_name))| SkillLabel {
                job_id: job.job_id.clone(),
                skill_name,
                score,
                rank: i as u32 + 1,
            })
            .collect();

        let got = label_job_skills(&job, &library, &embedder, k).map_err(|e| e.to_string())?;
        if got != expected {
            return Err(format!("instance {inst} (size={size}, k={k}): got {got:?}, want {expected:?}"));
        }
    }
    Ok(())
}

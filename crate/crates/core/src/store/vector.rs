use serde::{Deserialize, Serialize};

use crate::domain::{EmbeddingVector, JobId};
use crate::enrichment::top_k;
use crate::par::Execution;

/// One vector-search result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorHit {
    pub job_id: JobId,
    pub score: f64,
    pub job_title: String,
    pub expertise_category: Option<String>,
}

/// Exact (exhaustive) cosine index over unit-norm vectors stored row-major.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    dim: usize,
    ids: Vec<JobId>,
    data: Vec<f64>,
}

impl VectorIndex {
    pub fn new(dim: usize) -> Self {
        Self { dim, ids: Vec::new(), data: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Appends a vector; panics if its dimension differs from the index's.
    pub fn push(&mut self, id: JobId, vector: &EmbeddingVector) {
        assert_eq!(vector.dim(), self.dim, "vector dimension must match the index");
        self.ids.push(id);
        self.data.extend_from_slice(vector.values());
    }

    /// Top `k` ids by (score desc, id asc). Callers check dimension and
    /// emptiness first.
    pub fn search(&self, query: &EmbeddingVector, k: usize, exec: Execution) -> Vec<(f64, JobId)> {
        debug_assert_eq!(query.dim(), self.dim);
        let q = query.values();
        let scores = exec.map_range(self.ids.len(), |i| {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let dot: f64 = row.iter().zip(q).map(|(a, b)| a * b).sum();
            dot.clamp(-1.0, 1.0) + 0.0
        });
        let scored = scores.into_iter().zip(self.ids.iter()).collect();
        top_k(scored, k)
            .into_iter()
            .map(|(s, id)| (s, id.clone()))
            .collect()
    }
}

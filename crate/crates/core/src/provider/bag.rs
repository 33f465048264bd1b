use std::collections::{BTreeSet, HashMap};

use super::{EmbeddingProvider, ProviderError};

/// Lowercases `text` and splits it on every non-alphanumeric character.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Deterministic embedder: token counts over a fixed vocabulary,
/// L2-normalized.
#[derive(Debug, Clone)]
pub struct BagOfTokensEmbedder {
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
}

impl BagOfTokensEmbedder {
    /// Vocabulary in the given order, duplicates (after lowercasing) dropped.
    pub fn new<I, S>(vocabulary: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vec::new();
        let mut index = HashMap::new();
        for word in vocabulary {
            let word = word.as_ref().to_lowercase();
            if !index.contains_key(&word) {
                index.insert(word.clone(), vocab.len());
                vocab.push(word);
            }
        }
        Self { vocabulary: vocab, index }
    }

    /// Sorted vocabulary of every token appearing in `texts`.
    pub fn from_corpus<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut words = BTreeSet::new();
        for text in texts {
            words.extend(tokenize(text.as_ref()));
        }
        Self::new(words)
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    fn counts(&self, text: &str) -> Vec<f64> {
        let mut counts = vec![0.0; self.vocabulary.len()];
        for token in tokenize(text) {
            if let Some(&i) = self.index.get(&token) {
                counts[i] += 1.0;
            }
        }
        counts
    }
}

impl EmbeddingProvider for BagOfTokensEmbedder {
    fn name(&self) -> &str {
        "bag-of-tokens"
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::InvalidRequest {
                provider: self.name().into(),
                message: "text is empty".into(),
            });
        }
        let counts = self.counts(text);
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(ProviderError::DegenerateEmbedding {
                provider: self.name().into(),
            });
        }
        Ok(counts.into_iter().map(|c| c / norm).collect())
    }
}

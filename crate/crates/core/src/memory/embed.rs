use std::hash::Hasher;

use fnv::FnvHasher;

use super::{MemoryError, Result};

/// Text → unit vector. Deterministic per (provider, text).
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

pub const REFERENCE_DIM: usize = 256;

/// Token-bigram feature hashing (FNV-1a) into `dim` buckets, L2-normalized.
///
/// Tokens are whitespace-split, lowercased and trimmed of surrounding
/// punctuation; the sequence is padded with `<s>` and `</s>`.
#[derive(Debug, Clone)]
pub struct BigramHashEmbedder {
    dim: usize,
}

impl Default for BigramHashEmbedder {
    fn default() -> Self {
        BigramHashEmbedder { dim: REFERENCE_DIM }
    }
}

impl BigramHashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        BigramHashEmbedder { dim }
    }

    pub fn tokens(text: &str) -> Vec<String> {
        text.split_whitespace()
            .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .filter(|t| !t.is_empty())
            .collect()
    }

    pub fn bigrams(text: &str) -> Vec<(String, String)> {
        let mut seq = vec!["<s>".to_string()];
        seq.extend(Self::tokens(text));
        seq.push("</s>".to_string());
        seq.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()
    }

    pub fn bucket(&self, a: &str, b: &str) -> usize {
        let mut h = FnvHasher::default();
        h.write(a.as_bytes());
        h.write(&[0x1f]);
        h.write(b.as_bytes());
        (h.finish() % self.dim as u64) as usize
    }
}

impl EmbeddingProvider for BigramHashEmbedder {
    fn name(&self) -> &str {
        "bigram-fnv"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        if text.trim().is_empty() {
            return Err(MemoryError::EmptyText);
        }
        let mut v = vec![0.0; self.dim];
        for (a, b) in Self::bigrams(text) {
            v[self.bucket(&a, &b)] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(v.into_iter().map(|x| x / norm).collect())
    }
}

pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(MemoryError::DimMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(MemoryError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cosines() {
        assert_eq!(cosine_sim(&[0.6, 0.8], &[0.6, 0.8]).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_sim(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(cosine_sim(&[0.0], &[1.0]), Err(MemoryError::ZeroVector)));
        assert!(matches!(cosine_sim(&[1.0], &[1.0, 0.0]), Err(MemoryError::DimMismatch { .. })));
    }

    #[test]
    fn unit_norm_and_deterministic() {
        let e = BigramHashEmbedder::default();
        let a = e.embed("Safety margin of 10 mm, near the bowel.").unwrap();
        assert_eq!(a, e.embed("Safety margin of 10 mm, near the bowel.").unwrap());
        assert!((a.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        assert!(matches!(e.embed("   "), Err(MemoryError::EmptyText)));
    }

    #[test]
    fn normalization_ignores_case_and_punctuation() {
        let e = BigramHashEmbedder::default();
        assert_eq!(e.embed("Bowel, margin!").unwrap(), e.embed("bowel margin").unwrap());
    }
}

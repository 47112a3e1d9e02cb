use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{cosine_sim, KnowledgeChunk, KnowledgeKind, MemoryError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk: KnowledgeChunk,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query: String,
    pub hits: Vec<ScoredChunk>,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.chunk.chunk_id.as_str()).collect()
    }
}

/// Exact flat vector store. Persisted as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    pub provider: String,
    pub dim: usize,
    chunks: Vec<KnowledgeChunk>,
}

/// Descending score, then ascending chunk id.
pub fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

impl VectorIndex {
    pub fn new(provider: impl Into<String>, dim: usize) -> Self {
        VectorIndex {
            provider: provider.into(),
            dim,
            chunks: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[KnowledgeChunk] {
        &self.chunks
    }

    pub fn add(&mut self, chunk: KnowledgeChunk) -> Result<String> {
        if chunk.vector.len() != self.dim {
            return Err(MemoryError::DimMismatch {
                expected: self.dim,
                found: chunk.vector.len(),
            });
        }
        let norm = chunk.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(MemoryError::NotUnitNorm(chunk.chunk_id));
        }
        if chunk.text.trim().is_empty() {
            return Err(MemoryError::EmptyText);
        }
        if self.chunks.iter().any(|c| c.chunk_id == chunk.chunk_id) {
            return Err(MemoryError::DuplicateId(chunk.chunk_id));
        }
        let id = chunk.chunk_id.clone();
        self.chunks.push(chunk);
        Ok(id)
    }

    /// Top-`k` chunks by cosine similarity among those whose kind is in
    /// `kinds` (all kinds when `None`).
    pub fn search(&self, query: &[f64], k: usize, kinds: Option<&[KnowledgeKind]>) -> Result<Vec<ScoredChunk>> {
        if self.chunks.is_empty() {
            return Err(MemoryError::EmptyIndex);
        }
        if k == 0 {
            return Err(MemoryError::BadK);
        }
        let mut scored = Vec::new();
        for c in &self.chunks {
            if kinds.is_some_and(|ks| !ks.contains(&c.kind)) {
                continue;
            }
            scored.push((c, cosine_sim(query, &c.vector)?));
        }
        scored.sort_by(|a, b| rank_order((&a.0.chunk_id, a.1), (&b.0.chunk_id, b.1)));
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .map(|(c, score)| ScoredChunk {
                chunk: c.clone(),
                score,
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let idx: VectorIndex = serde_json::from_str(text)?;
        let mut check = VectorIndex::new(idx.provider.clone(), idx.dim);
        for c in idx.chunks {
            check.add(c)?;
        }
        Ok(check)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(id: &str, v: [f64; 2], kind: KnowledgeKind) -> KnowledgeChunk {
        KnowledgeChunk {
            chunk_id: id.into(),
            text: id.into(),
            source_doc: "s".into(),
            kind,
            vector: v.to_vec(),
            rules: vec![],
        }
    }

    #[test]
    fn ties_by_id_and_filter() {
        let mut idx = VectorIndex::new("t", 2);
        idx.add(chunk("b", [1.0, 0.0], KnowledgeKind::Guideline)).unwrap();
        idx.add(chunk("a", [1.0, 0.0], KnowledgeKind::Case)).unwrap();
        idx.add(chunk("c", [0.0, 1.0], KnowledgeKind::Guideline)).unwrap();
        let hits = idx.search(&[1.0, 0.0], 5, None).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.chunk.chunk_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
        let hits = idx.search(&[1.0, 0.0], 1, Some(&[KnowledgeKind::Guideline])).unwrap();
        assert_eq!(hits[0].chunk.chunk_id, "b");
    }

    #[test]
    fn rejects_bad_chunks() {
        let mut idx = VectorIndex::new("t", 2);
        assert!(matches!(idx.search(&[1.0, 0.0], 3, None), Err(MemoryError::EmptyIndex)));
        assert!(idx.add(chunk("x", [1.0, 1.0], KnowledgeKind::Case)).is_err());
        idx.add(chunk("x", [0.0, 1.0], KnowledgeKind::Case)).unwrap();
        assert!(matches!(idx.add(chunk("x", [0.0, 1.0], KnowledgeKind::Case)), Err(MemoryError::DuplicateId(_))));
        let back = VectorIndex::from_json(&idx.to_json()).unwrap();
        assert_eq!(back, idx);
    }
}

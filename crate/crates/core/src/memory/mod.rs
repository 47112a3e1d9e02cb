//! Knowledge memory: chunking, embedding, an exact vector index and typed
//! knowledge entries carrying machine-checkable guideline rules.

mod chunk;
mod embed;
mod index;
mod ingest;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predicate::Predicate;

pub use chunk::{chunk, chunk_spans, ChunkSpan, DEFAULT_OVERLAP, DEFAULT_WINDOW};
pub use embed::{cosine_sim, BigramHashEmbedder, EmbeddingProvider, REFERENCE_DIM};
pub use index::{rank_order, RetrievalResult, ScoredChunk, VectorIndex};
pub use ingest::{parse_document, KnowledgeDocument};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider failed: {0}")]
    ProviderFailure(String),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("K must be at least 1")]
    BadK,
    #[error("window {window} must exceed overlap {overlap}")]
    BadChunking { window: usize, overlap: usize },
    #[error("chunk id {0} already stored")]
    DuplicateId(String),
    #[error("chunk {0} vector is not unit norm")]
    NotUnitNorm(String),
    #[error("malformed knowledge document: {0}")]
    MalformedDocument(String),
    #[error("unknown knowledge kind {0:?}")]
    UnknownKind(String),
    #[error("bad rule on line {line}: {reason}")]
    BadRule { line: usize, reason: String },
    #[error("index was built by provider {found}, not {expected}")]
    ProviderMismatch { expected: String, found: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MemoryError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeKind {
    Guideline,
    Case,
    Contraindication,
    /// System-level instruction text for the plan generator.
    Policy,
}

impl FromStr for KnowledgeKind {
    type Err = MemoryError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "guideline" => Ok(KnowledgeKind::Guideline),
            "case" => Ok(KnowledgeKind::Case),
            "contraindication" => Ok(KnowledgeKind::Contraindication),
            "policy" => Ok(KnowledgeKind::Policy),
            other => Err(MemoryError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for KnowledgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KnowledgeKind::Guideline => "guideline",
            KnowledgeKind::Case => "case",
            KnowledgeKind::Contraindication => "contraindication",
            KnowledgeKind::Policy => "policy",
        })
    }
}

/// `if applicability then require requirement`, checked by the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidelineRule {
    pub rule_id: String,
    /// Over case facts.
    pub applicability: Predicate,
    /// Over plan fields.
    pub requirement: Predicate,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    /// `<source>#<nnnn>`.
    pub chunk_id: String,
    pub text: String,
    pub source_doc: String,
    pub kind: KnowledgeKind,
    pub vector: Vec<f64>,
    pub rules: Vec<GuidelineRule>,
}

/// Shared knowledge store: concurrent retrievals, exclusive insertions.
pub struct MemoryModule {
    provider: Arc<dyn EmbeddingProvider>,
    index: RwLock<VectorIndex>,
    window: usize,
    overlap: usize,
}

impl fmt::Debug for MemoryModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MemoryModule")
            .field("provider", &self.provider.name())
            .field("chunks", &self.len())
            .finish()
    }
}

impl MemoryModule {
    pub fn new(provider: Arc<dyn EmbeddingProvider>) -> Self {
        let index = VectorIndex::new(provider.name(), provider.dim());
        MemoryModule {
            provider,
            index: RwLock::new(index),
            window: DEFAULT_WINDOW,
            overlap: DEFAULT_OVERLAP,
        }
    }

    pub fn with_reference_embedder() -> Self {
        Self::new(Arc::new(BigramHashEmbedder::default()))
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> VectorIndex {
        self.index.read().expect("index lock").clone()
    }

    /// Chunks, embeds and stores one document; its rules ride on every chunk.
    pub fn ingest(&self, doc: &KnowledgeDocument) -> Result<Vec<String>> {
        let spans = chunk_spans(&doc.body, self.window, self.overlap)?;
        let chunks = spans
            .into_iter()
            .enumerate()
            .map(|(n, span)| {
                Ok(KnowledgeChunk {
                    chunk_id: format!("{}#{n:04}", doc.source),
                    vector: self.provider.embed(&span.text)?,
                    text: span.text,
                    source_doc: doc.source.clone(),
                    kind: doc.kind,
                    rules: doc.rules.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut index = self.index.write().expect("index lock");
        if let Some(c) = chunks.iter().find(|c| index.chunks().iter().any(|s| s.chunk_id == c.chunk_id)) {
            return Err(MemoryError::DuplicateId(c.chunk_id.clone()));
        }
        chunks.into_iter().map(|c| index.add(c)).collect()
    }

    pub fn ingest_text(&self, text: &str) -> Result<Vec<String>> {
        self.ingest(&parse_document(text)?)
    }

    /// Every `.md` / `.txt` file of `dir`, in file-name order.
    pub fn ingest_dir(&self, dir: &Path) -> Result<Vec<String>> {
        let io = |e| MemoryError::Io {
            path: dir.display().to_string(),
            source: e,
        };
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "md" || x == "txt"))
            .collect();
        files.sort();
        let mut ids = Vec::new();
        for f in files {
            let text = std::fs::read_to_string(&f).map_err(|e| MemoryError::Io {
                path: f.display().to_string(),
                source: e,
            })?;
            ids.extend(self.ingest_text(&text)?);
        }
        Ok(ids)
    }

    pub fn retrieve(&self, query: &str, k: usize, kinds: Option<&[KnowledgeKind]>) -> Result<RetrievalResult> {
        let q = self.provider.embed(query)?;
        let hits = self.index.read().expect("index lock").search(&q, k, kinds)?;
        Ok(RetrievalResult {
            query: query.to_string(),
            hits,
        })
    }

    /// Concatenated chunk texts of one source document, if stored.
    pub fn source_text(&self, source: &str) -> Option<String> {
        let index = self.index.read().expect("index lock");
        let parts: Vec<&str> = index
            .chunks()
            .iter()
            .filter(|c| c.source_doc == source)
            .map(|c| c.text.as_str())
            .collect();
        (!parts.is_empty()).then(|| parts.join("\n"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.snapshot().to_json()).map_err(|e| MemoryError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path, provider: Arc<dyn EmbeddingProvider>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MemoryError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let index = VectorIndex::from_json(&text)?;
        if index.provider != provider.name() || index.dim != provider.dim() {
            return Err(MemoryError::ProviderMismatch {
                expected: provider.name().to_string(),
                found: index.provider,
            });
        }
        Ok(MemoryModule {
            provider,
            index: RwLock::new(index),
            window: DEFAULT_WINDOW,
            overlap: DEFAULT_OVERLAP,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_retrieval_and_rules_on_every_chunk() {
        let m = MemoryModule::with_reference_embedder();
        let body: String = (0..600).map(|i| format!("tok{i} ")).collect();
        let doc = format!("---\nkind: guideline\nsource: g\nRULE: if always then require cooling_interval >= 5 :: cool\n---\n{body}");
        let ids = m.ingest_text(&doc).unwrap();
        assert_eq!(ids, vec!["g#0000", "g#0001"]);
        assert!(m.snapshot().chunks().iter().all(|c| c.rules.len() == 1));
        let text = m.snapshot().chunks()[1].text.clone();
        let r = m.retrieve(&text, 1, None).unwrap();
        assert_eq!(r.ids(), vec!["g#0001"]);
        assert!((r.hits[0].score - 1.0).abs() < 1e-12);
        assert!(matches!(m.ingest_text(&doc), Err(MemoryError::DuplicateId(_))));
    }

    #[test]
    fn persistence_round_trip() {
        let m = MemoryModule::with_reference_embedder();
        m.ingest_text("---\nkind: case\nsource: c1\n---\nprior case text").unwrap();
        let dir = std::env::temp_dir().join(format!("fuas-mem-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("index.json");
        m.save(&path).unwrap();
        let back = MemoryModule::load(&path, Arc::new(BigramHashEmbedder::default())).unwrap();
        assert_eq!(back.snapshot(), m.snapshot());
        assert!(MemoryModule::load(&path, Arc::new(BigramHashEmbedder::new(8))).is_err());
        std::fs::remove_dir_all(dir).unwrap();
    }
}

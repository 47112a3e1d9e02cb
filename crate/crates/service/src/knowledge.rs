//! The bundled knowledge corpus and loading of user-supplied knowledge.

use std::path::Path;
use std::sync::Arc;

use fuas_core::memory::{BigramHashEmbedder, MemoryModule};

use crate::error::Result;

/// Default corpus: system policy, guidelines, contraindications and prior cases.
pub const DEFAULT_CORPUS: [(&str, &str); 9] = [
    ("00-system-policy.md", include_str!("../knowledge/00-system-policy.md")),
    ("10-margin-guideline.md", include_str!("../knowledge/10-margin-guideline.md")),
    ("20-thermal-guideline.md", include_str!("../knowledge/20-thermal-guideline.md")),
    ("30-contraindications.md", include_str!("../knowledge/30-contraindications.md")),
    ("40-case-solitary-small.md", include_str!("../knowledge/40-case-solitary-small.md")),
    ("41-case-near-bowel.md", include_str!("../knowledge/41-case-near-bowel.md")),
    ("42-case-multiple.md", include_str!("../knowledge/42-case-multiple.md")),
    ("43-case-thick-wall.md", include_str!("../knowledge/43-case-thick-wall.md")),
    ("44-case-large.md", include_str!("../knowledge/44-case-large.md")),
];

/// Instruction used when the memory module is disabled.
pub const BUILTIN_POLICY: &str = "You are the strategy agent of a focused ultrasound ablation planning team. \
Answer with a REASONING block of \"- \" lines followed by a PLAN block of the ten plan keys.";

pub fn default_memory() -> Result<MemoryModule> {
    let memory = MemoryModule::with_reference_embedder();
    for (_, text) in DEFAULT_CORPUS {
        memory.ingest_text(text)?;
    }
    Ok(memory)
}

/// A knowledge directory of `.md`/`.txt` documents, or a saved `.json` index.
pub fn load_knowledge(path: &Path) -> Result<MemoryModule> {
    if path.is_dir() {
        let memory = MemoryModule::with_reference_embedder();
        memory.ingest_dir(path)?;
        Ok(memory)
    } else {
        Ok(MemoryModule::load(path, Arc::new(BigramHashEmbedder::default()))?)
    }
}

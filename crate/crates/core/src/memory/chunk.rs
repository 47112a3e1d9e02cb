use super::{MemoryError, Result};

pub const DEFAULT_WINDOW: usize = 512;
pub const DEFAULT_OVERLAP: usize = 50;

/// A token window `[start, end)` of the whitespace tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Fixed windows with stride `window − overlap`; the last one may be short.
pub fn chunk_spans(text: &str, window: usize, overlap: usize) -> Result<Vec<ChunkSpan>> {
    if window == 0 || window <= overlap {
        return Err(MemoryError::BadChunking { window, overlap });
    }
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let stride = window - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    while start < tokens.len() {
        let end = (start + window).min(tokens.len());
        out.push(ChunkSpan {
            start,
            end,
            text: tokens[start..end].join(" "),
        });
        if end == tokens.len() {
            break;
        }
        start += stride;
    }
    Ok(out)
}

pub fn chunk(text: &str, window: usize, overlap: usize) -> Result<Vec<String>> {
    Ok(chunk_spans(text, window, overlap)?.into_iter().map(|c| c.text).collect())
}

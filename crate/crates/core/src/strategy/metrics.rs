//! ROUGE and BLEU over whitespace tokens (case-sensitive).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
}

fn tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

fn ngrams<'a>(toks: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut counts = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap(reference: &HashMap<Vec<&str>, usize>, hyp: &HashMap<Vec<&str>, usize>) -> usize {
    hyp.iter().map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0))).sum()
}

fn f1(overlap: usize, hyp_total: usize, ref_total: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / hyp_total as f64;
    let r = overlap as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

fn rouge_n(r: &[&str], h: &[&str], n: usize) -> f64 {
    let (rg, hg) = (ngrams(r, n), ngrams(h, n));
    let (rt, ht): (usize, usize) = (rg.values().sum(), hg.values().sum());
    if rt == 0 && ht == 0 {
        // Too short for any n-gram: score by exact token equality.
        return if r == h { 1.0 } else { 0.0 };
    }
    if rt == 0 || ht == 0 {
        return 0.0;
    }
    f1(clipped_overlap(&rg, &hg), ht, rt)
}

pub fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    let mut prev = vec![0; b.len() + 1];
    for x in a {
        let mut cur = vec![0; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// ROUGE-1, ROUGE-2 and ROUGE-L F1. Empty against empty scores 1; empty
/// against non-empty scores 0.
pub fn rouge(reference: &str, hypothesis: &str) -> RougeScores {
    let (r, h) = (tokens(reference), tokens(hypothesis));
    if r.is_empty() || h.is_empty() {
        let v = if r.is_empty() && h.is_empty() { 1.0 } else { 0.0 };
        return RougeScores { r1: v, r2: v, rl: v };
    }
    RougeScores {
        r1: rouge_n(&r, &h, 1),
        r2: rouge_n(&r, &h, 2),
        rl: f1(lcs_len(&r, &h), h.len(), r.len()),
    }
}

/// B1..B`max_n`: clipped n-gram precision with uniform weights and brevity
/// penalty exp(1 − r/c) when the hypothesis is shorter. Orders n ≥ 2 with no
/// match use (m + 1)/(c + 1).
pub fn bleu(reference: &str, hypothesis: &str, max_n: usize) -> Vec<f64> {
    let (r, h) = (tokens(reference), tokens(hypothesis));
    if h.is_empty() {
        let v = if r.is_empty() { 1.0 } else { 0.0 };
        return vec![v; max_n];
    }
    let bp = if h.len() >= r.len() { 1.0 } else { (1.0 - r.len() as f64 / h.len() as f64).exp() };
    let log_p: Vec<f64> = (1..=max_n)
        .map(|n| {
            let (rg, hg) = (ngrams(&r, n), ngrams(&h, n));
            let total: usize = hg.values().sum();
            let matched = clipped_overlap(&rg, &hg);
            let p = if n >= 2 && matched == 0 {
                1.0 / (total as f64 + 1.0)
            } else {
                matched as f64 / total as f64
            };
            p.ln()
        })
        .collect();
    (1..=max_n)
        .map(|k| {
            let mean = log_p[..k].iter().sum::<f64>() / k as f64;
            bp * mean.exp()
        })
        .collect()
}

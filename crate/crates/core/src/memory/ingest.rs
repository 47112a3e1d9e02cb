use std::str::FromStr;

use super::{GuidelineRule, KnowledgeKind, MemoryError, Result};
use crate::predicate::Predicate;

/// One knowledge file: front-matter header and raw body text.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeDocument {
    pub kind: KnowledgeKind,
    pub source: String,
    pub rules: Vec<GuidelineRule>,
    pub body: String,
}

/// Parses
///
/// ```text
/// ---
/// kind: guideline
/// source: margin-guideline
/// RULE [G1]: if oar_min_distance_mm < 10 then require safety_margin >= 15 :: message
/// ---
/// body…
/// ```
///
/// The `[id]` is optional; unnamed rules become `<source>#R<n>`.
pub fn parse_document(text: &str) -> Result<KnowledgeDocument> {
    let malformed = |m: &str| MemoryError::MalformedDocument(m.to_string());
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("---") {
        return Err(malformed("missing front-matter opening ---"));
    }
    let (mut kind, mut source) = (None, None);
    let mut raw_rules = Vec::new();
    let mut closed = false;
    for (n, line) in lines.by_ref().enumerate() {
        let line = line.trim();
        if line == "---" {
            closed = true;
            break;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("RULE") {
            raw_rules.push((n + 2, rest.to_string()));
        } else if let Some((key, value)) = line.split_once(':') {
            match key.trim() {
                "kind" => kind = Some(KnowledgeKind::from_str(value.trim())?),
                "source" => source = Some(value.trim().to_string()),
                other => return Err(MemoryError::MalformedDocument(format!("unknown header key {other:?}"))),
            }
        } else {
            return Err(MemoryError::MalformedDocument(format!("bad header line {line:?}")));
        }
    }
    if !closed {
        return Err(malformed("missing front-matter closing ---"));
    }
    let kind = kind.ok_or_else(|| malformed("header lacks kind"))?;
    let source = source.filter(|s| !s.is_empty()).ok_or_else(|| malformed("header lacks source"))?;
    let rules = raw_rules
        .into_iter()
        .enumerate()
        .map(|(i, (line, rest))| parse_rule(&rest, &format!("{source}#R{}", i + 1), line))
        .collect::<Result<Vec<_>>>()?;
    let body = lines.collect::<Vec<_>>().join("\n").trim().to_string();
    if body.is_empty() {
        return Err(malformed("document body is empty"));
    }
    Ok(KnowledgeDocument { kind, source, rules, body })
}

/// `[id]: if <pred> then require <pred> :: message`, after the `RULE` keyword.
fn parse_rule(rest: &str, default_id: &str, line: usize) -> Result<GuidelineRule> {
    let bad = |why: &str| MemoryError::BadRule {
        line,
        reason: why.to_string(),
    };
    let rest = rest.trim_start();
    let (id, rest) = match rest.strip_prefix('[') {
        Some(r) => {
            let (id, after) = r.split_once(']').ok_or_else(|| bad("unclosed rule id"))?;
            (id.trim().to_string(), after)
        }
        None => (default_id.to_string(), rest),
    };
    let rest = rest.trim_start().strip_prefix(':').ok_or_else(|| bad("expected ':' after RULE"))?;
    let (logic, message) = rest.split_once("::").ok_or_else(|| bad("missing ':: message'"))?;
    let logic = logic.trim().strip_prefix("if ").ok_or_else(|| bad("rule must start with 'if'"))?;
    let (when, then) = logic.split_once(" then require ").ok_or_else(|| bad("missing 'then require'"))?;
    let pred = |s: &str| Predicate::parse(s).map_err(|e| bad(&e.to_string()));
    let requirement = pred(then)?;
    if requirement == Predicate::Always {
        return Err(bad("requirement cannot be 'always'"));
    }
    Ok(GuidelineRule {
        rule_id: id,
        applicability: pred(when)?,
        requirement,
        message: message.trim().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::{Bound, Comparator};

    const DOC: &str = "---\nkind: guideline\nsource: margins\nRULE [G1]: if oar_min_distance_mm < 10 then require safety_margin >= 15 :: keep away\nRULE: if always then require cooling_interval >= 5 :: cool\n---\nKeep a margin.\n";

    #[test]
    fn parses_header_and_rules() {
        let d = parse_document(DOC).unwrap();
        assert_eq!(d.kind, KnowledgeKind::Guideline);
        assert_eq!(d.source, "margins");
        assert_eq!(d.body, "Keep a margin.");
        assert_eq!(d.rules[0].rule_id, "G1");
        assert_eq!(
            d.rules[0].requirement,
            Predicate::compare("safety_margin", Comparator::Ge, Bound::Number(15.0))
        );
        assert_eq!(d.rules[1].rule_id, "margins#R2");
        assert_eq!(d.rules[1].applicability, Predicate::Always);
    }

    #[test]
    fn malformed() {
        assert!(parse_document("kind: case\n").is_err());
        assert!(parse_document("---\nkind: case\n---\n").is_err());
        assert!(parse_document("---\nkind: memo\nsource: x\n---\nbody").is_err());
        let bad_rule = "---\nkind: case\nsource: x\nRULE: safety_margin >= 3\n---\nbody";
        assert!(matches!(parse_document(bad_rule), Err(MemoryError::BadRule { .. })));
    }
}

//! Field/comparator/bound predicates shared by guideline rules and physical constraints.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Number(f64),
    Text(String),
    List(Vec<String>),
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Number(n) => write!(f, "{n}"),
            FieldValue::Text(t) => f.write_str(t),
            FieldValue::List(items) => write!(f, "[{}]", items.join(", ")),
        }
    }
}

/// Anything that exposes named values to predicates.
pub trait Facts {
    fn fact(&self, name: &str) -> Option<FieldValue>;
}

impl Facts for std::collections::BTreeMap<String, FieldValue> {
    fn fact(&self, name: &str) -> Option<FieldValue> {
        self.get(name).cloned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "in")]
    In,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::In => "in",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "<" => Comparator::Lt,
            "<=" | "≤" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" | "≥" => Comparator::Ge,
            "=" | "==" => Comparator::Eq,
            "!=" | "≠" => Comparator::Ne,
            "in" | "∈" => Comparator::In,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Number(f64),
    Text(String),
    Set(Vec<String>),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Number(n) => write!(f, "{n}"),
            Bound::Text(t) => f.write_str(t),
            Bound::Set(items) => write!(f, "{{{}}}", items.join(", ")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PredicateError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("cannot compare field `{field}` ({value}) with {cmp} {bound}")]
    TypeMismatch {
        field: String,
        value: String,
        cmp: &'static str,
        bound: String,
    },
    #[error("cannot parse predicate `{0}`")]
    Syntax(String),
}

/// `field cmp bound`, or the constant-true predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    Always,
    Compare {
        field: String,
        cmp: Comparator,
        bound: Bound,
    },
}

impl Predicate {
    pub fn compare(field: &str, cmp: Comparator, bound: Bound) -> Self {
        Predicate::Compare {
            field: field.to_string(),
            cmp,
            bound,
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            Predicate::Always => None,
            Predicate::Compare { field, .. } => Some(field),
        }
    }

    pub fn evaluate(&self, facts: &dyn Facts) -> Result<bool, PredicateError> {
        let Predicate::Compare { field, cmp, bound } = self else {
            return Ok(true);
        };
        let value = facts
            .fact(field)
            .ok_or_else(|| PredicateError::UnknownField(field.clone()))?;
        compare(&value, *cmp, bound).ok_or_else(|| PredicateError::TypeMismatch {
            field: field.clone(),
            value: value.to_string(),
            cmp: cmp.symbol(),
            bound: bound.to_string(),
        })
    }

    /// Parses `always`, `field cmp number`, `field cmp word` or `field in {a, b}`.
    pub fn parse(text: &str) -> Result<Self, PredicateError> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("always") {
            return Ok(Predicate::Always);
        }
        let err = || PredicateError::Syntax(text.to_string());
        let (field, after) = text.split_once(char::is_whitespace).ok_or_else(err)?;
        let (cmp, rest) = after.trim_start().split_once(char::is_whitespace).ok_or_else(err)?;
        let cmp = Comparator::parse(cmp).ok_or_else(err)?;
        let rest = rest.trim();
        if rest.is_empty() || !field.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
            return Err(err());
        }
        let bound = if cmp == Comparator::In {
            let inner = rest
                .strip_prefix('{')
                .and_then(|r| r.strip_suffix('}'))
                .ok_or_else(err)?;
            Bound::Set(
                inner
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect(),
            )
        } else {
            match leading_number(rest) {
                Some(n) => Bound::Number(n),
                None => Bound::Text(rest.to_string()),
            }
        };
        Ok(Predicate::compare(field, cmp, bound))
    }
}

/// Number at the start of `s`, ignoring a trailing unit such as `mm` or `W`.
fn leading_number(s: &str) -> Option<f64> {
    let token = s.split_whitespace().next()?;
    let numeric = token.trim_end_matches(|c: char| c.is_alphabetic());
    if numeric.is_empty() {
        return None;
    }
    numeric.parse().ok()
}

fn compare(value: &FieldValue, cmp: Comparator, bound: &Bound) -> Option<bool> {
    use Comparator::*;
    match (value, bound) {
        (FieldValue::Number(v), Bound::Number(b)) => Some(match cmp {
            Lt => v < b,
            Le => v <= b,
            Gt => v > b,
            Ge => v >= b,
            Eq => v == b,
            Ne => v != b,
            In => return None,
        }),
        (FieldValue::Text(v), Bound::Text(b)) => match cmp {
            Eq => Some(v == b),
            Ne => Some(v != b),
            _ => None,
        },
        (FieldValue::Text(v), Bound::Set(set)) if cmp == In => Some(set.contains(v)),
        (FieldValue::List(items), Bound::Set(set)) if cmp == In => {
            Some(items.iter().all(|i| set.contains(i)))
        }
        _ => None,
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Always => f.write_str("always"),
            Predicate::Compare { field, cmp, bound } => {
                write!(f, "{field} {} {bound}", cmp.symbol())
            }
        }
    }
}

//! Optimizer agent: physical-constraint and guideline verification, feedback
//! construction and the bounded refinement loop.

mod constraints;
mod guideline;
mod reflect;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::CaseInput;
use crate::memory::{MemoryError, MemoryModule};
use crate::predicate::PredicateError;
use crate::strategy::{parse_plan, ToolObservations, TreatmentPlan};

pub use constraints::{check_task_feasibility, ConstraintSet, PhysicalConstraint};
pub use guideline::{case_facts, check_guideline_consistency, guideline_query, GuidelineCheck, GUIDELINE_TOP_K, NO_KNOWLEDGE};
pub use reflect::{reflect_step, Attempt, LoopState, LoopStatus, NextAction, T_MAX};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("constraint {constraint} names unknown plan field `{field}`")]
    UnknownPlanField { constraint: String, field: String },
    #[error("feedback needs at least one violation")]
    EmptyViolations,
    #[error("invalid loop state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Physical,
    Guideline,
    Coverage,
    Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub id: String,
    pub kind: ViolationKind,
    pub message: String,
    /// The unmet requirement, echoed as a `[field cmp value]` hint.
    pub requirement: Option<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Violation of {}: {}", self.id, self.message)?;
        if let Some(r) = &self.requirement {
            write!(f, " [{r}]")?;
        }
        Ok(())
    }
}

/// One line per violation, ordered by id.
pub fn build_feedback(violations: &[Violation]) -> Result<String, OptimizerError> {
    if violations.is_empty() {
        return Err(OptimizerError::EmptyViolations);
    }
    let mut sorted: Vec<&Violation> = violations.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(sorted.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub s_task: u8,
    pub s_guide: u8,
    pub s_total: u8,
    pub violations: Vec<Violation>,
    pub retrieved_chunk_ids: Vec<String>,
    pub checked_rules: Vec<String>,
    pub notes: Vec<String>,
    pub feedback_text: String,
}

impl VerificationReport {
    /// Scores follow from the violations: guideline violations clear
    /// `s_guide` (as does `guide_ok = false`), all others clear `s_task`.
    pub fn new(
        mut violations: Vec<Violation>,
        guide_ok: bool,
        retrieved_chunk_ids: Vec<String>,
        checked_rules: Vec<String>,
        notes: Vec<String>,
    ) -> Self {
        let mut seen = BTreeSet::new();
        violations.retain(|v| seen.insert(v.id.clone()));
        violations.sort_by(|a, b| a.id.cmp(&b.id));
        let s_task = !violations.iter().any(|v| v.kind != ViolationKind::Guideline);
        let s_guide = guide_ok && !violations.iter().any(|v| v.kind == ViolationKind::Guideline);
        let feedback_text = build_feedback(&violations).unwrap_or_default();
        VerificationReport {
            s_task: s_task as u8,
            s_guide: s_guide as u8,
            s_total: (s_task && s_guide) as u8,
            violations,
            retrieved_chunk_ids,
            checked_rules,
            notes,
            feedback_text,
        }
    }

    pub fn passed(&self) -> bool {
        self.s_total == 1
    }

    /// Trace lines: scores, then notes, then the feedback.
    pub fn trace_lines(&self) -> Vec<String> {
        let mut lines = vec![format!(
            "verify: s_task={} s_guide={} s_total={} retrieved=[{}] checked=[{}]",
            self.s_task,
            self.s_guide,
            self.s_total,
            self.retrieved_chunk_ids.join(", "),
            self.checked_rules.join(", ")
        )];
        lines.extend(self.notes.iter().map(|n| format!("note: {n}")));
        lines.extend(self.feedback_text.lines().map(str::to_string));
        lines
    }
}

/// Every observed lesion appears exactly once in the order, and the target is one of them.
pub fn check_coverage(plan: &TreatmentPlan, lesion_ids: &[String]) -> Option<Violation> {
    if lesion_ids.is_empty() {
        return None;
    }
    let mut expected = lesion_ids.to_vec();
    let mut got = plan.treatment_order.clone();
    expected.sort();
    got.sort();
    let target_ok = plan.treatment_order.contains(&plan.target_lesion_id);
    (expected != got || !target_ok).then(|| Violation {
        id: "COVERAGE".into(),
        kind: ViolationKind::Coverage,
        message: format!("treatment_order must list each lesion exactly once ({})", lesion_ids.join(", ")),
        requirement: None,
    })
}

pub struct VerifyInputs<'a> {
    pub case: &'a CaseInput,
    pub observations: Option<&'a ToolObservations>,
    pub constraints: &'a ConstraintSet,
    pub memory: Option<&'a MemoryModule>,
    pub top_k: usize,
}

/// Parses and verifies one generated output. Unparseable output yields a
/// failing report with a format violation.
pub fn verify(plan_text: &str, inputs: &VerifyInputs<'_>) -> Result<(Option<TreatmentPlan>, VerificationReport), OptimizerError> {
    let plan = match parse_plan(plan_text) {
        Ok(p) => p,
        Err(e) => {
            let v = Violation {
                id: "FORMAT".into(),
                kind: ViolationKind::Format,
                message: format!("output does not follow the plan contract: {e}"),
                requirement: None,
            };
            return Ok((None, VerificationReport::new(vec![v], true, vec![], vec![], vec![])));
        }
    };
    let (_, mut violations) = check_task_feasibility(&plan, inputs.constraints)?;
    let seg = inputs.observations.and_then(|o| o.seg.as_ref());
    let dose = inputs.observations.and_then(|o| o.dose.as_ref());
    if let Some(v) = seg.and_then(|s| check_coverage(&plan, &s.lesion_ids())) {
        violations.push(v);
    }
    let facts = case_facts(inputs.case, seg, dose);
    let g = check_guideline_consistency(&plan, inputs.case, &facts, inputs.memory, inputs.top_k)?;
    violations.extend(g.violations);
    let report = VerificationReport::new(violations, true, g.retrieved_ids, g.checked_rules, g.notes);
    Ok((Some(plan), report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(id: &str, kind: ViolationKind) -> Violation {
        Violation {
            id: id.into(),
            kind,
            message: "m".into(),
            requirement: Some("safety_margin >= 10".into()),
        }
    }

    #[test]
    fn feedback_lines_sorted() {
        let text = build_feedback(&[v("G4", ViolationKind::Guideline), v("A1", ViolationKind::Physical)]).unwrap();
        assert_eq!(text, "Violation of A1: m [safety_margin >= 10]\nViolation of G4: m [safety_margin >= 10]");
        assert!(matches!(build_feedback(&[]), Err(OptimizerError::EmptyViolations)));
    }

    #[test]
    fn report_invariants() {
        let r = VerificationReport::new(vec![v("G4", ViolationKind::Guideline)], true, vec![], vec![], vec![]);
        assert_eq!((r.s_task, r.s_guide, r.s_total), (1, 0, 0));
        assert!(!r.feedback_text.is_empty());
        let r = VerificationReport::new(vec![], true, vec![], vec![], vec![]);
        assert_eq!(r.s_total, 1);
        assert!(r.feedback_text.is_empty());
    }

    #[test]
    fn unparseable_output_fails() {
        let case = crate::case::parse_case(
            r#"{"case_id":"c","volume_ref":"v","ehr_text":"e","clinician_query":"q",
                "clinical_vars":{"bmi":22,"abdominal_wall_thickness_mm":20,"preop_score":1,"age":40}}"#,
        )
        .unwrap();
        let inputs = VerifyInputs {
            case: &case,
            observations: None,
            constraints: &ConstraintSet::default(),
            memory: None,
            top_k: 3,
        };
        let (plan, report) = verify("nonsense", &inputs).unwrap();
        assert!(plan.is_none());
        assert_eq!(report.violations[0].id, "FORMAT");
    }
}

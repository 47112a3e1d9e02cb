use std::collections::{BTreeMap, HashSet};

use super::{OptimizerError, Violation, ViolationKind};
use crate::case::{CaseInput, ClinicalVariables};
use crate::dosemodel::DoseObservation;
use crate::memory::{KnowledgeKind, MemoryModule};
use crate::predicate::{FieldValue, PredicateError};
use crate::segtool::SegObservation;
use crate::strategy::TreatmentPlan;

pub const GUIDELINE_TOP_K: usize = 3;
pub const NO_KNOWLEDGE: &str = "no knowledge";

/// Facts a guideline rule's applicability may test.
pub fn case_facts(case: &CaseInput, seg: Option<&SegObservation>, dose: Option<&DoseObservation>) -> BTreeMap<String, FieldValue> {
    let mut f = BTreeMap::new();
    for (name, v) in ClinicalVariables::NAMES.iter().zip(case.clinical_vars.as_array()) {
        f.insert(name.to_string(), FieldValue::Number(v));
    }
    if let Some(s) = seg {
        f.insert("multiplicity".into(), FieldValue::Number(s.multiplicity as f64));
        f.insert("lesion_volume_mm3".into(), FieldValue::Number(s.lesion_volume_mm3));
        if let Some(d) = s.nearest_oar_mm() {
            f.insert("oar_min_distance_mm".into(), FieldValue::Number(d));
        }
    }
    if let Some(d) = dose {
        f.insert("predicted_dose_j".into(), FieldValue::Number(d.predicted_dose_j));
        f.insert("dose_band".into(), FieldValue::Text(d.band.to_string()));
    }
    f
}

/// Plan strategy fields followed by the case's record text.
pub fn guideline_query(plan: &TreatmentPlan, case: &CaseInput) -> String {
    format!(
        "ablation_strategy {} safety_margin {} mm acoustic_power {} W cooling_interval {} s patient_position {} {}",
        plan.ablation_strategy.as_str(),
        plan.safety_margin,
        plan.acoustic_power,
        plan.cooling_interval,
        plan.patient_position.as_str(),
        case.ehr_text
    )
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GuidelineCheck {
    pub s_guide: bool,
    pub violations: Vec<Violation>,
    pub retrieved_ids: Vec<String>,
    /// Rules whose applicability held and whose requirement was evaluated.
    pub checked_rules: Vec<String>,
    pub notes: Vec<String>,
}

/// Retrieves the top-`k` guideline/contraindication chunks and evaluates the
/// rules attached to them. Without usable memory the check passes vacuously
/// and records a "no knowledge" note.
pub fn check_guideline_consistency(
    plan: &TreatmentPlan,
    case: &CaseInput,
    facts: &BTreeMap<String, FieldValue>,
    memory: Option<&MemoryModule>,
    k: usize,
) -> Result<GuidelineCheck, OptimizerError> {
    let mut out = GuidelineCheck {
        s_guide: true,
        ..Default::default()
    };
    let Some(memory) = memory else {
        out.notes.push(format!("{NO_KNOWLEDGE}: memory disabled, guideline check skipped"));
        return Ok(out);
    };
    if memory.is_empty() {
        out.notes.push(format!("{NO_KNOWLEDGE}: knowledge index empty, guideline check skipped"));
        return Ok(out);
    }
    let kinds = [KnowledgeKind::Guideline, KnowledgeKind::Contraindication];
    let result = match memory.retrieve(&guideline_query(plan, case), k, Some(&kinds)) {
        Err(crate::memory::MemoryError::EmptyIndex) => {
            out.notes.push(format!("{NO_KNOWLEDGE}: no guideline entries stored"));
            return Ok(out);
        }
        other => other?,
    };
    let mut seen = HashSet::new();
    for hit in &result.hits {
        out.retrieved_ids.push(hit.chunk.chunk_id.clone());
        for rule in &hit.chunk.rules {
            if !seen.insert(rule.rule_id.clone()) {
                continue;
            }
            match rule.applicability.evaluate(facts) {
                Ok(true) => {}
                Ok(false) => continue,
                Err(PredicateError::UnknownField(f)) => {
                    out.notes.push(format!("rule {} not applicable: fact {f} unavailable", rule.rule_id));
                    continue;
                }
                Err(e) => {
                    out.notes.push(format!("rule {} not applicable: {e}", rule.rule_id));
                    continue;
                }
            }
            out.checked_rules.push(rule.rule_id.clone());
            match rule.requirement.evaluate(plan) {
                Ok(true) => {}
                Ok(false) => out.violations.push(Violation {
                    id: rule.rule_id.clone(),
                    kind: ViolationKind::Guideline,
                    message: rule.message.clone(),
                    requirement: Some(rule.requirement.to_string()),
                }),
                Err(e) => out.notes.push(format!("rule {} not evaluable on the plan: {e}", rule.rule_id)),
            }
        }
    }
    out.s_guide = out.violations.is_empty();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::{AblationStrategy, PatientPosition};

    fn case() -> CaseInput {
        crate::case::parse_case(
            r#"{"case_id":"c","volume_ref":"v","ehr_text":"fibroid near bowel","clinician_query":"q",
                "clinical_vars":{"bmi":22,"abdominal_wall_thickness_mm":20,"preop_score":1,"age":40}}"#,
        )
        .unwrap()
    }

    fn plan(margin: f64) -> TreatmentPlan {
        TreatmentPlan {
            reasoning: String::new(),
            target_lesion_id: "L1".into(),
            ablation_strategy: AblationStrategy::CenterToPeriphery,
            acoustic_power: 300.0,
            sonication_duration: 100.0,
            cooling_interval: 5.0,
            predicted_total_energy: 30_000.0,
            treatment_order: vec!["L1".into()],
            patient_position: PatientPosition::Prone,
            safety_margin: margin,
            intraoperative_warnings: vec![],
        }
    }

    fn memory(rule: &str) -> MemoryModule {
        let m = MemoryModule::with_reference_embedder();
        m.ingest_text(&format!("---\nkind: guideline\nsource: g\n{rule}---\nsafety margin guidance near the bowel")).unwrap();
        m
    }

    #[test]
    fn margin_conflict() {
        let m = memory("RULE [G-MARGIN]: if always then require safety_margin >= 10 :: Safety margin < 10mm around critical structures\n");
        let facts = case_facts(&case(), None, None);
        let r = check_guideline_consistency(&plan(8.0), &case(), &facts, Some(&m), 3).unwrap();
        assert!(!r.s_guide);
        assert_eq!(r.violations[0].id, "G-MARGIN");
        let r = check_guideline_consistency(&plan(12.0), &case(), &facts, Some(&m), 3).unwrap();
        assert!(r.s_guide);
        assert_eq!(r.checked_rules, vec!["G-MARGIN"]);
    }

    #[test]
    fn vacuous_cases() {
        let facts = case_facts(&case(), None, None);
        let m = memory("");
        let r = check_guideline_consistency(&plan(1.0), &case(), &facts, Some(&m), 3).unwrap();
        assert!(r.s_guide && r.checked_rules.is_empty());
        let r = check_guideline_consistency(&plan(1.0), &case(), &facts, None, 3).unwrap();
        assert!(r.s_guide);
        assert!(r.notes[0].starts_with(NO_KNOWLEDGE));
        let m = memory("RULE [N]: if oar_min_distance_mm < 10 then require safety_margin >= 15 :: near\n");
        let r = check_guideline_consistency(&plan(1.0), &case(), &facts, Some(&m), 3).unwrap();
        assert!(r.s_guide);
        assert!(r.notes[0].contains("unavailable"));
    }
}

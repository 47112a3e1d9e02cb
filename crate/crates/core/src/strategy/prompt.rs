use serde::{Deserialize, Serialize};

use crate::case::{CaseInput, ClinicalVariables};
use crate::dosemodel::DoseObservation;
use crate::memory::RetrievalResult;
use crate::segtool::SegObservation;

/// Tool outputs of the executor, kept structured alongside their text form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolObservations {
    pub seg: Option<SegObservation>,
    pub dose: Option<DoseObservation>,
}

impl ToolObservations {
    pub fn is_empty(&self) -> bool {
        self.seg.is_none() && self.dose.is_none()
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if let Some(s) = &self.seg {
            parts.push(s.to_string());
        }
        if let Some(d) = &self.dose {
            parts.push(d.to_string());
        }
        parts.join("\n")
    }
}

/// A retrieved prior case, as shown to the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedCase {
    pub chunk_id: String,
    pub score: f64,
    pub text: String,
}

/// System instruction, patient profile, observations, retrieved cases and the
/// clinician query, always rendered in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_instruction: String,
    pub patient_profile: String,
    pub clinical_vars: ClinicalVariables,
    pub observations: Option<ToolObservations>,
    pub retrieved_cases: Option<Vec<RetrievedCase>>,
    pub user_query: String,
    /// Verifier feedback from the previous round, appended to the query.
    pub feedback: Option<String>,
}

pub const SECTION_HEADERS: [&str; 5] = ["SYSTEM:", "PATIENT PROFILE:", "OBSERVATIONS:", "RETRIEVED CASES:", "QUERY:"];

pub fn patient_profile(case: &CaseInput) -> String {
    let c = &case.clinical_vars;
    format!(
        "case_id: {}\nbmi: {}\nabdominal_wall_thickness_mm: {}\npreop_score: {}\nage: {}\nEHR: {}",
        case.case_id,
        c.bmi,
        c.abdominal_wall_thickness_mm,
        c.preop_score,
        c.age,
        case.ehr_text.trim()
    )
}

pub fn assemble_prompt(
    case: &CaseInput,
    system_instruction: &str,
    observations: Option<ToolObservations>,
    retrieved: Option<&RetrievalResult>,
    feedback: Option<&str>,
) -> PromptBundle {
    PromptBundle {
        system_instruction: system_instruction.trim().to_string(),
        patient_profile: patient_profile(case),
        clinical_vars: case.clinical_vars,
        observations: observations.filter(|o| !o.is_empty()),
        retrieved_cases: retrieved.map(|r| {
            r.hits
                .iter()
                .map(|h| RetrievedCase {
                    chunk_id: h.chunk.chunk_id.clone(),
                    score: h.score,
                    text: h.chunk.text.clone(),
                })
                .collect()
        }),
        user_query: case.clinician_query.trim().to_string(),
        feedback: feedback.map(|f| f.trim().to_string()).filter(|f| !f.is_empty()),
    }
}

impl PromptBundle {
    pub fn render(&self) -> String {
        let mut out = format!("SYSTEM:\n{}\n\nPATIENT PROFILE:\n{}\n\n", self.system_instruction, self.patient_profile);
        match &self.observations {
            Some(o) => out.push_str(&format!("OBSERVATIONS:\n{}\n\n", o.render())),
            None => out.push_str("OBSERVATIONS: none\n\n"),
        }
        match self.retrieved_cases.as_deref() {
            Some(cases) if !cases.is_empty() => {
                out.push_str("RETRIEVED CASES:\n");
                for c in cases {
                    out.push_str(&format!("[{} score={:.4}] {}\n", c.chunk_id, c.score, c.text));
                }
                out.push('\n');
            }
            _ => out.push_str("RETRIEVED CASES: none\n\n"),
        }
        out.push_str(&format!("QUERY:\n{}\n", self.user_query));
        if let Some(fb) = &self.feedback {
            out.push_str(&format!("FEEDBACK FROM VERIFICATION:\n{fb}\n"));
        }
        out
    }

    pub fn token_count(&self) -> usize {
        self.render().split_whitespace().count()
    }
}

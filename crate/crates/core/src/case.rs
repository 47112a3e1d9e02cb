//! Case documents: the per-patient input tuple of volume, record text and query.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CaseError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("malformed case document: {0}")]
    MalformedDocument(String),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },
}

/// Clinical covariates fused with the radiomics signature by the dose model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClinicalVariables {
    /// kg/m²
    pub bmi: f64,
    pub abdominal_wall_thickness_mm: f64,
    pub preop_score: f64,
    /// years
    pub age: f64,
}

impl ClinicalVariables {
    pub const NAMES: [&'static str; 4] = ["bmi", "abdominal_wall_thickness_mm", "preop_score", "age"];

    pub fn as_array(&self) -> [f64; 4] {
        [self.bmi, self.abdominal_wall_thickness_mm, self.preop_score, self.age]
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        for (name, v) in Self::NAMES.iter().zip(self.as_array()) {
            if !v.is_finite() {
                return Err(invalid(&format!("clinical_vars.{name}"), "not finite"));
            }
        }
        if !(self.bmi > 10.0 && self.bmi < 80.0) {
            return Err(invalid("clinical_vars.bmi", "must lie in (10, 80)"));
        }
        if self.abdominal_wall_thickness_mm < 0.0 {
            return Err(invalid("clinical_vars.abdominal_wall_thickness_mm", "negative"));
        }
        if self.preop_score < 0.0 {
            return Err(invalid("clinical_vars.preop_score", "negative"));
        }
        if self.age < 0.0 {
            return Err(invalid("clinical_vars.age", "negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseInput {
    pub case_id: String,
    pub volume_ref: PathBuf,
    pub ehr_text: String,
    pub clinician_query: String,
    pub clinical_vars: ClinicalVariables,
    #[serde(default)]
    pub oar_refs: Vec<PathBuf>,
    /// Precomputed lesion mask; when present segmentation is skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_ref: Option<PathBuf>,
    /// Segmentation prompt in the `auto | click:… | bbox:…` grammar; autonomy when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_prompt: Option<String>,
}

const REQUIRED: [&str; 5] = ["case_id", "volume_ref", "ehr_text", "clinician_query", "clinical_vars"];

pub fn parse_case(text: &str) -> Result<CaseInput, CaseError> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| CaseError::MalformedDocument(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| CaseError::MalformedDocument("top level is not an object".into()))?;
    for key in REQUIRED {
        if obj.get(key).is_none_or(Value::is_null) {
            return Err(CaseError::MissingField(key.to_string()));
        }
    }
    let vars = obj["clinical_vars"]
        .as_object()
        .ok_or_else(|| CaseError::MalformedDocument("clinical_vars is not an object".into()))?;
    for key in ClinicalVariables::NAMES {
        if vars.get(key).is_none_or(Value::is_null) {
            return Err(CaseError::MissingField(format!("clinical_vars.{key}")));
        }
    }
    let case: CaseInput =
        serde_json::from_value(doc).map_err(|e| CaseError::MalformedDocument(e.to_string()))?;
    case.validate()?;
    Ok(case)
}

pub fn serialize_case(case: &CaseInput) -> String {
    serde_json::to_string_pretty(case).expect("case documents always serialize")
}

impl CaseInput {
    pub fn validate(&self) -> Result<(), CaseError> {
        if self.case_id.trim().is_empty() {
            return Err(invalid("case_id", "empty"));
        }
        if self.case_id.contains(['/', '\\']) || self.case_id.starts_with('.') {
            return Err(invalid("case_id", "must be usable as a directory name"));
        }
        self.clinical_vars.validate()
    }
}

fn invalid(field: &str, reason: &str) -> CaseError {
    CaseError::InvalidValue {
        field: field.into(),
        reason: reason.into(),
    }
}

//! Quantification layer: reproducibility filtering, sparse feature selection,
//! the boosted dose regressor and its evaluation.

mod auc;
mod boost;
mod icc;
mod lasso;
mod table;
pub mod train;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::ClinicalVariables;
use crate::radiomics::{FeatureVector, RadiomicsError};

pub use auc::roc_auc;
pub use boost::{boosted_fit, BoostFit, BoostParams, BoostedEnsemble, TreeNode};
pub use icc::{icc_1_1, icc_filter, ICC_THRESHOLD};
pub use lasso::{lambda_grid, lambda_max, lasso_cv, lasso_fit, lasso_path, soft_threshold, LassoFit, Standardizer};
pub use table::TrainingTable;
pub use train::{train_reference_model, TrainingReport};

#[derive(Debug, Error)]
pub enum DoseError {
    #[error("ICC needs at least two replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("both classes must be present")]
    SingleClass,
    #[error("inconsistent shape: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Radiomics(#[from] RadiomicsError),
    #[error(transparent)]
    Seg(#[from] crate::segtool::SegError),
}

pub type Result<T> = std::result::Result<T, DoseError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoseBand {
    Low,
    Medium,
    High,
}

impl fmt::Display for DoseBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DoseBand::Low => "low",
            DoseBand::Medium => "medium",
            DoseBand::High => "high",
        })
    }
}

impl std::str::FromStr for DoseBand {
    type Err = DoseError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(DoseBand::Low),
            "medium" => Ok(DoseBand::Medium),
            "high" => Ok(DoseBand::High),
            other => Err(DoseError::BadParam(format!("unknown dose band {other:?}"))),
        }
    }
}

/// Band cut points in joules: `low` below `medium_from`, `high` from `high_from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseBands {
    pub medium_from: f64,
    pub high_from: f64,
}

impl Default for DoseBands {
    fn default() -> Self {
        DoseBands {
            medium_from: 30_000.0,
            high_from: 50_000.0,
        }
    }
}

impl DoseBands {
    pub fn classify(&self, dose_j: f64) -> DoseBand {
        if dose_j >= self.high_from {
            DoseBand::High
        } else if dose_j >= self.medium_from {
            DoseBand::Medium
        } else {
            DoseBand::Low
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseObservation {
    pub predicted_dose_j: f64,
    pub band: DoseBand,
    pub model_version: String,
}

impl fmt::Display for DoseObservation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DOSE: predicted_J={:.1}; band={}", self.predicted_dose_j, self.band)
    }
}

pub const MODEL_FORMAT: u32 = 1;

/// Fitted dose regressor over `selected_features ‖ clinical_features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseModel {
    pub format: u32,
    pub model_version: String,
    pub selected_features: Vec<String>,
    pub clinical_features: Vec<String>,
    pub ensemble: BoostedEnsemble,
    pub bands: DoseBands,
}

impl DoseModel {
    pub fn new(version: impl Into<String>, selected_features: Vec<String>, ensemble: BoostedEnsemble, bands: DoseBands) -> Self {
        DoseModel {
            format: MODEL_FORMAT,
            model_version: version.into(),
            selected_features,
            clinical_features: ClinicalVariables::NAMES.iter().map(|s| s.to_string()).collect(),
            ensemble,
            bands,
        }
    }

    /// Pick the selected signature out of a full feature vector.
    pub fn select(&self, features: &FeatureVector) -> Result<Vec<f64>> {
        self.selected_features
            .iter()
            .map(|name| {
                features
                    .get(name)
                    .ok_or_else(|| DoseError::SchemaMismatch(format!("feature {name} missing")))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: DoseModel = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT {
            return Err(DoseError::SchemaMismatch(format!("unsupported model format {}", model.format)));
        }
        let width = model.selected_features.len() + model.clinical_features.len();
        if model.ensemble.max_feature().is_some_and(|f| f >= width) {
            return Err(DoseError::SchemaMismatch("tree splits on a feature outside the schema".into()));
        }
        Ok(model)
    }
}

/// ŷ = base + η·Σ trees over `selected ‖ clinical`, banded by the model's thresholds.
pub fn predict_dose(model: &DoseModel, selected: &[f64], clinical: &ClinicalVariables) -> Result<DoseObservation> {
    if selected.len() != model.selected_features.len() {
        return Err(DoseError::SchemaMismatch(format!(
            "expected {} selected features, got {}",
            model.selected_features.len(),
            selected.len()
        )));
    }
    let mut row = selected.to_vec();
    row.extend(clinical.as_array());
    if row.iter().any(|v| !v.is_finite()) {
        return Err(DoseError::NonFiniteInput("prediction input"));
    }
    let dose = model.ensemble.predict(&row);
    Ok(DoseObservation {
        predicted_dose_j: dose,
        band: model.bands.classify(dose),
        model_version: model.model_version.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clinical() -> ClinicalVariables {
        ClinicalVariables {
            bmi: 22.0,
            abdominal_wall_thickness_mm: 20.0,
            preop_score: 2.0,
            age: 41.0,
        }
    }

    fn two_tree_model() -> DoseModel {
        let stump = |feature, threshold, l, r| TreeNode::Split {
            feature,
            threshold,
            left: Box::new(TreeNode::Leaf { value: l }),
            right: Box::new(TreeNode::Leaf { value: r }),
        };
        let ensemble = BoostedEnsemble {
            base: 40_000.0,
            learning_rate: 0.5,
            trees: vec![stump(0, 1.0, -1000.0, 2000.0), stump(2, 15.0, 300.0, -600.0)],
        };
        DoseModel::new("test", vec!["f".into()], ensemble, DoseBands::default())
    }

    #[test]
    fn hand_traversal() {
        let m = two_tree_model();
        // f=2 > 1 → +2000; wall 20 > 15 → −600
        let obs = predict_dose(&m, &[2.0], &clinical()).unwrap();
        assert_eq!(obs.predicted_dose_j, 40_000.0 + 0.5 * (2000.0 - 600.0));
        assert_eq!(obs.band, DoseBand::Medium);
        assert_eq!(obs.to_string(), "DOSE: predicted_J=40700.0; band=medium");
        assert_eq!(obs, predict_dose(&m, &[2.0], &clinical()).unwrap());
    }

    #[test]
    fn schema_checks() {
        let m = two_tree_model();
        assert!(matches!(predict_dose(&m, &[], &clinical()), Err(DoseError::SchemaMismatch(_))));
        let back = DoseModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let bad = m.to_json().replace("\"feature\": 2", "\"feature\": 9");
        assert!(DoseModel::from_json(&bad).is_err());
    }

    #[test]
    fn bands() {
        let b = DoseBands::default();
        assert_eq!(b.classify(29_999.0), DoseBand::Low);
        assert_eq!(b.classify(30_000.0), DoseBand::Medium);
        assert_eq!(b.classify(50_000.0), DoseBand::High);
    }
}

use serde::{Deserialize, Serialize};

use super::{OptimizerError, Violation, ViolationKind};
use crate::predicate::{Bound, Comparator, Predicate};
use crate::strategy::{is_plan_key, TreatmentPlan};

/// A hard physical limit on one plan field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstraint {
    pub id: String,
    pub field: String,
    pub comparator: Comparator,
    pub bound: Bound,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    pub message: String,
}

impl PhysicalConstraint {
    pub fn predicate(&self) -> Predicate {
        Predicate::compare(&self.field, self.comparator, self.bound.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub constraints: Vec<PhysicalConstraint>,
}

fn limit(id: &str, field: &str, cmp: Comparator, bound: f64, unit: &str, message: &str) -> PhysicalConstraint {
    PhysicalConstraint {
        id: id.into(),
        field: field.into(),
        comparator: cmp,
        bound: Bound::Number(bound),
        unit: Some(unit.into()),
        message: message.into(),
    }
}

impl Default for ConstraintSet {
    fn default() -> Self {
        ConstraintSet {
            constraints: vec![
                limit("P-POWER", "acoustic_power", Comparator::Le, 400.0, "W", "acoustic power exceeds the 400 W transducer limit"),
                limit("P-ENERGY", "predicted_total_energy", Comparator::Le, 60_000.0, "J", "total energy exceeds the 60 kJ session limit"),
                limit("P-MARGIN", "safety_margin", Comparator::Ge, 10.0, "mm", "safety margin below 10 mm"),
                limit("P-COOLING", "cooling_interval", Comparator::Ge, 5.0, "s", "cooling interval shorter than 5 s"),
            ],
        }
    }
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        for c in &self.constraints {
            if !is_plan_key(&c.field) {
                return Err(OptimizerError::UnknownPlanField {
                    constraint: c.id.clone(),
                    field: c.field.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, OptimizerError> {
        let set: ConstraintSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constraints serialize")
    }
}

/// s_task = ∏ 𝟙(constraint holds); failing constraints become violations.
pub fn check_task_feasibility(plan: &TreatmentPlan, set: &ConstraintSet) -> Result<(bool, Vec<Violation>), OptimizerError> {
    set.validate()?;
    let mut violations = Vec::new();
    for c in &set.constraints {
        let pred = c.predicate();
        if !pred.evaluate(plan)? {
            violations.push(Violation {
                id: c.id.clone(),
                kind: ViolationKind::Physical,
                message: c.message.clone(),
                requirement: Some(pred.to_string()),
            });
        }
    }
    Ok((violations.is_empty(), violations))
}

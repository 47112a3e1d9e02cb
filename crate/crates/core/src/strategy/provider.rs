use serde::{Deserialize, Serialize};

use super::plan::{AblationStrategy, PatientPosition, TreatmentPlan};
use super::{PromptBundle, StrategyError};
use crate::dosemodel::DoseBand;
use crate::predicate::{Bound, Comparator, Predicate};

/// Plan generator behind the strategy agent. Output must follow the
/// REASONING / PLAN text contract.
pub trait PlanProvider: Send + Sync {
    fn name(&self) -> &str;
    /// Whether concurrent `generate` calls are safe.
    fn reentrant(&self) -> bool {
        true
    }
    fn generate(&self, bundle: &PromptBundle) -> Result<String, StrategyError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    /// mm; the margin is never below 10 mm.
    pub margin_floor: f64,
    /// W per dose band.
    pub power_low: f64,
    pub power_medium: f64,
    pub power_high: f64,
    /// s
    pub cooling_interval: f64,
    pub patient_position: PatientPosition,
    /// J; used when no dose observation is available.
    pub fallback_energy: f64,
    pub max_prompt_tokens: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            margin_floor: 10.0,
            power_low: 250.0,
            power_medium: 320.0,
            power_high: 420.0,
            cooling_interval: 5.0,
            patient_position: PatientPosition::Prone,
            fallback_energy: 40_000.0,
            max_prompt_tokens: 8_192,
        }
    }
}

pub const MIN_MARGIN_MM: f64 = 10.0;

/// Deterministic rule-table generator. Verifier hints of the form
/// `[field cmp value]` in the feedback are applied as overrides.
#[derive(Debug, Clone, Default)]
pub struct ReferenceProvider {
    pub config: ReferenceConfig,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Bracketed requirement at the end of each feedback line.
pub fn feedback_hints(feedback: &str) -> Vec<Predicate> {
    feedback
        .lines()
        .filter_map(|line| {
            let open = line.rfind('[')?;
            let close = open + line[open..].find(']')?;
            Predicate::parse(&line[open + 1..close]).ok()
        })
        .collect()
}

impl ReferenceProvider {
    pub fn new(config: ReferenceConfig) -> Self {
        ReferenceProvider { config }
    }

    pub fn plan(&self, bundle: &PromptBundle) -> Result<TreatmentPlan, StrategyError> {
        let tokens = bundle.token_count();
        if tokens > self.config.max_prompt_tokens {
            return Err(StrategyError::TokenBudget {
                used: tokens,
                limit: self.config.max_prompt_tokens,
            });
        }
        let cfg = &self.config;
        let mut why = Vec::new();
        let seg = bundle.observations.as_ref().and_then(|o| o.seg.as_ref());
        let dose = bundle.observations.as_ref().and_then(|o| o.dose.as_ref());
        if bundle.observations.is_none() {
            why.push("no tool observations; lesion layout and dose fall back to defaults".to_string());
        }

        let mut lesions: Vec<(String, Option<f64>)> = seg
            .map(|s| s.lesions.iter().map(|l| (l.id.clone(), l.oar_min_distance_mm)).collect())
            .unwrap_or_default();
        if lesions.is_empty() {
            lesions.push(("L1".into(), None));
        }
        let multiplicity = seg.map_or(1, |s| s.multiplicity.max(1));
        let band = dose.map_or(DoseBand::Medium, |d| d.band);

        let mut strategy = match (multiplicity >= 2, band) {
            (false, DoseBand::High) => AblationStrategy::PeripheryToCenter,
            (false, _) => AblationStrategy::CenterToPeriphery,
            (true, DoseBand::High) => AblationStrategy::Staged,
            (true, _) => AblationStrategy::CenterToPeriphery,
        };
        why.push(format!("strategy: multiplicity {multiplicity}, dose band {band} gives {}", strategy.as_str()));

        lesions.sort_by(|a, b| {
            let da = a.1.unwrap_or(f64::INFINITY);
            let db = b.1.unwrap_or(f64::INFINITY);
            db.total_cmp(&da).then_with(|| a.0.cmp(&b.0))
        });
        let order: Vec<String> = lesions.iter().map(|l| l.0.clone()).collect();
        if order.len() > 1 {
            why.push(format!("order: lesions farthest from organs at risk first: {}", order.join(", ")));
        }

        let mut margin = cfg.margin_floor.max(MIN_MARGIN_MM);
        let mut power = match band {
            DoseBand::Low => cfg.power_low,
            DoseBand::Medium => cfg.power_medium,
            DoseBand::High => cfg.power_high,
        };
        why.push(format!("power: {band} dose band maps to {power} W"));
        let mut energy = dose.map_or(cfg.fallback_energy, |d| round1(d.predicted_dose_j));
        let mut cooling = cfg.cooling_interval;
        let mut position = cfg.patient_position;

        for hint in bundle.feedback.as_deref().map(feedback_hints).unwrap_or_default() {
            let Predicate::Compare { field, cmp, bound } = &hint else { continue };
            let applied = match (field.as_str(), bound) {
                ("safety_margin", Bound::Number(b)) => adjust(&mut margin, *cmp, *b),
                ("acoustic_power", Bound::Number(b)) => adjust(&mut power, *cmp, *b),
                ("predicted_total_energy", Bound::Number(b)) => adjust(&mut energy, *cmp, *b),
                ("cooling_interval", Bound::Number(b)) => adjust(&mut cooling, *cmp, *b),
                ("ablation_strategy", Bound::Text(t)) if *cmp == Comparator::Eq => t.parse().map(|s| strategy = s).is_ok(),
                ("ablation_strategy", Bound::Set(set)) if *cmp == Comparator::In => {
                    set.iter().any(|s| s == strategy.as_str())
                        || set.iter().find_map(|t| t.parse().ok()).map(|s| strategy = s).is_some()
                }
                ("patient_position", Bound::Text(t)) if *cmp == Comparator::Eq => t.parse().map(|p| position = p).is_ok(),
                _ => false,
            };
            if applied {
                why.push(format!("feedback: enforce {hint}"));
            } else {
                why.push(format!("feedback: cannot act on {hint}"));
            }
        }

        let duration = round1(energy / power);
        why.push(format!("duration: {energy} J at {power} W is {duration} s"));
        let warnings: Vec<String> = lesions
            .iter()
            .filter_map(|(id, d)| {
                let d = (*d)?;
                (d < 2.0 * margin).then(|| format!("{id}: organ at risk {d:.2} mm away, inside twice the {margin} mm margin"))
            })
            .collect();
        if !warnings.is_empty() {
            why.push(format!("warnings: {} lesion(s) near an organ at risk", warnings.len()));
        }

        Ok(TreatmentPlan {
            reasoning: why.iter().map(|l| format!("- {l}")).collect::<Vec<_>>().join("\n"),
            target_lesion_id: order[0].clone(),
            ablation_strategy: strategy,
            acoustic_power: power,
            sonication_duration: duration,
            cooling_interval: cooling,
            predicted_total_energy: energy,
            treatment_order: order,
            patient_position: position,
            safety_margin: margin,
            intraoperative_warnings: warnings,
        })
    }
}

/// Moves `value` just enough to satisfy `value cmp bound`.
fn adjust(value: &mut f64, cmp: Comparator, bound: f64) -> bool {
    match cmp {
        Comparator::Ge => *value = value.max(bound),
        Comparator::Gt if *value <= bound => *value = bound + 1.0,
        Comparator::Le => *value = value.min(bound),
        Comparator::Lt if *value >= bound => *value = (bound - 1.0).max(0.0),
        Comparator::Eq => *value = bound,
        Comparator::Gt | Comparator::Lt => {}
        Comparator::Ne | Comparator::In => return false,
    }
    true
}

impl PlanProvider for ReferenceProvider {
    fn name(&self) -> &str {
        "reference-rule-table"
    }

    fn generate(&self, bundle: &PromptBundle) -> Result<String, StrategyError> {
        Ok(self.plan(bundle)?.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::ClinicalVariables;
    use crate::dosemodel::DoseObservation;
    use crate::segtool::{LesionDescriptor, SegObservation};
    use crate::strategy::{parse_plan, ToolObservations};

    fn lesion(id: &str, d: Option<f64>) -> LesionDescriptor {
        LesionDescriptor {
            id: id.into(),
            volume_mm3: 1000.0,
            centroid_mm: [0.0; 3],
            bbox_min: [0; 3],
            bbox_max: [0; 3],
            oar_min_distance_mm: d,
        }
    }

    fn bundle(lesions: Vec<LesionDescriptor>, band: DoseBand, feedback: Option<&str>) -> PromptBundle {
        let seg = SegObservation {
            mask_ref: None,
            lesion_volume_mm3: 1000.0 * lesions.len() as f64,
            centroid_mm: [0.0; 3],
            bbox_min: [0; 3],
            bbox_max: [0; 3],
            oar_min_distance_mm: vec![lesions.iter().filter_map(|l| l.oar_min_distance_mm).reduce(f64::min)],
            multiplicity: lesions.len(),
            lesions,
        };
        PromptBundle {
            system_instruction: "policy".into(),
            patient_profile: "profile".into(),
            clinical_vars: ClinicalVariables { bmi: 22.0, abdominal_wall_thickness_mm: 20.0, preop_score: 1.0, age: 40.0 },
            observations: Some(ToolObservations {
                seg: Some(seg),
                dose: Some(DoseObservation { predicted_dose_j: 40_000.0, band, model_version: "m".into() }),
            }),
            retrieved_cases: None,
            user_query: "plan".into(),
            feedback: feedback.map(str::to_string),
        }
    }

    #[test]
    fn single_far_lesion() {
        let p = ReferenceProvider::default().plan(&bundle(vec![lesion("L1", Some(40.0))], DoseBand::Medium, None)).unwrap();
        assert_eq!(p.ablation_strategy, AblationStrategy::CenterToPeriphery);
        assert!(p.intraoperative_warnings.is_empty());
        assert_eq!(p.safety_margin, 10.0);
        assert_eq!(p.sonication_duration, 125.0);
    }

    #[test]
    fn farther_lesion_first_and_near_warning() {
        let b = bundle(vec![lesion("L1", Some(8.0)), lesion("L2", Some(30.0))], DoseBand::High, None);
        let text = ReferenceProvider::default().generate(&b).unwrap();
        let p = parse_plan(&text).unwrap();
        assert_eq!(p.treatment_order, vec!["L2", "L1"]);
        assert_eq!(p.target_lesion_id, "L2");
        assert_eq!(p.ablation_strategy, AblationStrategy::Staged);
        assert_eq!(p.intraoperative_warnings.len(), 1);
        assert_eq!(text, ReferenceProvider::default().generate(&b).unwrap());
    }

    #[test]
    fn hints_override() {
        let fb = "Violation of G-MARGIN: too close [safety_margin >= 15]\nViolation of P-POWER: hot [acoustic_power <= 400]";
        let p = ReferenceProvider::default().plan(&bundle(vec![lesion("L1", Some(8.0))], DoseBand::High, Some(fb))).unwrap();
        assert_eq!(p.safety_margin, 15.0);
        assert_eq!(p.acoustic_power, 400.0);
        assert_eq!(p.sonication_duration, 100.0);
    }
}

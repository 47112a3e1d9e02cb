use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StrategyError;
use crate::predicate::{Facts, FieldValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationStrategy {
    CenterToPeriphery,
    PeripheryToCenter,
    Staged,
}

impl AblationStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationStrategy::CenterToPeriphery => "center_to_periphery",
            AblationStrategy::PeripheryToCenter => "periphery_to_center",
            AblationStrategy::Staged => "staged",
        }
    }
}

impl FromStr for AblationStrategy {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "center_to_periphery" => Ok(AblationStrategy::CenterToPeriphery),
            "periphery_to_center" => Ok(AblationStrategy::PeripheryToCenter),
            "staged" => Ok(AblationStrategy::Staged),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatientPosition {
    Supine,
    Prone,
}

impl PatientPosition {
    pub fn as_str(self) -> &'static str {
        match self {
            PatientPosition::Supine => "supine",
            PatientPosition::Prone => "prone",
        }
    }
}

impl FromStr for PatientPosition {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "supine" => Ok(PatientPosition::Supine),
            "prone" => Ok(PatientPosition::Prone),
            _ => Err(()),
        }
    }
}

/// Plan keys in their fixed output order.
pub const PLAN_KEYS: [&str; 10] = [
    "target_lesion_id",
    "ablation_strategy",
    "acoustic_power",
    "sonication_duration",
    "cooling_interval",
    "predicted_total_energy",
    "treatment_order",
    "patient_position",
    "safety_margin",
    "intraoperative_warnings",
];

/// Reasoning trace plus the ten plan parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentPlan {
    pub reasoning: String,
    pub target_lesion_id: String,
    pub ablation_strategy: AblationStrategy,
    /// W
    pub acoustic_power: f64,
    /// s
    pub sonication_duration: f64,
    /// s
    pub cooling_interval: f64,
    /// J
    pub predicted_total_energy: f64,
    pub treatment_order: Vec<String>,
    pub patient_position: PatientPosition,
    /// mm
    pub safety_margin: f64,
    pub intraoperative_warnings: Vec<String>,
}

impl TreatmentPlan {
    pub fn value(&self, key: &str) -> Option<FieldValue> {
        Some(match key {
            "target_lesion_id" => FieldValue::Text(self.target_lesion_id.clone()),
            "ablation_strategy" => FieldValue::Text(self.ablation_strategy.as_str().into()),
            "acoustic_power" => FieldValue::Number(self.acoustic_power),
            "sonication_duration" => FieldValue::Number(self.sonication_duration),
            "cooling_interval" => FieldValue::Number(self.cooling_interval),
            "predicted_total_energy" => FieldValue::Number(self.predicted_total_energy),
            "treatment_order" => FieldValue::List(self.treatment_order.clone()),
            "patient_position" => FieldValue::Text(self.patient_position.as_str().into()),
            "safety_margin" => FieldValue::Number(self.safety_margin),
            "intraoperative_warnings" => FieldValue::List(self.intraoperative_warnings.clone()),
            _ => return None,
        })
    }

    /// The PLAN block alone.
    pub fn plan_block(&self) -> String {
        let mut out = String::from("PLAN:");
        for key in PLAN_KEYS {
            let v = match self.value(key).expect("every key has a value") {
                FieldValue::List(items) => serde_json::to_string(&items).expect("strings serialize"),
                other => other.to_string(),
            };
            out.push_str(&format!("\n{key}: {v}"));
        }
        out
    }

    pub fn render(&self) -> String {
        format!("REASONING:\n{}\n\n{}\n", self.reasoning.trim_end(), self.plan_block())
    }
}

impl fmt::Display for TreatmentPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Facts for TreatmentPlan {
    fn fact(&self, name: &str) -> Option<FieldValue> {
        self.value(name)
    }
}

pub fn is_plan_key(key: &str) -> bool {
    PLAN_KEYS.contains(&key)
}

fn number(key: &str, v: &str) -> Result<f64, StrategyError> {
    let x: f64 = v.parse().map_err(|_| StrategyError::BadValue(key.into()))?;
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(StrategyError::BadValue(key.into()))
    }
}

fn list(key: &str, v: &str) -> Result<Vec<String>, StrategyError> {
    serde_json::from_str(v).map_err(|_| StrategyError::BadValue(key.into()))
}

/// Inverse of [`TreatmentPlan::render`].
pub fn parse_plan(text: &str) -> Result<TreatmentPlan, StrategyError> {
    let r_at = text.find("REASONING:").ok_or(StrategyError::MissingBlock("REASONING"))?;
    let p_at = text[r_at..]
        .find("\nPLAN:")
        .map(|i| r_at + i + 1)
        .ok_or(StrategyError::MissingBlock("PLAN"))?;
    let reasoning = text[r_at + "REASONING:".len()..p_at].trim().to_string();

    let mut values: Vec<Option<String>> = vec![None; PLAN_KEYS.len()];
    for line in text[p_at + "PLAN:".len()..].lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| StrategyError::BadLine(line.to_string()))?;
        let key = key.trim();
        let slot = PLAN_KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| StrategyError::UnknownKey(key.to_string()))?;
        if values[slot].is_some() {
            return Err(StrategyError::DuplicateKey(key.to_string()));
        }
        values[slot] = Some(value.trim().to_string());
    }
    let get = |i: usize| values[i].clone().ok_or(StrategyError::MissingKey(PLAN_KEYS[i].into()));

    let order = list("treatment_order", &get(6)?)?;
    let mut seen = HashSet::new();
    if order.is_empty() || !order.iter().all(|id| seen.insert(id.clone())) {
        return Err(StrategyError::BadValue("treatment_order".into()));
    }
    let target = get(0)?;
    if target.is_empty() {
        return Err(StrategyError::BadValue("target_lesion_id".into()));
    }
    Ok(TreatmentPlan {
        reasoning,
        target_lesion_id: target,
        ablation_strategy: get(1)?.parse().map_err(|_| StrategyError::BadValue("ablation_strategy".into()))?,
        acoustic_power: number("acoustic_power", &get(2)?)?,
        sonication_duration: number("sonication_duration", &get(3)?)?,
        cooling_interval: number("cooling_interval", &get(4)?)?,
        predicted_total_energy: number("predicted_total_energy", &get(5)?)?,
        treatment_order: order,
        patient_position: get(7)?.parse().map_err(|_| StrategyError::BadValue("patient_position".into()))?,
        safety_margin: number("safety_margin", &get(8)?)?,
        intraoperative_warnings: list("intraoperative_warnings", &get(9)?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> TreatmentPlan {
        TreatmentPlan {
            reasoning: "- single lesion\n- medium band".into(),
            target_lesion_id: "L1".into(),
            ablation_strategy: AblationStrategy::CenterToPeriphery,
            acoustic_power: 320.0,
            sonication_duration: 127.3,
            cooling_interval: 5.0,
            predicted_total_energy: 40_736.5,
            treatment_order: vec!["L1".into()],
            patient_position: PatientPosition::Prone,
            safety_margin: 10.0,
            intraoperative_warnings: vec!["L1: bowel 8.00 mm away".into()],
        }
    }

    #[test]
    fn round_trip() {
        let p = sample();
        let text = p.render();
        assert!(text.starts_with("REASONING:\n- single lesion"));
        assert!(text.contains("\n\nPLAN:\ntarget_lesion_id: L1\n"));
        assert!(text.contains("treatment_order: [\"L1\"]"));
        assert_eq!(parse_plan(&text).unwrap(), p);
    }

    #[test]
    fn missing_key_and_bad_value() {
        let text = sample().render();
        let no_cooling: String = text.lines().filter(|l| !l.starts_with("cooling_interval")).collect::<Vec<_>>().join("\n");
        assert_eq!(parse_plan(&no_cooling), Err(StrategyError::MissingKey("cooling_interval".into())));
        let bad = text.replace("acoustic_power: 320", "acoustic_power: loud");
        assert_eq!(parse_plan(&bad), Err(StrategyError::BadValue("acoustic_power".into())));
        assert_eq!(parse_plan("PLAN:\n"), Err(StrategyError::MissingBlock("REASONING")));
        let dup = text.replace("safety_margin: 10", "safety_margin: 10\nsafety_margin: 12");
        assert_eq!(parse_plan(&dup), Err(StrategyError::DuplicateKey("safety_margin".into())));
    }
}

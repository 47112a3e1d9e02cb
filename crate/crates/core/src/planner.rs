//! Task decomposition: compile a case and configuration into an ordered action plan.
//!
//! Phases run perception → quantification → reasoning → verification. Each
//! disabled agent drops its steps; plan generation is always present.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::case::CaseInput;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub enable_executor: bool,
    pub enable_optimizer: bool,
    pub enable_memory: bool,
    /// Source id of the meta-policy document in the knowledge store.
    pub system_policy_id: String,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            enable_executor: true,
            enable_optimizer: true,
            enable_memory: true,
            system_policy_id: DEFAULT_POLICY_ID.to_string(),
        }
    }
}

pub const DEFAULT_POLICY_ID: &str = "fuas-system-policy";

impl PlannerConfig {
    pub fn no_executor() -> Self {
        PlannerConfig {
            enable_executor: false,
            ..Default::default()
        }
    }

    pub fn no_optimizer() -> Self {
        PlannerConfig {
            enable_optimizer: false,
            ..Default::default()
        }
    }

    pub fn no_memory() -> Self {
        PlannerConfig {
            enable_memory: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Agent {
    Planner,
    Executor,
    Strategy,
    Optimizer,
}

impl Agent {
    pub const ALL: [Agent; 4] = [Agent::Planner, Agent::Executor, Agent::Strategy, Agent::Optimizer];
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tool {
    Segment,
    /// Reuse a precomputed lesion mask instead of segmenting.
    LoadMask,
    PredictDose,
    GeneratePlan,
    VerifyPlan,
}

impl Tool {
    /// Phase rank; a step may only follow steps of lower or equal rank.
    fn phase(self) -> u8 {
        match self {
            Tool::Segment | Tool::LoadMask => 0,
            Tool::PredictDose => 1,
            Tool::GeneratePlan => 2,
            Tool::VerifyPlan => 3,
        }
    }

    pub fn agent(self) -> Agent {
        match self {
            Tool::Segment | Tool::LoadMask | Tool::PredictDose => Agent::Executor,
            Tool::GeneratePlan => Agent::Strategy,
            Tool::VerifyPlan => Agent::Optimizer,
        }
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionStep {
    pub agent: Agent,
    pub tool: Tool,
    pub args: BTreeMap<String, String>,
    pub depends_on: Vec<usize>,
}

impl ActionStep {
    fn new(tool: Tool, depends_on: Vec<usize>) -> Self {
        ActionStep {
            agent: tool.agent(),
            tool,
            args: BTreeMap::new(),
            depends_on,
        }
    }

    fn arg(mut self, key: &str, value: impl Into<String>) -> Self {
        self.args.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub steps: Vec<ActionStep>,
}

impl ActionPlan {
    pub fn tools(&self) -> Vec<Tool> {
        self.steps.iter().map(|s| s.tool).collect()
    }

    pub fn position(&self, tool: Tool) -> Option<usize> {
        self.steps.iter().position(|s| s.tool == tool)
    }

    pub fn contains(&self, tool: Tool) -> bool {
        self.position(tool).is_some()
    }
}

/// One step per line, as written to the workflow trace log.
impl fmt::Display for ActionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            let args: Vec<String> = s.args.iter().map(|(k, v)| format!("{k}={v:?}")).collect();
            let deps: Vec<String> = s.depends_on.iter().map(usize::to_string).collect();
            writeln!(
                f,
                "step {i}: agent={} tool={} args={{{}}} depends_on=[{}]",
                s.agent,
                s.tool,
                args.join(", "),
                deps.join(",")
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanViolation {
    SelfDependency { step: usize },
    ForwardDependency { step: usize, on: usize },
    PhaseOrder { step: usize, tool: Tool, after: Tool },
    AgentMismatch { step: usize },
    MissingGeneratePlan,
    DuplicateTool(Tool),
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::SelfDependency { step } => write!(f, "step {step} depends on itself"),
            PlanViolation::ForwardDependency { step, on } => {
                write!(f, "step {step} depends on later step {on}")
            }
            PlanViolation::PhaseOrder { step, tool, after } => {
                write!(f, "step {step} runs {tool} after {after}")
            }
            PlanViolation::AgentMismatch { step } => {
                write!(f, "step {step} routes its tool to the wrong agent")
            }
            PlanViolation::MissingGeneratePlan => f.write_str("plan has no GeneratePlan step"),
            PlanViolation::DuplicateTool(t) => write!(f, "tool {t} appears more than once"),
        }
    }
}

/// Pluggable decomposition; the rule compiler is the default.
pub trait Decomposer: Send + Sync {
    fn decompose(&self, case: &CaseInput, cfg: &PlannerConfig) -> ActionPlan;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleCompiler;

impl Decomposer for RuleCompiler {
    fn decompose(&self, case: &CaseInput, cfg: &PlannerConfig) -> ActionPlan {
        decompose(case, cfg)
    }
}

pub fn decompose(case: &CaseInput, cfg: &PlannerConfig) -> ActionPlan {
    let mut steps: Vec<ActionStep> = Vec::new();

    if cfg.enable_executor {
        let perceive = match &case.mask_ref {
            Some(mask) => ActionStep::new(Tool::LoadMask, vec![])
                .arg("mask_ref", mask.display().to_string()),
            None => ActionStep::new(Tool::Segment, vec![])
                .arg("volume_ref", case.volume_ref.display().to_string())
                .arg("prompt", case.segment_prompt.clone().unwrap_or_else(|| "auto".into())),
        };
        steps.push(perceive.arg("oars", case.oar_refs.len().to_string()));
        steps.push(ActionStep::new(Tool::PredictDose, vec![0]));
    }

    let previous = steps.len().checked_sub(1);
    steps.push(
        ActionStep::new(Tool::GeneratePlan, previous.into_iter().collect())
            .arg("policy", cfg.system_policy_id.clone())
            .arg("memory", cfg.enable_memory.to_string()),
    );

    if cfg.enable_optimizer {
        let generate = steps.len() - 1;
        steps.push(
            ActionStep::new(Tool::VerifyPlan, vec![generate])
                .arg("memory", cfg.enable_memory.to_string())
                .arg("top_k", "3"),
        );
    }
    ActionPlan { steps }
}

/// Re-decomposition after a failed verification: the same phases, with the
/// feedback attached to plan generation and executor outputs marked reusable.
pub fn replan(case: &CaseInput, cfg: &PlannerConfig, feedback: &str, round: usize) -> ActionPlan {
    let mut plan = decompose(case, cfg);
    for step in &mut plan.steps {
        match step.tool {
            Tool::Segment | Tool::LoadMask | Tool::PredictDose => {
                step.args.insert("reuse".into(), "true".into());
            }
            Tool::GeneratePlan => {
                step.args.insert("feedback".into(), feedback.to_string());
                step.args.insert("round".into(), round.to_string());
            }
            Tool::VerifyPlan => {}
        }
    }
    plan
}

pub fn validate(plan: &ActionPlan) -> Result<(), Vec<PlanViolation>> {
    let mut out = Vec::new();
    let mut seen = Vec::new();
    for (i, step) in plan.steps.iter().enumerate() {
        if step.agent != step.tool.agent() {
            out.push(PlanViolation::AgentMismatch { step: i });
        }
        for &d in &step.depends_on {
            if d == i {
                out.push(PlanViolation::SelfDependency { step: i });
            } else if d > i {
                out.push(PlanViolation::ForwardDependency { step: i, on: d });
            }
        }
        if seen.contains(&step.tool) {
            out.push(PlanViolation::DuplicateTool(step.tool));
        }
        seen.push(step.tool);
        if let Some(prev) = plan.steps[..i]
            .iter()
            .find(|p| p.tool.phase() > step.tool.phase())
        {
            out.push(PlanViolation::PhaseOrder {
                step: i,
                tool: step.tool,
                after: prev.tool,
            });
        }
    }
    if !plan.contains(Tool::GeneratePlan) {
        out.push(PlanViolation::MissingGeneratePlan);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::ClinicalVariables;

    fn case() -> CaseInput {
        CaseInput {
            case_id: "c".into(),
            volume_ref: "v.rvol".into(),
            ehr_text: "fibroid".into(),
            clinician_query: "plan".into(),
            clinical_vars: ClinicalVariables {
                bmi: 22.0,
                abdominal_wall_thickness_mm: 20.0,
                preop_score: 1.0,
                age: 40.0,
            },
            oar_refs: vec![],
            mask_ref: None,
            segment_prompt: None,
        }
    }

    fn cfg(executor: bool, optimizer: bool, memory: bool) -> PlannerConfig {
        PlannerConfig {
            enable_executor: executor,
            enable_optimizer: optimizer,
            enable_memory: memory,
            system_policy_id: DEFAULT_POLICY_ID.into(),
        }
    }

    #[test]
    fn full_config_phase_order() {
        let plan = decompose(&case(), &PlannerConfig::default());
        assert_eq!(
            plan.tools(),
            vec![Tool::Segment, Tool::PredictDose, Tool::GeneratePlan, Tool::VerifyPlan]
        );
        let deps: Vec<_> = plan.steps.iter().map(|s| s.depends_on.clone()).collect();
        assert_eq!(deps, vec![vec![], vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn ablations_drop_steps() {
        assert_eq!(
            decompose(&case(), &PlannerConfig::no_executor()).tools(),
            vec![Tool::GeneratePlan, Tool::VerifyPlan]
        );
        assert_eq!(
            decompose(&case(), &PlannerConfig::no_optimizer()).tools(),
            vec![Tool::Segment, Tool::PredictDose, Tool::GeneratePlan]
        );
        assert_eq!(decompose(&case(), &cfg(false, false, false)).tools(), vec![Tool::GeneratePlan]);
    }

    #[test]
    fn precomputed_mask_replaces_segmentation() {
        let mut c = case();
        c.mask_ref = Some("lesion.rmsk".into());
        assert_eq!(decompose(&c, &PlannerConfig::default()).steps[0].tool, Tool::LoadMask);
    }

    #[test]
    fn every_config_validates_and_flags_are_monotone() {
        for bits in 0..8u8 {
            let c = cfg(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
            let plan = decompose(&case(), &c);
            assert_eq!(validate(&plan), Ok(()));
            assert_eq!(plan, decompose(&case(), &c));
            for flag in 0..3 {
                let more = bits | (1 << flag);
                let richer = decompose(&case(), &cfg(more & 1 != 0, more & 2 != 0, more & 4 != 0));
                for t in plan.tools() {
                    assert!(richer.contains(t));
                }
            }
        }
    }

    #[test]
    fn validate_catches_order_and_cycles() {
        let mut plan = decompose(&case(), &PlannerConfig::default());
        plan.steps.swap(0, 1);
        plan.steps[0].depends_on = vec![];
        plan.steps[1].depends_on = vec![];
        let errs = validate(&plan).unwrap_err();
        assert!(errs.iter().any(|e| matches!(
            e,
            PlanViolation::PhaseOrder { tool: Tool::Segment, after: Tool::PredictDose, .. }
        )));

        let mut plan = decompose(&case(), &PlannerConfig::default());
        plan.steps[2].depends_on = vec![2];
        assert_eq!(validate(&plan), Err(vec![PlanViolation::SelfDependency { step: 2 }]));
    }

    #[test]
    fn replan_carries_feedback() {
        let plan = replan(&case(), &PlannerConfig::default(), "Violation of G4: margin", 1);
        let gen = &plan.steps[plan.position(Tool::GeneratePlan).unwrap()];
        assert_eq!(gen.args["feedback"], "Violation of G4: margin");
        assert_eq!(plan.steps[0].args["reuse"], "true");
        assert_eq!(validate(&plan), Ok(()));
    }

    #[test]
    fn trace_has_one_line_per_step() {
        let text = decompose(&case(), &PlannerConfig::default()).to_string();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("step 0: agent=Executor tool=Segment"));
    }
}

//! The persisted state of one case's workflow.

use std::time::{SystemTime, UNIX_EPOCH};

use fuas_core::dosemodel::DoseObservation;
use fuas_core::optimizer::{LoopState, VerificationReport};
use fuas_core::planner::{ActionPlan, Agent, PlannerConfig};
use fuas_core::segtool::SegObservation;
use fuas_core::strategy::ToolObservations;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Running,
    Finalized,
    Escalated,
    Approved,
    Rejected,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }

    /// Legal edges of the status graph.
    pub fn can_become(self, next: Status) -> bool {
        use Status::*;
        matches!(
            (self, next),
            (Running, Finalized)
                | (Running, Escalated)
                | (Finalized, Approved)
                | (Finalized, Rejected)
                | (Escalated, Approved)
                | (Escalated, Rejected)
                | (Escalated, Running)
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    /// Content address of the input volume.
    pub volume_ref: Option<String>,
    /// Content addresses of the organ-at-risk masks.
    pub oar_refs: Vec<String>,
    /// Current lesion mask.
    pub mask_ref: Option<String>,
    /// Every mask the case has had, oldest first.
    pub mask_history: Vec<String>,
    pub seg: Option<SegObservation>,
    pub dose: Option<DoseObservation>,
    /// Rendered prompt of every generation round.
    pub prompts: Vec<String>,
    /// Every generated or patched plan text.
    pub plans: Vec<String>,
    pub reports: Vec<VerificationReport>,
}

impl Artifacts {
    pub fn observations(&self) -> Option<ToolObservations> {
        let obs = ToolObservations {
            seg: self.seg.clone(),
            dose: self.dose.clone(),
        };
        (!obs.is_empty()).then_some(obs)
    }
}

/// Per-agent totals for one workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTelemetry {
    pub agent: Agent,
    pub invocations: usize,
    /// s
    pub running_time: f64,
    pub prompt_tokens: usize,
    pub output_tokens: usize,
    pub token_usage: usize,
    pub success: bool,
}

impl AgentTelemetry {
    pub fn new(agent: Agent) -> Self {
        AgentTelemetry {
            agent,
            invocations: 0,
            running_time: 0.0,
            prompt_tokens: 0,
            output_tokens: 0,
            token_usage: 0,
            success: true,
        }
    }

    pub fn add(&mut self, seconds: f64, prompt_tokens: usize, output_tokens: usize, success: bool) {
        self.invocations += 1;
        self.running_time += seconds.max(0.0);
        self.prompt_tokens += prompt_tokens;
        self.output_tokens += output_tokens;
        self.token_usage = self.prompt_tokens + self.output_tokens;
        self.success &= success;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowRecord {
    pub case_id: String,
    pub config: PlannerConfig,
    pub action_plan: ActionPlan,
    pub artifacts: Artifacts,
    pub loop_state: Option<LoopState>,
    pub status: Status,
    /// Set when a step failed and the workflow halted.
    pub error: Option<String>,
    pub telemetry: Vec<AgentTelemetry>,
    pub trace: Vec<String>,
    /// ms since the Unix epoch
    pub created_at: u64,
    pub updated_at: u64,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl WorkflowRecord {
    pub fn new(case_id: &str, config: PlannerConfig) -> Self {
        let now = now_ms();
        WorkflowRecord {
            case_id: case_id.to_string(),
            config,
            action_plan: ActionPlan::default(),
            artifacts: Artifacts::default(),
            loop_state: None,
            status: Status::Running,
            error: None,
            telemetry: Agent::ALL.iter().map(|&a| AgentTelemetry::new(a)).collect(),
            trace: Vec::new(),
            created_at: now,
            updated_at: now,
        }
    }

    pub fn telemetry_mut(&mut self, agent: Agent) -> &mut AgentTelemetry {
        let i = self
            .telemetry
            .iter()
            .position(|t| t.agent == agent)
            .unwrap_or_else(|| {
                self.telemetry.push(AgentTelemetry::new(agent));
                self.telemetry.len() - 1
            });
        &mut self.telemetry[i]
    }

    pub fn telemetry_for(&self, agent: Agent) -> Option<&AgentTelemetry> {
        self.telemetry.iter().find(|t| t.agent == agent)
    }

    /// The plan the workflow ended on, if any was produced.
    pub fn final_plan(&self) -> Option<&str> {
        self.artifacts.plans.last().map(String::as_str)
    }

    /// Feedback of the last verification, when it failed.
    pub fn open_feedback(&self) -> Vec<String> {
        self.artifacts
            .reports
            .last()
            .map(|r| r.feedback_text.lines().map(str::to_string).collect())
            .unwrap_or_default()
    }

    pub fn log(&mut self, agent: Agent, line: impl AsRef<str>) {
        for l in line.as_ref().lines() {
            self.trace.push(format!("[{agent}] {l}"));
        }
    }

    pub fn touch(&mut self) {
        self.updated_at = now_ms();
    }
}

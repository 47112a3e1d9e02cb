use serde::{Deserialize, Serialize};

use super::{OptimizerError, VerificationReport};

pub const T_MAX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoopStatus {
    Running,
    Finalized,
    Escalated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub plan_text: String,
    pub report: VerificationReport,
}

/// Generate, verify, refine. `t` counts regenerations, so a case sees at
/// most `t_max + 1` plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    pub t: usize,
    pub t_max: usize,
    pub history: Vec<Attempt>,
    pub status: LoopStatus,
}

impl Default for LoopState {
    fn default() -> Self {
        LoopState::new(T_MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextAction {
    Finalize,
    TriggerPlanner { feedback: String },
    Escalate,
}

impl LoopState {
    pub fn new(t_max: usize) -> Self {
        LoopState {
            t: 0,
            t_max,
            history: Vec::new(),
            status: LoopStatus::Running,
        }
    }

    pub fn plans_generated(&self) -> usize {
        self.history.len()
    }

    pub fn last(&self) -> Option<&Attempt> {
        self.history.last()
    }
}

/// Records the attempt and decides what happens next.
pub fn reflect_step(state: &mut LoopState, plan_text: String, report: VerificationReport) -> Result<NextAction, OptimizerError> {
    if state.status != LoopStatus::Running {
        return Err(OptimizerError::InvalidState(format!("loop is {:?}", state.status)));
    }
    let passed = report.passed();
    let feedback = report.feedback_text.clone();
    state.history.push(Attempt { plan_text, report });
    Ok(if passed {
        state.status = LoopStatus::Finalized;
        NextAction::Finalize
    } else if state.t < state.t_max {
        state.t += 1;
        NextAction::TriggerPlanner { feedback }
    } else {
        state.status = LoopStatus::Escalated;
        NextAction::Escalate
    })
}

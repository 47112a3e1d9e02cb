//! Strategy agent: prompt assembly, plan generation behind a provider
//! contract, plan parsing and text-similarity scoring.

mod metrics;
mod plan;
mod prompt;
mod provider;

use thiserror::Error;

pub use metrics::{bleu, lcs_len, rouge, RougeScores};
pub use plan::{is_plan_key, parse_plan, AblationStrategy, PatientPosition, TreatmentPlan, PLAN_KEYS};
pub use prompt::{assemble_prompt, patient_profile, PromptBundle, RetrievedCase, ToolObservations, SECTION_HEADERS};
pub use provider::{feedback_hints, PlanProvider, ReferenceConfig, ReferenceProvider, MIN_MARGIN_MM};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StrategyError {
    #[error("output lacks the {0} block")]
    MissingBlock(&'static str),
    #[error("plan lacks key `{0}`")]
    MissingKey(String),
    #[error("bad value for `{0}`")]
    BadValue(String),
    #[error("unknown plan key `{0}`")]
    UnknownKey(String),
    #[error("plan key `{0}` given twice")]
    DuplicateKey(String),
    #[error("plan line is not `key: value`: {0:?}")]
    BadLine(String),
    #[error("prompt has {used} tokens, budget is {limit}")]
    TokenBudget { used: usize, limit: usize },
    #[error("provider failure: {0}")]
    ProviderFailure(String),
}

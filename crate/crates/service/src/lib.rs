//! Runnable planning system: workflow engine, file-based case store, HTTP
//! API and the helpers behind the `fuas` command-line tool.

pub mod demo;
pub mod error;
pub mod http;
pub mod knowledge;
pub mod record;
pub mod service;
pub mod store;
pub mod suite;
pub mod workflow;

use std::path::Path;

use fuas_core::dosemodel::{train_reference_model, DoseModel};

pub use error::{Result, ServiceError};
pub use record::{AgentTelemetry, Artifacts, Status, WorkflowRecord};
pub use service::{SegmentResponse, Service, TelemetrySummary};
pub use store::Store;
pub use workflow::{apply_patch, Engine, ReviewDecision, WorkflowOutcome};

/// Seed of the bundled reference dose model.
pub const REFERENCE_MODEL_SEED: u64 = 1;

/// A saved model, or the reference model trained on the synthetic cohort.
pub fn load_or_train_model(path: Option<&Path>) -> Result<DoseModel> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(error::io(format!("reading {}", p.display())))?;
            Ok(DoseModel::from_json(&text)?)
        }
        None => Ok(train_reference_model(REFERENCE_MODEL_SEED)?.0),
    }
}

/// Engine with reference components and the given (or bundled) knowledge.
pub fn build_engine(model: Option<&Path>, knowledge: Option<&Path>) -> Result<Engine> {
    let memory = match knowledge {
        Some(p) => knowledge::load_knowledge(p)?,
        None => knowledge::default_memory()?,
    };
    Ok(Engine::new(load_or_train_model(model)?, Some(memory)))
}

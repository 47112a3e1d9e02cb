use thiserror::Error;

use crate::record::Status;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown case {0}")]
    UnknownCase(String),
    #[error("case {0} already exists")]
    DuplicateCase(String),
    #[error("cannot {action} a case in status {from:?}")]
    InvalidTransition { from: Status, action: &'static str },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("artifact {0} not found")]
    MissingArtifact(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Case(#[from] fuas_core::CaseError),
    #[error(transparent)]
    Volume(#[from] fuas_core::VolumeError),
    #[error(transparent)]
    Seg(#[from] fuas_core::segtool::SegError),
    #[error(transparent)]
    Dose(#[from] fuas_core::dosemodel::DoseError),
    #[error(transparent)]
    Memory(#[from] fuas_core::memory::MemoryError),
    #[error(transparent)]
    Strategy(#[from] fuas_core::strategy::StrategyError),
    #[error(transparent)]
    Optimizer(#[from] fuas_core::optimizer::OptimizerError),
    #[error(transparent)]
    Radiomics(#[from] fuas_core::radiomics::RadiomicsError),
    #[error("{0}")]
    Workflow(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> ServiceError {
    let context = context.into();
    move |source| ServiceError::Io { context, source }
}

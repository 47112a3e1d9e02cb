//! Closed-loop treatment planning for focused ultrasound ablation.
//!
//! The crate holds every computational piece of the planning loop: volume I/O,
//! task decomposition, segmentation, radiomics, dose modelling, the knowledge
//! memory, plan generation and constraint-aware verification. The `fuas-service`
//! crate binds them into a runnable workflow.

pub mod case;
pub mod components;
pub mod dosemodel;
pub mod memory;
pub mod optimizer;
pub mod planner;
pub mod predicate;
pub mod radiomics;
pub mod segtool;
pub mod stats;
pub mod strategy;
pub mod volume;

pub use case::{parse_case, serialize_case, CaseError, CaseInput, ClinicalVariables};
pub use volume::{load_volume, save_volume, Grid, Mask, ProbabilityMap, Volume, VolumeError};

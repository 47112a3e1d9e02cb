//! A review-queue demo: one phantom case whose plans keep a too-narrow
//! safety margin, so it reaches the clinician Escalated.

use std::path::Path;
use std::sync::Arc;

use fuas_core::planner::PlannerConfig;
use fuas_core::strategy::{PlanProvider, PromptBundle, ReferenceProvider, StrategyError};

use crate::error::Result;
use crate::record::WorkflowRecord;
use crate::service::Service;
use crate::suite::write_case;

/// Medium dose band, organ at risk farther than 12 mm and a thin abdominal
/// wall, so the margin is the only rule the demo plans break.
pub const DEMO_SEED: u64 = 1003;
pub const DEMO_MARGIN_MM: f64 = 8.0;

/// Reference plans with the safety margin pinned to a fixed value.
#[derive(Debug, Clone)]
pub struct PinnedMargin {
    pub margin: f64,
    pub inner: ReferenceProvider,
}

impl PinnedMargin {
    pub fn new(margin: f64) -> Self {
        PinnedMargin {
            margin,
            inner: ReferenceProvider::default(),
        }
    }
}

impl PlanProvider for PinnedMargin {
    fn name(&self) -> &str {
        "pinned-margin"
    }

    fn generate(&self, bundle: &PromptBundle) -> Result<String, StrategyError> {
        let mut plan = self.inner.plan(bundle)?;
        plan.safety_margin = self.margin;
        Ok(plan.render())
    }
}

/// Writes the demo phantom under `dir` and stores it in `service` as an
/// Escalated case. Review afterwards goes through `service` itself.
pub fn seed_demo_case(service: &Service, dir: &Path) -> Result<WorkflowRecord> {
    let sc = write_case(dir, DEMO_SEED)?;
    let demo = Service {
        engine: Arc::new(service.engine.fork(Arc::new(PinnedMargin::new(DEMO_MARGIN_MM)))),
        store: service.store.clone(),
    };
    demo.run_case(&sc.case, PlannerConfig::default())
}

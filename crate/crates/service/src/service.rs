//! Case lifecycle over the store: submission, processing, review,
//! interactive segmentation and telemetry aggregation.

use std::sync::Arc;

use fuas_core::planner::{Agent, PlannerConfig};
use fuas_core::segtool::{dice, Prompt};
use fuas_core::{CaseInput, Mask, Volume};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::record::{Status, WorkflowRecord};
use crate::store::Store;
use crate::workflow::{Engine, ReviewDecision, WorkflowOutcome};

#[derive(Clone)]
pub struct Service {
    pub engine: Arc<Engine>,
    pub store: Arc<Store>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub case_id: String,
    pub mask_ref: String,
    pub voxels: usize,
    pub previous_mask_ref: Option<String>,
    pub previous_voxels: Option<usize>,
    /// Overlap with the mask the case held before this prompt.
    pub dice_vs_current: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: Agent,
    /// Workflows in which the agent ran.
    pub cases: usize,
    /// s
    pub mean_running_time: f64,
    pub mean_token_usage: f64,
    pub total_token_usage: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySummary {
    pub records: usize,
    pub agents: Vec<AgentSummary>,
}

pub fn summarize(records: &[WorkflowRecord]) -> TelemetrySummary {
    let agents = Agent::ALL
        .iter()
        .map(|&agent| {
            let rows: Vec<_> = records
                .iter()
                .filter_map(|r| r.telemetry_for(agent))
                .filter(|t| t.invocations > 0)
                .collect();
            let n = rows.len();
            let mean = |f: &dyn Fn(&&crate::record::AgentTelemetry) -> f64| {
                if n == 0 {
                    0.0
                } else {
                    rows.iter().map(f).sum::<f64>() / n as f64
                }
            };
            AgentSummary {
                agent,
                cases: n,
                mean_running_time: mean(&|t| t.running_time),
                mean_token_usage: mean(&|t| t.token_usage as f64),
                total_token_usage: rows.iter().map(|t| t.token_usage).sum(),
                success_rate: mean(&|t| if t.success { 1.0 } else { 0.0 }),
            }
        })
        .collect();
    TelemetrySummary {
        records: records.len(),
        agents,
    }
}

impl Service {
    pub fn new(engine: Engine, store: Store) -> Self {
        Service {
            engine: Arc::new(engine),
            store: Arc::new(store),
        }
    }

    /// Stores the case with a Running record; `process` completes it.
    pub fn submit(&self, case: &CaseInput, cfg: PlannerConfig) -> Result<WorkflowRecord> {
        case.validate()?;
        let mut record = WorkflowRecord::new(&case.case_id, cfg);
        record.log(Agent::Planner, "case received");
        self.store.create(case, &record)?;
        Ok(record)
    }

    fn persist(&self, outcome: WorkflowOutcome) -> Result<WorkflowRecord> {
        let WorkflowOutcome { mut record, objects } = outcome;
        for (r, bytes) in &objects {
            let stored = self.store.put_object(&record.case_id, bytes)?;
            debug_assert_eq!(&stored, r);
        }
        let created = self.store.load(&record.case_id)?.created_at;
        record.created_at = created;
        self.store.save(&record)?;
        Ok(record)
    }

    pub fn process(&self, case_id: &str) -> Result<WorkflowRecord> {
        let case = self.store.case_document(case_id)?;
        let record = self.store.load(case_id)?;
        if record.status != Status::Running {
            return Err(ServiceError::InvalidTransition {
                from: record.status,
                action: "run",
            });
        }
        let mut outcome = self.engine.run_workflow(&case, &record.config);
        let mut trace = record.trace;
        trace.append(&mut outcome.record.trace);
        outcome.record.trace = trace;
        self.persist(outcome)
    }

    /// Submit and process synchronously.
    pub fn run_case(&self, case: &CaseInput, cfg: PlannerConfig) -> Result<WorkflowRecord> {
        self.submit(case, cfg)?;
        self.process(&case.case_id)
    }

    pub fn record(&self, case_id: &str) -> Result<WorkflowRecord> {
        self.store.load(case_id)
    }

    pub fn review(&self, case_id: &str, decision: &ReviewDecision) -> Result<WorkflowRecord> {
        let case = self.store.case_document(case_id)?;
        let mut objects = Vec::new();
        let record = self.store.update(case_id, |record| {
            let outcome = self.engine.review(record.clone(), &case, decision)?;
            *record = outcome.record;
            objects = outcome.objects;
            Ok(record.clone())
        })?;
        for (_, bytes) in objects {
            self.store.put_object(case_id, &bytes)?;
        }
        Ok(record)
    }

    pub fn escalations(&self) -> Result<Vec<WorkflowRecord>> {
        Ok(self.store.list()?.into_iter().filter(|r| r.status == Status::Escalated).collect())
    }

    pub fn telemetry(&self) -> Result<TelemetrySummary> {
        Ok(summarize(&self.store.list()?))
    }

    pub fn volume_bytes(&self, case_id: &str) -> Result<Vec<u8>> {
        let record = self.store.load(case_id)?;
        let r = record
            .artifacts
            .volume_ref
            .ok_or_else(|| ServiceError::MissingArtifact(format!("volume of {case_id}")))?;
        self.store.get_object(case_id, &r)
    }

    pub fn mask_bytes(&self, case_id: &str) -> Result<Vec<u8>> {
        let record = self.store.load(case_id)?;
        let r = record
            .artifacts
            .mask_ref
            .ok_or_else(|| ServiceError::MissingArtifact(format!("mask of {case_id}")))?;
        self.store.get_object(case_id, &r)
    }

    /// Re-segments the case volume with a new prompt and makes the result the
    /// case's current mask.
    pub fn segment(&self, case_id: &str, prompt: &str) -> Result<SegmentResponse> {
        let prompt: Prompt = prompt.parse()?;
        let volume = Volume::from_bytes(&self.volume_bytes(case_id)?)?;
        prompt.validate(volume.dims())?;
        let mask = self.engine.segment(&volume, &prompt)?;
        let mask_ref = self.store.put_object(case_id, &mask.to_bytes())?;
        let voxels = mask.count();
        self.store.update(case_id, |record| {
            if record.status == Status::Running {
                return Err(ServiceError::InvalidTransition {
                    from: record.status,
                    action: "re-segment",
                });
            }
            let previous = match &record.artifacts.mask_ref {
                Some(r) => Some(Mask::from_bytes(&self.store.get_object(case_id, r)?)?),
                None => None,
            };
            let dice_vs_current = previous.as_ref().map(|p| dice(p, &mask)).transpose()?;
            let response = SegmentResponse {
                case_id: case_id.to_string(),
                mask_ref: mask_ref.clone(),
                voxels,
                previous_mask_ref: record.artifacts.mask_ref.clone(),
                previous_voxels: previous.as_ref().map(Mask::count),
                dice_vs_current,
            };
            record.log(
                Agent::Executor,
                format!(
                    "interactive segmentation: mask {mask_ref} ({voxels} voxels), dice vs previous {}",
                    dice_vs_current.map_or("n/a".to_string(), |d| format!("{d:.4}"))
                ),
            );
            record.artifacts.mask_ref = Some(mask_ref.clone());
            record.artifacts.mask_history.push(mask_ref.clone());
            Ok(response)
        })
    }
}

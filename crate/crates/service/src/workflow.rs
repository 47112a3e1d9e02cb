//! Workflow engine: runs a case's action plan through the agent coalition
//! and keeps the record, trace and telemetry.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use fuas_core::dosemodel::{predict_dose, DoseModel, DoseObservation};
use fuas_core::memory::{KnowledgeKind, MemoryError, MemoryModule, RetrievalResult};
use fuas_core::optimizer::{
    guideline_query, reflect_step, verify, ConstraintSet, LoopState, NextAction, VerificationReport, VerifyInputs,
    GUIDELINE_TOP_K,
};
use fuas_core::planner::{self, ActionPlan, Agent, Decomposer, PlannerConfig, RuleCompiler, Tool};
use fuas_core::radiomics::{extract, TextureConfig};
use fuas_core::segtool::{geometric_descriptors, Prompt, ReferenceSegmenter, SegObservation, SegmentationBackend};
use fuas_core::strategy::{assemble_prompt, parse_plan, PlanProvider, ReferenceProvider, ToolObservations};
use fuas_core::{CaseInput, Mask, Volume};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, ServiceError};
use crate::knowledge::BUILTIN_POLICY;
use crate::record::{Status, WorkflowRecord};
use crate::store::content_ref;

/// Retrieved prior cases shown to the generator.
pub const CASE_TOP_K: usize = 3;

/// Agents and tools shared by every workflow.
pub struct Engine {
    pub model: Arc<DoseModel>,
    pub memory: Option<Arc<MemoryModule>>,
    pub segmenter: Arc<dyn SegmentationBackend>,
    pub provider: Arc<dyn PlanProvider>,
    pub decomposer: Arc<dyn Decomposer>,
    pub constraints: ConstraintSet,
    pub texture: TextureConfig,
    /// Serializes calls into providers that are not reentrant.
    provider_gate: Mutex<()>,
}

/// A finished run: the record and the artifact bytes it references.
#[derive(Debug, Clone)]
pub struct WorkflowOutcome {
    pub record: WorkflowRecord,
    pub objects: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "lowercase")]
pub enum ReviewDecision {
    Approve,
    Reject,
    /// Plan keys mapped to replacement values.
    Modify { patch: BTreeMap<String, Value> },
}

impl ReviewDecision {
    fn action(&self) -> &'static str {
        match self {
            ReviewDecision::Approve => "approve",
            ReviewDecision::Reject => "reject",
            ReviewDecision::Modify { .. } => "modify",
        }
    }
}

/// Per-run inputs loaded from disk.
#[derive(Default)]
struct Inputs {
    volume: Option<Volume>,
    oars: Vec<Mask>,
    mask: Option<Mask>,
}

impl Engine {
    pub fn new(model: DoseModel, memory: Option<MemoryModule>) -> Self {
        Engine {
            model: Arc::new(model),
            memory: memory.map(Arc::new),
            segmenter: Arc::new(ReferenceSegmenter::default()),
            provider: Arc::new(ReferenceProvider::default()),
            decomposer: Arc::new(RuleCompiler),
            constraints: ConstraintSet::default(),
            texture: TextureConfig::default(),
            provider_gate: Mutex::new(()),
        }
    }

    pub fn with_provider(mut self, provider: Arc<dyn PlanProvider>) -> Self {
        self.provider = provider;
        self
    }

    pub fn with_segmenter(mut self, segmenter: Arc<dyn SegmentationBackend>) -> Self {
        self.segmenter = segmenter;
        self
    }

    pub fn with_constraints(mut self, constraints: ConstraintSet) -> Self {
        self.constraints = constraints;
        self
    }

    /// An engine sharing this one's model, knowledge and tools but
    /// generating plans with `provider`.
    pub fn fork(&self, provider: Arc<dyn PlanProvider>) -> Engine {
        Engine {
            model: self.model.clone(),
            memory: self.memory.clone(),
            segmenter: self.segmenter.clone(),
            provider,
            decomposer: self.decomposer.clone(),
            constraints: self.constraints.clone(),
            texture: self.texture.clone(),
            provider_gate: Mutex::new(()),
        }
    }

    fn memory_for(&self, cfg: &PlannerConfig) -> Option<&MemoryModule> {
        if cfg.enable_memory {
            self.memory.as_deref()
        } else {
            None
        }
    }

    /// Runs the case to a terminal status. Step failures halt the workflow
    /// and leave the record Escalated with the diagnostic in `error`.
    pub fn run_workflow(&self, case: &CaseInput, cfg: &PlannerConfig) -> WorkflowOutcome {
        let mut run = Run {
            engine: self,
            case,
            cfg,
            record: WorkflowRecord::new(&case.case_id, cfg.clone()),
            objects: Vec::new(),
            inputs: Inputs::default(),
        };
        if let Err(e) = run.execute() {
            run.halt(&e);
        }
        WorkflowOutcome {
            record: run.record,
            objects: run.objects,
        }
    }

    /// Applies a clinician decision. Approve and reject are terminal; modify
    /// patches the last plan and re-enters verification with a fresh loop.
    pub fn review(&self, record: WorkflowRecord, case: &CaseInput, decision: &ReviewDecision) -> Result<WorkflowOutcome> {
        let from = record.status;
        let invalid = || ServiceError::InvalidTransition {
            from,
            action: decision.action(),
        };
        let mut run = Run {
            engine: self,
            case,
            cfg: &record.config.clone(),
            record,
            objects: Vec::new(),
            inputs: Inputs::default(),
        };
        match decision {
            ReviewDecision::Approve | ReviewDecision::Reject => {
                let next = if *decision == ReviewDecision::Approve {
                    Status::Approved
                } else {
                    Status::Rejected
                };
                if !from.can_become(next) {
                    return Err(invalid());
                }
                run.record.status = next;
                run.record.log(Agent::Planner, format!("review: {} -> {next:?}", decision.action()));
            }
            ReviewDecision::Modify { patch } => {
                if from != Status::Escalated {
                    return Err(invalid());
                }
                let base = run
                    .record
                    .final_plan()
                    .ok_or_else(|| ServiceError::BadRequest("the case has no plan to modify".into()))?;
                let patched = apply_patch(base, patch)?;
                run.record.status = Status::Running;
                run.record.error = None;
                run.record.log(Agent::Planner, format!("review: modify {}", patch_summary(patch)));
                let mut state = LoopState::default();
                if let Err(e) = run.reasoning_loop(&mut state, Some(patched)) {
                    run.halt(&e);
                }
            }
        }
        run.record.touch();
        Ok(WorkflowOutcome {
            record: run.record,
            objects: run.objects,
        })
    }

    /// Full verification of a plan text against a case, regardless of the
    /// configuration that produced it.
    pub fn verify_plan(&self, case: &CaseInput, observations: Option<&ToolObservations>, plan_text: &str) -> Result<VerificationReport> {
        let inputs = VerifyInputs {
            case,
            observations,
            constraints: &self.constraints,
            memory: self.memory.as_deref(),
            top_k: GUIDELINE_TOP_K,
        };
        Ok(verify(plan_text, &inputs)?.1)
    }

    /// Segments the volume with a prompt; the interactive re-prompting path.
    pub fn segment(&self, volume: &Volume, prompt: &Prompt) -> Result<Mask> {
        Ok(self.segmenter.segment(volume, prompt)?.binarize(0.5))
    }

    fn generate(&self, bundle: &fuas_core::strategy::PromptBundle) -> Result<String> {
        if self.provider.reentrant() {
            Ok(self.provider.generate(bundle)?)
        } else {
            let _gate = self.provider_gate.lock().expect("provider gate");
            Ok(self.provider.generate(bundle)?)
        }
    }
}

fn patch_summary(patch: &BTreeMap<String, Value>) -> String {
    patch.iter().map(|(k, v)| format!("{k}={}", value_text(v))).collect::<Vec<_>>().join(", ")
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Replaces PLAN lines of `plan_text` by the patch values and returns the
/// canonical rendering of the result.
pub fn apply_patch(plan_text: &str, patch: &BTreeMap<String, Value>) -> Result<String> {
    let plan = parse_plan(plan_text).map_err(|e| ServiceError::BadRequest(format!("current plan does not parse: {e}")))?;
    if let Some(k) = patch.keys().find(|k| !fuas_core::strategy::is_plan_key(k)) {
        return Err(ServiceError::BadRequest(format!("unknown plan key {k:?}")));
    }
    let mut block = String::from("PLAN:");
    for line in plan.plan_block().lines().skip(1) {
        let (key, value) = line.split_once(':').expect("rendered plan lines hold a key");
        let value = patch.get(key).map_or_else(|| value.trim().to_string(), value_text);
        block.push_str(&format!("\n{key}: {value}"));
    }
    let reasoning = format!("{}\n- clinician modification: {}", plan.reasoning.trim_end(), patch_summary(patch));
    let text = format!("REASONING:\n{reasoning}\n\n{block}\n");
    let patched = parse_plan(&text).map_err(|e| ServiceError::BadRequest(format!("patched plan is invalid: {e}")))?;
    Ok(patched.render())
}

struct Run<'a> {
    engine: &'a Engine,
    case: &'a CaseInput,
    cfg: &'a PlannerConfig,
    record: WorkflowRecord,
    objects: Vec<(String, Vec<u8>)>,
    inputs: Inputs,
}

impl Run<'_> {
    fn put(&mut self, bytes: Vec<u8>) -> String {
        let r = content_ref(&bytes);
        if !self.objects.iter().any(|(k, _)| *k == r) {
            self.objects.push((r.clone(), bytes));
        }
        r
    }

    fn halt(&mut self, e: &ServiceError) {
        let msg = e.to_string();
        self.record.log(Agent::Planner, format!("halted: {msg}"));
        self.record.error = Some(msg);
        self.record.status = Status::Escalated;
        if let Some(state) = self.record.loop_state.as_mut() {
            state.status = fuas_core::optimizer::LoopStatus::Escalated;
        }
    }

    /// Records one agent invocation and passes its result through.
    fn timed<T>(&mut self, agent: Agent, f: impl FnOnce(&mut Self) -> Result<(T, usize, usize)>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok((v, p, o)) => {
                self.record.telemetry_mut(agent).add(secs, p, o, true);
                Ok(v)
            }
            Err(e) => {
                self.record.telemetry_mut(agent).add(secs, 0, 0, false);
                Err(e)
            }
        }
    }

    fn decompose(&mut self, feedback: Option<&str>, round: usize) -> Result<ActionPlan> {
        let (case, cfg) = (self.case, self.cfg);
        let decomposer = self.engine.decomposer.clone();
        let plan = self.timed(Agent::Planner, |_| {
            let plan = match feedback {
                None => decomposer.decompose(case, cfg),
                Some(fb) => planner::replan(case, cfg, fb, round),
            };
            planner::validate(&plan).map_err(|v| {
                let lines: Vec<String> = v.iter().map(ToString::to_string).collect();
                ServiceError::Workflow(format!("invalid action plan: {}", lines.join("; ")))
            })?;
            Ok((plan, 0, 0))
        })?;
        self.record.log(Agent::Planner, format!("decomposition round {round}:\n{plan}"));
        Ok(plan)
    }

    fn execute(&mut self) -> Result<()> {
        self.case.validate()?;
        self.load_volume_artifacts();
        let plan = self.decompose(None, 0)?;
        self.record.action_plan = plan.clone();
        for step in &plan.steps {
            match step.tool {
                Tool::Segment => self.timed(Agent::Executor, |run| {
                    let prompt = step.args.get("prompt").map_or("auto", String::as_str);
                    run.segment_step(prompt)?;
                    Ok(((), 0, 0))
                })?,
                Tool::LoadMask => self.timed(Agent::Executor, |run| {
                    run.load_mask_step()?;
                    Ok(((), 0, 0))
                })?,
                Tool::PredictDose => self.timed(Agent::Executor, |run| {
                    run.predict_step()?;
                    Ok(((), 0, 0))
                })?,
                Tool::GeneratePlan | Tool::VerifyPlan => {}
            }
        }
        if !self.cfg.enable_optimizer {
            let text = self.generate_step(None)?;
            self.record.artifacts.plans.push(text);
            self.record.status = Status::Finalized;
            self.record.log(Agent::Planner, "optimizer disabled: first plan emitted unverified");
            return Ok(());
        }
        let mut state = LoopState::default();
        self.reasoning_loop(&mut state, None)
    }

    /// Generate → verify → reflect until the loop finalizes or escalates.
    /// `first` replaces the first generation (a clinician-patched plan).
    fn reasoning_loop(&mut self, state: &mut LoopState, mut first: Option<String>) -> Result<()> {
        let mut feedback: Option<String> = None;
        let mut round = 0;
        self.record.loop_state = Some(state.clone());
        loop {
            if let Some(fb) = &feedback {
                let plan = self.decompose(Some(fb), round)?;
                for s in plan.steps.iter().filter(|s| s.args.get("reuse").is_some_and(|r| r == "true")) {
                    self.record.log(Agent::Executor, format!("{}: reusing previous output", s.tool));
                }
            }
            let text = match first.take() {
                Some(t) => t,
                None => self.generate_step(feedback.as_deref())?,
            };
            self.record.artifacts.plans.push(text.clone());
            let report = self.verify_step(&text)?;
            let next = reflect_step(state, text, report)?;
            self.record.loop_state = Some(state.clone());
            match next {
                NextAction::Finalize => {
                    self.record.status = Status::Finalized;
                    self.record.log(Agent::Optimizer, format!("finalized after {} plan(s)", state.plans_generated()));
                    return Ok(());
                }
                NextAction::Escalate => {
                    self.record.status = Status::Escalated;
                    self.record.log(
                        Agent::Optimizer,
                        format!("escalated for human review after {} plan(s)", state.plans_generated()),
                    );
                    return Ok(());
                }
                NextAction::TriggerPlanner { feedback: fb } => {
                    round += 1;
                    self.record.log(Agent::Optimizer, format!("refinement {round} of {} requested", state.t_max));
                    feedback = Some(fb);
                }
            }
        }
    }

    fn load_volume_artifacts(&mut self) {
        match std::fs::read(&self.case.volume_ref) {
            Ok(bytes) => match Volume::from_bytes(&bytes) {
                Ok(v) => {
                    let r = self.put(bytes);
                    self.record.artifacts.volume_ref = Some(r);
                    self.inputs.volume = Some(v);
                }
                Err(e) => self.record.log(Agent::Executor, format!("volume unreadable: {e}")),
            },
            Err(e) => self.record.log(
                Agent::Executor,
                format!("volume {} not available: {e}", self.case.volume_ref.display()),
            ),
        }
    }

    fn volume(&self) -> Result<&Volume> {
        self.inputs.volume.as_ref().ok_or_else(|| {
            ServiceError::Workflow(format!("volume {} could not be loaded", self.case.volume_ref.display()))
        })
    }

    fn load_oars(&mut self) -> Result<()> {
        let mut refs = Vec::new();
        for path in &self.case.oar_refs {
            let bytes = std::fs::read(path).map_err(crate::error::io(format!("reading {}", path.display())))?;
            let mask = Mask::from_bytes(&bytes)?;
            refs.push(self.put(bytes));
            self.inputs.oars.push(mask);
        }
        self.record.artifacts.oar_refs = refs;
        Ok(())
    }

    fn observe(&mut self, mask: Mask) -> Result<()> {
        if mask.is_blank() {
            return Err(ServiceError::Workflow("segmentation found no lesion".into()));
        }
        self.load_oars()?;
        let mut seg: SegObservation = geometric_descriptors(&mask, self.volume()?, &self.inputs.oars)?;
        let r = self.put(mask.to_bytes());
        seg.mask_ref = Some(r.clone());
        self.record.log(Agent::Executor, format!("mask {r} ({} voxels)", mask.count()));
        self.record.log(Agent::Executor, seg.to_string());
        self.record.artifacts.mask_ref = Some(r.clone());
        self.record.artifacts.mask_history.push(r);
        self.record.artifacts.seg = Some(seg);
        self.inputs.mask = Some(mask);
        Ok(())
    }

    fn segment_step(&mut self, prompt: &str) -> Result<()> {
        let prompt: Prompt = prompt.parse()?;
        let mask = self.engine.segment(self.volume()?, &prompt)?;
        self.record.log(Agent::Executor, format!("Segment with {} backend", self.engine.segmenter.name()));
        self.observe(mask)
    }

    fn load_mask_step(&mut self) -> Result<()> {
        let path = self.case.mask_ref.clone().expect("LoadMask is only planned with a mask_ref");
        let mask = Mask::load(&path)?;
        mask.check_matches(self.volume()?)?;
        self.record.log(Agent::Executor, format!("LoadMask from {}", path.display()));
        self.observe(mask)
    }

    fn predict_step(&mut self) -> Result<()> {
        let volume = self.volume()?;
        let mask = self
            .inputs
            .mask
            .as_ref()
            .ok_or_else(|| ServiceError::Workflow("dose prediction needs a lesion mask".into()))?;
        let features = extract(volume, mask, &self.engine.texture)?;
        let selected = self.engine.model.select(&features)?;
        let dose: DoseObservation = predict_dose(&self.engine.model, &selected, &self.case.clinical_vars)?;
        self.record.log(Agent::Executor, dose.to_string());
        self.record.artifacts.dose = Some(dose);
        Ok(())
    }

    fn system_instruction(&self) -> Result<String> {
        if !self.cfg.enable_memory {
            return Ok(BUILTIN_POLICY.to_string());
        }
        let memory = self
            .engine
            .memory
            .as_deref()
            .ok_or_else(|| ServiceError::Workflow("memory enabled but no knowledge is loaded".into()))?;
        memory.source_text(&self.cfg.system_policy_id).ok_or_else(|| {
            ServiceError::Workflow(format!("system policy {:?} not found in the knowledge store", self.cfg.system_policy_id))
        })
    }

    fn retrieve_cases(&mut self, observations: Option<&ToolObservations>) -> Result<Option<RetrievalResult>> {
        let Some(memory) = self.engine.memory_for(self.cfg) else {
            return Ok(None);
        };
        let query = match observations {
            Some(o) => format!("{} {}", self.case.ehr_text, o.render()),
            None => self.case.ehr_text.clone(),
        };
        match memory.retrieve(&query, CASE_TOP_K, Some(&[KnowledgeKind::Case])) {
            Ok(r) => {
                self.record.log(Agent::Strategy, format!("retrieved cases: [{}]", r.ids().join(", ")));
                Ok(Some(r))
            }
            Err(MemoryError::EmptyIndex) => {
                self.record.log(Agent::Strategy, "retrieved cases: none stored");
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }

    fn generate_step(&mut self, feedback: Option<&str>) -> Result<String> {
        let observations = self.record.artifacts.observations();
        self.timed(Agent::Strategy, |run| {
            let system = run.system_instruction()?;
            let retrieved = run.retrieve_cases(observations.as_ref())?;
            let bundle = assemble_prompt(run.case, &system, observations.clone(), retrieved.as_ref(), feedback);
            let prompt = bundle.render();
            let prompt_tokens = prompt.split_whitespace().count();
            run.record.artifacts.prompts.push(prompt);
            let text = run.engine.generate(&bundle)?;
            let output_tokens = text.split_whitespace().count();
            run.record.log(
                Agent::Strategy,
                format!("{} generated a plan (prompt {prompt_tokens} tokens, output {output_tokens} tokens)", run.engine.provider.name()),
            );
            Ok((text, prompt_tokens, output_tokens))
        })
    }

    fn verify_step(&mut self, plan_text: &str) -> Result<VerificationReport> {
        let observations = self.record.artifacts.observations();
        let memory = self.engine.memory_for(self.cfg);
        let report = self.timed(Agent::Optimizer, |run| {
            let inputs = VerifyInputs {
                case: run.case,
                observations: observations.as_ref(),
                constraints: &run.engine.constraints,
                memory,
                top_k: GUIDELINE_TOP_K,
            };
            let (plan, report) = verify(plan_text, &inputs)?;
            let query_tokens = match (&plan, memory) {
                (Some(p), Some(_)) => guideline_query(p, run.case).split_whitespace().count(),
                _ => 0,
            };
            let output_tokens = report.feedback_text.split_whitespace().count();
            Ok((report, query_tokens, output_tokens))
        })?;
        for line in report.trace_lines() {
            self.record.log(Agent::Optimizer, line);
        }
        self.record.artifacts.reports.push(report.clone());
        Ok(report)
    }
}

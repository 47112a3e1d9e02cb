mod common;

use std::collections::BTreeMap;

use fuas_core::memory::MemoryModule;
use fuas_core::planner::{Agent, PlannerConfig, Tool};
use fuas_core::strategy::parse_plan;
use fuas_service::{Engine, ReviewDecision, ServiceError, Status};
use serde_json::json;

#[test]
fn full_pipeline_records_every_agent() {
    let dir = tempfile::tempdir().unwrap();
    let sc = common::case(dir.path(), 1003);
    let out = common::engine().run_workflow(&sc.case, &PlannerConfig::default());
    let r = &out.record;
    assert_eq!(r.status, Status::Finalized, "{:?}", r.error);
    assert_eq!(
        r.action_plan.tools(),
        [Tool::Segment, Tool::PredictDose, Tool::GeneratePlan, Tool::VerifyPlan]
    );
    for agent in Agent::ALL {
        let t = r.telemetry_for(agent).unwrap();
        assert!(t.invocations > 0 && t.success, "{agent:?}");
    }
    assert_eq!(r.telemetry_for(Agent::Executor).unwrap().token_usage, 0);
    assert_eq!(r.telemetry_for(Agent::Planner).unwrap().token_usage, 0);
    let s = r.telemetry_for(Agent::Strategy).unwrap();
    assert_eq!(s.token_usage, s.prompt_tokens + s.output_tokens);
    let prompt_tokens: usize = r.artifacts.prompts.iter().map(|p| p.split_whitespace().count()).sum();
    assert_eq!(s.prompt_tokens, prompt_tokens);

    // Every referenced artifact travels with the outcome.
    let a = &r.artifacts;
    let refs = [a.volume_ref.clone().unwrap(), a.mask_ref.clone().unwrap(), a.oar_refs[0].clone()];
    for want in refs {
        assert!(out.objects.iter().any(|(k, _)| *k == want), "{want}");
    }
    assert!(fuas_core::Mask::from_bytes(&out.objects.iter().find(|(k, _)| Some(k) == a.mask_ref.as_ref()).unwrap().1).is_ok());
    let plan = parse_plan(r.final_plan().unwrap()).unwrap();
    assert_eq!(plan.treatment_order, a.seg.as_ref().unwrap().lesion_ids());
    assert!(r.trace.iter().any(|l| l.starts_with("[Optimizer] verify:")));
}

#[test]
fn refinement_reuses_executor_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // Seeds whose dose falls in the high band start at 420 W and need a retry.
    let engine = common::engine();
    let retried = (1000..1020)
        .map(|s| engine.run_workflow(&common::case(dir.path(), s).case, &PlannerConfig::default()).record)
        .find(|r| r.loop_state.as_ref().is_some_and(|l| l.t > 0))
        .expect("some suite case needs refinement");
    assert_eq!(retried.status, Status::Finalized);
    assert!(retried.trace.iter().any(|l| l.contains("PredictDose: reusing previous output")));
    assert!(retried.trace.iter().any(|l| l.contains("refinement 1 of 2 requested")));
    assert_eq!(retried.telemetry_for(Agent::Executor).unwrap().invocations, 2);
    let fb = &retried.artifacts.reports[0].feedback_text;
    assert!(retried.artifacts.prompts[1].contains(fb.lines().next().unwrap()));
}

#[test]
fn without_executor_the_plan_uses_no_observations() {
    let dir = tempfile::tempdir().unwrap();
    let sc = common::case(dir.path(), 1001);
    let r = common::engine().run_workflow(&sc.case, &PlannerConfig::no_executor()).record;
    assert_eq!(r.action_plan.tools(), [Tool::GeneratePlan, Tool::VerifyPlan]);
    assert!(r.artifacts.seg.is_none() && r.artifacts.dose.is_none());
    assert_eq!(r.telemetry_for(Agent::Executor).unwrap().invocations, 0);
    assert!(r.final_plan().is_some());
}

#[test]
fn without_optimizer_the_first_plan_is_final() {
    let dir = tempfile::tempdir().unwrap();
    let sc = common::case(dir.path(), 1001);
    let r = common::escalating_engine().run_workflow(&sc.case, &PlannerConfig::no_optimizer()).record;
    assert_eq!(r.status, Status::Finalized);
    assert_eq!(r.artifacts.plans.len(), 1);
    assert!(r.artifacts.reports.is_empty());
    assert_eq!(r.telemetry_for(Agent::Optimizer).unwrap().invocations, 0);
}

#[test]
fn persistent_violation_escalates_after_three_plans() {
    let dir = tempfile::tempdir().unwrap();
    let sc = common::case(dir.path(), 1002);
    let r = common::escalating_engine().run_workflow(&sc.case, &PlannerConfig::default()).record;
    assert_eq!(r.status, Status::Escalated);
    assert!(r.error.is_none());
    assert_eq!(r.artifacts.plans.len(), 3);
    assert_eq!(r.loop_state.as_ref().unwrap().t, 2);
    assert!(r.open_feedback().iter().any(|l| l.contains("P-POWER")));
}

#[test]
fn modify_resumes_verification_with_the_patched_plan() {
    let dir = tempfile::tempdir().unwrap();
    let sc = common::case(dir.path(), 1002);
    let engine = common::escalating_engine();
    let escalated = engine.run_workflow(&sc.case, &PlannerConfig::default()).record;
    // The lesion sits 8 mm from an organ at risk, so the margin rises too.
    let patch = BTreeMap::from([
        ("acoustic_power".to_string(), json!(300)),
        ("safety_margin".to_string(), json!(15)),
    ]);
    let out = engine
        .review(escalated.clone(), &sc.case, &ReviewDecision::Modify { patch })
        .unwrap();
    let r = out.record;
    assert_eq!(r.status, Status::Finalized, "{:#?}", r.trace);
    assert_eq!(r.artifacts.plans.len(), 4);
    let plan = parse_plan(r.final_plan().unwrap()).unwrap();
    assert_eq!(plan.acoustic_power, 300.0);
    assert_eq!(plan.safety_margin, 15.0);
    assert!(plan.reasoning.contains("clinician modification: acoustic_power=300, safety_margin=15"));

    // Approval closes it; nothing follows a terminal decision.
    let approved = engine.review(r, &sc.case, &ReviewDecision::Approve).unwrap().record;
    assert_eq!(approved.status, Status::Approved);
    let again = engine.review(approved, &sc.case, &ReviewDecision::Reject);
    assert!(matches!(again, Err(ServiceError::InvalidTransition { from: Status::Approved, .. })));
}

#[test]
fn modify_that_still_fails_escalates_again() {
    let dir = tempfile::tempdir().unwrap();
    let sc = common::case(dir.path(), 1002);
    let engine = common::escalating_engine();
    let escalated = engine.run_workflow(&sc.case, &PlannerConfig::default()).record;
    let patch = BTreeMap::from([("safety_margin".to_string(), json!(12))]);
    let r = engine.review(escalated, &sc.case, &ReviewDecision::Modify { patch }).unwrap().record;
    // The power stays at 1000 W, and regenerations come from the same provider.
    assert_eq!(r.status, Status::Escalated);
    assert_eq!(r.artifacts.plans.len(), 6);
}

#[test]
fn modify_is_only_for_escalated_cases() {
    let dir = tempfile::tempdir().unwrap();
    let sc = common::case(dir.path(), 1003);
    let engine = common::engine();
    let r = engine.run_workflow(&sc.case, &PlannerConfig::default()).record;
    let patch = BTreeMap::from([("safety_margin".to_string(), json!(12))]);
    let err = engine.review(r.clone(), &sc.case, &ReviewDecision::Modify { patch }).unwrap_err();
    assert!(matches!(err, ServiceError::InvalidTransition { from: Status::Finalized, action: "modify" }));
    assert_eq!(engine.review(r, &sc.case, &ReviewDecision::Reject).unwrap().record.status, Status::Rejected);
}

#[test]
fn missing_volume_halts_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let mut case = common::case(dir.path(), 1003).case;
    case.volume_ref = dir.path().join("absent.rvol");
    let r = common::engine().run_workflow(&case, &PlannerConfig::default()).record;
    assert_eq!(r.status, Status::Escalated);
    assert!(r.error.as_deref().unwrap().contains("could not be loaded"));
    assert!(!r.telemetry_for(Agent::Executor).unwrap().success);
    assert!(r.artifacts.plans.is_empty());
}

#[test]
fn memory_without_a_policy_halts() {
    let dir = tempfile::tempdir().unwrap();
    let sc = common::case(dir.path(), 1003);
    let memory = MemoryModule::with_reference_embedder();
    memory
        .ingest_text("---\nkind: guideline\nsource: only-rule\n---\nRULE [G-X]: if always then require safety_margin >= 10")
        .unwrap();
    let engine = Engine::new(common::model(), Some(memory));
    let r = engine.run_workflow(&sc.case, &PlannerConfig::default()).record;
    assert_eq!(r.status, Status::Escalated);
    assert!(r.error.as_deref().unwrap().contains("system policy"));
    // Without memory the builtin policy applies.
    let r = engine.run_workflow(&sc.case, &PlannerConfig::no_memory()).record;
    assert_eq!(r.status, Status::Finalized);
}

#[test]
fn precomputed_mask_skips_segmentation() {
    let dir = tempfile::tempdir().unwrap();
    let sc = common::case(dir.path(), 1004);
    let mut case = sc.case.clone();
    let path = dir.path().join("truth.rmsk");
    sc.truth.save(&path).unwrap();
    case.mask_ref = Some(path);
    let r = common::engine().run_workflow(&case, &PlannerConfig::default()).record;
    assert_eq!(r.action_plan.tools()[0], Tool::LoadMask);
    assert_eq!(r.status, Status::Finalized);
    assert_eq!(r.artifacts.mask_ref.as_deref(), Some(fuas_service::store::content_ref(&sc.truth.to_bytes()).as_str()));
}

#![allow(dead_code)]

use std::path::Path;
use std::sync::{Arc, OnceLock};

use fuas_core::dosemodel::DoseModel;
use fuas_core::strategy::{PlanProvider, PromptBundle, ReferenceProvider, StrategyError};
use fuas_service::knowledge::default_memory;
use fuas_service::suite::{write_case, SuiteCase};
use fuas_service::{load_or_train_model, Engine, Service, Store};

/// Training takes a moment; share one model across the tests of a binary.
pub fn model() -> DoseModel {
    static MODEL: OnceLock<DoseModel> = OnceLock::new();
    MODEL.get_or_init(|| load_or_train_model(None).unwrap()).clone()
}

pub fn engine() -> Engine {
    Engine::new(model(), Some(default_memory().unwrap()))
}

pub fn service(root: &Path, engine: Engine) -> Service {
    Service::new(engine, Store::open(root.join("store")).unwrap())
}

pub fn case(dir: &Path, seed: u64) -> SuiteCase {
    write_case(&dir.join("cases"), seed).unwrap()
}

/// Reference plans with the power raised past the transducer limit.
pub struct Overpowered;

impl PlanProvider for Overpowered {
    fn name(&self) -> &str {
        "overpowered"
    }

    fn generate(&self, bundle: &PromptBundle) -> Result<String, StrategyError> {
        let mut plan = ReferenceProvider::default().plan(bundle)?;
        plan.acoustic_power = 1000.0;
        Ok(plan.render())
    }
}

pub fn escalating_engine() -> Engine {
    engine().with_provider(Arc::new(Overpowered))
}

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fuas_core::dosemodel::train_reference_model;
use fuas_core::memory::MemoryModule;
use fuas_core::planner::PlannerConfig;
use fuas_core::segtool::{dice, PhantomSpec, Prompt, ReferenceSegmenter, SegmentationBackend};
use fuas_core::strategy::{bleu, rouge};
use fuas_core::{Mask, Volume};
use fuas_service::suite::{load_case_file, write_phantom, write_suite, SUITE_BASE_SEED, SUITE_SIZE};
use fuas_service::{build_engine, http, ServiceError, Store};

#[derive(Parser)]
#[command(name = "fuas", version, about = "Closed-loop focused ultrasound ablation planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case document through the workflow and print the plan.
    Plan {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        no_executor: bool,
        #[arg(long)]
        no_optimizer: bool,
        #[arg(long)]
        no_memory: bool,
        /// Knowledge directory or saved index; the bundled corpus otherwise.
        #[arg(long)]
        knowledge: Option<PathBuf>,
        /// Saved dose model; the reference model otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Print the whole workflow record as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Segment a volume with an `auto`, `click:` or `bbox:` prompt.
    Segment {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reference mask to report Dice against.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Ingest a knowledge directory into a saved index.
    IngestKnowledge {
        dir: PathBuf,
        #[arg(long, default_value = "knowledge-index.json")]
        out: PathBuf,
    },
    /// ROUGE and BLEU of a hypothesis text against a reference text.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
    },
    /// Render a phantom spec (JSON) into a volume and masks.
    Phantom {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the seeded phantom case suite.
    Suite {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SUITE_SIZE)]
        count: usize,
        #[arg(long, default_value_t = SUITE_BASE_SEED)]
        seed: u64,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        knowledge: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Seed one Escalated demo case into the store before serving.
        #[arg(long)]
        demo: bool,
    },
    /// Train the reference dose model on the synthetic cohort and save it.
    TrainModel {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = fuas_service::REFERENCE_MODEL_SEED)]
        seed: u64,
    },
}

fn write(path: &std::path::Path, text: &str) -> Result<(), ServiceError> {
    std::fs::write(path, text).map_err(|source| ServiceError::Io {
        context: format!("writing {}", path.display()),
        source,
    })
}

fn read(path: &std::path::Path) -> Result<String, ServiceError> {
    std::fs::read_to_string(path).map_err(|source| ServiceError::Io {
        context: format!("reading {}", path.display()),
        source,
    })
}

fn run(cli: Cli) -> Result<(), ServiceError> {
    match cli.command {
        Command::Plan {
            case,
            no_executor,
            no_optimizer,
            no_memory,
            knowledge,
            model,
            json,
        } => {
            let case = load_case_file(&case)?;
            let cfg = PlannerConfig {
                enable_executor: !no_executor,
                enable_optimizer: !no_optimizer,
                enable_memory: !no_memory,
                ..Default::default()
            };
            let engine = build_engine(model.as_deref(), knowledge.as_deref())?;
            let record = engine.run_workflow(&case, &cfg).record;
            if json {
                println!("{}", serde_json::to_string_pretty(&record)?);
            } else {
                for line in &record.trace {
                    eprintln!("{line}");
                }
                eprintln!("status: {:?}", record.status);
                if let Some(plan) = record.final_plan() {
                    print!("{plan}");
                }
            }
        }
        Command::Segment {
            volume,
            prompt,
            out,
            truth,
        } => {
            let volume = Volume::load(&volume)?;
            let prompt: Prompt = prompt.parse()?;
            let mask = ReferenceSegmenter::default().segment(&volume, &prompt)?.binarize(0.5);
            println!("voxels: {}", mask.count());
            if let Some(t) = truth {
                println!("dice: {:.6}", dice(&Mask::load(&t)?, &mask)?);
            }
            if let Some(o) = out {
                mask.save(&o)?;
            }
        }
        Command::IngestKnowledge { dir, out } => {
            let memory = MemoryModule::with_reference_embedder();
            let ids = memory.ingest_dir(&dir)?;
            memory.save(&out)?;
            println!("{} chunks written to {}", ids.len(), out.display());
        }
        Command::Eval { reference, hyp } => {
            let (r, h) = (read(&reference)?, read(&hyp)?);
            let scores = rouge(&r, &h);
            println!("rouge1_f1: {:.6}", scores.r1);
            println!("rouge2_f1: {:.6}", scores.r2);
            println!("rougeL_f1: {:.6}", scores.rl);
            for (n, b) in bleu(&r, &h, 4).iter().enumerate() {
                println!("bleu{}: {b:.6}", n + 1);
            }
        }
        Command::Phantom { spec, out } => {
            let spec: PhantomSpec = serde_json::from_str(&read(&spec)?)?;
            let p = write_phantom(&spec, &out)?;
            println!("{} lesion voxels, {} organs at risk written to {}", p.truth.count(), p.oars.len(), out.display());
        }
        Command::Suite { out, count, seed } => {
            for c in write_suite(&out, count, seed)? {
                println!("{}", c.case_path.display());
            }
        }
        Command::Serve {
            port,
            store,
            knowledge,
            model,
            demo,
        } => {
            let engine = build_engine(model.as_deref(), knowledge.as_deref())?;
            let service = fuas_service::Service::new(engine, Store::open(&store)?);
            if demo && !service.store.exists(&format!("phantom-{:04}", fuas_service::demo::DEMO_SEED)) {
                let record = fuas_service::demo::seed_demo_case(&service, &store.join("demo-input"))?;
                tracing::info!(case_id = %record.case_id, status = ?record.status, "demo case stored");
            }
            let addr = SocketAddr::from(([0, 0, 0, 0], port));
            let rt = tokio::runtime::Runtime::new().map_err(|source| ServiceError::Io {
                context: "starting runtime".into(),
                source,
            })?;
            rt.block_on(http::serve(addr, service)).map_err(|source| ServiceError::Io {
                context: format!("serving on {addr}"),
                source,
            })?;
        }
        Command::TrainModel { out, seed } => {
            let (model, report) = train_reference_model(seed)?;
            write(&out, &model.to_json())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

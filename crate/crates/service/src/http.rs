//! HTTP API over [`Service`].

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fuas_core::parse_case;
use fuas_core::planner::PlannerConfig;
use fuas_core::segtool::SegError;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ServiceError;
use crate::record::Status;
use crate::service::Service;
use crate::workflow::ReviewDecision;

impl ServiceError {
    pub fn status_code(&self) -> StatusCode {
        match self {
            ServiceError::UnknownCase(_) | ServiceError::MissingArtifact(_) => StatusCode::NOT_FOUND,
            ServiceError::DuplicateCase(_) | ServiceError::InvalidTransition { .. } => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) | ServiceError::Case(_) | ServiceError::Json(_) => StatusCode::BAD_REQUEST,
            ServiceError::Seg(SegError::BadPrompt(_) | SegError::PromptOutOfBounds { .. } | SegError::NoPositiveSeed) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status_code(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

/// Ablation toggles accepted on case submission.
#[derive(Debug, Default, Deserialize)]
pub struct CaseOptions {
    #[serde(default)]
    pub no_executor: bool,
    #[serde(default)]
    pub no_optimizer: bool,
    #[serde(default)]
    pub no_memory: bool,
}

impl CaseOptions {
    pub fn config(&self) -> PlannerConfig {
        PlannerConfig {
            enable_executor: !self.no_executor,
            enable_optimizer: !self.no_optimizer,
            enable_memory: !self.no_memory,
            ..Default::default()
        }
    }
}

#[derive(Debug, Serialize)]
struct CaseSummary {
    case_id: String,
    status: Status,
    updated_at: u64,
    feedback: Vec<String>,
    error: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct SegmentRequest {
    pub case_id: String,
    pub prompt: String,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Workflow(format!("worker failed: {e}")))?
}

async fn submit_case(State(svc): State<Service>, Query(opts): Query<CaseOptions>, body: String) -> ApiResult<Response> {
    let case = parse_case(&body)?;
    let cfg = opts.config();
    let record = {
        let svc = svc.clone();
        let case = case.clone();
        blocking(move || svc.submit(&case, cfg)).await?
    };
    let id = record.case_id.clone();
    tokio::task::spawn_blocking(move || {
        if let Err(e) = svc.process(&id) {
            tracing::error!(case_id = %id, "workflow failed: {e}");
        }
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "case_id": record.case_id, "status": record.status })),
    )
        .into_response())
}

async fn list_cases(State(svc): State<Service>) -> ApiResult<Json<Vec<CaseSummary>>> {
    let records = blocking(move || svc.store.list()).await?;
    Ok(Json(
        records
            .into_iter()
            .map(|r| CaseSummary {
                feedback: r.open_feedback(),
                case_id: r.case_id,
                status: r.status,
                updated_at: r.updated_at,
                error: r.error,
            })
            .collect(),
    ))
}

async fn get_case(State(svc): State<Service>, Path(id): Path<String>) -> ApiResult<Response> {
    let record = blocking(move || svc.record(&id)).await?;
    Ok(Json(record).into_response())
}

async fn get_plan(State(svc): State<Service>, Path(id): Path<String>) -> ApiResult<Response> {
    let record = blocking(move || svc.record(&id)).await?;
    let plan = record
        .final_plan()
        .ok_or_else(|| ServiceError::MissingArtifact(format!("plan of {}", record.case_id)))?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], plan.to_string()).into_response())
}

async fn review_case(
    State(svc): State<Service>,
    Path(id): Path<String>,
    Json(decision): Json<ReviewDecision>,
) -> ApiResult<Response> {
    let record = blocking(move || svc.review(&id, &decision)).await?;
    Ok(Json(record).into_response())
}

async fn escalations(State(svc): State<Service>) -> ApiResult<Response> {
    let records = blocking(move || svc.escalations()).await?;
    Ok(Json(records).into_response())
}

async fn segment(State(svc): State<Service>, Json(req): Json<SegmentRequest>) -> ApiResult<Response> {
    let out = blocking(move || svc.segment(&req.case_id, &req.prompt)).await?;
    Ok(Json(out).into_response())
}

async fn telemetry(State(svc): State<Service>) -> ApiResult<Response> {
    let summary = blocking(move || svc.telemetry()).await?;
    Ok(Json(summary).into_response())
}

fn octets(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/octet-stream")], Bytes::from(bytes)).into_response()
}

async fn get_volume(State(svc): State<Service>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(octets(blocking(move || svc.volume_bytes(&id)).await?))
}

async fn get_mask(State(svc): State<Service>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(octets(blocking(move || svc.mask_bytes(&id)).await?))
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/cases", post(submit_case).get(list_cases))
        .route("/cases/{id}", get(get_case))
        .route("/cases/{id}/plan", get(get_plan))
        .route("/cases/{id}/review", post(review_case))
        .route("/cases/{id}/volume", get(get_volume))
        .route("/cases/{id}/mask", get(get_mask))
        .route("/escalations", get(escalations))
        .route("/segment", post(segment))
        .route("/telemetry", get(telemetry))
        .with_state(service)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, service: Service) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}

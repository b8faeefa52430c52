//! HTTP routes over [`Study`].

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use roleplay_core::study::{render_undetectability_table, AllocationError, JudgmentError, JudgmentInput, PersonaForm, SessionError};
use serde::Deserialize;
use serde_json::json;

use crate::state::{ExportFilter, Study, StudyError};

pub const JSONL: &str = "application/x-ndjson";

pub fn router(study: Arc<Study>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/sessions", post(open_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/next-goal", post(next_goal))
        .route("/dialogues", post(import_dialogues))
        .route("/export/dialogues", get(export_dialogues))
        .route("/export/judgments", get(export_judgments))
        .route("/evaluation/{participant}/pairs", get(list_pairs))
        .route("/evaluation/{participant}/pairs/{pair_id}", get(get_pair))
        .route("/evaluation/judgments", post(submit_judgment))
        .route("/reports/undetectability", get(report))
        .with_state(study)
}

impl StudyError {
    fn status(&self) -> StatusCode {
        match self {
            StudyError::BadParticipant(_) | StudyError::Import { .. } => StatusCode::BAD_REQUEST,
            StudyError::Session(SessionError::MissingField(_) | SessionError::InvalidField(_) | SessionError::EmptyMessage) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            StudyError::Session(SessionError::Finished) => StatusCode::CONFLICT,
            StudyError::Session(SessionError::Backend(_)) => StatusCode::BAD_GATEWAY,
            StudyError::NoSession(_) | StudyError::UnknownPair { .. } | StudyError::NoJudgments => StatusCode::NOT_FOUND,
            StudyError::Judgment(JudgmentError::NotAllocated { .. }) => StatusCode::NOT_FOUND,
            StudyError::Judgment(JudgmentError::AlreadySubmitted { .. })
            | StudyError::NotServed(_)
            | StudyError::AllocationMismatch { .. }
            | StudyError::Allocation(_) => StatusCode::CONFLICT,
            StudyError::Judgment(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StudyError::Session(SessionError::Template(_))
            | StudyError::MissingDialogue(_)
            | StudyError::Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for StudyError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let mut body = json!({ "error": self.to_string() });
        if let StudyError::Allocation(AllocationError::Infeasible { requested, feasible, binding }) = &self {
            body["requested"] = json!(requested);
            body["feasible"] = json!(feasible);
            body["binding_constraint"] = json!(binding);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, StudyError>;

#[derive(Debug, Deserialize)]
struct OpenSession {
    participant_id: String,
    #[serde(flatten)]
    form: PersonaForm,
}

async fn open_session(State(study): State<Arc<Study>>, Json(body): Json<OpenSession>) -> ApiResult<Response> {
    let (view, created) = study.open_session(&body.participant_id, body.form)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(view)).into_response())
}

async fn get_session(State(study): State<Arc<Study>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(study.session(&id)?).into_response())
}

#[derive(Debug, Deserialize)]
struct Message {
    text: String,
}

async fn post_message(State(study): State<Arc<Study>>, Path(id): Path<String>, Json(body): Json<Message>) -> ApiResult<Response> {
    Ok(Json(study.post_message(&id, &body.text).await?).into_response())
}

async fn next_goal(State(study): State<Arc<Study>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(study.next_goal(&id).await?).into_response())
}

async fn import_dialogues(State(study): State<Arc<Study>>, body: String) -> ApiResult<Response> {
    let ids = study.import(&body)?;
    Ok((StatusCode::CREATED, Json(json!({ "imported": ids.len(), "ids": ids }))).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    provenance: ExportFilter,
}

fn jsonl(lines: impl Iterator<Item = String>) -> Response {
    let body: String = lines.map(|l| l + "\n").collect();
    ([(header::CONTENT_TYPE, JSONL)], body).into_response()
}

async fn export_dialogues(State(study): State<Arc<Study>>, Query(q): Query<ExportQuery>) -> Response {
    jsonl(study.export(q.provenance).iter().map(|r| r.to_line()))
}

async fn export_judgments(State(study): State<Arc<Study>>) -> Response {
    jsonl(study.judgments().iter().map(|j| serde_json::to_string(j).expect("judgments serialize")))
}

#[derive(Debug, Deserialize)]
struct PairsQuery {
    k: Option<usize>,
}

async fn list_pairs(
    State(study): State<Arc<Study>>,
    Path(participant): Path<String>,
    Query(q): Query<PairsQuery>,
) -> ApiResult<Response> {
    Ok(Json(study.pairs(&participant, q.k)?).into_response())
}

async fn get_pair(State(study): State<Arc<Study>>, Path((participant, pair_id)): Path<(String, String)>) -> ApiResult<Response> {
    Ok(Json(study.serve_pair(&participant, &pair_id)?).into_response())
}

async fn submit_judgment(State(study): State<Arc<Study>>, Json(input): Json<JudgmentInput>) -> ApiResult<Response> {
    Ok((StatusCode::CREATED, Json(study.submit(&input)?)).into_response())
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    #[serde(default = "model")]
    group_by: String,
    #[serde(default)]
    format: ReportFormat,
}

fn model() -> String {
    "model".into()
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ReportFormat {
    #[default]
    Json,
    Text,
}

async fn report(State(study): State<Arc<Study>>, Query(q): Query<ReportQuery>) -> ApiResult<Response> {
    if q.group_by != "model" {
        let body = json!({ "error": format!("unsupported group_by {:?}; only \"model\" is available", q.group_by) });
        return Ok((StatusCode::BAD_REQUEST, Json(body)).into_response());
    }
    let report = study.report()?;
    Ok(match q.format {
        ReportFormat::Json => Json(report).into_response(),
        ReportFormat::Text => render_undetectability_table(&report).into_response(),
    })
}

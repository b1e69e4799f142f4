use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use causalwb::data::Dataset;
use causalwb::graph::{from_json, to_dot, KnowledgeDelta};
use causalwb::workflow::{
    estimate_runtime, profile, recommend, render_report, ArtifactKind, Goal, StepOutcome,
    WorkflowCommand,
};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::auth::Principal;
use crate::chat::{translate, ChatReply};
use crate::error::{ApiError, ApiResult};
use crate::state::{job_outcome, AppState, JobResult, JobState};

type AppRef = Arc<AppState>;

const MAX_UPLOAD: usize = 512 * 1024 * 1024;

pub fn router(state: AppRef) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/datasets", post(upload_dataset))
        .route("/sessions/{id}/artifacts", post(upload_artifact))
        .route("/sessions/{id}/artifacts/{aref}", get(get_artifact))
        .route("/sessions/{id}/steps", post(submit_step))
        .route("/sessions/{id}/jobs/{jid}", get(get_job))
        .route("/sessions/{id}/journal", get(get_journal))
        .route("/sessions/{id}/rollback/{step}", post(rollback))
        .route("/sessions/{id}/graph", get(get_graph))
        .route(
            "/sessions/{id}/knowledge",
            axum::routing::patch(patch_knowledge),
        )
        .route("/sessions/{id}/report", get(get_report))
        .route("/sessions/{id}/viewers/{user}", put(grant_viewer))
        .route("/sessions/{id}/chat", post(chat))
        .route("/sessions/{id}/recommendations", get(recommendations))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

fn principal(s: &AppState, h: &HeaderMap) -> ApiResult<Principal> {
    s.tokens.authenticate(h)
}

fn bytes_response(media: &str, body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, media.to_string())], body).into_response()
}

fn unprocessable(e: impl std::fmt::Display) -> ApiError {
    ApiError::Unprocessable(e.to_string())
}

async fn create_session(State(s): State<AppRef>, h: HeaderMap) -> ApiResult<Response> {
    let p = principal(&s, &h)?;
    if p.read_only {
        return Err(ApiError::Forbidden(
            "read-only tokens cannot create sessions".into(),
        ));
    }
    let e = s.create_session(&p)?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "id": e.id, "role": "owner" })),
    )
        .into_response())
}

async fn list_sessions(State(s): State<AppRef>, h: HeaderMap) -> ApiResult<Json<Value>> {
    let p = principal(&s, &h)?;
    let items: Vec<Value> = s
        .visible_sessions(&p)
        .into_iter()
        .map(|(id, role)| json!({ "id": id, "role": role }))
        .collect();
    Ok(Json(json!({ "sessions": items })))
}

async fn get_session(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let p = principal(&s, &h)?;
    let (e, role) = s.access(&p, &id, false)?;
    let acl = e.acl.read().expect("acl lock").clone();
    let sess = e.session.read().expect("session lock");
    let jobs: Vec<Value> = e
        .jobs
        .lock()
        .expect("jobs lock")
        .values()
        .map(|j| json!({ "id": j.id, "state": j.state }))
        .collect();
    Ok(Json(json!({
        "id": e.id,
        "role": role,
        "owner": acl.owner,
        "viewers": acl.viewers,
        "head": sess.head(),
        "journal_length": sess.journal().len(),
        "context": sess.context(),
        "busy": e.is_busy(),
        "jobs": jobs,
    })))
}

async fn upload_dataset(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path(id): Path<String>,
    mut mp: Multipart,
) -> ApiResult<Response> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, true)?;
    let field = mp.next_field().await.map_err(unprocessable)?;
    let data = match field {
        Some(f) => Some(f.bytes().await.map_err(unprocessable)?),
        None => None,
    };
    let data =
        data.ok_or_else(|| ApiError::Unprocessable("multipart body has no file part".into()))?;
    let r = e
        .session
        .write()
        .expect("session lock")
        .upload(ArtifactKind::Csv, data.to_vec())?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "ref": r, "kind": "csv" })),
    )
        .into_response())
}

#[derive(Deserialize)]
struct KindQuery {
    kind: String,
}

async fn upload_artifact(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path(id): Path<String>,
    Query(q): Query<KindQuery>,
    body: Bytes,
) -> ApiResult<Response> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, true)?;
    let kind = ArtifactKind::parse(&q.kind)
        .ok_or_else(|| unprocessable(format!("unknown kind '{}'", q.kind)))?;
    let r = e
        .session
        .write()
        .expect("session lock")
        .upload(kind, body.to_vec())?;
    Ok((StatusCode::CREATED, Json(json!({ "ref": r, "kind": kind }))).into_response())
}

#[derive(Deserialize, Default)]
struct FormatQuery {
    format: Option<String>,
}

async fn get_artifact(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path((id, aref)): Path<(String, String)>,
    Query(q): Query<FormatQuery>,
) -> ApiResult<Response> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, false)?;
    let (kind, bytes) = e.session.read().expect("session lock").artifact(&aref)?;
    match (kind, q.format.as_deref()) {
        (_, None) => Ok(bytes_response(kind.media_type(), bytes.to_vec())),
        (ArtifactKind::Dataset, Some("csv")) => {
            let ds: Dataset =
                serde_json::from_slice(&bytes).map_err(|e| ApiError::Internal(e.to_string()))?;
            Ok(bytes_response("text/csv", ds.to_csv().into_bytes()))
        }
        (ArtifactKind::Graph, Some("dot")) => graph_dot(&bytes),
        (ArtifactKind::Graph, Some("json")) => {
            Ok(bytes_response(kind.media_type(), bytes.to_vec()))
        }
        (_, Some(f)) => Err(unprocessable(format!(
            "format '{f}' is not available for {} artifacts",
            kind.name()
        ))),
    }
}

fn graph_dot(bytes: &[u8]) -> ApiResult<Response> {
    let text = std::str::from_utf8(bytes).map_err(|e| ApiError::Internal(e.to_string()))?;
    let g = from_json(text)?;
    Ok(bytes_response("text/vnd.graphviz", to_dot(&g).into_bytes()))
}

async fn submit_step(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, true)?;
    let cmd: WorkflowCommand = serde_json::from_slice(&body)
        .map_err(|err| ApiError::Unprocessable(format!("invalid command: {err}")))?;
    let guard = e.try_claim()?;
    if let WorkflowCommand::Rollback { step } = cmd {
        e.session.write().expect("session lock").rollback(step)?;
        return Ok(Json(json!({ "head": step })).into_response());
    }
    let prepared = e
        .session
        .read()
        .expect("session lock")
        .prepare(cmd.clone())?;
    let job = e.new_job(cmd);
    guard.defuse();
    let pool = s.pool.clone();
    let entry = e.clone();
    let jid = job.id;
    tokio::spawn(async move {
        let _permit = pool.acquire_owned().await;
        entry.update_job(jid, |j| {
            j.state = JobState::Running;
            j.progress = 0.1;
        });
        let joined = tokio::task::spawn_blocking(move || prepared.run()).await;
        let outcome = match joined {
            Ok(result) => entry
                .session
                .write()
                .expect("session lock")
                .commit(result)
                .map_err(|e| e.to_string()),
            Err(err) => Err(format!("step panicked: {err}")),
        };
        entry.update_job(jid, |j| {
            j.progress = 1.0;
            match outcome {
                Ok(rec) => {
                    let (state, error) = job_outcome(&rec);
                    j.state = state;
                    j.error = error;
                    j.result = Some(JobResult {
                        step_id: rec.id,
                        outputs: rec.outputs,
                    });
                }
                Err(msg) => {
                    j.state = JobState::Failed;
                    j.error = Some(msg);
                }
            }
        });
        entry.release();
    });
    Ok((StatusCode::ACCEPTED, Json(json!(job))).into_response())
}

async fn get_job(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path((id, jid)): Path<(String, u64)>,
) -> ApiResult<Json<Value>> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, false)?;
    let job = e
        .jobs
        .lock()
        .expect("jobs lock")
        .get(&jid)
        .cloned()
        .ok_or(ApiError::NotFound)?;
    Ok(Json(json!(job)))
}

async fn get_journal(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, false)?;
    let text = e.session.read().expect("session lock").export_journal();
    Ok(bytes_response("application/x-ndjson", text.into_bytes()))
}

async fn rollback(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path((id, step)): Path<(String, u64)>,
) -> ApiResult<Json<Value>> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, true)?;
    let _guard = e.try_claim()?;
    e.session.write().expect("session lock").rollback(step)?;
    Ok(Json(json!({ "head": step })))
}

async fn get_graph(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path(id): Path<String>,
    Query(q): Query<FormatQuery>,
) -> ApiResult<Response> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, false)?;
    let sess = e.session.read().expect("session lock");
    let r = sess.context().graph.ok_or(ApiError::NotFound)?;
    let (_, bytes) = sess.artifact(&r)?;
    match q.format.as_deref() {
        None | Some("json") => Ok(bytes_response("application/json", bytes.to_vec())),
        Some("dot") => graph_dot(&bytes),
        Some(f) => Err(unprocessable(format!(
            "unknown graph format '{f}'; use json or dot"
        ))),
    }
}

async fn patch_knowledge(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, true)?;
    let delta: KnowledgeDelta = serde_json::from_slice(&body)
        .map_err(|err| unprocessable(format!("invalid knowledge delta: {err}")))?;
    let _guard = e.try_claim()?;
    let mut sess = e.session.write().expect("session lock");
    let rec = match sess.execute(WorkflowCommand::SetKnowledge { delta })? {
        StepOutcome::Recorded(r) => r,
        StepOutcome::Moved { .. } => unreachable!("set_knowledge records a step"),
    };
    Ok(Json(
        json!({ "step": rec, "knowledge": sess.context().knowledge }),
    ))
}

async fn get_report(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, false)?;
    let sess = e.session.read().expect("session lock");
    if sess.head().is_none() {
        return Err(ApiError::NotFound);
    }
    let text = render_report(&sess)?;
    Ok(bytes_response(
        ArtifactKind::Report.media_type(),
        text.into_bytes(),
    ))
}

async fn grant_viewer(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path((id, user)): Path<(String, String)>,
) -> ApiResult<Json<Value>> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, true)?;
    {
        let mut acl = e.acl.write().expect("acl lock");
        if user != acl.owner && !acl.viewers.contains(&user) {
            acl.viewers.push(user);
            acl.viewers.sort();
        }
    }
    e.save_acl()?;
    let acl = e.acl.read().expect("acl lock").clone();
    Ok(Json(json!({ "owner": acl.owner, "viewers": acl.viewers })))
}

#[derive(Deserialize)]
struct ChatBody {
    text: String,
}

async fn chat(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path(id): Path<String>,
    Json(body): Json<ChatBody>,
) -> ApiResult<Json<Value>> {
    let p = principal(&s, &h)?;
    s.access(&p, &id, true)?;
    let source = if s.cfg.chat.is_some() {
        "chat_endpoint"
    } else {
        "grammar"
    };
    Ok(Json(
        match translate(&s.http, s.cfg.chat.as_ref(), &body.text).await {
            ChatReply::Command(c) => json!({ "command": c, "source": source }),
            ChatReply::Clarification {
                message,
                suggestions,
            } => {
                json!({ "clarification": { "message": message, "suggestions": suggestions }, "source": source })
            }
        },
    ))
}

async fn recommendations(
    State(s): State<AppRef>,
    h: HeaderMap,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let p = principal(&s, &h)?;
    let (e, _) = s.access(&p, &id, false)?;
    let goal = match q.get("goal").map(String::as_str) {
        None | Some("graph") => Goal::Graph,
        Some("rca") => Goal::Rca,
        Some("effect") => Goal::Effect,
        Some(g) => return Err(unprocessable(format!("unknown goal '{g}'"))),
    };
    let (ds, has_graph) = {
        let sess = e.session.read().expect("session lock");
        let ctx = sess.context();
        let r = ctx
            .dataset
            .ok_or_else(|| unprocessable("recommendations need a loaded dataset"))?;
        let (_, bytes) = sess.artifact(&r)?;
        let ds: Dataset =
            serde_json::from_slice(&bytes).map_err(|e| ApiError::Internal(e.to_string()))?;
        (ds, ctx.graph.is_some())
    };
    let prof = profile(&ds);
    let recs = recommend(&prof, goal, has_graph)?;
    let items: Vec<Value> = recs
        .iter()
        .map(|r| {
            let est = match estimate_runtime(&r.method, &prof, s.calibration.as_ref()) {
                Ok(e) => json!(e),
                Err(err) => json!({ "error": err.to_string() }),
            };
            json!({ "method": r.method, "rule": r.rule, "runtime": est })
        })
        .collect();
    Ok(Json(
        json!({ "profile": prof, "goal": goal, "recommendations": items }),
    ))
}

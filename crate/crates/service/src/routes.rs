use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use alignlab::certify::NextSequence;
use alignlab::pomdp::sample_trajectory;

use crate::error::ApiError;
use crate::store::{CreateSession, JudgmentRequest, Store};

type Shared = State<Arc<Store>>;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/judgments", post(judge))
        .route("/sessions/{id}/certificate", get(certificate))
        .route("/envs", get(list_envs))
        .route("/envs/{id}/preview", get(preview))
        .fallback(|| async { ApiError::not_found("no such route") })
        .with_state(store)
}

/// JSON body parsing that reports failures in the API error shape.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn create_session(State(store): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse(&body)?;
    let rec = store.create(&req)?;
    Ok((StatusCode::CREATED, Json(rec)).into_response())
}

async fn list_sessions(State(store): Shared) -> Json<Value> {
    Json(json!({ "sessions": store.records() }))
}

async fn get_session(State(store): Shared, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    Ok(Json(serde_json::to_value(store.record(&id)?).expect("record serializes")))
}

async fn next(State(store): Shared, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let (env_id, next, judged, required, status) = store.with_session(&id, |s| {
        (s.env_id().to_string(), s.next_sequence(), s.judged(), s.plan().m, s.status())
    })?;
    let entry = store.entry(&env_id)?;
    Ok(Json(match next {
        NextSequence::Sequence { index, trajectory } => json!({
            "exhausted": false,
            "sequence_index": index,
            "judged": judged,
            "required": required,
            "frame_fields": entry.manifest.frame_fields,
            "steps": entry.render(&trajectory),
        }),
        NextSequence::Exhausted => json!({
            "exhausted": true,
            "judged": judged,
            "required": required,
            "status": status,
        }),
    }))
}

async fn judge(
    State(store): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: JudgmentRequest = parse(&body)?;
    let rec = store.judge(&id, &req)?;
    Ok(Json(serde_json::to_value(rec).expect("record serializes")))
}

async fn certificate(State(store): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    let (cert, judged, required) = store.with_session(&id, |s| (s.certificate(), s.judged(), s.plan().m))?;
    Ok(match cert {
        Some(c) => (StatusCode::OK, Json(serde_json::to_value(c).expect("certificate serializes"))).into_response(),
        None => (
            StatusCode::ACCEPTED,
            Json(json!({ "pending": true, "judged": judged, "required": required })),
        )
            .into_response(),
    })
}

async fn list_envs(State(store): Shared) -> Json<Value> {
    let envs: Vec<Value> = store
        .catalog()
        .iter()
        .map(|e| {
            json!({
                "manifest": e.manifest,
                "policies": e.policies.iter().map(|p| p.id.clone()).collect::<Vec<_>>(),
                "horizon": e.buffered_env.buffered().horizon(),
            })
        })
        .collect();
    Json(json!({ "envs": envs }))
}

#[derive(Debug, Deserialize)]
struct PreviewQuery {
    policy: Option<String>,
    #[serde(default)]
    seed: u64,
}

async fn preview(
    State(store): Shared,
    Path(id): Path<String>,
    Query(q): Query<PreviewQuery>,
) -> Result<Json<Value>, ApiError> {
    let entry = store.entry(&id)?;
    let policy = match &q.policy {
        Some(pid) => entry
            .policy(pid)
            .ok_or_else(|| ApiError::not_found(format!("unknown policy `{pid}` for environment `{id}`")))?,
        None => &entry.policies[0],
    };
    let traj = sample_trajectory(entry.buffered_env.buffered(), policy, q.seed)?;
    Ok(Json(json!({
        "env_id": id,
        "policy_id": policy.id,
        "seed": q.seed,
        "frame_fields": entry.manifest.frame_fields,
        "steps": entry.render(&traj),
    })))
}

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use concord_core::cce::{self, SearchOptions};
use concord_core::events::{Analysis, EventKind};
use concord_core::model::{Ballot, Choice, ChoiceId, ParticipantId, Weights};
use concord_core::pma;
use concord_core::process::DiscussionOutcome;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;

use crate::app::{Role, SessionRecord, SharedState};
use crate::error::ApiError;

type ApiResult = Result<Json<Value>, ApiError>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/choices", post(add_choice))
        .route("/sessions/{id}/participants", post(add_participant))
        .route("/sessions/{id}/ballots/{participant_id}", put(put_ballot))
        .route("/sessions/{id}/start", post(start))
        .route("/sessions/{id}/cce", post(run_cce).get(get_cce))
        .route("/sessions/{id}/pma", get(get_pma))
        .route("/sessions/{id}/pma/table", get(get_pma_table))
        .route("/sessions/{id}/scc", get(get_scc))
        .route("/sessions/{id}/outcome", post(record_outcome))
        .route("/sessions/{id}/sublated", post(add_sublated))
        .route("/sessions/{id}/restart", post(restart))
        .with_state(state)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(t)| t)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn idempotency_key(headers: &HeaderMap) -> Option<String> {
    headers
        .get("idempotency-key")
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned)
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
}

/// Resolves the session and the caller's role.
async fn open(
    app: &SharedState,
    id: &str,
    headers: &HeaderMap,
) -> Result<(Arc<Mutex<SessionRecord>>, Role), ApiError> {
    let session = app.session(id)?;
    let role = session.lock().await.role(bearer(headers), app.options.auth)?;
    Ok((session, role))
}

fn facilitator_only(role: Role) -> Result<(), ApiError> {
    match role {
        Role::Facilitator => Ok(()),
        Role::Participant => Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "facilitator token required",
        )),
    }
}

async fn create_session(
    State(app): State<SharedState>,
    headers: HeaderMap,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let (session_id, facilitator, participant) = app.create(idempotency_key(&headers))?;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "session_id": session_id,
            "facilitator_token": facilitator,
            "participant_token": participant,
        })),
    ))
}

async fn get_session(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    let (session, role) = open(&app, &id, &headers).await?;
    let record = session.lock().await;
    Ok(Json(serde_json::to_value(record.view(role)).expect("view serializes")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewChoice {
    label: String,
    #[serde(default)]
    id: Option<ChoiceId>,
}

/// First `{prefix}{k}` not in `taken`.
fn fresh_id(prefix: &str, taken: impl Fn(&str) -> bool) -> String {
    (1..)
        .map(|k| format!("{prefix}{k}"))
        .find(|id| !taken(id))
        .expect("unbounded id space")
}

async fn add_choice(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<NewChoice>, JsonRejection>,
) -> ApiResult {
    let req = body(payload)?;
    let (session, role) = open(&app, &id, &headers).await?;
    facilitator_only(role)?;
    if req.label.trim().is_empty() {
        return Err(ApiError::bad_request("label must not be empty"));
    }
    let view = app
        .mutate(&session, idempotency_key(&headers), role, |state| {
            let choice_id = req.id.clone().unwrap_or_else(|| {
                fresh_id("c", |c| {
                    state.current_choices().any(|x| x.id.as_str() == c)
                        || state.profile().ancestry.iter().any(|x| x.id.as_str() == c)
                })
                .into()
            });
            if choice_id.as_str().is_empty() {
                return Err(ApiError::bad_request("choice id must not be empty"));
            }
            let next = state.add_choice(Choice::original(choice_id.clone(), req.label.clone()))?;
            Ok((
                EventKind::ChoiceAdded {
                    id: choice_id,
                    label: req.label.clone(),
                },
                next,
            ))
        })
        .await?;
    Ok(Json(view))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewParticipant {
    name: String,
    #[serde(default)]
    id: Option<ParticipantId>,
}

async fn add_participant(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<NewParticipant>, JsonRejection>,
) -> ApiResult {
    let req = body(payload)?;
    let (session, role) = open(&app, &id, &headers).await?;
    facilitator_only(role)?;
    let view = app
        .mutate(&session, idempotency_key(&headers), role, |state| {
            let pid = req.id.clone().unwrap_or_else(|| {
                fresh_id("p", |p| state.profile().participant(&p.into()).is_some()).into()
            });
            if pid.as_str().is_empty() {
                return Err(ApiError::bad_request("participant id must not be empty"));
            }
            let next = state.add_participant(pid.clone(), req.name.clone())?;
            Ok((
                EventKind::ParticipantAdded {
                    id: pid,
                    name: req.name.clone(),
                },
                next,
            ))
        })
        .await?;
    Ok(Json(view))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BallotBody {
    ranking: Vec<ChoiceId>,
    permit_count: usize,
}

async fn put_ballot(
    State(app): State<SharedState>,
    Path((id, participant_id)): Path<(String, String)>,
    headers: HeaderMap,
    payload: Result<Json<BallotBody>, JsonRejection>,
) -> ApiResult {
    let req = body(payload)?;
    let (session, role) = open(&app, &id, &headers).await?;
    let participant_id = ParticipantId::from(participant_id);
    let view = app
        .mutate(&session, idempotency_key(&headers), role, |state| {
            let ballot = Ballot {
                ranking: req.ranking.clone(),
                permit_count: req.permit_count,
            };
            let next = state.submit_ballot(&participant_id, ballot)?;
            Ok((
                EventKind::BallotSubmitted {
                    participant_id: participant_id.clone(),
                    ranking: req.ranking.clone(),
                    permit_count: req.permit_count,
                },
                next,
            ))
        })
        .await?;
    Ok(Json(view))
}

async fn start(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    let (session, role) = open(&app, &id, &headers).await?;
    facilitator_only(role)?;
    let view = app
        .mutate(&session, idempotency_key(&headers), role, |state| {
            Ok((EventKind::AnalysisRun(Analysis::Pma), state.start()?))
        })
        .await?;
    Ok(Json(view))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CceBody {
    #[serde(default = "one")]
    w_mu: f64,
    #[serde(default = "one")]
    w_sigma: f64,
}

fn one() -> f64 {
    1.0
}

async fn run_cce(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<CceBody>, JsonRejection>,
) -> ApiResult {
    let req = body(payload)?;
    let (session, role) = open(&app, &id, &headers).await?;
    facilitator_only(role)?;
    let weights = Weights::new(req.w_mu, req.w_sigma)?;
    let options = SearchOptions::new(weights).with_max_choices(app.options.cce_limit)?;
    let view = app
        .mutate(&session, idempotency_key(&headers), role, |state| {
            let next = state.run_cce(&options)?;
            Ok((EventKind::AnalysisRun(Analysis::Cce(options)), next))
        })
        .await?;
    Ok(Json(view))
}

async fn get_pma(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    let (session, _) = open(&app, &id, &headers).await?;
    let record = session.lock().await;
    let result = record
        .state
        .pma()
        .ok_or_else(|| ApiError::conflict("permissible meeting analysis has not run"))?;
    Ok(Json(serde_json::to_value(result).expect("serializes")))
}

#[derive(Deserialize)]
struct TableQuery {
    max_total: Option<usize>,
}

async fn get_pma_table(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    Query(q): Query<TableQuery>,
    headers: HeaderMap,
) -> ApiResult {
    let (session, _) = open(&app, &id, &headers).await?;
    let record = session.lock().await;
    let result = record
        .state
        .pma()
        .ok_or_else(|| ApiError::conflict("permissible meeting analysis has not run"))?;
    let max_total = q.max_total.unwrap_or(result.total_expansion);
    let profile = record.state.validated_profile()?;
    let rows = pma::expansion_table(&profile, max_total)?;
    Ok(Json(json!({ "max_total": max_total, "rows": rows })))
}

#[derive(Deserialize)]
struct CceQuery {
    limit: Option<usize>,
}

async fn get_cce(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    Query(q): Query<CceQuery>,
    headers: HeaderMap,
) -> ApiResult {
    let (session, _) = open(&app, &id, &headers).await?;
    let record = session.lock().await;
    let result = record
        .state
        .cce()
        .ok_or_else(|| ApiError::conflict("compromise choice exploration has not run"))?;
    match q.limit {
        None => Ok(Json(serde_json::to_value(result).expect("serializes"))),
        Some(limit) => {
            let options = record.state.cce_options().copied().unwrap_or_default();
            let profile = record.state.validated_profile()?;
            let rows = cce::score_table_with(&profile, &options, limit)?;
            Ok(Json(json!({ "weights": options.weights, "rows": rows })))
        }
    }
}

async fn get_scc(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    let (session, _) = open(&app, &id, &headers).await?;
    let record = session.lock().await;
    let candidates = record.state.scc_candidates()?;
    Ok(Json(serde_json::to_value(candidates).expect("serializes")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeBody {
    consensus: bool,
    #[serde(default)]
    choice_id: Option<ChoiceId>,
    #[serde(default)]
    note: String,
}

async fn record_outcome(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<OutcomeBody>, JsonRejection>,
) -> ApiResult {
    let req = body(payload)?;
    let (session, role) = open(&app, &id, &headers).await?;
    facilitator_only(role)?;
    let outcome = DiscussionOutcome {
        consensus: req.consensus,
        choice: req.choice_id,
        note: req.note,
    };
    let view = app
        .mutate(&session, idempotency_key(&headers), role, |state| {
            let next = state.record_outcome(outcome.clone())?;
            Ok((EventKind::OutcomeRecorded(outcome), next))
        })
        .await?;
    Ok(Json(view))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SublatedBody {
    label: String,
    sources: Vec<ChoiceId>,
}

async fn add_sublated(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<SublatedBody>, JsonRejection>,
) -> ApiResult {
    let req = body(payload)?;
    let (session, role) = open(&app, &id, &headers).await?;
    facilitator_only(role)?;
    let view = app
        .mutate(&session, idempotency_key(&headers), role, |state| {
            let new_id = state.next_sublated_id();
            let next = state.add_sublated_choice(req.label.clone(), &req.sources)?;
            Ok((
                EventKind::SublatedAdded {
                    id: new_id,
                    label: req.label.clone(),
                    sources: req.sources.clone(),
                },
                next,
            ))
        })
        .await?;
    Ok(Json(view))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RestartBody {
    #[serde(default)]
    retain: Vec<ChoiceId>,
}

async fn restart(
    State(app): State<SharedState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<RestartBody>, JsonRejection>,
) -> ApiResult {
    let req = body(payload)?;
    let (session, role) = open(&app, &id, &headers).await?;
    facilitator_only(role)?;
    let view = app
        .mutate(&session, idempotency_key(&headers), role, |state| {
            let next = state.restart_with_sublated(&req.retain)?;
            Ok((
                EventKind::Restarted {
                    retain: req.retain.clone(),
                },
                next,
            ))
        })
        .await?;
    Ok(Json(view))
}

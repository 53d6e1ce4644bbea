//! HTTP facade over [`SessionStore`].

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tower_http::services::ServeDir;

use crate::api::{
    ApiError, ClickBody, ConstraintBody, ConstraintResponse, CreateBody, ErrorCode, FeedsView, SessionDescriptor,
    StepResponse,
};
use crate::session::SessionError;
use crate::store::{CreateRequest, SessionStore};

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self.code {
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::InvalidInput => StatusCode::CONFLICT,
            ErrorCode::InfeasibleConstraints => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::PoolExhausted => StatusCode::CONFLICT,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(err: SessionError) -> Self {
        let code = match &err {
            SessionError::UnknownSession(_) => ErrorCode::NotFound,
            SessionError::UnknownArticle(_) => ErrorCode::InvalidInput,
            SessionError::InfeasibleConstraints(_) | SessionError::InvalidConfig(_) => {
                ErrorCode::InfeasibleConstraints
            }
            SessionError::PoolExhausted(_) => ErrorCode::PoolExhausted,
            SessionError::CorruptLog { .. }
            | SessionError::MalformedLog { .. }
            | SessionError::Persist(_)
            | SessionError::Core(_) => ErrorCode::Internal,
        };
        if code == ErrorCode::Internal {
            tracing::error!(%err, "request failed");
        }
        Self::new(code, err.to_string())
    }
}

enum Failure {
    Api(ApiError),
    /// Malformed body: 400 with `invalid_input`.
    BadRequest(String),
}

impl From<SessionError> for Failure {
    fn from(err: SessionError) -> Self {
        Self::Api(err.into())
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        match self {
            Failure::Api(err) => (err.status(), Json(err)).into_response(),
            Failure::BadRequest(message) => (
                StatusCode::BAD_REQUEST,
                Json(ApiError::new(ErrorCode::InvalidInput, message)),
            )
                .into_response(),
        }
    }
}

fn parse<T: DeserializeOwned + Default>(body: &Bytes, allow_empty: bool) -> Result<T, Failure> {
    if allow_empty && body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| Failure::BadRequest(format!("invalid body: {e}")))
}

fn parse_required<T: DeserializeOwned>(body: &Bytes) -> Result<T, Failure> {
    serde_json::from_slice(body).map_err(|e| Failure::BadRequest(format!("invalid body: {e}")))
}

type Shared = Arc<SessionStore>;

async fn create_session(State(store): State<Shared>, body: Bytes) -> Result<impl IntoResponse, Failure> {
    let body: CreateBody = parse(&body, true)?;
    let state = store.create(CreateRequest {
        seed: body.seed,
        lower_liberal: body.lower_liberal,
        upper_liberal: body.upper_liberal,
    })?;
    Ok((StatusCode::CREATED, Json(SessionDescriptor::new(&state))))
}

async fn get_feeds(State(store): State<Shared>, Path(id): Path<String>) -> Result<Json<FeedsView>, Failure> {
    Ok(Json(FeedsView::new(&store.get(&id)?)))
}

async fn post_click(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<StepResponse>, Failure> {
    // Resolve the session first so an unknown id is a 404 even with a bad body.
    store.get(&id)?;
    let body: ClickBody = parse_required(&body)?;
    let state = store.click(&id, body.feed, &body.article_id)?;
    Ok(Json(StepResponse::new(&state)))
}

async fn post_advance(State(store): State<Shared>, Path(id): Path<String>) -> Result<Json<StepResponse>, Failure> {
    Ok(Json(StepResponse::new(&store.advance(&id)?)))
}

async fn put_constraints(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ConstraintResponse>, Failure> {
    store.get(&id)?;
    let body: ConstraintBody = parse_required(&body)?;
    let state = store.set_constraints(&id, body.lower_liberal, body.upper_liberal)?;
    Ok(Json(ConstraintResponse::new(&state)))
}

async fn get_history(
    State(store): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<Vec<crate::session::HistoryPoint>>, Failure> {
    Ok(Json(store.get(&id)?.history))
}

/// API routes, plus the UI bundle under `/` when `static_dir` is given.
pub fn router(store: Arc<SessionStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/feeds", get(get_feeds))
        .route("/sessions/{id}/clicks", post(post_click))
        .route("/sessions/{id}/advance", post(post_advance))
        .route("/sessions/{id}/constraints", put(put_constraints))
        .route("/sessions/{id}/history", get(get_history))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api,
    }
}

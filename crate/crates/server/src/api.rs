//! REST routes over a [`Workspace`].

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use seqlab_core::annotation::{LabelApplication, Rubric, StoreError, Violation};
use seqlab_core::dtw::DtwError;
use seqlab_core::seqmine::MineError;
use seqlab_core::telemetry::{event_to_json, ParseError};
use seqlab_core::Segment;

use crate::pipeline::{MineParams, PipelineError};
use crate::workspace::{Workspace, WorkspaceError};

const INDEX_HTML: &str = include_str!("../static/index.html");

pub struct ApiError(WorkspaceError);

impl From<WorkspaceError> for ApiError {
    fn from(e: WorkspaceError) -> Self {
        ApiError(e)
    }
}

impl From<seqlab_core::annotation::RubricError> for ApiError {
    fn from(e: seqlab_core::annotation::RubricError) -> Self {
        ApiError(e.into())
    }
}

fn analysis_status(e: &PipelineError) -> StatusCode {
    match e {
        PipelineError::Mine(MineError::EmptyCorpus | MineError::EmptyTable)
        | PipelineError::Dtw(DtwError::TooFewSequences(_)) => StatusCode::UNPROCESSABLE_ENTITY,
        PipelineError::Mine(_) | PipelineError::Dtw(DtwError::BadK { .. }) | PipelineError::Kappa(_) => {
            StatusCode::BAD_REQUEST
        }
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.0.to_string();
        let (status, extra) = match &self.0 {
            WorkspaceError::Parse(p) => {
                let line = match p {
                    ParseError::MalformedLine { line, .. } => Some(*line),
                    _ => None,
                };
                (StatusCode::BAD_REQUEST, json!({ "line": line }))
            }
            WorkspaceError::Conflict(_) => (StatusCode::CONFLICT, json!({})),
            WorkspaceError::NotFound(_) => (StatusCode::NOT_FOUND, json!({})),
            WorkspaceError::BadRequest(_) | WorkspaceError::Rubric(_) => (StatusCode::BAD_REQUEST, json!({})),
            WorkspaceError::Store(StoreError::Violation(v)) => {
                let status = match v {
                    Violation::Overlap { .. } => StatusCode::CONFLICT,
                    _ => StatusCode::BAD_REQUEST,
                };
                (status, json!({ "violation": v }))
            }
            WorkspaceError::Store(StoreError::DuplicateId(_)) => (StatusCode::CONFLICT, json!({})),
            WorkspaceError::Store(StoreError::NotFound(_)) => (StatusCode::NOT_FOUND, json!({})),
            WorkspaceError::Pipeline(p) => (analysis_status(p), json!({})),
            WorkspaceError::Store(_) | WorkspaceError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, json!({})),
        };
        let mut body = json!({ "error": message });
        if let (Some(obj), Some(more)) = (body.as_object_mut(), extra.as_object()) {
            for (k, v) in more {
                if !v.is_null() {
                    obj.insert(k.clone(), v.clone());
                }
            }
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Ws = State<Arc<Workspace>>;

fn json_bytes(body: impl Into<Body>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body.into()).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, WorkspaceError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.expect("worker panicked").map_err(ApiError)
}

fn parse_segment(raw: Option<&str>) -> ApiResult<Option<Segment>> {
    raw.filter(|s| !s.is_empty() && *s != "all")
        .map(|s| s.parse::<Segment>().map_err(|e| ApiError(WorkspaceError::BadRequest(e))))
        .transpose()
}

pub fn router(ws: Arc<Workspace>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/matches", get(list_matches).post(ingest))
        .route("/api/matches/{id}", get(get_match))
        .route("/api/matches/{id}/events", get(events))
        .route("/api/matches/{id}/sequences", get(sequences))
        .route("/api/matches/{id}/annotations", post(annotate))
        .route("/api/rubric", get(get_rubric).put(put_rubric))
        .route("/api/annotations", get(list_annotations))
        .route("/api/annotations/{id}", delete(delete_annotation))
        .route("/api/mine", get(mine))
        .route("/api/dtw/embedding", get(embedding))
        .route("/api/graph", get(graph))
        .route("/api/irr", get(irr))
        .route("/api/report/segments", get(report))
        .with_state(ws);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(INDEX_HTML) })),
    }
}

async fn list_matches(State(ws): Ws) -> Json<serde_json::Value> {
    Json(json!({ "matches": ws.summaries() }))
}

async fn ingest(State(ws): Ws, body: Bytes) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let m = blocking(move || ws.ingest(&body)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "match_id": m.log.match_id, "hash": m.hash }))))
}

async fn get_match(State(ws): Ws, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let m = ws.get_match(&id)?;
    Ok(Json(json!({
        "match_id": m.log.match_id,
        "tick_interval_s": m.log.tick_interval_s,
        "map_bounds": m.log.map_bounds,
        "players": m.log.players,
        "match_end_s": m.log.match_end_s(),
        "boundaries": m.boundaries,
        "hash": m.hash,
    })))
}

#[derive(Debug, Deserialize)]
struct EventQuery {
    from: Option<f64>,
    to: Option<f64>,
    kinds: Option<String>,
}

async fn events(State(ws): Ws, Path(id): Path<String>, Query(q): Query<EventQuery>) -> ApiResult<Json<serde_json::Value>> {
    let m = ws.get_match(&id)?;
    let from = q.from.unwrap_or(f64::NEG_INFINITY);
    let to = q.to.unwrap_or(f64::INFINITY);
    if from > to {
        return Err(WorkspaceError::BadRequest(format!("empty window [{from}, {to}]")).into());
    }
    let kinds: Option<Vec<&str>> = q.kinds.as_deref().map(|k| k.split(',').filter(|s| !s.is_empty()).collect());
    let events: Vec<serde_json::Value> =
        m.log.events_between(from, to, kinds.as_deref()).into_iter().map(event_to_json).collect();
    Ok(Json(json!({ "match_id": id, "events": events })))
}

#[derive(Debug, Deserialize)]
struct SequenceQuery {
    segment: Option<String>,
    #[serde(default)]
    dss: bool,
}

async fn sequences(State(ws): Ws, Path(id): Path<String>, Query(q): Query<SequenceQuery>) -> ApiResult<Response> {
    let segment = parse_segment(q.segment.as_deref())?;
    Ok(json_bytes(ws.sequences_json(&id, segment, q.dss)?))
}

async fn get_rubric(State(ws): Ws) -> Json<Rubric> {
    Json((*ws.rubric()).clone())
}

/// Accepts the JSON form or the TOML file text.
async fn put_rubric(State(ws): Ws, body: String) -> ApiResult<Json<Rubric>> {
    let rubric: Rubric = if body.trim_start().starts_with('{') {
        serde_json::from_str(&body).map_err(|e| WorkspaceError::BadRequest(e.to_string()))?
    } else {
        seqlab_core::annotation::load_rubric(&body)?
    };
    ws.set_rubric(rubric.clone())?;
    Ok(Json(rubric))
}

/// Body of `POST /api/matches/{id}/annotations`; the match comes from the path.
#[derive(Debug, Deserialize)]
pub struct NewApplication {
    #[serde(default)]
    pub application_id: String,
    pub annotator_id: String,
    #[serde(default)]
    pub match_id: Option<String>,
    pub player_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
    pub tag: String,
}

async fn annotate(
    State(ws): Ws,
    Path(id): Path<String>,
    Json(req): Json<NewApplication>,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    if req.match_id.as_ref().is_some_and(|m| *m != id) {
        return Err(WorkspaceError::BadRequest("match_id in body differs from path".into()).into());
    }
    let app = LabelApplication {
        application_id: req.application_id,
        annotator_id: req.annotator_id,
        match_id: id,
        player_id: req.player_id,
        start_s: req.start_s,
        end_s: req.end_s,
        label: req.label,
        tag: req.tag,
    };
    let stored = blocking(move || ws.annotate(app)).await?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(stored).expect("serializes"))))
}

#[derive(Debug, Deserialize)]
struct AnnotationQuery {
    annotator: Option<String>,
    #[serde(rename = "match")]
    match_id: Option<String>,
}

#[derive(Serialize)]
struct AnnotationList {
    last_tx: u64,
    applications: Vec<seqlab_core::annotation::StoredApplication>,
}

async fn list_annotations(State(ws): Ws, Query(q): Query<AnnotationQuery>) -> Json<AnnotationList> {
    let snap = ws.store().snapshot();
    Json(AnnotationList {
        last_tx: snap.last_tx,
        applications: snap.query(q.annotator.as_deref(), q.match_id.as_deref()),
    })
}

async fn delete_annotation(State(ws): Ws, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let tx = blocking(move || ws.delete_annotation(&id)).await?;
    Ok(Json(json!({ "tx": tx })))
}

#[derive(Debug, Deserialize)]
struct MineQuery {
    segment: Option<String>,
    top: Option<usize>,
    min_support: Option<f64>,
    ngram_min: Option<usize>,
    ngram_max: Option<usize>,
}

async fn mine(State(ws): Ws, Query(q): Query<MineQuery>) -> ApiResult<Response> {
    let segment = parse_segment(q.segment.as_deref())?;
    let d = MineParams::default();
    let params = MineParams {
        top: q.top.unwrap_or(d.top),
        min_support: q.min_support.unwrap_or(d.min_support),
        ngram_min: q.ngram_min.unwrap_or(d.ngram_min),
        ngram_max: q.ngram_max.unwrap_or(d.ngram_max),
    };
    let body = blocking(move || ws.mine_json(segment, params)).await?;
    Ok(json_bytes((*body).clone()))
}

#[derive(Debug, Deserialize)]
struct EmbeddingQuery {
    segment: Option<String>,
    k: Option<usize>,
}

async fn embedding(State(ws): Ws, Query(q): Query<EmbeddingQuery>) -> ApiResult<Response> {
    let segment = parse_segment(q.segment.as_deref())?;
    let k = q.k.unwrap_or(5);
    let body = blocking(move || ws.embedding_json(segment, k)).await?;
    Ok(json_bytes((*body).clone()))
}

#[derive(Debug, Deserialize)]
struct GraphQuery {
    segment: Option<String>,
}

async fn graph(State(ws): Ws, Query(q): Query<GraphQuery>) -> ApiResult<Response> {
    let segment = parse_segment(q.segment.as_deref())?;
    let body = blocking(move || ws.graph_json(segment)).await?;
    Ok(json_bytes((*body).clone()))
}

#[derive(Debug, Deserialize)]
struct IrrQuery {
    a: String,
    b: String,
    window: Option<f64>,
}

async fn irr(State(ws): Ws, Query(q): Query<IrrQuery>) -> ApiResult<Response> {
    let window = q.window.unwrap_or(5.0);
    let body = blocking(move || ws.irr_json(&q.a, &q.b, window)).await?;
    Ok(json_bytes((*body).clone()))
}

async fn report(State(ws): Ws) -> ApiResult<Response> {
    let body = blocking(move || ws.report_json()).await?;
    Ok(json_bytes((*body).clone()))
}

/// Serve until ctrl-c.
pub async fn serve(ws: Arc<Workspace>, addr: std::net::SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("seqlab listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(ws, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;
    use seqlab_core::telemetry::parse_match_log;

    fn status(e: WorkspaceError) -> (StatusCode, serde_json::Value) {
        let r = ApiError(e).into_response();
        let status = r.status();
        let body = body_json(r);
        (status, body)
    }

    fn body_json(r: Response) -> serde_json::Value {
        let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
        let bytes = rt.block_on(axum::body::to_bytes(r.into_body(), usize::MAX)).unwrap();
        serde_json::from_slice(&bytes).unwrap()
    }

    #[test]
    fn errors_map_to_statuses() {
        let parse = parse_match_log(b"{\"type\":\"header\"\n").unwrap_err();
        let (s, body) = status(WorkspaceError::Parse(parse));
        assert_eq!(s, StatusCode::BAD_REQUEST);
        assert!(body["error"].is_string());
        assert_eq!(status(WorkspaceError::Conflict("m".into())).0, StatusCode::CONFLICT);
        assert_eq!(status(WorkspaceError::NotFound("m".into())).0, StatusCode::NOT_FOUND);
        let empty = PipelineError::Mine(MineError::EmptyCorpus);
        assert_eq!(status(WorkspaceError::Pipeline(empty)).0, StatusCode::UNPROCESSABLE_ENTITY);
        let too_few = PipelineError::Dtw(DtwError::TooFewSequences(2));
        assert_eq!(status(WorkspaceError::Pipeline(too_few)).0, StatusCode::UNPROCESSABLE_ENTITY);
    }

    #[test]
    fn segment_query_accepts_all_and_blank() {
        assert_eq!(parse_segment(None).ok().unwrap(), None);
        assert_eq!(parse_segment(Some("all")).ok().unwrap(), None);
        assert_eq!(parse_segment(Some("")).ok().unwrap(), None);
        assert_eq!(parse_segment(Some("late")).ok().unwrap(), Some(Segment::Late));
        assert!(parse_segment(Some("overtime")).is_err());
    }
}

//! The review API.
//!
//! Reads go straight to the corpus files, which are always replaced
//! atomically. Label edits, validations and relabeling after training take
//! one shared write lock, so edits never interleave with a relabel pass.
//! Training runs in the background, one job per source at a time; further
//! requests for the same source wait their turn.
//!
//! Every JSON response carries the header `x-dla-schema: 1`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dla_core::{BlockKind, BoundingBox, LabelOrigin, LabelingMode, LayoutLabel, PageGeometry};
use dla_corpus::{
    check_threshold, curate_model, edit_label, relabel_pending, revert_label, validate_document, Corpus, CorpusError, DocumentManifest,
    LabelEdit, ValidationStatus,
};

pub const SCHEMA_VERSION: &str = "1";
pub const DEFAULT_PAGE_SIZE: usize = 100;
pub const EVAL_FILE: &str = "eval.json";
const PREVIEW_CHARS: usize = 200;

/// Per-source training bookkeeping.
#[derive(Default)]
struct Trainer {
    lock: tokio::sync::Mutex<()>,
    /// Jobs accepted and not yet finished, including the running one.
    pending: AtomicUsize,
    running: AtomicUsize,
    last_error: Mutex<Option<String>>,
}

pub struct AppState {
    corpus: Corpus,
    writes: tokio::sync::Mutex<()>,
    trainers: Mutex<HashMap<String, Arc<Trainer>>>,
    /// Highest number of training jobs ever observed running at once.
    peak_training: AtomicUsize,
}

impl AppState {
    pub fn new(corpus: Corpus) -> Arc<Self> {
        Arc::new(Self { corpus, writes: tokio::sync::Mutex::new(()), trainers: Mutex::default(), peak_training: AtomicUsize::new(0) })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn peak_training(&self) -> usize {
        self.peak_training.load(Ordering::SeqCst)
    }

    fn trainer(&self, source_id: &str) -> Arc<Trainer> {
        self.trainers.lock().expect("trainer map").entry(source_id.to_string()).or_default().clone()
    }
}

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/sources", get(list_sources))
        .route("/api/sources/{id}/status", get(source_status))
        .route("/api/sources/{id}/train", post(train))
        .route("/api/documents", get(list_documents))
        .route("/api/documents/{id}", get(get_document))
        .route("/api/documents/{id}/pdf", get(get_pdf))
        .route("/api/documents/{id}/pages/{n}", get(get_page))
        .route("/api/documents/{id}/blocks/{bid}/label", post(set_label))
        .route("/api/documents/{id}/blocks/{bid}/revert", post(revert))
        .route("/api/documents/{id}/validate", post(validate))
        .with_state(state)
        .layer(axum::middleware::map_response(|mut r: Response| async move {
            r.headers_mut().insert("x-dla-schema", HeaderValue::from_static(SCHEMA_VERSION));
            r
        }));
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the process is stopped.
pub async fn serve(corpus: Corpus, addr: std::net::SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(corpus), ui_dir)).await
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        let status = match &e {
            CorpusError::UnknownSource(_) | CorpusError::UnknownDocument(_) | CorpusError::UnknownBlock { .. } => StatusCode::NOT_FOUND,
            CorpusError::NotText { .. } | CorpusError::BelowThreshold { .. } => StatusCode::CONFLICT,
            CorpusError::NotTextLabel(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut message = e.to_string();
        if let CorpusError::BelowThreshold { needed, .. } = e {
            message.push_str(&format!(" (a source is trained only once {needed} pages have been validated)"));
        }
        ApiError(status, message)
    }
}

fn not_found(what: String) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, what)
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking corpus work off the async threads.
async fn blocking<T: Send + 'static>(state: &Arc<AppState>, f: impl FnOnce(&Corpus) -> Result<T, CorpusError> + Send + 'static) -> ApiResult<T> {
    let s = state.clone();
    tokio::task::spawn_blocking(move || f(&s.corpus))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Debug, Deserialize)]
pub struct DocumentQuery {
    pub source: Option<String>,
    pub status: Option<String>,
    /// Last doc id of the previous page.
    pub cursor: Option<String>,
    pub limit: Option<usize>,
}

/// Manifests ordered by doc id. When more remain, the `x-next-cursor` header
/// holds the value to pass as `cursor` for the next page.
async fn list_documents(State(state): State<Arc<AppState>>, Query(q): Query<DocumentQuery>) -> ApiResult<Response> {
    let status = match q.status.as_deref() {
        Some(s) => Some(s.parse::<ValidationStatus>().map_err(|e| ApiError(StatusCode::BAD_REQUEST, e))?),
        None => None,
    };
    let limit = q.limit.unwrap_or(DEFAULT_PAGE_SIZE).max(1);
    let source = q.source.clone();
    let all = blocking(&state, move |c| {
        if let Some(s) = &source {
            if !c.source_ids()?.contains(s) {
                return Err(CorpusError::UnknownSource(s.clone()));
            }
        }
        c.manifests(source.as_deref())
    })
    .await?;
    let mut rest = all
        .into_iter()
        .filter(|m| status.map_or(true, |s| m.status == s))
        .filter(|m| q.cursor.as_ref().map_or(true, |c| &m.doc_id > c))
        .peekable();
    let page: Vec<DocumentManifest> = rest.by_ref().take(limit).collect();
    let more = rest.peek().is_some();
    let mut resp = Json(page.clone()).into_response();
    if more {
        if let Some(last) = page.last() {
            if let Ok(v) = HeaderValue::from_str(&last.doc_id) {
                resp.headers_mut().insert("x-next-cursor", v);
            }
        }
    }
    Ok(resp)
}

async fn get_document(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<DocumentManifest>> {
    Ok(Json(blocking(&state, move |c| c.manifest(&id)).await?))
}

async fn get_pdf(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = blocking(&state, move |c| {
        c.manifest(&id)?;
        let path = c.pdf_path(&id)?;
        std::fs::read(&path).map_err(|source| CorpusError::Io { path, source })
    })
    .await?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/pdf")], bytes).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockView {
    pub block_id: String,
    #[serde(rename = "B")]
    pub kind: BlockKind,
    #[serde(rename = "L")]
    pub label: LayoutLabel,
    pub bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    pub origin: LabelOrigin,
    pub model_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageView {
    pub doc_id: String,
    pub page_index: usize,
    pub geometry: PageGeometry,
    pub status: ValidationStatus,
    pub blocks: Vec<BlockView>,
}

fn preview(s: &str) -> String {
    match s.char_indices().nth(PREVIEW_CHARS) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.to_string(),
    }
}

async fn get_page(State(state): State<Arc<AppState>>, Path((id, n)): Path<(String, usize)>) -> ApiResult<Json<PageView>> {
    let (m, records) = blocking(&state, move |c| Ok((c.manifest(&id)?, c.layout(&id)?))).await?;
    let geometry = *m.pages.get(n).ok_or_else(|| not_found(format!("document {} has no page {n}", m.doc_id)))?;
    let blocks = records
        .into_iter()
        .filter(|r| r.page == n)
        .map(|r| BlockView {
            block_id: r.block_id,
            kind: r.kind,
            label: r.label,
            bbox: r.bbox,
            payload: r.f12.as_deref().map(preview),
            origin: r.label_origin,
            model_version: r.model_version,
            confidence: r.confidence,
        })
        .collect();
    Ok(Json(PageView { doc_id: m.doc_id, page_index: n, geometry, status: m.status, blocks }))
}

/// `{"action": "cycle"}`, or an explicit label given by name or code:
/// `{"action": "Summary"}`, `{"action": 5}` or `{"label": "Summary"}`.
#[derive(Debug, Deserialize)]
pub struct LabelRequest {
    pub action: Option<Value>,
    pub label: Option<Value>,
}

impl LabelRequest {
    fn edit(&self) -> Result<LabelEdit, ApiError> {
        let bad = |m: String| ApiError(StatusCode::BAD_REQUEST, m);
        let v = self.label.as_ref().or(self.action.as_ref()).ok_or_else(|| bad("expected \"action\" or \"label\"".into()))?;
        let text = match v {
            Value::String(s) if s.eq_ignore_ascii_case("cycle") && self.label.is_none() => return Ok(LabelEdit::Cycle),
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            other => return Err(bad(format!("cannot read a label from {other}"))),
        };
        text.parse::<LayoutLabel>().map(LabelEdit::Set).map_err(|e| bad(e.to_string()))
    }
}

async fn set_label(
    State(state): State<Arc<AppState>>,
    Path((id, bid)): Path<(String, String)>,
    Json(req): Json<LabelRequest>,
) -> ApiResult<Json<BlockView>> {
    let edit = req.edit()?;
    let _w = state.writes.lock().await;
    let r = blocking(&state, move |c| edit_label(c, &id, &bid, edit)).await?;
    Ok(Json(block_view(r)))
}

fn block_view(r: dla_corpus::LayoutRecord) -> BlockView {
    BlockView {
        block_id: r.block_id,
        kind: r.kind,
        label: r.label,
        bbox: r.bbox,
        payload: r.f12.as_deref().map(preview),
        origin: r.label_origin,
        model_version: r.model_version,
        confidence: r.confidence,
    }
}

#[derive(Debug, Deserialize)]
pub struct RevertRequest {
    /// Journal sequence number to restore the block to.
    pub seq: u64,
}

async fn revert(State(state): State<Arc<AppState>>, Path((id, bid)): Path<(String, String)>, Json(req): Json<RevertRequest>) -> ApiResult<Json<BlockView>> {
    let _w = state.writes.lock().await;
    let r = blocking(&state, move |c| revert_label(c, &id, &bid, req.seq)).await?;
    Ok(Json(block_view(r)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub doc_id: String,
    pub status: ValidationStatus,
    /// False when the document had already been validated.
    pub newly_validated: bool,
}

/// Validates a document and queues a curation step for its source.
async fn validate(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ValidateResponse>> {
    let doc = id.clone();
    let (newly, source) = {
        let _w = state.writes.lock().await;
        blocking(&state, move |c| {
            let newly = validate_document(c, &doc)?;
            Ok((newly, c.manifest(&doc)?.source_id))
        })
        .await?
    };
    if newly {
        enqueue_curation(&state, &source, vec![id.clone()]);
    }
    Ok(Json(ValidateResponse { doc_id: id, status: ValidationStatus::Validated, newly_validated: newly }))
}

/// Queues a curation job for `source_id`. Jobs of one source run one at a time.
fn enqueue_curation(state: &Arc<AppState>, source_id: &str, docs: Vec<String>) {
    let trainer = state.trainer(source_id);
    trainer.pending.fetch_add(1, Ordering::SeqCst);
    let (state, source) = (state.clone(), source_id.to_string());
    tokio::spawn(async move {
        let _turn = trainer.lock.lock().await;
        let running = trainer.running.fetch_add(1, Ordering::SeqCst) + 1;
        state.peak_training.fetch_max(running, Ordering::SeqCst);
        let src = source.clone();
        let result = match blocking(&state, move |c| curate_model(c, &src, &docs)).await {
            Ok(report) if report.trained => {
                let _w = state.writes.lock().await;
                let src = source.clone();
                blocking(&state, move |c| relabel_pending(c, &src)).await.map(|_| report.training_error)
            }
            Ok(report) => Ok(report.training_error),
            Err(e) => Err(e),
        };
        let error = match result {
            Ok(e) => e,
            Err(ApiError(_, m)) => Some(m),
        };
        if let Some(e) = &error {
            log::warn!("curation of source {source} failed: {e}");
        }
        *trainer.last_error.lock().expect("trainer error slot") = error;
        trainer.running.fetch_sub(1, Ordering::SeqCst);
        trainer.pending.fetch_sub(1, Ordering::SeqCst);
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub source_id: String,
    pub queued: bool,
    /// Jobs ahead of or running alongside this one in the source's queue.
    pub position: usize,
}

async fn train(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<(StatusCode, Json<TrainResponse>)> {
    let src = id.clone();
    blocking(&state, move |c| check_threshold(c, &src)).await?;
    let position = state.trainer(&id).pending.load(Ordering::SeqCst);
    enqueue_curation(&state, &id, Vec::new());
    Ok((StatusCode::ACCEPTED, Json(TrainResponse { source_id: id, queued: true, position })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceStatus {
    pub source_id: String,
    pub name: String,
    pub mode: LabelingMode,
    pub model_version: u32,
    pub validated_pages: usize,
    pub validated_docs: usize,
    pub threshold: usize,
    pub documents: usize,
    /// Curation jobs waiting or running.
    pub training_jobs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_training_error: Option<String>,
    /// The most recent evaluation report saved for the source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_eval: Option<Value>,
}

fn status_of(c: &Corpus, id: &str) -> Result<SourceStatus, CorpusError> {
    let profile = c.profile(id)?;
    let s = c.state(id)?;
    let last_eval = std::fs::read_to_string(c.path(&format!("sources/{id}/{EVAL_FILE}"))).ok().and_then(|t| serde_json::from_str(&t).ok());
    Ok(SourceStatus {
        source_id: id.to_string(),
        name: profile.name,
        mode: s.mode,
        model_version: s.model_version,
        validated_pages: s.validated_pages,
        validated_docs: s.validated_docs.len(),
        threshold: dla_core::labeler::curation::VALIDATION_PAGE_THRESHOLD,
        documents: c.manifests(Some(id))?.len(),
        training_jobs: 0,
        last_training_error: None,
        last_eval,
    })
}

async fn source_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SourceStatus>> {
    let src = id.clone();
    let mut s = blocking(&state, move |c| status_of(c, &src)).await?;
    let t = state.trainer(&id);
    s.training_jobs = t.pending.load(Ordering::SeqCst);
    s.last_training_error = t.last_error.lock().expect("trainer error slot").clone();
    Ok(Json(s))
}

async fn list_sources(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<SourceStatus>>> {
    let list = blocking(&state, |c| c.source_ids()?.iter().map(|id| status_of(c, id)).collect::<Result<Vec<_>, _>>()).await?;
    Ok(Json(list))
}

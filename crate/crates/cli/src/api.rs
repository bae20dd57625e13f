//! The `/v1` HTTP API. Everything except classifications is a read-only view
//! over a corpus loaded once at startup.

use std::collections::HashMap;
use std::sync::Arc;

use annotrace_core::curation::{validate, ClassificationLog, ClassificationRecord, ClassificationRequest, ValidationError};
use annotrace_core::patterns::{scan_corpus, PatternKind, PatternReport, ScanError, ScanFilter};
use annotrace_core::segment::normalize;
use annotrace_core::stats::{stats_series, StatsOptions};
use annotrace_core::{Corpus, Section, SentenceId, StoreError};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use tokio::sync::Mutex;

use crate::views::{timeline_view, StatsPointView, DEFAULT_ENTRY_URL};

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 500;
pub const DEFAULT_SEARCH_LIMIT: usize = 50;
pub const MAX_SEARCH_LIMIT: usize = 1000;

#[derive(Debug, Clone)]
pub struct ApiConfig {
    /// Link target for entries; `{accession}` is substituted.
    pub entry_url: String,
    /// Bound for the pattern scan, as for `detect --latest-release`.
    pub latest_label: Option<String>,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            entry_url: DEFAULT_ENTRY_URL.to_owned(),
            latest_label: None,
        }
    }
}

struct Hit {
    report: PatternReport,
    at_latest: bool,
}

pub struct AppState {
    corpus: Corpus,
    patterns: [Vec<Hit>; 4],
    log: Mutex<ClassificationLog>,
    config: ApiConfig,
}

impl AppState {
    /// Runs the pattern scan up front so listing is a slice of a vector.
    pub fn new(corpus: Corpus, log: ClassificationLog, config: ApiConfig) -> Result<AppState, ScanError> {
        let filter = ScanFilter {
            latest_label: config.latest_label.clone(),
        };
        let latest = filter.context(&corpus)?.latest();
        let mut patterns: [Vec<Hit>; 4] = Default::default();
        scan_corpus(&corpus, &filter, |r| {
            let at_latest = corpus
                .occurrences(r.sentence_id)
                .map_err(|e| std::io::Error::other(e.to_string()))?
                .iter()
                .any(|o| latest.contains(&o.ordinal));
            patterns[r.kind.index()].push(Hit {
                report: r.clone(),
                at_latest,
            });
            Ok(())
        })?;
        Ok(AppState {
            corpus,
            patterns,
            log: Mutex::new(log),
            config,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSentence(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_sentence", e.to_string()),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Params = Query<HashMap<String, String>>;

fn parse_param<T: std::str::FromStr>(params: &HashMap<String, String>, name: &str, default: T) -> ApiResult<T> {
    match params.get(name) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|_| ApiError::unprocessable("bad_parameter", format!("cannot parse {name}={raw:?}"))),
    }
}

fn sentence_id(corpus: &Corpus, raw: &str) -> ApiResult<SentenceId> {
    let id: u32 = raw
        .parse()
        .map_err(|_| ApiError::unprocessable("bad_sentence_id", format!("{raw:?} is not a sentence id")))?;
    let id = SentenceId(id);
    if corpus.sentence_text(id).is_none() {
        return Err(StoreError::UnknownSentence(id.0).into());
    }
    Ok(id)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sentences", get(search))
        .route("/v1/sentences/{id}/timeline", get(timeline))
        .route("/v1/patterns/{kind}", get(patterns))
        .route("/v1/stats/{section}", get(stats))
        .route("/v1/classifications", get(list_classifications).post(post_classification))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

#[derive(Serialize)]
struct SentenceHit<'a> {
    sentence_id: SentenceId,
    text: &'a str,
    lifetime_clusters: usize,
}

async fn search(State(state): State<Arc<AppState>>, Query(params): Params) -> ApiResult<Response> {
    let corpus = &state.corpus;
    let raw = params.get("q").map(String::as_str).unwrap_or_default();
    let query = normalize(raw).map_err(|_| ApiError::unprocessable("bad_query", "q must not be blank"))?;
    let limit: usize = parse_param(&params, "limit", DEFAULT_SEARCH_LIMIT)?;
    if !(1..=MAX_SEARCH_LIMIT).contains(&limit) {
        return Err(ApiError::unprocessable("bad_parameter", format!("limit must be 1..={MAX_SEARCH_LIMIT}")));
    }

    let mut exact = corpus.sentence_id(&query);
    if exact.is_none() {
        if let Ok(id) = query.parse::<u32>() {
            exact = corpus.sentence_text(SentenceId(id)).map(|_| SentenceId(id));
        }
    }
    let mut ids: Vec<SentenceId> = exact.into_iter().collect();
    for id in corpus.search(&query, limit + 1) {
        if Some(id) != exact {
            ids.push(id);
        }
    }
    let truncated = ids.len() > limit;
    ids.truncate(limit);
    let results = ids
        .into_iter()
        .map(|id| {
            Ok(SentenceHit {
                sentence_id: id,
                text: corpus.sentence_text(id).unwrap_or_default(),
                lifetime_clusters: corpus.lifetime_cluster_count(id)?,
            })
        })
        .collect::<Result<Vec<_>, StoreError>>()?;
    Ok(Json(json!({ "query": query, "exact": exact, "results": results, "truncated": truncated })).into_response())
}

async fn timeline(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = sentence_id(&state.corpus, &id)?;
    Ok(Json(timeline_view(&state.corpus, id, &state.config.entry_url)?).into_response())
}

async fn patterns(State(state): State<Arc<AppState>>, Path(kind): Path<String>, Query(params): Params) -> ApiResult<Response> {
    let kind: PatternKind = kind
        .parse()
        .map_err(|e: annotrace_core::patterns::UnknownPattern| ApiError::new(StatusCode::BAD_REQUEST, "unknown_pattern", e.to_string()))?;
    let page: usize = parse_param(&params, "page", 1)?;
    let per_page: usize = parse_param(&params, "per_page", DEFAULT_PAGE_SIZE)?;
    let latest: bool = parse_param(&params, "latest", false)?;
    if page == 0 {
        return Err(ApiError::unprocessable("bad_parameter", "pages are numbered from 1"));
    }
    if !(1..=MAX_PAGE_SIZE).contains(&per_page) {
        return Err(ApiError::unprocessable("bad_parameter", format!("per_page must be 1..={MAX_PAGE_SIZE}")));
    }
    let hits: Vec<&PatternReport> = state.patterns[kind.index()]
        .iter()
        .filter(|h| !latest || h.at_latest)
        .map(|h| &h.report)
        .collect();
    let items: Vec<&PatternReport> = hits.iter().copied().skip((page - 1).saturating_mul(per_page)).take(per_page).collect();
    Ok(Json(json!({
        "kind": kind,
        "latest": latest,
        "page": page,
        "per_page": per_page,
        "total": hits.len(),
        "items": items,
    }))
    .into_response())
}

async fn stats(State(state): State<Arc<AppState>>, Path(section): Path<String>, Query(params): Params) -> ApiResult<Response> {
    let section: Section = section
        .parse()
        .map_err(|e: annotrace_core::release::UnknownSection| ApiError::new(StatusCode::NOT_FOUND, "unknown_section", e.to_string()))?;
    let options = StatsOptions {
        count_repeats: parse_param(&params, "count_repeats", false)?,
    };
    let points: Vec<StatsPointView> = stats_series(&state.corpus, section, options).iter().map(StatsPointView::from).collect();
    Ok(Json(json!({ "section": section.as_str(), "points": points })).into_response())
}

fn validation_error(e: ValidationError) -> ApiError {
    use annotrace_core::curation::PathError;
    let message = e.to_string();
    match e {
        ValidationError::Mismatch { .. } => ApiError::new(StatusCode::CONFLICT, "classification_mismatch", message),
        ValidationError::Path(PathError::Overlong(_)) => ApiError::new(StatusCode::CONFLICT, "decision_path_overlong", message),
        ValidationError::Path(PathError::Incomplete(_)) => ApiError::unprocessable("decision_path_incomplete", message),
        ValidationError::BelowThreshold { .. } => ApiError::unprocessable("below_threshold", message),
        ValidationError::NoAnalyst => ApiError::unprocessable("missing_analyst", message),
    }
}

async fn post_classification(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let request: ClassificationRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::unprocessable("bad_body", e.to_string()))?;
    let id = request.sentence_id;
    if state.corpus.sentence_text(id).is_none() {
        return Err(StoreError::UnknownSentence(id.0).into());
    }
    let clusters = state.corpus.lifetime_cluster_count(id)?;
    let record = validate(request, clusters, chrono::Utc::now()).map_err(validation_error)?;
    state
        .log
        .lock()
        .await
        .append(record.clone())
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "log_write_failed", e.to_string()))?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn list_classifications(State(state): State<Arc<AppState>>, Query(params): Params) -> ApiResult<Response> {
    let log = state.log.lock().await;
    let (sentence, records): (Option<SentenceId>, Vec<ClassificationRecord>) = match params.get("sentence_id") {
        Some(raw) => {
            let id = sentence_id(&state.corpus, raw)?;
            (Some(id), log.history(id))
        }
        None => (None, log.all().to_vec()),
    };
    Ok(Json(json!({ "sentence_id": sentence, "records": records })).into_response())
}

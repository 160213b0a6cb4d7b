//! HTTP JSON API over the pipeline and the campaign store.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use adforge_core::extract::ExtractedContent;
use adforge_core::pipeline::{
    annotate, build_variant_set, format_realized, run_generator, run_translator, translate_normalized, Annotation,
    PipelineError, Rewrite, VariantKind, VariantSet,
};
use adforge_core::textproc::{realize_with_fills, TextError};
use adforge_core::{concat_text, extract_content, parse_html, Ad, Domain, FeatureError, Models};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::AppConfig;
use crate::models::ModelDir;
use crate::store::{Campaign, Event, Item, ItemSource, Status, Store, StoreError};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    UnfilledPlaceholder(String),
    #[error("page yielded no extractable content")]
    NoContent,
    #[error("{0}")]
    FetchFailed(String),
    #[error("{0}")]
    ModelUnavailable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::UnfilledPlaceholder(_) | ApiError::NoContent => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::FetchFailed(_) => StatusCode::BAD_GATEWAY,
            ApiError::ModelUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "BadRequest",
            ApiError::NotFound(_) => "NotFound",
            ApiError::Conflict(_) => "InvalidTransition",
            ApiError::UnfilledPlaceholder(_) => "UnfilledPlaceholder",
            ApiError::NoContent => "NoContent",
            ApiError::FetchFailed(_) => "FetchFailed",
            ApiError::ModelUnavailable(_) => "ModelUnavailable",
            ApiError::Internal(_) => "Internal",
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::NoContent => ApiError::NoContent,
            PipelineError::NoModelForDomain(_) | PipelineError::NoGenerator => ApiError::ModelUnavailable(e.to_string()),
            PipelineError::Text(TextError::MissingDefault(label)) => {
                ApiError::UnfilledPlaceholder(format!("no fill or default for <{label}>"))
            }
            PipelineError::Extract(_)
            | PipelineError::Ad(_)
            | PipelineError::EmptyText
            | PipelineError::Text(TextError::EmptyAd(_))
            | PipelineError::Feature(FeatureError::EmptyText) => ApiError::BadRequest(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::CampaignNotFound(_) | StoreError::ItemNotFound(_) => ApiError::NotFound(e.to_string()),
            StoreError::InvalidTransition { .. } => ApiError::Conflict(e.to_string()),
            StoreError::PlaceholdersRemain => ApiError::UnfilledPlaceholder(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::BadRequest(e.body_text()))
}

/// Shared service state. Models sit behind an `Arc` that is swapped whole
/// on reload; in-flight requests keep the snapshot they started with.
pub struct AppState {
    models: RwLock<Arc<Models>>,
    store: Mutex<Store>,
    config: AppConfig,
    http: reqwest::Client,
    model_dir: Option<ModelDir>,
    ui_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(models: Models, store: Store, config: AppConfig) -> anyhow::Result<Self> {
        let http = reqwest::Client::builder().timeout(config.fetch_timeout()).build()?;
        Ok(AppState {
            models: RwLock::new(Arc::new(models)),
            store: Mutex::new(store),
            config,
            http,
            model_dir: None,
            ui_dir: None,
        })
    }

    pub fn with_model_dir(mut self, dir: ModelDir) -> Self {
        self.model_dir = Some(dir);
        self
    }

    pub fn with_ui_dir(mut self, dir: PathBuf) -> Self {
        self.ui_dir = Some(dir);
        self
    }

    pub fn models(&self) -> Arc<Models> {
        self.models.read().expect("models lock poisoned").clone()
    }

    pub fn swap_models(&self, models: Models) {
        *self.models.write().expect("models lock poisoned") = Arc::new(models);
    }

    fn store(&self) -> std::sync::MutexGuard<'_, Store> {
        self.store.lock().expect("store lock poisoned")
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/v1/extract", post(extract))
        .route("/v1/translate", post(translate))
        .route("/v1/generate", post(generate))
        .route("/v1/variants", post(variants))
        .route("/v1/analyze", post(analyze))
        .route("/v1/campaigns", get(list_campaigns).post(create_campaign))
        .route("/v1/campaigns/{id}", get(get_campaign).delete(delete_campaign))
        .route("/v1/campaigns/{id}/items", get(list_items).post(add_item))
        .route("/v1/items/{id}", get(get_item))
        .route("/v1/items/{id}/finalize", post(finalize))
        .route("/v1/items/{id}/export", get(export))
        .route("/v1/models/reload", post(reload_models))
        .route("/ui", get(ui_index))
        .route("/ui/{*path}", get(ui_file))
        .with_state(state)
}

/// Fetches a landing page. Any transport error or non-success status is
/// reported as `FetchFailed`.
pub async fn fetch_page(client: &reqwest::Client, url: &str) -> Result<String, ApiError> {
    let fail = |e: &dyn std::fmt::Display| ApiError::FetchFailed(format!("fetching {url}: {e}"));
    let resp = client.get(url).send().await.map_err(|e| fail(&e))?;
    let resp = resp.error_for_status().map_err(|e| fail(&e))?;
    resp.text().await.map_err(|e| fail(&e))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

#[derive(Debug, Deserialize)]
pub struct PageRequest {
    pub html: Option<String>,
    pub url: Option<String>,
    pub domain: Option<Domain>,
}

async fn page_html(state: &AppState, req: &PageRequest) -> Result<String, ApiError> {
    match (&req.html, &req.url) {
        (Some(html), _) => Ok(html.clone()),
        (None, Some(url)) => fetch_page(&state.http, url).await,
        (None, None) => Err(ApiError::BadRequest("need html or url".into())),
    }
}

async fn extract(
    State(state): State<Shared>,
    payload: Result<Json<PageRequest>, JsonRejection>,
) -> ApiResult<ExtractedContent> {
    let req = body(payload)?;
    let html = page_html(&state, &req).await?;
    let root = parse_html(&html).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(extract_content(&root, &state.config.extract)))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RewriteResponse {
    pub text: String,
    pub substitutions: Vec<(String, String)>,
    pub realized: String,
}

impl RewriteResponse {
    fn new(r: Rewrite, models: &Models) -> Self {
        RewriteResponse {
            realized: r.realize_lenient(&models.defaults),
            text: r.text,
            substitutions: r.substitutions,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct AdRequest {
    pub ad: Ad,
    pub html: Option<String>,
}

async fn translate(
    State(state): State<Shared>,
    payload: Result<Json<AdRequest>, JsonRejection>,
) -> ApiResult<RewriteResponse> {
    let req = body(payload)?;
    let models = state.models();
    blocking(move || {
        let r = run_translator(&req.ad, &models)?;
        Ok(Json(RewriteResponse::new(r, &models)))
    })
    .await
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct GenerateResponse {
    pub generated: RewriteResponse,
    pub translated: Option<RewriteResponse>,
}

async fn generate(
    State(state): State<Shared>,
    payload: Result<Json<PageRequest>, JsonRejection>,
) -> ApiResult<GenerateResponse> {
    let req = body(payload)?;
    let html = page_html(&state, &req).await?;
    let models = state.models();
    blocking(move || {
        let g = run_generator(&html, &models)?;
        let translated = match req.domain {
            Some(domain) => {
                let text = translate_normalized(&g.text, domain, &models)?;
                Some(RewriteResponse::new(
                    Rewrite {
                        text,
                        substitutions: g.substitutions.clone(),
                    },
                    &models,
                ))
            }
            None => None,
        };
        Ok(Json(GenerateResponse {
            generated: RewriteResponse::new(g, &models),
            translated,
        }))
    })
    .await
}

/// The landing page for an ad: the inline HTML if given, else a fetch of
/// `ad.url` when present.
async fn ad_page(state: &AppState, req: &AdRequest) -> Result<Option<String>, ApiError> {
    match (&req.html, &req.ad.url) {
        (Some(html), _) => Ok(Some(html.clone())),
        (None, Some(url)) if state.models().generator.is_some() => fetch_page(&state.http, url).await.map(Some),
        _ => Ok(None),
    }
}

async fn build_set(state: &AppState, req: AdRequest) -> Result<VariantSet, ApiError> {
    req.ad.validate().map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let page = ad_page(state, &req).await?;
    let models = state.models();
    blocking(move || Ok(build_variant_set(&req.ad, page.as_deref(), &models)?)).await
}

async fn variants(
    State(state): State<Shared>,
    payload: Result<Json<AdRequest>, JsonRejection>,
) -> ApiResult<VariantSet> {
    let req = body(payload)?;
    Ok(Json(build_set(&state, req).await?))
}

#[derive(Debug, Deserialize)]
pub struct AnalyzeRequest {
    pub text: String,
}

async fn analyze(
    State(state): State<Shared>,
    payload: Result<Json<AnalyzeRequest>, JsonRejection>,
) -> ApiResult<Annotation> {
    let req = body(payload)?;
    let models = state.models();
    blocking(move || Ok(Json(annotate(&req.text, &models)?))).await
}

// ---------------------------------------------------------------------------
// campaigns

async fn list_campaigns(State(state): State<Shared>) -> ApiResult<Vec<Campaign>> {
    Ok(Json(state.store().state().campaigns.values().cloned().collect()))
}

#[derive(Debug, Deserialize)]
pub struct CreateCampaign {
    pub name: String,
}

async fn create_campaign(
    State(state): State<Shared>,
    payload: Result<Json<CreateCampaign>, JsonRejection>,
) -> Result<(StatusCode, Json<Campaign>), ApiError> {
    let req = body(payload)?;
    if req.name.trim().is_empty() {
        return Err(ApiError::BadRequest("campaign name is empty".into()));
    }
    let campaign = state.store().create_campaign(req.name.trim())?;
    Ok((StatusCode::CREATED, Json(campaign)))
}

async fn get_campaign(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Campaign> {
    Ok(Json(state.store().campaign(&id)?.clone()))
}

async fn delete_campaign(State(state): State<Shared>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    state.store().commit(Event::CampaignDeleted { id })?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_items(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Vec<Item>> {
    let store = state.store();
    let campaign = store.campaign(&id)?;
    let items = campaign
        .items
        .iter()
        .filter_map(|i| store.state().items.get(i).cloned())
        .collect();
    Ok(Json(items))
}

async fn add_item(
    State(state): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<AdRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Item>), ApiError> {
    let req = body(payload)?;
    state.store().campaign(&id)?;
    let source = match &req.ad.url {
        Some(url) => ItemSource::Url(url.clone()),
        None => ItemSource::Ad,
    };
    let variant_set = build_set(&state, req).await?;
    let mut store = state.store();
    let item = Item {
        id: store.next_id("i"),
        campaign_id: id,
        source,
        variant_set,
        status: Status::Draft,
        variant: None,
        fills: BTreeMap::new(),
        finalized_text: None,
        formatted: None,
    };
    store.commit(Event::ItemAdded {
        item: Box::new(item.clone()),
    })?;
    Ok((StatusCode::CREATED, Json(item)))
}

async fn get_item(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Item> {
    Ok(Json(state.store().item(&id)?.clone()))
}

#[derive(Debug, Default, Deserialize)]
pub struct FinalizeRequest {
    #[serde(default)]
    pub fills: BTreeMap<String, String>,
    pub variant: Option<VariantKind>,
}

/// Best-ranked variant (earliest kind on ties), else the translation if
/// present, else the human ad.
pub fn default_variant(set: &VariantSet) -> VariantKind {
    if let Some(ranks) = &set.ranks {
        if let Some((k, _)) = ranks.iter().min_by_key(|(k, r)| (**r, **k)) {
            return *k;
        }
    }
    if set.translated.is_some() {
        VariantKind::Translated
    } else {
        VariantKind::Human
    }
}

async fn finalize(
    State(state): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<FinalizeRequest>, JsonRejection>,
) -> ApiResult<Item> {
    let req = body(payload)?;
    let item = state.store().item(&id)?.clone();
    if item.status == Status::Exported {
        return Err(ApiError::Conflict(format!("item {id} is already exported")));
    }
    let models = state.models();
    let set = &item.variant_set;
    let variant = req.variant.unwrap_or_else(|| default_variant(set));
    let text = match variant {
        VariantKind::Human => concat_text(&set.human).map_err(|e| ApiError::BadRequest(e.to_string()))?,
        kind => {
            let r = set
                .rewrite(kind)
                .ok_or_else(|| ApiError::BadRequest(format!("variant {kind} is not available for item {id}")))?;
            realize_with_fills(&r.text, &req.fills, &r.substitutions, &models.defaults)
                .map_err(PipelineError::Text)?
        }
    };
    let formatted = format_realized(&text, &state.config.limits)?;
    let mut store = state.store();
    store.commit(Event::ItemFinalized {
        id: id.clone(),
        variant,
        fills: req.fills,
        text,
        formatted,
    })?;
    Ok(Json(store.item(&id)?.clone()))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ExportedAd {
    pub item_id: String,
    pub variant: VariantKind,
    pub titles: Vec<String>,
    pub descriptions: Vec<String>,
    pub final_url: Option<String>,
}

/// Marks a reviewed item exported (once) and returns its platform fields.
async fn export(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<ExportedAd> {
    let mut store = state.store();
    let item = store.item(&id)?.clone();
    if item.status == Status::Reviewed {
        store.commit(Event::ItemExported { id: id.clone() })?;
    } else if item.status == Status::Draft {
        return Err(ApiError::Conflict(format!("item {id} must be finalized before export")));
    }
    let (Some(formatted), Some(variant)) = (item.formatted, item.variant) else {
        return Err(ApiError::Internal(format!("item {id} has no formatted fields")));
    };
    Ok(Json(ExportedAd {
        item_id: id,
        variant,
        titles: formatted.titles,
        descriptions: formatted.descriptions,
        final_url: item.variant_set.human.url,
    }))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ReloadResponse {
    pub translators: Vec<Domain>,
    pub generator: bool,
    pub ranker: bool,
    pub affect: bool,
}

async fn reload_models(State(state): State<Shared>) -> ApiResult<ReloadResponse> {
    let dir = state
        .model_dir
        .clone()
        .ok_or_else(|| ApiError::BadRequest("service was started without a models directory".into()))?;
    let config = state.config.clone();
    let models = blocking(move || dir.load(&config).map_err(|e| ApiError::Internal(format!("{e:#}")))).await?;
    let resp = ReloadResponse {
        translators: models.translators.keys().copied().collect(),
        generator: models.generator.is_some(),
        ranker: models.ranker.is_some(),
        affect: models.affect.is_some(),
    };
    state.swap_models(models);
    Ok(Json(resp))
}

// ---------------------------------------------------------------------------
// static UI

const UI_PLACEHOLDER: &str = "<!doctype html><html><head><title>adforge</title></head>\
<body><p>The review console has not been built. The JSON API is served under /v1.</p></body></html>";

async fn ui_index(State(state): State<Shared>) -> Response {
    serve_ui_file(&state, "index.html").await
}

async fn ui_file(State(state): State<Shared>, Path(path): Path<String>) -> Response {
    serve_ui_file(&state, &path).await
}

async fn serve_ui_file(state: &AppState, rel: &str) -> Response {
    let Some(dir) = &state.ui_dir else {
        return Html(UI_PLACEHOLDER).into_response();
    };
    if rel.split('/').any(|seg| seg == ".." || seg.is_empty()) {
        return ApiError::NotFound(format!("no UI asset {rel}")).into_response();
    }
    let path = dir.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => {
            let mime = match path.extension().and_then(|e| e.to_str()) {
                Some("html") => "text/html; charset=utf-8",
                Some("js") => "text/javascript",
                Some("css") => "text/css",
                Some("json") => "application/json",
                Some("svg") => "image/svg+xml",
                _ => "application/octet-stream",
            };
            ([(header::CONTENT_TYPE, mime)], bytes).into_response()
        }
        Err(_) if rel == "index.html" => Html(UI_PLACEHOLDER).into_response(),
        Err(_) => ApiError::NotFound(format!("no UI asset {rel}")).into_response(),
    }
}

/// Binds `0.0.0.0:port` and serves until Ctrl-C.
pub async fn serve(state: Shared, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

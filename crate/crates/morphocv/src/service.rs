//! HTTP API over the analysis pipeline.
//!
//! Handlers are stateless apart from the content-addressed result store,
//! whose tokens are hashes of the stored bytes: identical requests get
//! identical responses.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::multipart::{Multipart, MultipartError, MultipartRejection};
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use morphocv_core::depth::PipelineParams;
use morphocv_core::raster::{read_depth_csv, read_label_png, Calibration, Sidecar};
use morphocv_core::render::decode_png;
use morphocv_core::segmentation::ThresholdParams;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use crate::error::{AppError, Result};
use crate::files::{analysis_outputs, FEATURES_CSV, METRICS_CSV, OVERLAY_PNG, SURFACE_JSON};
use crate::pipeline::{
    analyze_2d, analyze_3d, evaluate_pairs, parse_thresholds, AnalysisRequest, AnalysisResult,
    EvalPair, Segmenter,
};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_UPLOAD_MB: u64 = 64;
pub const DEFAULT_STORE_CAPACITY: usize = 256;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_upload_mb: u64,
    /// Static UI directory served for paths outside the API.
    pub assets: Option<PathBuf>,
    /// Result sets kept for download; oldest are evicted first.
    pub store_capacity: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_upload_mb: DEFAULT_MAX_UPLOAD_MB,
            assets: None,
            store_capacity: DEFAULT_STORE_CAPACITY,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_upload_mb == 0 {
            return Err(AppError::Config(
                "upload limit must be at least 1 MiB".into(),
            ));
        }
        if self.store_capacity == 0 {
            return Err(AppError::Config(
                "result store capacity must be at least 1".into(),
            ));
        }
        if let Some(dir) = &self.assets {
            if !dir.is_dir() {
                return Err(AppError::Config(format!(
                    "assets directory {} does not exist",
                    dir.display()
                )));
            }
        }
        Ok(())
    }

    fn max_upload_bytes(&self) -> usize {
        usize::try_from(self.max_upload_mb.saturating_mul(1024 * 1024)).unwrap_or(usize::MAX)
    }
}

type StoredFiles = HashMap<&'static str, Bytes>;

#[derive(Default)]
struct StoreInner {
    entries: HashMap<String, Arc<StoredFiles>>,
    order: VecDeque<String>,
}

#[derive(Clone)]
struct ResultStore {
    inner: Arc<Mutex<StoreInner>>,
    capacity: usize,
}

impl ResultStore {
    fn new(capacity: usize) -> Self {
        Self {
            inner: Arc::default(),
            capacity,
        }
    }

    fn put(&self, files: Vec<(&'static str, Vec<u8>)>) -> String {
        let mut hasher = Sha256::new();
        for (name, bytes) in &files {
            hasher.update(name.as_bytes());
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(bytes);
        }
        let token = hex::encode(hasher.finalize());
        let mut inner = self.inner.lock().expect("store lock");
        if !inner.entries.contains_key(&token) {
            while inner.order.len() >= self.capacity {
                if let Some(old) = inner.order.pop_front() {
                    inner.entries.remove(&old);
                }
            }
            let stored = files
                .into_iter()
                .map(|(n, b)| (n, Bytes::from(b)))
                .collect();
            inner.entries.insert(token.clone(), Arc::new(stored));
            inner.order.push_back(token.clone());
        }
        token
    }

    fn get(&self, token: &str, file: &str) -> Option<Bytes> {
        let inner = self.inner.lock().expect("store lock");
        inner.entries.get(token)?.get(file).cloned()
    }
}

#[derive(Clone)]
struct AppState {
    store: ResultStore,
    limit_mb: u64,
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "code": self.code(), "message": self.to_string() }));
        (self.status(), body).into_response()
    }
}

pub fn router(config: &ServiceConfig) -> Router {
    let state = AppState {
        store: ResultStore::new(config.store_capacity),
        limit_mb: config.max_upload_mb,
    };
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/analyze2d", post(analyze2d_handler))
        .route("/api/analyze3d", post(analyze3d_handler))
        .route("/api/evaluate", post(evaluate_handler))
        .route("/results/{token}/{file}", get(result_file))
        .layer(DefaultBodyLimit::max(config.max_upload_bytes()))
        .with_state(state);
    let app = match &config.assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { AppError::NotFound }),
    };
    app.layer(TraceLayer::new_for_http())
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> Result<()> {
    config.validate()?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            AppError::PortInUse(addr.port())
        } else {
            AppError::Config(format!("cannot bind {addr}: {e}"))
        }
    })?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(&config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::Config(e.to_string()))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn result_file(
    State(state): State<AppState>,
    Path((token, file)): Path<(String, String)>,
) -> Result<Response> {
    let content_type = match file.as_str() {
        OVERLAY_PNG => "image/png",
        FEATURES_CSV | METRICS_CSV => "text/csv; charset=utf-8",
        SURFACE_JSON => "application/json",
        _ => return Err(AppError::NotFound),
    };
    let bytes = state.store.get(&token, &file).ok_or(AppError::NotFound)?;
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}

/// Multipart fields by name; later duplicates replace earlier ones.
struct Upload(HashMap<String, Bytes>);

impl Upload {
    async fn read(
        multipart: std::result::Result<Multipart, MultipartRejection>,
        limit_mb: u64,
    ) -> Result<Self> {
        let mut multipart = multipart.map_err(|e| AppError::BadRequest(e.body_text()))?;
        let to_app = |e: MultipartError| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                AppError::UploadTooLarge { limit_mb }
            } else {
                AppError::BadRequest(e.body_text())
            }
        };
        let mut fields = HashMap::new();
        while let Some(field) = multipart.next_field().await.map_err(to_app)? {
            let Some(name) = field.name().map(str::to_owned) else {
                continue;
            };
            let data = field.bytes().await.map_err(to_app)?;
            fields.insert(name, data);
        }
        Ok(Self(fields))
    }

    fn file(&self, name: &str) -> Option<&[u8]> {
        self.0
            .get(name)
            .map(|b| b.as_ref())
            .filter(|b| !b.is_empty())
    }

    fn text(&self, name: &str) -> Result<Option<&str>> {
        match self.0.get(name) {
            None => Ok(None),
            Some(bytes) => std::str::from_utf8(bytes)
                .map(|s| Some(s.trim()).filter(|s| !s.is_empty()))
                .map_err(|_| AppError::BadRequest(format!("field {name} is not UTF-8 text"))),
        }
    }

    fn parsed<T: FromStr>(&self, name: &str, default: T) -> Result<T> {
        match self.text(name)? {
            None => Ok(default),
            Some(text) => text.parse().map_err(|_| {
                morphocv_core::Error::InvalidParameter(format!("{name}: cannot parse {text:?}"))
                    .into()
            }),
        }
    }

    fn request(&self) -> Result<AnalysisRequest> {
        let cal = Calibration::new(
            self.parsed("ppm", Calibration::DEFAULT_PPM)?,
            self.parsed("camera_distance", Calibration::DEFAULT_CAMERA_TO_GROUND_M)?,
        )?;
        let params = PipelineParams::new(cal, self.parsed("sigma", 0.0)?)?;
        let labels = self.file("labels").map(read_label_png).transpose()?;
        let segmenter = match self.text("segmenter")? {
            Some(s) => s.parse()?,
            None if labels.is_some() => Segmenter::External,
            None => Segmenter::Threshold,
        };
        let mut request = AnalysisRequest::new(segmenter, params);
        request.threshold = ThresholdParams {
            min_height_m: self.parsed("min_height", ThresholdParams::DEFAULT_MIN_HEIGHT_M)?,
            min_area_px: self.parsed("min_area", ThresholdParams::DEFAULT_MIN_AREA_PX)?,
            cal,
        };
        request.depth = self.file("depth").map(read_depth_csv).transpose()?;
        request.labels = labels;
        request.sidecar = self.file("sidecar").map(Sidecar::from_json).transpose()?;
        request.image = self.file("image").map(decode_png).transpose()?;
        Ok(request)
    }
}

fn params_json(request: &AnalysisRequest) -> Value {
    json!({
        "ppm": request.params.cal.ppm,
        "camera_distance": request.params.cal.camera_to_ground_m,
        "sigma": request.params.sigma,
        "segmenter": request.segmenter,
        "min_height": request.threshold.min_height_m,
        "min_area": request.threshold.min_area_px,
    })
}

async fn run_blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T> + Send + 'static,
) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::Config(format!("worker failed: {e}")))?
}

fn analysis_response(
    state: &AppState,
    request: &AnalysisRequest,
    result: AnalysisResult,
) -> Result<Json<Value>> {
    let token = state.store.put(analysis_outputs(&result)?);
    Ok(Json(json!({
        "features": result.features,
        "overlay_url": format!("/results/{token}/{OVERLAY_PNG}"),
        "csv_url": format!("/results/{token}/{FEATURES_CSV}"),
        "surface": result.surface,
        "warnings": result.warnings,
        "params": params_json(request),
    })))
}

async fn analyze(
    state: AppState,
    multipart: std::result::Result<Multipart, MultipartRejection>,
    run: fn(&AnalysisRequest) -> Result<AnalysisResult>,
) -> Result<Json<Value>> {
    let upload = Upload::read(multipart, state.limit_mb).await?;
    let (request, result) = run_blocking(move || {
        let request = upload.request()?;
        let result = run(&request)?;
        Ok((request, result))
    })
    .await?;
    analysis_response(&state, &request, result)
}

async fn analyze2d_handler(
    State(state): State<AppState>,
    multipart: std::result::Result<Multipart, MultipartRejection>,
) -> Result<Json<Value>> {
    analyze(state, multipart, analyze_2d).await
}

async fn analyze3d_handler(
    State(state): State<AppState>,
    multipart: std::result::Result<Multipart, MultipartRejection>,
) -> Result<Json<Value>> {
    analyze(state, multipart, analyze_3d).await
}

/// Fields: `pred` and `gt` label PNGs, optional `pred_sidecar` and
/// `gt_sidecar`, optional `iou` list.
async fn evaluate_handler(
    State(state): State<AppState>,
    multipart: std::result::Result<Multipart, MultipartRejection>,
) -> Result<Json<Value>> {
    let upload = Upload::read(multipart, state.limit_mb).await?;
    let result = run_blocking(move || {
        let thresholds = match upload.text("iou")? {
            Some(text) => parse_thresholds(text)?,
            None => morphocv_core::evaluation::DEFAULT_THRESHOLDS.to_vec(),
        };
        let labels = |name: &str| {
            upload
                .file(name)
                .ok_or_else(|| AppError::MissingInput(format!("field {name} is required")))
                .and_then(|b| Ok(read_label_png(b)?))
        };
        let sidecar = |name: &str| upload.file(name).map(Sidecar::from_json).transpose();
        let pair = EvalPair {
            name: String::new(),
            pred: Some((labels("pred")?, sidecar("pred_sidecar")?)),
            gt: (labels("gt")?, sidecar("gt_sidecar")?),
        };
        evaluate_pairs(vec![pair], &thresholds)
    })
    .await?;
    let token = state.store.put(vec![(METRICS_CSV, result.to_csv())]);
    Ok(Json(json!({
        "thresholds": result.thresholds,
        "rows": result.rows,
        "csv_url": format!("/results/{token}/{METRICS_CSV}"),
    })))
}

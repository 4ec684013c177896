//! HTTP service over a loaded model.
//!
//! | route | body | result |
//! |---|---|---|
//! | `POST /styles` | multipart `image` files, optional `id` | style id and latent |
//! | `GET /styles` | | registered styles |
//! | `POST /enhance` | multipart `image`, `source`, `target`, optional `preview` | session, PNG, curves |
//! | `POST /sessions/{id}/sliders` | `{"sliders": {..}, "knots": [..]}` | preview PNG and curves |
//! | `POST /sessions/{id}/export` | optional `{"sliders_applied": bool}` | full-resolution PNG |
//! | `GET /healthz` | | status and call counters |
//!
//! Errors are `{"code": .., "message": ..}` with a 4xx or 5xx status.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use serde_json::{json, Value};
use stylecurve_core::curves::sample_curve;
use stylecurve_core::enhancer::{curve_key, parse_sliders, CurveSet, CurveSetFile, SliderSettings};
use stylecurve_core::io::{decode_image, encode_png};
use stylecurve_core::Image;

use crate::engine::{check_style_id, save_style, Engine, StyleRegistry};
use crate::error::Error;
use crate::session::{parse_knot_overrides, Session, SessionStore};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8787";
/// Points per curve returned for client-side plotting.
pub const PLOT_SAMPLES: usize = 64;
const BODY_LIMIT: usize = 512 * 1024 * 1024;

pub struct AppState {
    pub engine: Arc<Engine>,
    pub registry: RwLock<StyleRegistry>,
    pub sessions: SessionStore,
    /// Where posted styles are persisted, if anywhere.
    pub styles_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, registry: StyleRegistry, sessions: SessionStore) -> Self {
        Self {
            engine,
            registry: RwLock::new(registry),
            sessions,
            styles_dir: None,
        }
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
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session {id:?}"),
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        if e.is_degenerate_centroid() {
            return Self::unprocessable("degenerate_centroid", e.to_string());
        }
        match e {
            Error::UnknownStyle(_) => {
                Self::new(StatusCode::NOT_FOUND, "unknown_style", e.to_string())
            }
            other => Self::internal(other),
        }
    }
}

impl From<axum::extract::multipart::MultipartError> for ApiError {
    fn from(e: axum::extract::multipart::MultipartError) -> Self {
        Self::bad_request("bad_multipart", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({"code": self.code, "message": self.message}));
        (self.status, body).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/styles", get(list_styles).post(post_style))
        .route("/enhance", post(post_enhance))
        .route("/sessions/{id}/sliders", post(post_sliders))
        .route("/sessions/{id}/export", post(post_export))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(ApiError::internal)?
}

fn png_base64(img: &Image<f32>) -> ApiResult<String> {
    let bytes = encode_png(img).map_err(ApiError::internal)?;
    Ok(base64::engine::general_purpose::STANDARD.encode(bytes))
}

/// CurveSet JSON plus dense samples of every curve for plotting.
fn curves_json(curves: &CurveSet) -> ApiResult<(Value, Value)> {
    let file: Value = serde_json::from_str(&CurveSetFile::new(curves.clone()).to_json())
        .map_err(ApiError::internal)?;
    let mut samples = serde_json::Map::new();
    for (i, j, knots) in curves.iter() {
        let s = sample_curve(knots, PLOT_SAMPLES).map_err(ApiError::internal)?;
        samples.insert(curve_key(i, j), json!(s.values()));
    }
    Ok((file, Value::Object(samples)))
}

fn render_response(
    session: &str,
    img: &Image<f32>,
    curves: &CurveSet,
    render_ms: f64,
) -> ApiResult<Value> {
    let (file, samples) = curves_json(curves)?;
    Ok(json!({
        "session": session,
        "width": img.width(),
        "height": img.height(),
        "image": png_base64(img)?,
        "curves": file,
        "samples": samples,
        "render_ms": render_ms,
    }))
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    let styles = state.registry.read().expect("registry poisoned").len();
    Json(json!({
        "status": "ok",
        "styles": styles,
        "sessions": state.sessions.len(),
        "encoder_calls": state.engine.encoder_calls(),
        "mapping_calls": state.engine.mapping_calls(),
    }))
}

async fn list_styles(State(state): State<Arc<AppState>>) -> Json<Value> {
    let reg = state.registry.read().expect("registry poisoned");
    let styles: Vec<Value> = reg
        .iter()
        .map(|(id, s)| {
            json!({"id": id, "dimension": s.latent.dim(), "provenance": s.latent.provenance()})
        })
        .collect();
    Json(json!({ "styles": styles }))
}

async fn post_style(
    State(state): State<Arc<AppState>>,
    mut form: Multipart,
) -> ApiResult<Json<Value>> {
    let mut id = None;
    let mut uploads = Vec::new();
    while let Some(field) = form.next_field().await? {
        if field.name() == Some("id") {
            id = Some(field.text().await?);
        } else {
            uploads.push(field.bytes().await?);
        }
    }
    if let Some(id) = &id {
        check_style_id(id).map_err(|e| ApiError::bad_request("invalid_style_id", e.to_string()))?;
    }
    let images: Vec<Image<f32>> = uploads
        .iter()
        .filter_map(|b| decode_image(b).ok())
        .collect();
    let skipped = uploads.len() - images.len();
    if images.is_empty() {
        return Err(ApiError::bad_request(
            "no_images",
            format!("none of the {} uploads decoded as an image", uploads.len()),
        ));
    }
    let engine = state.engine.clone();
    let count = images.len();
    let latent =
        blocking(move || Ok(engine.gallery_latent(&images, &format!("gallery of {count}"))?))
            .await?;

    let id = {
        let mut reg = state.registry.write().expect("registry poisoned");
        let id = id.unwrap_or_else(|| {
            (reg.len() + 1..)
                .map(|n| format!("style-{n}"))
                .find(|c| reg.get(c).is_err())
                .expect("unbounded range")
        });
        reg.insert(&state.engine, &id, latent.clone())?;
        id
    };
    if let Some(dir) = &state.styles_dir {
        save_style(dir, &id, &latent)?;
    }
    let latent_json: Value = serde_json::from_str(&latent.to_json()).map_err(ApiError::internal)?;
    Ok(Json(json!({
        "id": id,
        "latent": latent_json,
        "images": count,
        "skipped": skipped,
    })))
}

fn parse_flag(text: &str) -> ApiResult<bool> {
    match text.trim() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(ApiError::bad_request(
            "bad_flag",
            format!("expected true or false, got {other:?}"),
        )),
    }
}

async fn post_enhance(
    State(state): State<Arc<AppState>>,
    mut form: Multipart,
) -> ApiResult<Json<Value>> {
    let (mut image, mut source, mut target, mut preview) = (None, None, None, true);
    while let Some(field) = form.next_field().await? {
        match field.name() {
            Some("source") => source = Some(field.text().await?),
            Some("target") => target = Some(field.text().await?),
            Some("preview") => preview = parse_flag(&field.text().await?)?,
            Some("image") => image = Some(field.bytes().await?),
            _ => {}
        }
    }
    let missing = |name: &str| {
        ApiError::bad_request(
            "missing_field",
            format!("multipart field {name:?} is required"),
        )
    };
    let image: Bytes = image.ok_or_else(|| missing("image"))?;
    let source = source.ok_or_else(|| missing("source"))?;
    let target = target.ok_or_else(|| missing("target"))?;
    let (a, b) = {
        let reg = state.registry.read().expect("registry poisoned");
        (
            reg.get(&source)?.codes.clone(),
            reg.get(&target)?.codes.clone(),
        )
    };
    let image =
        decode_image(&image).map_err(|e| ApiError::bad_request("bad_image", e.to_string()))?;

    let st = state.clone();
    let out = blocking(move || {
        let curves = st.engine.predict(&image, &a, &b)?;
        let session = Session::new(image, curves.clone())?;
        let depth = st.engine.depth();
        let t = Instant::now();
        let img = if preview {
            session.render_preview(depth)?
        } else {
            session.render_full(depth, true)?
        };
        let ms = t.elapsed().as_secs_f64() * 1e3;
        let (w, h) = (session.image().width(), session.image().height());
        let id = st.sessions.insert(session);
        let mut body = render_response(&id, &img, &curves, ms)?;
        body["preview"] = json!(preview);
        body["source_width"] = json!(w);
        body["source_height"] = json!(h);
        Ok(body)
    })
    .await?;
    Ok(Json(out))
}

fn parse_json_body(body: &Bytes) -> ApiResult<Value> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(json!({}));
    }
    let v: Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request("bad_json", e.to_string()))?;
    if !v.is_object() {
        return Err(ApiError::bad_request(
            "bad_json",
            "request body must be a JSON object",
        ));
    }
    Ok(v)
}

async fn post_sliders(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let session = state
        .sessions
        .get(&id)
        .ok_or_else(|| ApiError::unknown_session(&id))?;
    let v = parse_json_body(&body)?;
    let sliders = match v.get("sliders") {
        Some(s) => parse_sliders(s)
            .map_err(|e| ApiError::unprocessable("invalid_sliders", e.to_string()))?,
        None => SliderSettings::identity(),
    };
    let knots = match v.get("knots") {
        Some(k) => parse_knot_overrides(k)
            .map_err(|e| ApiError::unprocessable("invalid_knots", e.to_string()))?,
        None => Vec::new(),
    };
    let depth = state.engine.depth();
    let out = blocking(move || {
        let mut s = session.lock().expect("session poisoned");
        s.set_edits(sliders, knots)
            .map_err(|e| ApiError::unprocessable("invalid_edit", e.to_string()))?;
        let t = Instant::now();
        let img = s.render_preview(depth)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        render_response(&id, &img, &s.current_curves()?, ms)
    })
    .await?;
    Ok(Json(out))
}

async fn post_export(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let session = state
        .sessions
        .get(&id)
        .ok_or_else(|| ApiError::unknown_session(&id))?;
    let v = parse_json_body(&body)?;
    let with_edits = match v.get("sliders_applied") {
        None => true,
        Some(b) => b.as_bool().ok_or_else(|| {
            ApiError::bad_request("bad_json", "sliders_applied must be a boolean")
        })?,
    };
    let depth = state.engine.depth();
    let png = blocking(move || {
        let s = session.lock().expect("session poisoned");
        let img = s.render_full(depth, with_edits)?;
        encode_png(&img).map_err(ApiError::internal)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

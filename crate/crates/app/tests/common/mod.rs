#![allow(dead_code)]

use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use base64::Engine as _;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use stylecurve_app::server::{router, AppState};
use stylecurve_app::session::SessionStore;
use stylecurve_app::{Engine, StyleRegistry};
use stylecurve_core::enhancer::KnotLayout;
use stylecurve_core::io::decode_image;
use stylecurve_core::{BitDepth, Image};
use stylecurve_nn::{CurveEncoderConfig, MappingConfig, Pipeline, StyleEncoderConfig, TrunkConfig};
use tower::ServiceExt;

pub fn trunk(k: usize, widths: Vec<usize>) -> TrunkConfig {
    TrunkConfig {
        input_size: k,
        stem_width: 8,
        stage_widths: widths,
        blocks_per_stage: 1,
    }
}

pub fn configs() -> (StyleEncoderConfig, MappingConfig, CurveEncoderConfig) {
    (
        StyleEncoderConfig {
            trunk: trunk(16, vec![8, 16]),
            styles: 2,
            scale: 30.0,
        },
        MappingConfig {
            latent_dim: 16,
            hidden: vec![32],
            code_channels: vec![8, 16, 16],
        },
        CurveEncoderConfig {
            trunk: trunk(16, vec![8, 16, 16]),
            knot_counts: KnotLayout::default().counts().to_vec(),
            depth: 8,
        },
    )
}

/// Freshly initialized networks: the curve head is zero, so every
/// prediction is the zero curve set.
pub fn identity_pipeline() -> Pipeline {
    let (s, m, e) = configs();
    Pipeline::init(s, m, e, 7).unwrap()
}

/// Initialized networks with every weight jittered, so curves are nonzero
/// and depend on the image and on both styles.
pub fn random_pipeline(seed: u64) -> Pipeline {
    let p = identity_pipeline();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |mut w: stylecurve_nn::ModelWeights| {
        for (_, v) in w.values_mut() {
            for x in v {
                *x += rng.gen_range(-0.05..0.05);
            }
        }
        w
    };
    Pipeline::new(
        jitter(p.style().clone()),
        jitter(p.mapping().clone()),
        jitter(p.encoder().clone()),
    )
    .unwrap()
}

pub fn state(pipeline: Pipeline, capacity: usize) -> Arc<AppState> {
    Arc::new(AppState::new(
        Arc::new(Engine::new(pipeline)),
        StyleRegistry::new(),
        SessionStore::new(capacity).unwrap(),
    ))
}

pub fn app(state: &Arc<AppState>) -> Router {
    router(state.clone())
}

pub fn noise_image(seed: u64, w: usize, h: usize, depth: BitDepth) -> Image<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = depth.max_code();
    let mut img = Image::<f32>::from_fn(w, h, depth, |_, _| {
        [0; 3].map(|_| (rng.gen_range(0.0..=max).round() / max) as f32)
    })
    .unwrap();
    img.set_depth(depth);
    img
}

pub enum Part {
    Text(String),
    File(Vec<u8>),
}

pub fn text(s: &str) -> Part {
    Part::Text(s.to_string())
}

const BOUNDARY: &str = "XtestBOUNDARYx";

pub fn multipart(uri: &str, parts: &[(&str, Part)]) -> Request<Body> {
    let mut body = Vec::new();
    for (name, part) in parts {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match part {
            Part::Text(t) => {
                body.extend_from_slice(
                    format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n{t}\r\n")
                        .as_bytes(),
                );
            }
            Part::File(bytes) => {
                body.extend_from_slice(
                    format!(
                        "Content-Disposition: form-data; name=\"{name}\"; filename=\"{name}.png\"\r\n\
                         Content-Type: application/octet-stream\r\n\r\n"
                    )
                    .as_bytes(),
                );
                body.extend_from_slice(bytes);
                body.extend_from_slice(b"\r\n");
            }
        }
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    Request::builder()
        .method("POST")
        .uri(uri)
        .header(
            header::CONTENT_TYPE,
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(body))
        .unwrap()
}

pub fn post_json(uri: &str, body: &str) -> Request<Body> {
    Request::builder()
        .method("POST")
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

pub fn get(uri: &str) -> Request<Body> {
    Request::builder().uri(uri).body(Body::empty()).unwrap()
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Bytes) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    (status, body)
}

pub async fn send_json(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let (status, body) = send(app, req).await;
    let v = serde_json::from_slice(&body)
        .unwrap_or_else(|e| panic!("non-JSON body ({e}): {}", String::from_utf8_lossy(&body)));
    (status, v)
}

/// Decodes the base64 PNG in `v["image"]`.
pub fn body_image(v: &Value) -> Image<f32> {
    let b64 = v["image"].as_str().expect("image field");
    let png = base64::engine::general_purpose::STANDARD
        .decode(b64)
        .unwrap();
    decode_image(&png).unwrap()
}

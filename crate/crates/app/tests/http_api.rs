mod common;

use std::collections::BTreeMap;

use axum::http::StatusCode;
use common::*;
use serde_json::Value;
use stylecurve_app::render;
use stylecurve_core::enhancer::{CurveSetFile, CURVE_COUNT};
use stylecurve_core::io::{decode_image, encode_png};
use stylecurve_core::style::{nearest_center, Embedding, StyleLatent};
use stylecurve_core::BitDepth;
use stylecurve_nn::{fixup_init, ModelConfig, ModelWeights, Pipeline};
use stylecurve_train::presets::{cool, warm};
use stylecurve_train::{procedural_bases, train_style_encoder, StyledSet, TrainConfig};

fn png(seed: u64) -> Vec<u8> {
    encode_png(&noise_image(seed, 24, 20, BitDepth::Eight)).unwrap()
}

async fn register(app: &axum::Router, id: &str, seeds: &[u64]) -> Value {
    let mut parts = vec![("id", text(id))];
    for &s in seeds {
        parts.push(("image", Part::File(png(s))));
    }
    let (status, v) = send_json(app, multipart("/styles", &parts)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v
}

async fn enhance(
    app: &axum::Router,
    image: Vec<u8>,
    source: &str,
    target: &str,
    preview: bool,
) -> (StatusCode, Value) {
    let parts = vec![
        ("image", Part::File(image)),
        ("source", text(source)),
        ("target", text(target)),
        ("preview", text(if preview { "true" } else { "false" })),
    ];
    send_json(app, multipart("/enhance", &parts)).await
}

fn latent_of(v: &Value) -> StyleLatent {
    StyleLatent::from_value(&v["latent"]).unwrap()
}

#[tokio::test]
async fn healthz_and_style_listing() {
    let st = state(random_pipeline(1), 4);
    let app = app(&st);
    let (status, v) = send_json(&app, get("/healthz")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    register(&app, "cam", &[1, 2]).await;
    register(&app, "expertC", &[3]).await;
    let (_, v) = send_json(&app, get("/styles")).await;
    let ids: Vec<&str> = v["styles"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["cam", "expertC"]);
    assert_eq!(v["styles"][0]["dimension"], 16);
    assert_eq!(v["styles"][0]["provenance"], "gallery of 2");
}

#[tokio::test]
async fn single_image_latent_is_its_normalized_embedding() {
    let st = state(random_pipeline(2), 4);
    let app = app(&st);
    let v = register(&app, "one", &[5]).await;
    let latent = latent_of(&v);
    let f = st.engine.embed(&decode_image(&png(5)).unwrap()).unwrap();
    let n = f.norm();
    for (a, b) in latent.values().iter().zip(f.values()) {
        assert!((a - b / n).abs() < 1e-12);
    }
    // posting the same gallery again gives the same latent
    let again = register(&app, "one-again", &[5]).await;
    assert_eq!(latent_of(&again).values(), latent.values());
    // an unnamed style gets a fresh id
    let (status, v) = send_json(&app, multipart("/styles", &[("image", Part::File(png(6)))])).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["id"], "style-3");
}

#[tokio::test]
async fn style_upload_errors() {
    let st = state(random_pipeline(3), 4);
    let app = app(&st);
    let junk = vec![("image", Part::File(b"not an image".to_vec()))];
    let (status, v) = send_json(&app, multipart("/styles", &junk)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "no_images");
    assert!(v["message"].is_string());

    let (status, v) = send_json(
        &app,
        multipart(
            "/styles",
            &[("id", text("a b")), ("image", Part::File(png(1)))],
        ),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_style_id");

    // one good upload among junk still works
    let mixed = vec![
        ("image", Part::File(b"junk".to_vec())),
        ("image", Part::File(png(2))),
    ];
    let (status, v) = send_json(&app, multipart("/styles", &mixed)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        (v["images"].as_u64(), v["skipped"].as_u64()),
        (Some(1), Some(1))
    );

    // an all-zero style encoder maps every image to the zero embedding
    let p = identity_pipeline();
    let zero = ModelWeights::zeros(p.style().config().clone()).unwrap();
    let dead = Pipeline::new(zero, p.mapping().clone(), p.encoder().clone()).unwrap();
    let app = common::app(&state(dead, 4));
    let (status, v) = send_json(&app, multipart("/styles", &[("image", Part::File(png(1)))])).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "degenerate_centroid");
}

#[tokio::test]
async fn gallery_of_a_trained_style_lands_on_its_center() {
    let bases = procedural_bases(72, 32, 11).unwrap();
    let data = StyledSet::synthesize(&bases, &[warm(), cool()]).unwrap();
    let (train, held) = data.split(16).unwrap();
    let (mut s, m, e) = configs();
    s.trunk.input_size = 32;
    let cfg = TrainConfig {
        epochs: 6,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let trained = train_style_encoder(&train, s, &cfg).unwrap();
    let mapping = fixup_init(&ModelConfig::Mapping(m), 1).unwrap();
    let encoder = fixup_init(&ModelConfig::CurveEncoder(e), 2).unwrap();
    let st = state(Pipeline::new(trained.weights, mapping, encoder).unwrap(), 4);
    let app = app(&st);

    let upload =
        |set: &StyledSet, q: usize, range: std::ops::Range<usize>| -> Vec<(&'static str, Part)> {
            range
                .map(|n| {
                    (
                        "image",
                        Part::File(encode_png(set.get(q, n).unwrap()).unwrap()),
                    )
                })
                .collect()
        };
    let mut centers = BTreeMap::new();
    for (q, id) in ["warm", "cool"].iter().enumerate() {
        let mut parts = upload(&train, q, 0..train.len());
        parts.push(("id", text(id)));
        let (status, v) = send_json(&app, multipart("/styles", &parts)).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        centers.insert(q, latent_of(&v));
    }
    for q in 0..2 {
        for chunk in 0..2 {
            let parts = upload(&held, q, chunk * 8..chunk * 8 + 8);
            let (_, v) = send_json(&app, multipart("/styles", &parts)).await;
            let query = Embedding::new(latent_of(&v).values().to_vec()).unwrap();
            assert_eq!(
                nearest_center(&query, &centers).unwrap(),
                q,
                "style {q} chunk {chunk}"
            );
        }
    }
}

#[tokio::test]
async fn identity_model_returns_the_input() {
    let st = state(identity_pipeline(), 4);
    let app = app(&st);
    register(&app, "a", &[1]).await;
    register(&app, "b", &[2]).await;
    let input = noise_image(9, 30, 17, BitDepth::Eight);
    for preview in [true, false] {
        let (status, v) = enhance(&app, encode_png(&input).unwrap(), "a", "b", preview).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        assert_eq!(body_image(&v), input);
        let curves = CurveSetFile::from_value(&v["curves"]).unwrap().curves;
        assert!(curves.is_zero());
    }
}

#[tokio::test]
async fn enhance_errors() {
    let st = state(random_pipeline(4), 4);
    let app = app(&st);
    register(&app, "a", &[1]).await;
    let (status, v) = enhance(&app, png(1), "a", "nope", true).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "unknown_style");
    let (status, v) = enhance(&app, b"garbage".to_vec(), "a", "a", true).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "bad_image");
    let (status, v) = send_json(&app, multipart("/enhance", &[("source", text("a"))])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "missing_field");
    let (status, _) = send_json(&app, multipart("/enhance", &[("preview", text("maybe"))])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(st.engine.encoder_calls(), 0);
}

#[tokio::test]
async fn served_curves_reproduce_the_served_render() {
    let st = state(random_pipeline(5), 4);
    let app = app(&st);
    register(&app, "a", &[1, 2]).await;
    register(&app, "b", &[3, 4]).await;
    let input = noise_image(10, 40, 26, BitDepth::Eight);
    let (_, first) = enhance(&app, encode_png(&input).unwrap(), "a", "b", true).await;
    let (_, second) = enhance(&app, encode_png(&input).unwrap(), "a", "b", true).await;
    assert_eq!(first["curves"], second["curves"]);
    assert_ne!(first["session"], second["session"]);

    let curves = CurveSetFile::from_value(&first["curves"]).unwrap().curves;
    assert!(!curves.is_zero());
    let client = render(&input, &curves, st.engine.depth()).unwrap();
    let client = decode_image(&encode_png(&client).unwrap()).unwrap();
    assert_eq!(body_image(&first), client);

    let samples = first["samples"].as_object().unwrap();
    assert_eq!(samples.len(), CURVE_COUNT);
    assert!(samples.values().all(|s| s.as_array().unwrap().len() == 64));
}

#[tokio::test]
async fn slider_edits_never_run_the_encoder() {
    let st = state(random_pipeline(6), 4);
    let app = app(&st);
    register(&app, "a", &[1]).await;
    register(&app, "b", &[2]).await;
    let input = noise_image(11, 32, 24, BitDepth::Eight);
    let (_, base) = enhance(&app, encode_png(&input).unwrap(), "a", "b", true).await;
    let id = base["session"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{id}/sliders");
    let calls = st.engine.encoder_calls();
    let mapping = st.engine.mapping_calls();

    // all ones: the exact base render
    let (status, v) = send_json(&app, post_json(&uri, r#"{"sliders": {}}"#)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["image"], base["image"]);
    assert_eq!(v["curves"], base["curves"]);

    // all zeros: no residual at all
    let zeros: serde_json::Map<String, Value> = base["samples"]
        .as_object()
        .unwrap()
        .keys()
        .map(|k| (k.clone(), Value::from(0.0)))
        .collect();
    let body = serde_json::json!({ "sliders": zeros }).to_string();
    let (_, v) = send_json(&app, post_json(&uri, &body)).await;
    assert_eq!(body_image(&v), input);

    for k in 0..100 {
        let beta = k as f64 / 50.0;
        let body = format!(
            r#"{{"sliders": {{"g_to_r": {beta}, "y_to_b": {}}}}}"#,
            2.0 - beta
        );
        let (status, _) = send_json(&app, post_json(&uri, &body)).await;
        assert_eq!(status, StatusCode::OK);
    }
    assert_eq!(st.engine.encoder_calls(), calls);
    assert_eq!(st.engine.mapping_calls(), mapping);

    // knot overrides land after the sliders
    let body =
        r#"{"sliders": {"r_to_r": 0}, "knots": [{"curve": "r_to_r", "index": 4, "value": 0.25}]}"#;
    let (status, v) = send_json(&app, post_json(&uri, body)).await;
    assert_eq!(status, StatusCode::OK);
    let knots = v["curves"]["curves"]["r_to_r"].as_array().unwrap();
    assert_eq!(knots[4], 0.25);
    assert_eq!(knots[3], 0.0);
}

#[tokio::test]
async fn slider_errors() {
    let st = state(random_pipeline(7), 4);
    let app = app(&st);
    register(&app, "a", &[1]).await;
    let (_, base) = enhance(&app, png(3), "a", "a", true).await;
    let uri = format!("/sessions/{}/sliders", base["session"].as_str().unwrap());

    let (status, v) = send_json(&app, post_json("/sessions/nope/sliders", "{}")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "unknown_session");
    let (status, v) = send_json(&app, post_json(&uri, r#"{"sliders": {"r_to_g": 2.5}}"#)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_sliders");
    let (status, _) = send_json(&app, post_json(&uri, r#"{"sliders": {"r_to_g": -0.1}}"#)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = send_json(
        &app,
        post_json(
            &uri,
            r#"{"knots": [{"curve": "r_to_g", "index": 99, "value": 0}]}"#,
        ),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, v) = send_json(&app, post_json(&uri, "{not json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "bad_json");

    // a rejected edit leaves the session untouched
    let (_, v) = send_json(&app, post_json(&uri, "{}")).await;
    assert_eq!(v["image"], base["image"]);
}

#[tokio::test]
async fn export_renders_full_resolution() {
    let st = state(random_pipeline(8), 4);
    let app = app(&st);
    register(&app, "a", &[1]).await;
    register(&app, "b", &[2]).await;
    // larger than the preview box, so the preview is a downscaled copy
    let input = noise_image(12, 1600, 900, BitDepth::Eight);
    let (_, v) = enhance(&app, encode_png(&input).unwrap(), "a", "b", true).await;
    assert_eq!(
        (v["width"].as_u64(), v["height"].as_u64()),
        (Some(1280), Some(720))
    );
    assert_eq!(
        (v["source_width"].as_u64(), v["source_height"].as_u64()),
        (Some(1600), Some(900))
    );
    let id = v["session"].as_str().unwrap().to_string();
    let curves = CurveSetFile::from_value(&v["curves"]).unwrap().curves;

    let (status, png) = send(&app, post_json(&format!("/sessions/{id}/export"), "")).await;
    assert_eq!(status, StatusCode::OK);
    let expect = encode_png(&render(&input, &curves, st.engine.depth()).unwrap()).unwrap();
    assert_eq!(png.as_ref(), expect.as_slice());

    // preview render at 1280x720 stays inside the interactive budget
    let (_, s) = send_json(
        &app,
        post_json(
            &format!("/sessions/{id}/sliders"),
            r#"{"sliders": {"b_to_b": 0.5}}"#,
        ),
    )
    .await;
    assert!(
        s["render_ms"].as_f64().unwrap() <= 100.0,
        "{}",
        s["render_ms"]
    );

    let zeros = r#"{"sliders": {"r_to_r":0,"g_to_r":0,"b_to_r":0,"x_to_r":0,"y_to_r":0,
        "r_to_g":0,"g_to_g":0,"b_to_g":0,"x_to_g":0,"y_to_g":0,
        "r_to_b":0,"g_to_b":0,"b_to_b":0,"x_to_b":0,"y_to_b":0}}"#;
    send_json(&app, post_json(&format!("/sessions/{id}/sliders"), zeros)).await;
    let (_, png) = send(&app, post_json(&format!("/sessions/{id}/export"), "")).await;
    assert_eq!(decode_image(&png).unwrap(), input);
    // the unedited curves are still available
    let (_, png) = send(
        &app,
        post_json(
            &format!("/sessions/{id}/export"),
            r#"{"sliders_applied": false}"#,
        ),
    )
    .await;
    assert_eq!(png.as_ref(), expect.as_slice());

    let (status, v) = send_json(&app, post_json("/sessions/missing/export", "")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "unknown_session");
}

#[tokio::test]
async fn sixteen_bit_zero_curve_export_is_bit_exact() {
    let st = state(identity_pipeline(), 4);
    let app = app(&st);
    register(&app, "a", &[1]).await;
    let input = noise_image(13, 37, 23, BitDepth::Sixteen);
    let bytes = encode_png(&input).unwrap();
    let (_, v) = enhance(&app, bytes.clone(), "a", "a", true).await;
    let (_, png) = send(
        &app,
        post_json(
            &format!("/sessions/{}/export", v["session"].as_str().unwrap()),
            "",
        ),
    )
    .await;
    let back = decode_image(&png).unwrap();
    assert_eq!(back.depth(), BitDepth::Sixteen);
    assert_eq!(back, input);
    assert_eq!(png.as_ref(), bytes.as_slice());
}

#[tokio::test]
async fn style_codes_are_computed_once_per_style() {
    let st = state(random_pipeline(9), 4);
    let app = app(&st);
    register(&app, "a", &[1]).await;
    register(&app, "b", &[2]).await;
    register(&app, "c", &[3]).await;
    for (s, t) in [("a", "b"), ("b", "a"), ("a", "c"), ("c", "c"), ("a", "b")] {
        let (status, _) = enhance(&app, png(4), s, t, true).await;
        assert_eq!(status, StatusCode::OK);
    }
    assert_eq!(st.engine.mapping_calls(), 3);
    assert_eq!(st.engine.encoder_calls(), 5);
}

#[tokio::test]
async fn least_recently_used_session_is_evicted() {
    let st = state(random_pipeline(10), 2);
    let app = app(&st);
    register(&app, "a", &[1]).await;
    let mut ids = Vec::new();
    for k in 0..3 {
        let (_, v) = enhance(&app, png(k), "a", "a", true).await;
        ids.push(v["session"].as_str().unwrap().to_string());
        if k == 1 {
            // touch the first session so the second becomes the oldest
            let (status, _) = send(
                &app,
                post_json(&format!("/sessions/{}/sliders", ids[0]), "{}"),
            )
            .await;
            assert_eq!(status, StatusCode::OK);
        }
    }
    let status_of = |id: &str| post_json(&format!("/sessions/{id}/sliders"), "{}");
    assert_eq!(
        send(&app, status_of(&ids[1])).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(send(&app, status_of(&ids[0])).await.0, StatusCode::OK);
    assert_eq!(send(&app, status_of(&ids[2])).await.0, StatusCode::OK);
}

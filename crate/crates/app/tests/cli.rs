mod common;

use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use axum::http::StatusCode;
use common::*;
use stylecurve_app::cli::{default_styles_dir, resolve_style};
use stylecurve_app::server::AppState;
use stylecurve_app::session::SessionStore;
use stylecurve_app::{Engine, StyleRegistry};
use stylecurve_core::enhancer::CurveSetFile;
use stylecurve_core::io::{encode_png, load_image};
use stylecurve_core::style::StyleLatent;
use stylecurve_core::BitDepth;

fn stylecurve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stylecurve"))
        .args(args)
        .env_remove("STARENH_MODEL")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = stylecurve(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let out = stylecurve(&[
        "enhance", "--in", "a.png", "--out", "b.png", "--source", "cam", "--target", "expertC",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--model") && err.contains("Usage"), "{err}");
    assert_eq!(stylecurve(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(stylecurve(&["bench", "--frames"]).status.code(), Some(2));
    let help = stylecurve(&["enhance", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("STARENH_MODEL"));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("missing.bin");
    let out = stylecurve(&[
        "enhance",
        "--in",
        "a.png",
        "--out",
        "b.png",
        "--source",
        "a",
        "--target",
        "b",
        "--model",
        p(&model),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = stylecurve(&["synth", "--out", p(dir.path()), "--preset", "seven"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_reports_fps_from_ms() {
    let out = ok(&["bench", "--size", "96x64", "--frames", "3"]);
    // "96x64 single-threaded: 0.12 ms/frame, 8333.3 FPS"
    let words: Vec<&str> = out.split_whitespace().collect();
    let ms: f64 = words[2].parse().unwrap();
    let fps: f64 = words[4].parse().unwrap();
    assert!(out.starts_with("96x64 single-threaded:"), "{out}");
    // both are rounded for display
    let rel = (fps - 1000.0 / ms).abs() / fps;
    assert!(rel < 0.05 || ms < 0.1, "{out}");
}

#[test]
fn train_enhance_and_serve_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let out = ok(&[
        "synth",
        "--out",
        p(&data),
        "--preset",
        "two",
        "--bases",
        "14",
        "--size",
        "16",
        "--seed",
        "3",
    ]);
    assert!(out.contains("14 bases x 2 styles"), "{out}");
    assert!(data.join("styles.json").is_file());
    assert!(data.join("styled/warm/0000.png").is_file());

    let common = [
        "--epochs",
        "1",
        "--batch-size",
        "4",
        "--input-size",
        "16",
        "--test",
        "4",
    ];
    let style = d.join("style.bin");
    let mut args = vec!["train-style", "--data", p(&data), "--out", p(&style)];
    args.extend(common);
    ok(&args);

    let model = d.join("model.bin");
    let (metrics, matrix) = (d.join("metrics.csv"), d.join("matrix.csv"));
    let mut args = vec![
        "train-enhancer",
        "--data",
        p(&data),
        "--style",
        p(&style),
        "--out",
        p(&model),
        "--metrics",
        p(&metrics),
        "--matrix",
        p(&matrix),
    ];
    args.extend(common);
    let out = ok(&args);
    assert!(out.contains("off-diagonal mean PSNR"), "{out}");
    assert!(std::fs::read_to_string(&metrics)
        .unwrap()
        .starts_with("step,lr,loss\n"));
    assert!(std::fs::read_to_string(&matrix)
        .unwrap()
        .starts_with("source,warm,cool\n"));
    let styles = default_styles_dir(&model);
    assert!(styles.join("warm.json").is_file() && styles.join("cool.json").is_file());

    // embed a gallery into a latent file
    let gallery = d.join("gallery.json");
    let warm_imgs = [
        data.join("styled/warm/0000.png"),
        data.join("styled/warm/0001.png"),
    ];
    ok(&[
        "embed",
        "--model",
        p(&model),
        "--out",
        p(&gallery),
        p(&warm_imgs[0]),
        p(&warm_imgs[1]),
    ]);
    assert_eq!(
        StyleLatent::load(&gallery).unwrap().provenance(),
        "gallery of 2"
    );

    // enhance through the environment variable, by id and by latent file
    let input = d.join("in.png");
    std::fs::write(
        &input,
        encode_png(&noise_image(4, 40, 30, BitDepth::Sixteen)).unwrap(),
    )
    .unwrap();
    let sliders = d.join("sliders.json");
    std::fs::write(&sliders, r#"{"r_to_r": 0.5, "y_to_g": 1.5}"#).unwrap();
    let (out_png, curves_json) = (d.join("out.png"), d.join("curves.json"));
    let status = Command::new(env!("CARGO_BIN_EXE_stylecurve"))
        .args([
            "enhance",
            "--in",
            p(&input),
            "--out",
            p(&out_png),
            "--source",
            "warm",
            "--target",
            p(&gallery),
            "--sliders",
            p(&sliders),
            "--curves-out",
            p(&curves_json),
        ])
        .env("STARENH_MODEL", &model)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let cli_out = load_image(&out_png).unwrap();
    assert_eq!(cli_out.depth(), BitDepth::Sixteen);
    assert!(CurveSetFile::load(&curves_json).is_ok());

    // the server renders the same bytes for the same request
    let engine = Arc::new(Engine::load(&model).unwrap());
    let mut registry = StyleRegistry::load_dir(&engine, &styles).unwrap();
    registry
        .insert(
            &engine,
            "gallery",
            resolve_style(&styles, p(&gallery)).unwrap(),
        )
        .unwrap();
    let st = Arc::new(AppState::new(
        engine,
        registry,
        SessionStore::new(4).unwrap(),
    ));
    let app = app(&st);
    let rt = tokio::runtime::Runtime::new().unwrap();
    let exported = rt.block_on(async {
        let parts = vec![
            ("image", Part::File(std::fs::read(&input).unwrap())),
            ("source", text("warm")),
            ("target", text("gallery")),
        ];
        let (status, v) = send_json(&app, multipart("/enhance", &parts)).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        let id = v["session"].as_str().unwrap().to_string();
        let (status, _) = send(
            &app,
            post_json(
                &format!("/sessions/{id}/sliders"),
                r#"{"sliders": {"r_to_r": 0.5, "y_to_g": 1.5}}"#,
            ),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        send(&app, post_json(&format!("/sessions/{id}/export"), ""))
            .await
            .1
    });
    assert_eq!(
        exported.as_ref(),
        std::fs::read(&out_png).unwrap().as_slice()
    );
}

//! Render throughput and on-disk round trips.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stylecurve_core::enhancer::{
    build_lut_set, enhance, enhance_with, CurveSet, CurveSetFile, KnotLayout, RenderMode,
    SliderSettings,
};
use stylecurve_core::io::{decode_image, encode_png};
use stylecurve_core::{BitDepth, Image};
use stylecurve_nn::{
    CurveEncoderConfig, MappingConfig, ModelWeights, Pipeline, StyleEncoderConfig,
};

use crate::oracle::random_curves;
use crate::Check;

const DEPTH: u32 = 8;
const ROUNDS: usize = 7;
const SIZES: [(usize, usize); 5] = [
    (960, 540),
    (1920, 1080),
    (2560, 1440),
    (3200, 1800),
    (3840, 2160),
];

fn frame(w: usize, h: usize, rng: &mut ChaCha8Rng) -> anyhow::Result<(Image<f32>, CurveSet)> {
    let layout = KnotLayout::default();
    let u: Vec<f64> = (0..layout.total())
        .map(|_| rng.gen_range(-0.1..0.1))
        .collect();
    let data: Vec<f32> = (0..3 * w * h).map(|_| rng.gen::<f32>()).collect();
    Ok((
        Image::from_planar(w, h, BitDepth::Eight, data)?,
        CurveSet::from_flat(&u, &layout)?,
    ))
}

/// Milliseconds for one single-threaded render, tables included.
fn serial_ms(image: &Image<f32>, curves: &CurveSet) -> anyhow::Result<f64> {
    let t = Instant::now();
    let luts = build_lut_set(curves, DEPTH, image.height(), image.width())?;
    std::hint::black_box(enhance_with(image, &luts, true, RenderMode::Serial)?);
    Ok(t.elapsed().as_secs_f64() * 1e3)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

pub fn throughput() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let frames = SIZES
        .iter()
        .map(|&(w, h)| frame(w, h, &mut rng))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let pixels: Vec<f64> = SIZES.iter().map(|(w, h)| (w * h) as f64).collect();
    // Rounds visit every size in turn, so a burst of host noise lands on
    // all sizes alike instead of skewing one; round 0 is a warm-up.
    let mut samples = vec![Vec::new(); SIZES.len()];
    for round in 0..=ROUNDS {
        for ((img, curves), s) in frames.iter().zip(&mut samples) {
            let t = serial_ms(img, curves)?;
            if round > 0 {
                s.push(t);
            }
        }
    }
    let ms: Vec<f64> = samples.into_iter().map(median).collect();
    let uhd = *ms.last().unwrap();
    let r2 = r_squared(&pixels, &ms);

    let (img, curves) = frame(3840, 2160, &mut rng)?;
    let luts = build_lut_set(&curves, DEPTH, 2160, 3840)?;
    let mut same = true;
    for clamp in [false, true] {
        same &= enhance_with(&img, &luts, clamp, RenderMode::Serial)?
            == enhance_with(&img, &luts, clamp, RenderMode::Parallel)?;
    }
    let times: Vec<String> = SIZES
        .iter()
        .zip(&ms)
        .map(|((w, h), t)| format!("{w}x{h} {t:.1}"))
        .collect();
    Ok((
        uhd <= 250.0 && r2 >= 0.99 && same,
        format!(
            "3840x2160 single-threaded {uhd:.1} ms/frame (need <= 250); R^2 {r2:.4} over ms [{}] (need >= 0.99); \
             parallel {} serial",
            times.join(", "),
            if same { "equals" } else { "DIFFERS from" }
        ),
    ))
}

fn jittered(w: &ModelWeights, rng: &mut ChaCha8Rng) -> ModelWeights {
    let mut w = w.clone();
    for (_, v) in w.values_mut() {
        v.iter_mut().for_each(|x| *x += rng.gen_range(-0.5..0.5));
    }
    w
}

pub fn persistence() -> Check {
    let dir = tempfile::tempdir()?;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut failures = Vec::new();

    let init = Pipeline::init(
        StyleEncoderConfig {
            styles: 4,
            ..Default::default()
        },
        MappingConfig::default(),
        CurveEncoderConfig::default(),
        5,
    )?;
    let p = Pipeline::new(
        jittered(init.style(), &mut rng),
        jittered(init.mapping(), &mut rng),
        jittered(init.encoder(), &mut rng),
    )?;
    let path = dir.path().join("model.bin");
    p.save(&path)?;
    let back = Pipeline::load(&path)?;
    let mut values = 0usize;
    for (a, b) in [
        (p.style(), back.style()),
        (p.mapping(), back.mapping()),
        (p.encoder(), back.encoder()),
    ] {
        if a.config() != b.config() || a.tensors().len() != b.tensors().len() {
            failures.push("model configs differ".to_string());
        }
        for ((na, ta), (nb, tb)) in a.tensors().iter().zip(b.tensors()) {
            // weights are stored as f32
            let ok = na == nb
                && ta.shape() == tb.shape()
                && ta
                    .data()
                    .iter()
                    .zip(tb.data())
                    .all(|(x, y)| (*x as f32) as f64 == *y);
            if !ok {
                failures.push(format!("tensor {na} changed"));
            }
            values += ta.data().len();
        }
    }
    if back.to_bytes()? != std::fs::read(&path)? || Pipeline::load(&path)? != back {
        failures.push("weights do not re-save byte-identically".into());
    }

    for k in 0..20 {
        let mut file = CurveSetFile::new(random_curves(&mut rng));
        if k % 2 == 0 {
            file.sliders = Some(SliderSettings::uniform(rng.gen_range(0.0..2.0))?);
        }
        let path = dir.path().join("curves.json");
        file.save(&path)?;
        let loaded = CurveSetFile::load(&path)?;
        if loaded != file || loaded.to_json() != file.to_json() {
            failures.push(format!("curve file {k} changed"));
        }
    }

    let zero = CurveSet::zeros(&KnotLayout::default());
    for k in 0..5 {
        let (w, h) = (rng.gen_range(1..200), rng.gen_range(1..200));
        let max = BitDepth::Sixteen.max_code();
        let img = Image::<f32>::from_fn(w, h, BitDepth::Sixteen, |_, _| {
            [0; 3].map(|_| (rng.gen_range(0.0..=max).round() / max) as f32)
        })?;
        let png = encode_png(&img)?;
        let decoded = decode_image(&png)?;
        let out = enhance(&decoded, &zero, DEPTH, true)?;
        let again = encode_png(&out)?;
        if decoded.depth() != BitDepth::Sixteen || out != img || again != png {
            failures.push(format!("16-bit image {k} ({w}x{h}) changed"));
        }
    }

    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{values} weights reload as their f32 values and re-save byte-identically; \
                 20 curve files and 5 zero-curve 16-bit PNGs round-trip exactly"
            )
        } else {
            failures.join("; ")
        },
    ))
}

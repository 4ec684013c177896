//! Criteria checked against closed forms and reference implementations.

use anyhow::{ensure, Context};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stylecurve_core::colorspace::lab_l1_loss;
use stylecurve_core::curves::{eval_curve, monotone_slopes, sample_curve, CurveKnots};
use stylecurve_core::enhancer::{
    apply_sliders, build_lut_set, enhance, render_residual, CurveSet, KnotLayout, SliderSettings,
};
use stylecurve_core::style::{
    average_latent, classify_loss, ClassifierHead, Embedding, StyleLatent,
};
use stylecurve_core::Image;
use stylecurve_nn::gradcheck::check_gradients;
use stylecurve_nn::{
    dual_adain, fixup_init, CodePair, CurveEncoderConfig, MappingConfig, ModelConfig, Pipeline,
    StyleEncoderConfig, Tensor, TrunkConfig,
};
use stylecurve_train::{
    embed_images, presets, procedural_bases, EnhancerTrainer, StyledSet, TrainConfig,
};

use crate::oracle::{max_abs_diff, naive_enhance, pchip, random_curves, random_image};
use crate::Check;

const CURVE_TOL: f64 = 1e-12;

fn knots(u: &[f64]) -> anyhow::Result<CurveKnots> {
    Ok(CurveKnots::new(u.to_vec())?)
}

/// Nondecreasing vector of 2 to 32 knots with flat runs mixed in.
fn monotone_vector(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = rng.gen_range(2..=32);
    let mut u = vec![rng.gen_range(-2.0..2.0)];
    for _ in 1..m {
        let step = if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.0..1.0)
        };
        u.push(u.last().unwrap() + step);
    }
    u
}

pub fn interpolation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0usize;
    for _ in 0..1000 {
        let u = monotone_vector(&mut rng);
        let n = rng.gen_range(2..600);
        let up = sample_curve(&knots(&u)?, n)?;
        violations += up.values().windows(2).filter(|w| w[1] < w[0]).count();
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let down = sample_curve(&knots(&neg)?, n)?;
        violations += down.values().windows(2).filter(|w| w[1] > w[0]).count();
    }

    let (mut knot_err, mut line_err, mut homog_err, mut oracle_err) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let m = rng.gen_range(2..24);
        let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let c = knots(&u)?;
        for (k, want) in u.iter().enumerate() {
            knot_err = knot_err.max((eval_curve(&c, k as f64 / (m - 1) as f64)? - want).abs());
        }

        let beta = rng.gen_range(0.0..2.0);
        let scaled = knots(&u.iter().map(|v| beta * v).collect::<Vec<_>>())?;
        for _ in 0..10 {
            let t: f64 = rng.gen();
            let base = eval_curve(&c, t)?;
            homog_err = homog_err.max((eval_curve(&scaled, t)? - beta * base).abs());
            oracle_err = oracle_err.max((base - pchip(&u, t)).abs());
        }

        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let n = rng.gen_range(2..300);
        let line: Vec<f64> = (0..m).map(|k| a + b * k as f64 / (m - 1) as f64).collect();
        let s = sample_curve(&knots(&line)?, n)?;
        for (k, v) in s.values().iter().enumerate() {
            line_err = line_err.max((v - (a + b * k as f64 / (n - 1) as f64)).abs());
        }
        for d in monotone_slopes(&line)? {
            line_err = line_err.max((d - b / (m - 1) as f64).abs());
        }
    }
    let passed = violations == 0
        && knot_err <= CURVE_TOL
        && line_err <= CURVE_TOL
        && homog_err <= CURVE_TOL
        && oracle_err <= CURVE_TOL;
    Ok((
        passed,
        format!(
            "{violations} monotonicity violations in 1000 vectors; max error knots {knot_err:.1e}, \
             lines {line_err:.1e}, homogeneity {homog_err:.1e}, vs reference {oracle_err:.1e} (tol 1e-12)"
        ),
    ))
}

pub fn enhancer_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatched = Vec::new();
    for case in 0..100 {
        let (w, h) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let depth = rng.gen_range(1..=12);
        let img = random_image(&mut rng, w, h);
        let curves = random_curves(&mut rng);
        if enhance(&img, &curves, depth, false)? != naive_enhance(&img, &curves, depth) {
            mismatched.push(case);
        }
    }
    let zero = CurveSet::zeros(&KnotLayout::default());
    let mut identity_ok = true;
    for _ in 0..10 {
        let (w, h) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let img = random_image(&mut rng, w, h);
        identity_ok &= enhance(&img, &zero, 8, false)? == img;
        let img32 = img.cast::<f32>();
        identity_ok &= enhance(&img32, &zero, 8, true)? == img32;
    }
    Ok((
        mismatched.is_empty() && identity_ok,
        format!(
            "{} of 100 random cases differ from the naive loop {mismatched:?}; zero curves {}",
            mismatched.len(),
            if identity_ok {
                "bit-exact identity"
            } else {
                "NOT the identity"
            }
        ),
    ))
}

pub fn slider_homogeneity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let betas = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0];
    let mut worst = [0.0f64; 6];
    for _ in 0..10 {
        let (w, h) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let img = random_image(&mut rng, w, h);
        let curves = random_curves(&mut rng);
        let base = render_residual(&img, &build_lut_set(&curves, 8, h, w)?)?;
        for (k, &beta) in betas.iter().enumerate() {
            let scaled = apply_sliders(&curves, &SliderSettings::uniform(beta)?)?;
            let r = render_residual(&img, &build_lut_set(&scaled, 8, h, w)?)?;
            let want: Vec<f64> = base.data().iter().map(|v| beta * v).collect();
            worst[k] = worst[k].max(max_abs_diff(r.data(), &want));
        }
    }
    let passed = worst.iter().all(|&e| e <= 1e-9);
    let parts: Vec<String> = betas
        .iter()
        .zip(&worst)
        .map(|(b, e)| format!("{b}: {e:.1e}"))
        .collect();
    Ok((
        passed,
        format!(
            "max |R(beta) - beta R| per beta {{{}}} (tol 1e-9)",
            parts.join(", ")
        ),
    ))
}

fn f32_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> anyhow::Result<Tensor> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-2.0f32..2.0) as f64).collect();
    Ok(Tensor::new(shape.to_vec(), data)?)
}

fn f32_pair(rng: &mut ChaCha8Rng, c: usize) -> anyhow::Result<CodePair> {
    Ok(CodePair::new(
        (0..c).map(|_| rng.gen_range(-1.0f32..1.0) as f64).collect(),
        (0..c).map(|_| rng.gen_range(0.2f32..3.0) as f64).collect(),
    )?)
}

/// Inputs are single-precision values; the round trip is compared after
/// rounding back to `f32`.
pub fn dual_adain_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut identity_exact = true;
    let mut round_trip = 0.0f64;
    for _ in 0..50 {
        let (n, c) = (rng.gen_range(1..4), rng.gen_range(1..9));
        let (h, w) = (rng.gen_range(1..9), rng.gen_range(1..9));
        let x = f32_tensor(&mut rng, &[n, c, h, w])?;
        let a = f32_pair(&mut rng, c)?;
        let b = f32_pair(&mut rng, c)?;
        identity_exact &= dual_adain(&x, &a, &a)? == x;
        identity_exact &= dual_adain(&x, &CodePair::identity(c), &CodePair::identity(c))? == x;
        let back = dual_adain(&dual_adain(&x, &a, &b)?, &b, &a)?;
        for (p, q) in back.data().iter().zip(x.data()) {
            round_trip = round_trip.max(((*p as f32) as f64 - q).abs());
        }
    }
    Ok((
        identity_exact && round_trip <= 1e-6,
        format!(
            "identity codes {}; a->b->a max error {round_trip:.1e} in f32 over 50 tensors (tol 1e-6)",
            if identity_exact { "exact" } else { "NOT exact" }
        ),
    ))
}

pub fn style_math() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let emb = |rng: &mut ChaCha8Rng, d: usize| -> anyhow::Result<Embedding> {
        Ok(Embedding::new(
            (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        )?)
    };
    let (mut unit_err, mut perm_err) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let d = rng.gen_range(2..40);
        let mut set: Vec<Embedding> = (0..rng.gen_range(1..30))
            .map(|_| emb(&mut rng, d))
            .collect::<anyhow::Result<_>>()?;
        let l = average_latent(&set, "a")?;
        let n = l.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        unit_err = unit_err.max((n - 1.0).abs());
        set.shuffle(&mut rng);
        let shuffled = average_latent(&set, "a")?;
        perm_err = perm_err.max(max_abs_diff(l.values(), shuffled.values()));
    }

    let (mut uniform_err, mut scale_err) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let (q, d) = (rng.gen_range(2..12), rng.gen_range(2..20));
        let s = rng.gen_range(1.0..64.0);
        let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // identical rows give every style the same cosine
        let same = ClassifierHead::new(vec![row; q], s)?;
        let f = emb(&mut rng, d)?;
        let p = rng.gen_range(0..q);
        uniform_err = uniform_err.max((classify_loss(&f, &same, p)? - (q as f64).ln()).abs());

        let head = ClassifierHead::new(
            (0..q)
                .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
            s,
        )?;
        let c = 10f64.powf(rng.gen_range(-3.0..3.0));
        let l0 = classify_loss(&f, &head, p)?;
        scale_err = scale_err.max((classify_loss(&f.scaled(c), &head, p)? - l0).abs());
    }
    let passed = unit_err <= 1e-6 && perm_err <= 1e-12 && uniform_err <= 1e-9 && scale_err <= 1e-9;
    Ok((
        passed,
        format!(
            "latent norm error {unit_err:.1e} (tol 1e-6), shuffle change {perm_err:.1e} (tol 1e-12), \
             uniform loss vs ln|Q| {uniform_err:.1e} (tol 1e-9), embedding scale change {scale_err:.1e} (tol 1e-9)"
        ),
    ))
}

const GRAD_CASES: usize = 20;
const GRAD_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> anyhow::Result<Tensor> {
    let n = shape.iter().product();
    Ok(Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(lo..hi)).collect(),
    )?)
}

/// Worst relative error of one op over its cases.
struct OpReport {
    name: &'static str,
    cases: usize,
    worst: f64,
}

fn grad_op(
    name: &'static str,
    seed: u64,
    mut case: impl FnMut(&mut ChaCha8Rng, usize) -> anyhow::Result<f64>,
) -> anyhow::Result<OpReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..GRAD_CASES {
        worst = worst.max(case(&mut rng, k).with_context(|| format!("{name} case {k}"))?);
    }
    Ok(OpReport {
        name,
        cases: GRAD_CASES,
        worst,
    })
}

pub fn gradient_checks() -> Check {
    let reports = [
        grad_op("conv", 1, |rng, k| {
            let (stride, pad) = (1 + k % 2, (k / 2) % 2);
            let x = rand_tensor(rng, &[2, 2, 5, 6], -1.0, 1.0)?;
            let w = rand_tensor(rng, &[3, 2, 3, 3], -1.0, 1.0)?;
            let b = rand_tensor(rng, &[3], -1.0, 1.0)?;
            let (ho, wo) = (
                (5 + 2 * pad - 3) / stride + 1,
                (6 + 2 * pad - 3) / stride + 1,
            );
            let c = rand_tensor(rng, &[2, 3, ho, wo], -1.0, 1.0)?;
            let r = check_gradients(&[x, w, b], FD_STEP, |g, v| {
                let y = g.conv2d(v[0], v[1], Some(v[2]), stride, pad)?;
                g.dot(y, c.clone())
            })?;
            Ok(r.relative_error())
        })?,
        grad_op("fc", 2, |rng, _| {
            let x = rand_tensor(rng, &[3, 4], -1.0, 1.0)?;
            let w = rand_tensor(rng, &[5, 4], -1.0, 1.0)?;
            let b = rand_tensor(rng, &[5], -1.0, 1.0)?;
            let c = rand_tensor(rng, &[3, 5], -1.0, 1.0)?;
            let r = check_gradients(&[x, w, b], FD_STEP, |g, v| {
                let y = g.linear(v[0], v[1], Some(v[2]))?;
                g.dot(y, c.clone())
            })?;
            Ok(r.relative_error())
        })?,
        grad_op("pooling", 3, |rng, _| {
            let x = rand_tensor(rng, &[2, 3, 4, 5], -1.0, 1.0)?;
            let c = rand_tensor(rng, &[2, 3], -1.0, 1.0)?;
            let r = check_gradients(&[x], FD_STEP, |g, v| {
                let y = g.global_avg_pool(v[0])?;
                g.dot(y, c.clone())
            })?;
            Ok(r.relative_error())
        })?,
        grad_op("dual_adain", 5, |rng, _| {
            let x = rand_tensor(rng, &[2, 3, 4, 4], -1.0, 1.0)?;
            let ma = rand_tensor(rng, &[2, 3], -1.0, 1.0)?;
            let sa = rand_tensor(rng, &[2, 3], 0.5, 2.0)?;
            let mb = rand_tensor(rng, &[2, 3], -1.0, 1.0)?;
            let sb = rand_tensor(rng, &[2, 3], 0.5, 2.0)?;
            let c = rand_tensor(rng, &[2, 3, 4, 4], -1.0, 1.0)?;
            let r = check_gradients(&[x, ma, sa, mb, sb], FD_STEP, |g, v| {
                let y = g.dual_adain(v[0], [v[1], v[2], v[3], v[4]])?;
                g.dot(y, c.clone())
            })?;
            Ok(r.relative_error())
        })?,
        grad_op("curve rendering", 6, |rng, k| {
            let layout = if k % 2 == 0 {
                KnotLayout::uniform(5, 3)?
            } else {
                KnotLayout::default()
            };
            let (h, w) = [(6, 5), (1, 4), (3, 1), (7, 7)][k % 4];
            let depth = [8, 4, 6, 8][k % 4];
            let u = rand_tensor(rng, &[2, layout.total()], -0.3, 0.3)?;
            let images = rand_tensor(rng, &[2, 3, h, w], 0.0, 1.0)?;
            let c = rand_tensor(rng, &[2, 3, h, w], -1.0, 1.0)?;
            let r = check_gradients(&[u], FD_STEP, |g, v| {
                let y = g.render_curves(v[0], images.clone(), layout, depth)?;
                g.dot(y, c.clone())
            })?;
            Ok(r.relative_error())
        })?,
        grad_op("lab_l1_loss", 7, |rng, _| {
            let pred = rand_tensor(rng, &[2, 3, 3, 4], 0.05, 0.95)?;
            let target = rand_tensor(rng, &[2, 3, 3, 4], 0.0, 1.0)?;
            let r = check_gradients(&[pred], FD_STEP, |g, v| g.lab_l1_loss(v[0], target.clone()))?;
            Ok(r.relative_error())
        })?,
        grad_op("classify_loss", 8, |rng, k| {
            let f = rand_tensor(rng, &[4, 6], -1.0, 1.0)?;
            let w = rand_tensor(rng, &[3, 6], -1.0, 1.0)?;
            let labels: Vec<usize> = (0..4).map(|_| rng.gen_range(0..3)).collect();
            let scale = [1.0, 5.0, 30.0][k % 3];
            let r = check_gradients(&[f, w], FD_STEP, |g, v| {
                g.cosine_softmax_loss(v[0], v[1], &labels, scale)
            })?;
            Ok(r.relative_error())
        })?,
    ];
    let passed = reports.iter().all(|r| r.cases >= 20 && r.worst <= GRAD_TOL);
    let parts: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {:.1e} ({} cases)", r.name, r.worst, r.cases))
        .collect();
    Ok((
        passed,
        format!("worst relative error: {} (tol 1e-4)", parts.join(", ")),
    ))
}

fn small_configs(styles: usize) -> (StyleEncoderConfig, MappingConfig, CurveEncoderConfig) {
    let style = StyleEncoderConfig {
        trunk: TrunkConfig {
            input_size: 16,
            stem_width: 8,
            stage_widths: vec![8, 16],
            blocks_per_stage: 1,
        },
        styles,
        ..Default::default()
    };
    let mapping = MappingConfig {
        latent_dim: 16,
        hidden: vec![32],
        code_channels: vec![8, 16, 16],
    };
    let encoder = CurveEncoderConfig {
        trunk: TrunkConfig {
            input_size: 16,
            stem_width: 8,
            stage_widths: vec![8, 16, 16],
            blocks_per_stage: 1,
        },
        ..Default::default()
    };
    (style, mapping, encoder)
}

fn random_latent(rng: &mut ChaCha8Rng, d: usize) -> anyhow::Result<StyleLatent> {
    let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(StyleLatent::new(
        v.iter().map(|x| x / n).collect(),
        "random",
    )?)
}

pub fn init_invariant() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut identity = true;
    for seed in 0..5 {
        let (s, m, e) = small_configs(2);
        let p = Pipeline::init(s, m, e, seed)?;
        // the default-size networks as well
        let q = Pipeline::init(
            StyleEncoderConfig::default(),
            MappingConfig::default(),
            CurveEncoderConfig::default(),
            seed,
        )?;
        for pipe in [&p, &q] {
            let d = pipe.style_config().embedding_dim();
            let a = pipe.codes(&random_latent(&mut rng, d)?)?;
            let b = pipe.codes(&random_latent(&mut rng, d)?)?;
            let (w, h) = (rng.gen_range(1..80), rng.gen_range(1..80));
            let img: Image<f32> = random_image(&mut rng, w, h).cast();
            let curves = pipe.predict_curves(&img, &a, &b)?;
            let depth = pipe.encoder_config().depth;
            identity &= curves.is_zero();
            identity &= enhance(&img, &curves, depth, true)? == img;
            identity &= enhance(&img, &curves, depth, false)? == img;
        }
    }

    let (s, m, e) = small_configs(2);
    let set = StyledSet::synthesize(&procedural_bases(6, 24, 77)?, &presets::preset("two")?)?;
    let style_w = fixup_init(&ModelConfig::StyleEncoder(s), 3)?;
    let pools = (0..set.styles())
        .map(|q| {
            let imgs: Vec<&Image<f32>> = set.images[q].iter().flatten().collect();
            embed_images(&style_w, &imgs)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 4,
        ..Default::default()
    };
    let mut trainer = EnhancerTrainer::new(&set, &pools, m, e, &cfg)?;
    let step = trainer.step()?;
    ensure!(!step.pairs.is_empty(), "first step sampled no pairs");
    let mut want = 0.0;
    for p in &step.pairs {
        let src = set.get(p.source, p.base).context("missing source")?;
        let tgt = set.get(p.target, p.base).context("missing target")?;
        want += lab_l1_loss(src, tgt)?;
    }
    want /= step.pairs.len() as f64;
    let exact = step.loss == want;
    Ok((
        identity && exact,
        format!(
            "fresh networks {} the identity on 20 images; step-0 loss {} vs lab_l1_loss {} ({})",
            if identity { "render" } else { "do NOT render" },
            step.loss,
            want,
            if exact { "equal" } else { "differ" }
        ),
    ))
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stylecurve_core::curves::{eval_curve, sample_curve};
use stylecurve_core::enhancer::{
    apply_sliders, build_lut_set, color_index, enhance, enhance_with, render_residual,
    render_residual_serial, set_knot, CurveSet, CurveSetFile, InputChannel, KnotLayout,
    OutputChannel, RenderMode, SliderSettings, CURVE_COUNT,
};
use stylecurve_core::{BitDepth, Image};

fn random_curves(rng: &mut ChaCha8Rng, coords: bool) -> CurveSet {
    let mut counts = [0; CURVE_COUNT];
    for c in &mut counts {
        *c = rng.gen_range(2..20);
    }
    let layout = KnotLayout::from_counts(counts).unwrap();
    let mut u: Vec<f64> = (0..layout.total())
        .map(|_| rng.gen_range(-0.3..0.3))
        .collect();
    if !coords {
        let off = layout.offsets();
        for s in 9..CURVE_COUNT {
            u[off[s]..off[s] + counts[s]]
                .iter_mut()
                .for_each(|v| *v = 0.0);
        }
    }
    CurveSet::from_flat(&u, &layout).unwrap()
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image<f64> {
    Image::from_fn(w, h, BitDepth::Eight, |_, _| {
        [0; 3].map(|_| match rng.gen_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen::<f64>(),
        })
    })
    .unwrap()
}

/// Straight per-pixel evaluation: sample each curve, index each channel,
/// add the five terms in the order r, g, b, y, x, then add the input.
fn naive_enhance(image: &Image<f64>, curves: &CurveSet, depth: u32) -> Image<f64> {
    let (w, h) = (image.width(), image.height());
    let levels = 1usize << depth;
    let table = |i, j, n: usize| -> Vec<f64> {
        let c = curves.get(i, j);
        if n == 1 {
            vec![c.values()[0]]
        } else {
            sample_curve(c, n).unwrap().into_values()
        }
    };
    let mut out = image.clone();
    for j in OutputChannel::ALL {
        let tr = table(InputChannel::R, j, levels);
        let tg = table(InputChannel::G, j, levels);
        let tb = table(InputChannel::B, j, levels);
        let ty = table(InputChannel::Y, j, h);
        let tx = table(InputChannel::X, j, w);
        for y in 0..h {
            for x in 0..w {
                let p = image.pixel(x, y);
                let idx = |v: f64| ((v * (levels - 1) as f64).floor() as usize).min(levels - 1);
                // the coordinate index is the integer row / column itself
                let r = tr[idx(p[0])] + tg[idx(p[1])] + tb[idx(p[2])] + ty[y] + tx[x];
                let mut px = out.pixel(x, y);
                px[j.index()] = r + p[j.index()];
                out.set_pixel(x, y, px);
            }
        }
    }
    out
}

#[test]
fn optimized_renderer_equals_naive_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let (w, h) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let depth = rng.gen_range(1..=12);
        let img = random_image(&mut rng, w, h);
        let curves = random_curves(&mut rng, true);
        let fast = enhance(&img, &curves, depth, false).unwrap();
        let slow = naive_enhance(&img, &curves, depth);
        assert_eq!(fast, slow, "case {case}: {w}x{h}, D = {depth}");
    }
}

#[test]
fn zero_curves_are_the_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let zero = CurveSet::zeros(&KnotLayout::default());
    for _ in 0..10 {
        let img = random_image(&mut rng, 37, 23);
        assert_eq!(enhance(&img, &zero, 8, false).unwrap(), img);
        let img32 = img.cast::<f32>();
        assert_eq!(enhance(&img32, &zero, 8, true).unwrap(), img32);
    }
}

#[test]
fn tables_match_pointwise_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let curves = random_curves(&mut rng, true);
    let luts = build_lut_set::<f64>(&curves, 8, 11, 7).unwrap();
    for (i, j, c) in curves.iter() {
        let t = luts.table(i, j);
        for (k, v) in t.iter().enumerate() {
            let want = eval_curve(c, k as f64 / (t.len() - 1) as f64).unwrap();
            assert_eq!(*v, want, "{i:?}->{j:?}[{k}]");
        }
    }
}

#[test]
fn serial_and_parallel_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let img = random_image(&mut rng, 301, 197).cast::<f32>();
    let curves = random_curves(&mut rng, true);
    let luts = build_lut_set::<f32>(&curves, 8, 197, 301).unwrap();
    assert_eq!(
        render_residual(&img, &luts).unwrap(),
        render_residual_serial(&img, &luts).unwrap()
    );
    assert_eq!(
        enhance_with(&img, &luts, true, RenderMode::Serial).unwrap(),
        enhance_with(&img, &luts, true, RenderMode::Parallel).unwrap()
    );
}

#[test]
fn slider_scaling_scales_the_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let img = random_image(&mut rng, 40, 30);
        let curves = random_curves(&mut rng, true);
        let base = render_residual(&img, &build_lut_set(&curves, 8, 30, 40).unwrap()).unwrap();
        for beta in [0.0, 0.25, 0.5, 1.0, 1.5, 2.0] {
            let scaled = apply_sliders(&curves, &SliderSettings::uniform(beta).unwrap()).unwrap();
            let r = render_residual(&img, &build_lut_set(&scaled, 8, 30, 40).unwrap()).unwrap();
            for (a, b) in r.data().iter().zip(base.data()) {
                assert!(
                    (a - beta * b).abs() <= 1e-9,
                    "beta {beta}: {a} vs {}",
                    beta * b
                );
            }
        }
    }
}

#[test]
fn color_only_curves_commute_with_pixel_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (w, h) = (19, 13);
    let img = random_image(&mut rng, w, h);
    let curves = random_curves(&mut rng, false);
    let mut perm: Vec<usize> = (0..w * h).collect();
    for k in (1..perm.len()).rev() {
        perm.swap(k, rng.gen_range(0..=k));
    }
    let at = |i: usize| (i % w, i / w);
    let shuffled = Image::from_fn(w, h, BitDepth::Eight, |x, y| {
        let (sx, sy) = at(perm[y * w + x]);
        img.pixel(sx, sy)
    })
    .unwrap();
    let out = enhance(&img, &curves, 8, false).unwrap();
    let out_shuffled = enhance(&shuffled, &curves, 8, false).unwrap();
    for (dst, &src) in perm.iter().enumerate() {
        let (dx, dy) = at(dst);
        let (sx, sy) = at(src);
        assert_eq!(out_shuffled.pixel(dx, dy), out.pixel(sx, sy));
    }
}

fn monotone_curves(rng: &mut ChaCha8Rng) -> CurveSet {
    let layout = KnotLayout::uniform(17, 9).unwrap();
    let mut flat = Vec::new();
    for &m in layout.counts() {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut v = rng.gen_range(-0.2..0.2);
        for _ in 0..m {
            flat.push(v);
            v += sign * rng.gen_range(0.0..0.05);
        }
    }
    CurveSet::from_flat(&flat, &layout).unwrap()
}

#[test]
fn monotone_lookup_stays_within_one_table_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for depth in [2, 4, 6, 8, 10] {
        let curves = monotone_curves(&mut rng);
        let luts = build_lut_set::<f64>(&curves, depth, 1, 1).unwrap();
        for i in [InputChannel::R, InputChannel::G, InputChannel::B] {
            for j in OutputChannel::ALL {
                let t = luts.table(i, j);
                let gap = t
                    .windows(2)
                    .map(|p| (p[1] - p[0]).abs())
                    .fold(0.0, f64::max);
                for _ in 0..500 {
                    let v: f64 = rng.gen();
                    let exact = eval_curve(curves.get(i, j), v).unwrap();
                    let looked_up = t[color_index(v, depth)];
                    assert!((looked_up - exact).abs() <= gap + 1e-15, "D {depth}");
                }
            }
        }
    }
}

/// Without monotonicity the curve between two table samples can pass
/// through knot extrema, so the bound also has to cover any knot inside
/// the step. Each cubic segment is monotone, which makes this exact.
#[test]
fn lookup_error_is_bounded_by_the_step_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for depth in [2, 4, 8] {
        let curves = random_curves(&mut rng, false);
        let luts = build_lut_set::<f64>(&curves, depth, 1, 1).unwrap();
        let top = (1usize << depth) - 1;
        for i in [InputChannel::R, InputChannel::G, InputChannel::B] {
            for j in OutputChannel::ALL {
                let t = luts.table(i, j);
                let u = curves.get(i, j).values();
                let m = u.len();
                for _ in 0..500 {
                    let v: f64 = rng.gen();
                    let k = color_index(v, depth);
                    let (lo, hi) = (
                        k as f64 / top as f64,
                        ((k + 1).min(top)) as f64 / top as f64,
                    );
                    let mut bound = (t[(k + 1).min(top)] - t[k]).abs();
                    for (q, uq) in u.iter().enumerate() {
                        let at = q as f64 / (m - 1) as f64;
                        if at > lo && at < hi {
                            bound = bound.max((uq - t[k]).abs());
                        }
                    }
                    let exact = eval_curve(curves.get(i, j), v).unwrap();
                    assert!((t[k] - exact).abs() <= bound + 1e-15, "D {depth}");
                }
            }
        }
    }
}

#[test]
fn color_terms_do_not_depend_on_image_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let curves = random_curves(&mut rng, false);
    let p = [0.3, 0.71, 0.05];
    let small = Image::filled(3, 2, BitDepth::Eight, p).unwrap();
    let large = Image::filled(50, 41, BitDepth::Eight, p).unwrap();
    let rs = render_residual(&small, &build_lut_set(&curves, 8, 2, 3).unwrap()).unwrap();
    let rl = render_residual(&large, &build_lut_set(&curves, 8, 41, 50).unwrap()).unwrap();
    assert_eq!(rs.pixel(1, 1), rl.pixel(17, 33));
}

#[test]
fn edited_knot_shows_up_in_the_black_pixel() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let curves = random_curves(&mut rng, false);
    let black = Image::<f64>::zeros(1, 1, BitDepth::Eight).unwrap();
    let before = render_residual(&black, &build_lut_set(&curves, 8, 1, 1).unwrap()).unwrap();
    let (i, j) = (InputChannel::R, OutputChannel::R);
    let edited = set_knot(&curves, i, j, 0, 0.123).unwrap();
    let luts = build_lut_set::<f64>(&edited, 8, 1, 1).unwrap();
    let after = render_residual(&black, &luts).unwrap();
    let old = curves.knot(i, j, 0).unwrap();
    assert_eq!(luts.table(i, j)[0], 0.123);
    let term = |c: InputChannel| luts.table(c, j)[0];
    let want = (((0.123 + term(InputChannel::G)) + term(InputChannel::B)) + term(InputChannel::Y))
        + term(InputChannel::X);
    assert_eq!(after.pixel(0, 0)[0], want);
    let change = after.pixel(0, 0)[0] - before.pixel(0, 0)[0];
    assert!((change - (0.123 - old)).abs() < 1e-15);
    assert_eq!(after.pixel(0, 0)[1], before.pixel(0, 0)[1]);
    assert_eq!(after.pixel(0, 0)[2], before.pixel(0, 0)[2]);
}

#[test]
fn curve_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let dir = tempfile::tempdir().unwrap();
    for _ in 0..10 {
        let mut file = CurveSetFile::new(random_curves(&mut rng, true));
        file.sliders = Some(SliderSettings::uniform(rng.gen_range(0.0..2.0)).unwrap());
        let path = dir.path().join("c.json");
        file.save(&path).unwrap();
        assert_eq!(CurveSetFile::load(&path).unwrap(), file);
        assert_eq!(
            CurveSetFile::from_json(&file.to_json()).unwrap().to_json(),
            file.to_json()
        );
    }
}

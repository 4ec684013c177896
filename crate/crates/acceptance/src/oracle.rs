//! Independent reference implementations and random inputs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stylecurve_core::curves::sample_curve;
use stylecurve_core::enhancer::{CurveSet, InputChannel, KnotLayout, OutputChannel, CURVE_COUNT};
use stylecurve_core::{BitDepth, Image};

/// Fritsch-Carlson evaluation on uniform knots over `[0, 1]`, written with
/// the cubic Hermite basis.
pub fn pchip(u: &[f64], t: f64) -> f64 {
    let m = u.len();
    let h = 1.0 / (m - 1) as f64;
    let delta: Vec<f64> = (0..m - 1).map(|k| (u[k + 1] - u[k]) / h).collect();
    let mut d = vec![0.0; m];
    if m == 2 {
        d = vec![delta[0]; 2];
    } else {
        for k in 1..m - 1 {
            let (a, b) = (delta[k - 1], delta[k]);
            d[k] = if a * b > 0.0 {
                2.0 / (1.0 / a + 1.0 / b)
            } else {
                0.0
            };
        }
        let end = |near: f64, far: f64| {
            let e = 1.5 * near - 0.5 * far;
            if e.signum() != near.signum() || near == 0.0 {
                0.0
            } else if near.signum() != far.signum() && e.abs() > 3.0 * near.abs() {
                3.0 * near
            } else {
                e
            }
        };
        d[0] = end(delta[0], delta[1]);
        d[m - 1] = end(delta[m - 2], delta[m - 3]);
    }
    let k = ((t / h).floor() as usize).min(m - 2);
    let s = (t - k as f64 * h) / h;
    let h00 = 2.0 * s.powi(3) - 3.0 * s.powi(2) + 1.0;
    let h10 = s.powi(3) - 2.0 * s.powi(2) + s;
    let h01 = -2.0 * s.powi(3) + 3.0 * s.powi(2);
    let h11 = s.powi(3) - s.powi(2);
    h00 * u[k] + h10 * h * d[k] + h01 * u[k + 1] + h11 * h * d[k + 1]
}

/// Straight per-pixel enhancement: sample each curve densely, index each
/// channel, add the r, g, b, y, x terms in that order, then the input.
pub fn naive_enhance(image: &Image<f64>, curves: &CurveSet, depth: u32) -> Image<f64> {
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
    let idx = |v: f64| ((v * (levels - 1) as f64).floor() as usize).min(levels - 1);
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
                let r = tr[idx(p[0])] + tg[idx(p[1])] + tb[idx(p[2])] + ty[y] + tx[x];
                let mut px = out.pixel(x, y);
                px[j.index()] = r + p[j.index()];
                out.set_pixel(x, y, px);
            }
        }
    }
    out
}

/// Knot counts in `2..20` per curve, values in `[-0.3, 0.3)`.
pub fn random_curves(rng: &mut ChaCha8Rng) -> CurveSet {
    let mut counts = [0; CURVE_COUNT];
    for c in &mut counts {
        *c = rng.gen_range(2..20);
    }
    let layout = KnotLayout::from_counts(counts).unwrap();
    let u: Vec<f64> = (0..layout.total())
        .map(|_| rng.gen_range(-0.3..0.3))
        .collect();
    CurveSet::from_flat(&u, &layout).unwrap()
}

/// Uniform pixels with exact 0 and 1 mixed in.
pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image<f64> {
    Image::from_fn(w, h, BitDepth::Eight, |_, _| {
        [0; 3].map(|_| match rng.gen_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen::<f64>(),
        })
    })
    .unwrap()
}

pub fn max_abs_diff<'a>(
    a: impl IntoIterator<Item = &'a f64>,
    b: impl IntoIterator<Item = &'a f64>,
) -> f64 {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

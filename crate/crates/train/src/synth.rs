//! Synthetic global styles and procedural base images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stylecurve_core::{BitDepth, Image};

use crate::error::{invalid, Result};

/// Rec. 709 luma weights used by the saturation step.
const LUMA: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// A global photographic rendition: white balance, per-channel gamma,
/// saturation, lift/gain and a radial vignette.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStyleSpec {
    pub gains: [f64; 3],
    pub gamma: [f64; 3],
    pub saturation: f64,
    pub lift: f64,
    pub gain: f64,
    /// Darkening at the corners: the factor there is `1 - vignette`.
    pub vignette: f64,
}

impl Default for SyntheticStyleSpec {
    fn default() -> Self {
        Self::identity()
    }
}

impl SyntheticStyleSpec {
    pub fn identity() -> Self {
        Self {
            gains: [1.0; 3],
            gamma: [1.0; 3],
            saturation: 1.0,
            lift: 0.0,
            gain: 1.0,
            vignette: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gains", &self.gains), ("gamma", &self.gamma)] {
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(invalid(format!("{name} must be positive, got {v:?}")));
            }
        }
        if !(self.saturation.is_finite() && self.saturation >= 0.0) {
            return Err(invalid(format!(
                "saturation must be non-negative, got {}",
                self.saturation
            )));
        }
        for (name, v) in [
            ("lift", self.lift),
            ("gain", self.gain),
            ("vignette", self.vignette),
        ] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// One pixel at normalized position `(xn, yn)` in `[0, 1]^2`, before clamping.
    pub fn apply_pixel(&self, rgb: [f64; 3], xn: f64, yn: f64) -> [f64; 3] {
        let mut c = [0.0; 3];
        for k in 0..3 {
            c[k] = (rgb[k] * self.gains[k]).max(0.0).powf(self.gamma[k]);
        }
        let y = LUMA[0] * c[0] + LUMA[1] * c[1] + LUMA[2] * c[2];
        let r2 = ((xn - 0.5).powi(2) + (yn - 0.5).powi(2)) / 0.5;
        let fall = 1.0 - self.vignette * r2;
        for v in &mut c {
            let s = y + self.saturation * (*v - y);
            *v = (self.lift + self.gain * s) * fall;
        }
        c
    }
}

fn normalized(i: usize, n: usize) -> f64 {
    if n > 1 {
        i as f64 / (n - 1) as f64
    } else {
        0.0
    }
}

/// Applies gains, gamma, saturation, lift/gain and vignette, then clamps to `[0, 1]`.
pub fn synth_style_apply(image: &Image<f32>, spec: &SyntheticStyleSpec) -> Result<Image<f32>> {
    spec.validate()?;
    let (w, h) = (image.width(), image.height());
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            let p = image.pixel(x, y);
            let c = spec.apply_pixel(
                [p[0] as f64, p[1] as f64, p[2] as f64],
                normalized(x, w),
                normalized(y, h),
            );
            out.set_pixel(
                x,
                y,
                [
                    c[0].clamp(0.0, 1.0) as f32,
                    c[1].clamp(0.0, 1.0) as f32,
                    c[2].clamp(0.0, 1.0) as f32,
                ],
            );
        }
    }
    Ok(out)
}

/// Largest per-channel offset from a color's luminance in procedural scenes.
pub const PROCEDURAL_CHROMA: f64 = 0.15;

/// Deterministic scene: a four-corner color gradient, a few flat shapes and
/// mild noise. Colors span the full luminance range with moderate chroma, so
/// scenes average to roughly neutral the way photographs tend to, and the
/// backdrop is lit from above (top corners brighter than bottom ones).
pub fn procedural_image(seed: u64, width: usize, height: usize) -> Result<Image<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let color = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> [f64; 3] {
        let l = rng.gen_range(lo..hi);
        [0; 3].map(|_| (l + rng.gen_range(-PROCEDURAL_CHROMA..PROCEDURAL_CHROMA)).clamp(0.0, 1.0))
    };
    let corners = [
        color(&mut rng, 0.55, 0.95),
        color(&mut rng, 0.55, 0.95),
        color(&mut rng, 0.05, 0.45),
        color(&mut rng, 0.05, 0.45),
    ];
    let shapes: Vec<(bool, [f64; 4], [f64; 3], f64)> = (0..rng.gen_range(2..6))
        .map(|_| {
            let cx = rng.gen::<f64>();
            let cy = rng.gen::<f64>();
            let rx = rng.gen_range(0.06..0.25);
            let ry = rng.gen_range(0.06..0.25);
            (
                rng.gen_bool(0.5),
                [cx, cy, rx, ry],
                color(&mut rng, 0.05, 0.95),
                rng.gen_range(0.5..1.0),
            )
        })
        .collect();
    let noise = rng.gen_range(0.0..0.03);
    let mut img = Image::zeros(width, height, BitDepth::Sixteen)?;
    for y in 0..height {
        for x in 0..width {
            let (u, v) = (normalized(x, width), normalized(y, height));
            let mut c = [0.0; 3];
            for k in 0..3 {
                let top = corners[0][k] * (1.0 - u) + corners[1][k] * u;
                let bottom = corners[2][k] * (1.0 - u) + corners[3][k] * u;
                c[k] = top * (1.0 - v) + bottom * v;
            }
            for (ellipse, [cx, cy, rx, ry], col, alpha) in &shapes {
                let (dx, dy) = ((u - cx) / rx, (v - cy) / ry);
                let inside = if *ellipse {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    for k in 0..3 {
                        c[k] = c[k] * (1.0 - alpha) + col[k] * alpha;
                    }
                }
            }
            let px = c.map(|v| (v + rng.gen_range(-noise..=noise)).clamp(0.0, 1.0) as f32);
            img.set_pixel(x, y, px);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(v: f32) -> Image<f32> {
        Image::filled(3, 2, BitDepth::Eight, [v; 3]).unwrap()
    }

    #[test]
    fn identity_spec_is_identity() {
        let img = procedural_image(3, 9, 7).unwrap();
        assert_eq!(
            synth_style_apply(&img, &SyntheticStyleSpec::identity()).unwrap(),
            img
        );
    }

    #[test]
    fn gamma_on_red_only() {
        let spec = SyntheticStyleSpec {
            gamma: [2.0, 1.0, 1.0],
            ..SyntheticStyleSpec::identity()
        };
        let out = synth_style_apply(&uniform(0.25), &spec).unwrap();
        assert_eq!(out.pixel(1, 1), [0.0625, 0.25, 0.25]);
    }

    #[test]
    fn invalid_specs() {
        let img = uniform(0.5);
        for spec in [
            SyntheticStyleSpec {
                gamma: [0.0, 1.0, 1.0],
                ..Default::default()
            },
            SyntheticStyleSpec {
                gains: [1.0, -1.0, 1.0],
                ..Default::default()
            },
            SyntheticStyleSpec {
                saturation: -0.1,
                ..Default::default()
            },
            SyntheticStyleSpec {
                vignette: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                synth_style_apply(&img, &spec),
                Err(crate::Error::InvalidInput(_))
            ));
        }
    }

    #[test]
    fn procedural_images_are_deterministic_and_in_range() {
        let a = procedural_image(7, 16, 12).unwrap();
        assert_eq!(a, procedural_image(7, 16, 12).unwrap());
        assert_ne!(a, procedural_image(8, 16, 12).unwrap());
        assert!(a.check_unit_range().is_ok());
    }
}

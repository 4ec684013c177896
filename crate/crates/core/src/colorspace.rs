//! sRGB to CIELab (D65) and the Lab-space L1 loss used for training.

use crate::error::{Error, Result};
use crate::image::{Image, Sample};

/// Linear sRGB to XYZ, IEC 61966-2-1 primaries.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// Reference white: the XYZ of linear (1, 1, 1) under the matrix above, so
/// that sRGB white lands exactly on L = 100, a = b = 0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const EPS_LAB: f64 = 216.0 / 24389.0; // (6/29)^3
const KAPPA_SLOPE: f64 = 841.0 / 108.0; // 1 / (3 (6/29)^2)

#[inline]
fn srgb_decode(c: f64) -> (f64, f64) {
    if c <= 0.04045 {
        (c / 12.92, 1.0 / 12.92)
    } else {
        let base = (c + 0.055) / 1.055;
        let lin = base.powf(2.4);
        (lin, 2.4 / 1.055 * base.powf(1.4))
    }
}

#[inline]
fn lab_f(t: f64) -> (f64, f64) {
    if t > EPS_LAB {
        let cbrt = t.cbrt();
        (cbrt, 1.0 / (3.0 * cbrt * cbrt))
    } else {
        (KAPPA_SLOPE * t + 4.0 / 29.0, KAPPA_SLOPE)
    }
}

/// Converts one sRGB triple; inputs are clamped to `[0, 1]` first.
pub fn srgb_to_lab_pixel(rgb: [f64; 3]) -> [f64; 3] {
    srgb_to_lab_with_jacobian(rgb).0
}

/// Lab value and its Jacobian `d(L, a, b) / d(r, g, b)`.
///
/// The clamp to `[0, 1]` is treated as the identity when differentiating
/// (straight-through), so out-of-gamut inputs still receive a gradient.
pub fn srgb_to_lab_with_jacobian(rgb: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut lin = [0.0; 3];
    let mut dlin = [0.0; 3];
    for c in 0..3 {
        let (l, d) = srgb_decode(rgb[c].clamp(0.0, 1.0));
        lin[c] = l;
        dlin[c] = d;
    }
    let mut f = [0.0; 3];
    // d f_k / d rgb_c
    let mut df = [[0.0; 3]; 3];
    for k in 0..3 {
        let row = RGB_TO_XYZ[k];
        let xyz = (row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2]) / WHITE[k];
        let (fv, fd) = lab_f(xyz);
        f[k] = fv;
        for c in 0..3 {
            df[k][c] = fd * row[c] / WHITE[k] * dlin[c];
        }
    }
    let lab = [
        116.0 * f[1] - 16.0,
        500.0 * (f[0] - f[1]),
        200.0 * (f[1] - f[2]),
    ];
    let mut jac = [[0.0; 3]; 3];
    for c in 0..3 {
        jac[0][c] = 116.0 * df[1][c];
        jac[1][c] = 500.0 * (df[0][c] - df[1][c]);
        jac[2][c] = 200.0 * (df[1][c] - df[2][c]);
    }
    (lab, jac)
}

/// CIELab image: planes L, a, b in the same layout as [`Image`].
#[derive(Clone, Debug, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl LabImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let n = self.width * self.height;
        let i = y * self.width + x;
        [self.data[i], self.data[n + i], self.data[2 * n + i]]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }
}

pub fn srgb_to_lab<T: Sample>(image: &Image<T>) -> Result<LabImage> {
    if !image.is_finite() {
        return Err(Error::invalid("image contains non-finite samples"));
    }
    let n = image.pixel_count();
    let mut data = vec![0.0; 3 * n];
    let (r, g, b) = (image.plane(0), image.plane(1), image.plane(2));
    for i in 0..n {
        let lab = srgb_to_lab_pixel([r[i].to_f64(), g[i].to_f64(), b[i].to_f64()]);
        data[i] = lab[0];
        data[n + i] = lab[1];
        data[2 * n + i] = lab[2];
    }
    Ok(LabImage {
        width: image.width(),
        height: image.height(),
        data,
    })
}

fn check_pair<A: Sample, B: Sample>(a: &Image<A>, b: &Image<B>) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("image contains non-finite samples"));
    }
    Ok(())
}

/// Mean absolute Lab difference over every pixel and all three channels.
pub fn lab_l1_loss<A: Sample, B: Sample>(a: &Image<A>, b: &Image<B>) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.pixel_count();
    let mut total = 0.0;
    for i in 0..n {
        let pa = srgb_to_lab_pixel(rgb_at(a, i));
        let pb = srgb_to_lab_pixel(rgb_at(b, i));
        total += (pa[0] - pb[0]).abs() + (pa[1] - pb[1]).abs() + (pa[2] - pb[2]).abs();
    }
    Ok(total / (3 * n) as f64)
}

/// Loss value and its gradient with respect to the first image.
pub fn lab_l1_loss_grad<A: Sample, B: Sample>(
    a: &Image<A>,
    b: &Image<B>,
) -> Result<(f64, Image<f64>)> {
    check_pair(a, b)?;
    let n = a.pixel_count();
    let norm = 1.0 / (3 * n) as f64;
    let mut grad = Image::<f64>::zeros(a.width(), a.height(), a.depth())?;
    let mut total = 0.0;
    for i in 0..n {
        let (pa, jac) = srgb_to_lab_with_jacobian(rgb_at(a, i));
        let pb = srgb_to_lab_pixel(rgb_at(b, i));
        let mut g = [0.0; 3];
        for k in 0..3 {
            let diff = pa[k] - pb[k];
            total += diff.abs();
            let s = if diff > 0.0 {
                norm
            } else if diff < 0.0 {
                -norm
            } else {
                0.0
            };
            for c in 0..3 {
                g[c] += s * jac[k][c];
            }
        }
        let data = grad.data_mut();
        data[i] = g[0];
        data[n + i] = g[1];
        data[2 * n + i] = g[2];
    }
    Ok((total * norm, grad))
}

#[inline]
fn rgb_at<T: Sample>(img: &Image<T>, i: usize) -> [f64; 3] {
    let n = img.pixel_count();
    let d = img.data();
    [d[i].to_f64(), d[n + i].to_f64(), d[2 * n + i].to_f64()]
}

//! Planar three-channel float images.
//!
//! Pixel values are stored channel-major (`r` plane, then `g`, then `b`),
//! each plane row-major. Inputs are expected in `[0, 1]`; enhancer outputs
//! may leave that range until they are clamped for export.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// Scalar type an [`Image`] can hold.
pub trait Sample:
    Copy
    + Default
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn floor(self) -> Self;
    fn is_finite(self) -> bool;
    /// Truncating conversion to an index; negative and NaN values give 0.
    fn to_index(self) -> usize;
}

macro_rules! impl_sample {
    ($t:ty) => {
        impl Sample for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn floor(self) -> Self {
                <$t>::floor(self)
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
            #[inline]
            fn to_index(self) -> usize {
                self as usize
            }
        }
    };
}

impl_sample!(f32);
impl_sample!(f64);

/// Bit depth of the file an image was decoded from (and will be written at).
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn max_code(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Image<T = f32> {
    width: usize,
    height: usize,
    depth: BitDepth,
    data: Vec<T>,
}

impl<T: Sample> Image<T> {
    pub fn zeros(width: usize, height: usize, depth: BitDepth) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            depth,
            data: vec![T::ZERO; 3 * width * height],
        })
    }

    pub fn filled(width: usize, height: usize, depth: BitDepth, rgb: [T; 3]) -> Result<Self> {
        let mut img = Self::zeros(width, height, depth)?;
        let n = width * height;
        for (c, v) in rgb.iter().enumerate() {
            img.data[c * n..(c + 1) * n].fill(*v);
        }
        Ok(img)
    }

    /// Wraps planar data (`3 * width * height` values, r plane first).
    pub fn from_planar(width: usize, height: usize, depth: BitDepth, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != 3 * width * height {
            return Err(Error::invalid(format!(
                "planar buffer holds {} values, expected {}",
                data.len(),
                3 * width * height
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at offset {bad}")));
        }
        Ok(Self {
            width,
            height,
            depth,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        depth: BitDepth,
        mut f: impl FnMut(usize, usize) -> [T; 3],
    ) -> Result<Self> {
        let mut img = Self::zeros(width, height, depth)?;
        for y in 0..height {
            for x in 0..width {
                img.set_pixel(x, y, f(x, y));
            }
        }
        Ok(img)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn depth(&self) -> BitDepth {
        self.depth
    }

    pub fn set_depth(&mut self, depth: BitDepth) {
        self.depth = depth;
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn same_dims<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.pixel_count();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [T; 3] {
        let n = self.pixel_count();
        let i = y * self.width + x;
        [self.data[i], self.data[n + i], self.data[2 * n + i]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [T; 3]) {
        let n = self.pixel_count();
        let i = y * self.width + x;
        self.data[i] = rgb[0];
        self.data[n + i] = rgb[1];
        self.data[2 * n + i] = rgb[2];
    }

    pub fn cast<U: Sample>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            depth: self.depth,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            if *v < T::ZERO {
                *v = T::ZERO;
            } else if *v > T::ONE {
                *v = T::ONE;
            }
        }
    }

    pub fn clamped01(mut self) -> Self {
        self.clamp01();
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Rejects non-finite samples and values outside `[0, 1]`.
    pub fn check_unit_range(&self) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() || *v < T::ZERO || *v > T::ONE {
                return Err(Error::invalid(format!(
                    "sample {i} = {v:?} is outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Bilinear resampling with pixel-center alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let xs = bilinear_taps(self.width, width);
        let ys = bilinear_taps(self.height, height);
        let mut out = Self::zeros(width, height, self.depth)?;
        for c in 0..3 {
            let src = self.plane(c);
            let dst = out.plane_mut(c);
            for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
                let r0 = &src[y0 * self.width..(y0 + 1) * self.width];
                let r1 = &src[y1 * self.width..(y1 + 1) * self.width];
                for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                    let top = r0[x0].to_f64() * (1.0 - fx) + r0[x1].to_f64() * fx;
                    let bot = r1[x0].to_f64() * (1.0 - fx) + r1[x1].to_f64() * fx;
                    dst[oy * width + ox] = T::from_f64(top * (1.0 - fy) + bot * fy);
                }
            }
        }
        Ok(out)
    }

    /// Largest size fitting inside `max_w x max_h` with the same aspect ratio;
    /// images already inside the box are returned unchanged.
    pub fn fit_within(&self, max_w: usize, max_h: usize) -> Result<Self> {
        if self.width <= max_w && self.height <= max_h {
            return Ok(self.clone());
        }
        let scale = (max_w as f64 / self.width as f64).min(max_h as f64 / self.height as f64);
        let w = ((self.width as f64 * scale).round() as usize).clamp(1, max_w);
        let h = ((self.height as f64 * scale).round() as usize).clamp(1, max_h);
        self.resize_bilinear(w, h)
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

fn bilinear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let pos = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (pos.floor() as usize).min(src - 1);
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_layout() {
        let img = Image::<f64>::from_fn(3, 2, BitDepth::Eight, |x, y| {
            [x as f64 / 10.0, y as f64 / 10.0, 0.5]
        })
        .unwrap();
        assert_eq!(img.pixel(2, 1), [0.2, 0.1, 0.5]);
        assert_eq!(img.plane(0), &[0.0, 0.1, 0.2, 0.0, 0.1, 0.2]);
        assert_eq!(img.plane(2), &[0.5; 6]);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(Image::<f32>::zeros(0, 4, BitDepth::Eight).is_err());
        assert!(Image::<f32>::from_planar(2, 2, BitDepth::Eight, vec![0.0; 11]).is_err());
        let mut data = vec![0.0f32; 12];
        data[5] = f32::NAN;
        assert!(Image::from_planar(2, 2, BitDepth::Eight, data).is_err());
    }

    #[test]
    fn resize_preserves_constants() {
        let img = Image::<f32>::filled(37, 21, BitDepth::Sixteen, [0.25, 0.5, 0.75]).unwrap();
        let small = img.resize_bilinear(8, 8).unwrap();
        assert_eq!(small.depth(), BitDepth::Sixteen);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(small.pixel(x, y), [0.25, 0.5, 0.75]);
            }
        }
    }

    #[test]
    fn resize_horizontal_ramp_stays_monotone() {
        let img =
            Image::<f64>::from_fn(64, 4, BitDepth::Eight, |x, _| [x as f64 / 63.0; 3]).unwrap();
        let small = img.resize_bilinear(16, 2).unwrap();
        let row: Vec<f64> = (0..16).map(|x| small.pixel(x, 0)[0]).collect();
        assert!(row.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fit_within_keeps_aspect() {
        let img = Image::<f32>::zeros(3840, 2160, BitDepth::Eight).unwrap();
        let p = img.fit_within(1280, 720).unwrap();
        assert_eq!((p.width(), p.height()), (1280, 720));
        let tall = Image::<f32>::zeros(100, 400, BitDepth::Eight).unwrap();
        let p = tall.fit_within(1280, 200).unwrap();
        assert_eq!((p.width(), p.height()), (50, 200));
    }
}

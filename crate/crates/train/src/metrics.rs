use stylecurve_core::{Image, Sample};

use crate::error::{invalid, Result};

/// Reported for identical images instead of infinity.
pub const PSNR_CAP: f64 = 99.0;

/// Peak signal-to-noise ratio in dB over `[0, 1]` images, both clamped first.
pub fn psnr<A: Sample, B: Sample>(a: &Image<A>, b: &Image<B>) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let mut se = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = x.to_f64().clamp(0.0, 1.0) - y.to_f64().clamp(0.0, 1.0);
        se += d * d;
    }
    let mse = se / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Exponential moving average.
#[derive(Clone, Copy, Debug)]
pub struct Ema {
    alpha: f64,
    value: Option<f64>,
}

impl Ema {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, value: None }
    }

    pub fn update(&mut self, x: f64) -> f64 {
        let v = match self.value {
            None => x,
            Some(v) => v + self.alpha * (x - v),
        };
        self.value = Some(v);
        v
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stylecurve_core::BitDepth;

    #[test]
    fn identical_and_known_mse() {
        let a = Image::<f64>::filled(4, 4, BitDepth::Eight, [0.5; 3]).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        let b = Image::<f64>::filled(4, 4, BitDepth::Eight, [0.6; 3]).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let c = Image::<f64>::zeros(4, 3, BitDepth::Eight).unwrap();
        assert!(psnr(&a, &c).is_err());
    }

    #[test]
    fn values_are_clamped() {
        let a = Image::<f64>::filled(2, 2, BitDepth::Eight, [1.4; 3]).unwrap();
        let b = Image::<f64>::filled(2, 2, BitDepth::Eight, [1.0; 3]).unwrap();
        assert_eq!(psnr(&a, &b).unwrap(), PSNR_CAP);
    }
}

use crate::error::{invalid, Result};
use crate::ops::adain::{self, Codes, SIGMA_MIN};
use crate::tensor::Tensor;

/// Per-channel `(mu, sigma)` for one insertion point.
#[derive(Clone, Debug, PartialEq)]
pub struct CodePair {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl CodePair {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() || mu.is_empty() {
            return Err(invalid(format!(
                "mu has {} channels, sigma has {}",
                mu.len(),
                sigma.len()
            )));
        }
        if mu.iter().chain(&sigma).any(|v| !v.is_finite()) {
            return Err(invalid("style codes must be finite"));
        }
        if let Some(s) = sigma.iter().find(|s| **s < SIGMA_MIN) {
            return Err(invalid(format!("sigma {s} is below {SIGMA_MIN}")));
        }
        Ok(Self { mu, sigma })
    }

    /// `mu = 0`, `sigma = 1`.
    pub fn identity(channels: usize) -> Self {
        Self {
            mu: vec![0.0; channels],
            sigma: vec![1.0; channels],
        }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn channels(&self) -> usize {
        self.mu.len()
    }

    /// `[rows, C]` tensors of `mu` and `sigma` repeated per row.
    pub(crate) fn tiled(&self, rows: usize) -> (Tensor, Tensor) {
        let tile = |v: &[f64]| {
            let data = (0..rows).flat_map(|_| v.iter().copied()).collect();
            Tensor::new(vec![rows, v.len()], data).expect("consistent shape")
        };
        (tile(&self.mu), tile(&self.sigma))
    }
}

/// Codes for every insertion point of the curve encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleCodes {
    levels: Vec<CodePair>,
}

impl StyleCodes {
    pub fn new(levels: Vec<CodePair>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("style codes need at least one level"));
        }
        Ok(Self { levels })
    }

    pub fn identity(channels: &[usize]) -> Self {
        Self {
            levels: channels.iter().map(|&c| CodePair::identity(c)).collect(),
        }
    }

    pub fn levels(&self) -> &[CodePair] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn channels(&self) -> Vec<usize> {
        self.levels.iter().map(CodePair::channels).collect()
    }
}

/// Dual AdaIN on `[B, C, H, W]` (or `[C, H, W]`) features with the same
/// codes for every batch element.
pub fn dual_adain(f: &Tensor, a: &CodePair, b: &CodePair) -> Result<Tensor> {
    let shape = f.shape().to_vec();
    let f4 = match shape.len() {
        4 => f.clone(),
        3 => f.clone().reshape(&[1, shape[0], shape[1], shape[2]])?,
        _ => {
            return Err(invalid(format!(
                "features must be 3-D or 4-D, got {shape:?}"
            )))
        }
    };
    let (batch, ch, _, _) = f4.dims4()?;
    if a.channels() != ch || b.channels() != ch {
        return Err(invalid(format!(
            "codes have {} and {} channels, features have {ch}",
            a.channels(),
            b.channels()
        )));
    }
    let (mu_a, sigma_a) = a.tiled(batch);
    let (mu_b, sigma_b) = b.tiled(batch);
    let out = adain::forward(
        &f4,
        &Codes {
            mu_a: &mu_a,
            sigma_a: &sigma_a,
            mu_b: &mu_b,
            sigma_b: &sigma_b,
        },
    )?;
    out.reshape(&shape)
}

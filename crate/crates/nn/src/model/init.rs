use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::weights::ModelWeights;
use crate::error::Result;
use crate::tensor::Tensor;

enum Init {
    Zero,
    One,
    Normal(f64),
}

fn fan_in(shape: &[usize]) -> usize {
    shape[1..].iter().product()
}

fn rule(config: &ModelConfig, name: &str, shape: &[usize]) -> Init {
    let he = || (2.0 / fan_in(shape) as f64).sqrt();
    let depth = match config {
        ModelConfig::StyleEncoder(c) => c.trunk.depth(),
        ModelConfig::CurveEncoder(c) => c.trunk.depth(),
        ModelConfig::Mapping(_) => 1,
    };
    if name.ends_with(".scale") {
        Init::One
    } else if name.ends_with(".conv2.w") || name.starts_with("out.") || name.starts_with("fc.") {
        // last layer of every residual branch, and the output heads
        Init::Zero
    } else if name.ends_with(".conv1.w") {
        // Fixup: L^(-1/(2m-2)) with m = 2 layers per branch
        Init::Normal(he() / (depth as f64).sqrt())
    } else if name == "head.w" {
        Init::Normal(1.0 / (shape[1] as f64).sqrt())
    } else if name.ends_with(".w") {
        Init::Normal(he())
    } else {
        Init::Zero
    }
}

/// Fixup initialization, deterministic per seed.
///
/// Residual branches end in a zero convolution, so every block starts as
/// the identity; the curve head and the mapping output layer are zero, so
/// a fresh model predicts zero curves from identity style codes.
pub fn fixup_init(config: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = IndexMap::new();
    for (name, shape) in config.manifest() {
        let t = match rule(config, &name, &shape) {
            Init::Zero => Tensor::zeros(&shape),
            Init::One => Tensor::full(&shape, 1.0),
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("finite std");
                let mut t = Tensor::zeros(&shape);
                t.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = dist.sample(&mut rng));
                t
            }
        };
        tensors.insert(name, t);
    }
    ModelWeights::new(config.clone(), tensors)
}

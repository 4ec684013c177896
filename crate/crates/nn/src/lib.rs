//! Small reverse-mode tensor stack and the networks built on it: a style
//! encoder, a mapping network producing Dual AdaIN codes, and a curve
//! encoder predicting knot vectors.

mod error;
mod gemm;
pub mod gradcheck;
pub mod graph;
pub mod model;
mod ops;
pub mod pipeline;
mod tensor;

pub use error::{Error, Result};
pub use graph::{Gradients, Graph, Var};
pub use model::{
    dual_adain, fixup_init, CodePair, CurveEncoderConfig, MappingConfig, ModelConfig, ModelWeights,
    StyleCodes, StyleEncoderConfig, TrunkConfig,
};
pub use ops::adain::SIGMA_MIN;
pub use pipeline::{encoder_forward, mapping_forward, style_codes, style_forward, Pipeline};
pub use tensor::Tensor;

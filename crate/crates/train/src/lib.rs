//! Desk-scale training harness: synthetic styled datasets, style-encoder and
//! enhancer training, and held-out PSNR evaluation.

pub mod config;
pub mod dataset;
pub mod enhancer_train;
mod error;
pub mod eval;
pub mod metrics;
pub mod optim;
pub mod presets;
pub mod style_train;
pub mod synth;

pub use config::TrainConfig;
pub use dataset::{load_dataset, procedural_bases, write_dataset, StyleEntry, StyledSet};
pub use enhancer_train::{
    subset_latent, train_enhancer, EnhancerTrainOutput, EnhancerTrainer, PairSample, StepReport,
};
pub use error::{Error, Result};
pub use eval::{mean_transfer_psnr, style_matrix_eval, transfer};
pub use metrics::{psnr, Ema, PSNR_CAP};
pub use optim::{cosine_lr, Adam};
pub use style_train::{embed_images, train_style_encoder, StyleEpoch, StyleTrainOutput};
pub use synth::{procedural_image, synth_style_apply, SyntheticStyleSpec};

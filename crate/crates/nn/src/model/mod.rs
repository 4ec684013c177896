//! The three networks: style encoder, mapping network and curve encoder.

pub mod arch;
mod codes;
mod config;
mod file;
mod init;
mod weights;

pub use codes::{dual_adain, CodePair, StyleCodes};
pub use config::{
    CurveEncoderConfig, MappingConfig, ModelConfig, StyleEncoderConfig, TrunkConfig,
    DEFAULT_INPUT_SIZE,
};
pub use file::{
    decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_FORMAT_VERSION,
    WEIGHTS_MAGIC,
};
pub use init::fixup_init;
pub use weights::{ModelWeights, Params};

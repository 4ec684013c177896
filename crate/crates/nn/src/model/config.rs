use serde::{Deserialize, Serialize};
use stylecurve_core::enhancer::{KnotLayout, CURVE_COUNT, DEFAULT_DEPTH, MAX_DEPTH};
use stylecurve_core::style::DEFAULT_SCALE;

use crate::error::{invalid, Result};

/// Default downsample size `K` for the two CNNs.
pub const DEFAULT_INPUT_SIZE: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    StyleEncoder(StyleEncoderConfig),
    Mapping(MappingConfig),
    CurveEncoder(CurveEncoderConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::StyleEncoder(_) => "style_encoder",
            ModelConfig::Mapping(_) => "mapping",
            ModelConfig::CurveEncoder(_) => "curve_encoder",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::StyleEncoder(c) => c.validate(),
            ModelConfig::Mapping(c) => c.validate(),
            ModelConfig::CurveEncoder(c) => c.validate(),
        }
    }

    /// Every tensor the model owns, in storage order.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        match self {
            ModelConfig::StyleEncoder(c) => c.manifest(),
            ModelConfig::Mapping(c) => c.manifest(),
            ModelConfig::CurveEncoder(c) => c.manifest(),
        }
    }
}

/// Convolutional trunk shared by both CNNs: a stride-2 stem, then stages of
/// Fixup residual blocks. A stage starts with a stride-2 convolution unless
/// it is the first one and keeps the stem width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrunkConfig {
    pub input_size: usize,
    pub stem_width: usize,
    pub stage_widths: Vec<usize>,
    pub blocks_per_stage: usize,
}

impl TrunkConfig {
    fn validate(&self) -> Result<()> {
        if self.stage_widths.is_empty() || self.blocks_per_stage == 0 {
            return Err(invalid(
                "trunk needs at least one stage and one block per stage",
            ));
        }
        if self.stem_width == 0 || self.stage_widths.contains(&0) {
            return Err(invalid("channel widths must be positive"));
        }
        if self.input_size < 2 {
            return Err(invalid(format!(
                "input size {} is too small",
                self.input_size
            )));
        }
        Ok(())
    }

    pub(crate) fn has_down(&self, stage: usize) -> bool {
        stage > 0 || self.stage_widths[0] != self.stem_width
    }

    /// Total number of residual blocks.
    pub fn depth(&self) -> usize {
        self.stage_widths.len() * self.blocks_per_stage
    }

    pub fn out_width(&self) -> usize {
        *self.stage_widths.last().expect("validated")
    }

    fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let mut m = vec![
            ("stem.w".to_string(), vec![self.stem_width, 3, 3, 3]),
            ("stem.b".to_string(), vec![self.stem_width]),
        ];
        let mut prev = self.stem_width;
        for (s, &w) in self.stage_widths.iter().enumerate() {
            if self.has_down(s) {
                m.push((format!("stage{s}.down.w"), vec![w, prev, 3, 3]));
                m.push((format!("stage{s}.down.b"), vec![w]));
            }
            for k in 0..self.blocks_per_stage {
                let p = format!("stage{s}.block{k}");
                m.push((format!("{p}.bias1a"), vec![1]));
                m.push((format!("{p}.conv1.w"), vec![w, w, 3, 3]));
                m.push((format!("{p}.bias1b"), vec![1]));
                m.push((format!("{p}.bias2a"), vec![1]));
                m.push((format!("{p}.conv2.w"), vec![w, w, 3, 3]));
                m.push((format!("{p}.scale"), vec![1]));
                m.push((format!("{p}.bias2b"), vec![1]));
            }
            prev = w;
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleEncoderConfig {
    pub trunk: TrunkConfig,
    /// Rows of the training-time classifier head.
    pub styles: usize,
    /// Logit scale of the normalized softmax.
    pub scale: f64,
}

impl Default for StyleEncoderConfig {
    fn default() -> Self {
        Self {
            trunk: TrunkConfig {
                input_size: DEFAULT_INPUT_SIZE,
                stem_width: 16,
                stage_widths: vec![16, 32, 64],
                blocks_per_stage: 1,
            },
            styles: 2,
            scale: DEFAULT_SCALE,
        }
    }
}

impl StyleEncoderConfig {
    /// Embedding dimension `E`.
    pub fn embedding_dim(&self) -> usize {
        self.trunk.out_width()
    }

    fn validate(&self) -> Result<()> {
        self.trunk.validate()?;
        if self.embedding_dim() < 2 {
            return Err(invalid("embedding dimension must be at least 2"));
        }
        if self.styles < 2 {
            return Err(invalid("classifier head needs at least 2 styles"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(invalid(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let mut m = self.trunk.manifest();
        m.push(("head.w".into(), vec![self.styles, self.embedding_dim()]));
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    /// Channel count at each Dual AdaIN insertion point.
    pub code_channels: Vec<usize>,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            latent_dim: 64,
            hidden: vec![128, 128],
            code_channels: vec![16, 32, 64, 96],
        }
    }
}

impl MappingConfig {
    /// Width of the raw output: `(mu, sigma)` for every channel of every level.
    pub fn output_dim(&self) -> usize {
        2 * self.code_channels.iter().sum::<usize>()
    }

    fn validate(&self) -> Result<()> {
        if self.latent_dim < 2 {
            return Err(invalid("latent dimension must be at least 2"));
        }
        if self.hidden.contains(&0)
            || self.code_channels.is_empty()
            || self.code_channels.contains(&0)
        {
            return Err(invalid(
                "mapping widths must be positive and at least one level is needed",
            ));
        }
        Ok(())
    }

    fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let mut m = Vec::new();
        let mut prev = self.latent_dim;
        for (l, &h) in self.hidden.iter().enumerate() {
            m.push((format!("fc{l}.w"), vec![h, prev]));
            m.push((format!("fc{l}.b"), vec![h]));
            prev = h;
        }
        m.push(("out.w".into(), vec![self.output_dim(), prev]));
        m.push(("out.b".into(), vec![self.output_dim()]));
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveEncoderConfig {
    pub trunk: TrunkConfig,
    /// Knot counts in curve order (r, g, b, x, y) x (r, g, b).
    pub knot_counts: Vec<usize>,
    /// Color index depth `D` used when rendering during training.
    pub depth: u32,
}

impl Default for CurveEncoderConfig {
    fn default() -> Self {
        Self {
            trunk: TrunkConfig {
                input_size: DEFAULT_INPUT_SIZE,
                stem_width: 16,
                stage_widths: vec![16, 32, 64, 96],
                blocks_per_stage: 1,
            },
            knot_counts: KnotLayout::default().counts().to_vec(),
            depth: DEFAULT_DEPTH,
        }
    }
}

impl CurveEncoderConfig {
    pub fn layout(&self) -> Result<KnotLayout> {
        let counts: [usize; CURVE_COUNT] =
            self.knot_counts.as_slice().try_into().map_err(|_| {
                invalid(format!(
                    "need {CURVE_COUNT} knot counts, got {}",
                    self.knot_counts.len()
                ))
            })?;
        Ok(KnotLayout::from_counts(counts)?)
    }

    /// Number of Dual AdaIN insertion points `L`, one after each stage.
    pub fn insertions(&self) -> usize {
        self.trunk.stage_widths.len()
    }

    fn validate(&self) -> Result<()> {
        self.trunk.validate()?;
        self.layout()?;
        if !(1..=MAX_DEPTH).contains(&self.depth) {
            return Err(invalid(format!(
                "index depth {} outside 1..={MAX_DEPTH}",
                self.depth
            )));
        }
        Ok(())
    }

    fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let total: usize = self.knot_counts.iter().sum();
        let mut m = self.trunk.manifest();
        m.push(("fc.w".into(), vec![total, self.trunk.out_width()]));
        m.push(("fc.b".into(), vec![total]));
        m
    }
}

//! Inference entry points on plain images and latents.

use std::path::Path;

use stylecurve_core::enhancer::CurveSet;
use stylecurve_core::style::{Embedding, StyleLatent};
use stylecurve_core::{Image, Sample};

use crate::error::{invalid, Result};
use crate::graph::{Graph, Var};
use crate::model::arch::{encoder_graph, mapping_graph, style_graph};
use crate::model::{
    encode_weights, fixup_init, load_weights, CodePair, CurveEncoderConfig, MappingConfig,
    ModelConfig, ModelWeights, StyleCodes, StyleEncoderConfig,
};
use crate::tensor::Tensor;

/// Largest tolerated deviation of a latent's norm from 1.
pub const LATENT_NORM_TOLERANCE: f64 = 1e-3;

/// Stacks images of equal size into `[B, 3, H, W]`.
pub fn image_batch<T: Sample>(images: &[&Image<T>]) -> Result<Tensor> {
    let first = images.first().ok_or_else(|| invalid("empty image batch"))?;
    let (w, h) = (first.width(), first.height());
    let mut data = Vec::with_capacity(images.len() * 3 * w * h);
    for img in images {
        if img.width() != w || img.height() != h {
            return Err(invalid("images in a batch must share one size"));
        }
        data.extend(img.data().iter().map(|v| v.to_f64()));
    }
    Tensor::new(vec![images.len(), 3, h, w], data)
}

/// Bilinear resize to `size x size`; a no-op copy when already that size.
pub fn downsample<T: Sample>(image: &Image<T>, size: usize) -> Result<Image<T>> {
    if image.width() == size && image.height() == size {
        Ok(image.clone())
    } else {
        Ok(image.resize_bilinear(size, size)?)
    }
}

fn style_config(w: &ModelWeights) -> Result<&StyleEncoderConfig> {
    match w.config() {
        ModelConfig::StyleEncoder(c) => Ok(c),
        other => Err(invalid(format!(
            "expected style encoder weights, got {}",
            other.kind()
        ))),
    }
}

fn mapping_config(w: &ModelWeights) -> Result<&MappingConfig> {
    match w.config() {
        ModelConfig::Mapping(c) => Ok(c),
        other => Err(invalid(format!(
            "expected mapping weights, got {}",
            other.kind()
        ))),
    }
}

fn encoder_config(w: &ModelWeights) -> Result<&CurveEncoderConfig> {
    match w.config() {
        ModelConfig::CurveEncoder(c) => Ok(c),
        other => Err(invalid(format!(
            "expected curve encoder weights, got {}",
            other.kind()
        ))),
    }
}

/// Embedding of one `K x K` image.
pub fn style_forward<T: Sample>(image: &Image<T>, weights: &ModelWeights) -> Result<Embedding> {
    let cfg = style_config(weights)?;
    let mut g = Graph::new();
    let p = weights.bind(&mut g, false)?;
    let x = g.input(image_batch(&[image])?)?;
    let f = style_graph(&mut g, &p, cfg, x)?;
    Ok(Embedding::new(g.value(f).data().to_vec())?)
}

/// Codes for a single latent.
pub fn style_codes(latent: &StyleLatent, weights: &ModelWeights) -> Result<StyleCodes> {
    let cfg = mapping_config(weights)?;
    let norm = latent.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > LATENT_NORM_TOLERANCE {
        return Err(invalid(format!("latent norm {norm} is not 1")));
    }
    let mut g = Graph::new();
    let p = weights.bind(&mut g, false)?;
    let x = g.input(Tensor::new(
        vec![1, latent.dim()],
        latent.values().to_vec(),
    )?)?;
    let levels = mapping_graph(&mut g, &p, cfg, x)?;
    let pairs = levels
        .into_iter()
        .map(|(mu, sigma)| {
            CodePair::new(g.value(mu).data().to_vec(), g.value(sigma).data().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    StyleCodes::new(pairs)
}

/// Codes for a source and a target latent through the shared mapping network.
pub fn mapping_forward(
    source: &StyleLatent,
    target: &StyleLatent,
    weights: &ModelWeights,
) -> Result<(StyleCodes, StyleCodes)> {
    Ok((style_codes(source, weights)?, style_codes(target, weights)?))
}

fn code_vars(g: &mut Graph, source: &StyleCodes, target: &StyleCodes) -> Result<Vec<[Var; 4]>> {
    if source.len() != target.len() {
        return Err(invalid("source and target codes differ in depth"));
    }
    let mut out = Vec::with_capacity(source.len());
    for (a, b) in source.levels().iter().zip(target.levels()) {
        let (ma, sa) = a.tiled(1);
        let (mb, sb) = b.tiled(1);
        out.push([g.input(ma)?, g.input(sa)?, g.input(mb)?, g.input(sb)?]);
    }
    Ok(out)
}

/// Flat knot vector `u` for one `K x K` image.
pub fn encoder_forward<T: Sample>(
    image: &Image<T>,
    source: &StyleCodes,
    target: &StyleCodes,
    weights: &ModelWeights,
) -> Result<Vec<f64>> {
    let cfg = encoder_config(weights)?;
    if source.channels() != cfg.trunk.stage_widths || target.channels() != cfg.trunk.stage_widths {
        return Err(invalid(format!(
            "codes with channels {:?} / {:?} do not fit insertion points {:?}",
            source.channels(),
            target.channels(),
            cfg.trunk.stage_widths
        )));
    }
    let mut g = Graph::new();
    let p = weights.bind(&mut g, false)?;
    let x = g.input(image_batch(&[image])?)?;
    let codes = code_vars(&mut g, source, target)?;
    let u = encoder_graph(&mut g, &p, cfg, x, Some(&codes))?;
    Ok(g.value(u).data().to_vec())
}

/// The three trained networks together.
#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    style: ModelWeights,
    mapping: ModelWeights,
    encoder: ModelWeights,
}

impl Pipeline {
    pub fn new(style: ModelWeights, mapping: ModelWeights, encoder: ModelWeights) -> Result<Self> {
        let s = style_config(&style)?;
        let m = mapping_config(&mapping)?;
        let e = encoder_config(&encoder)?;
        if s.embedding_dim() != m.latent_dim {
            return Err(invalid(format!(
                "style encoder emits {} dims, mapping expects {}",
                s.embedding_dim(),
                m.latent_dim
            )));
        }
        if m.code_channels != e.trunk.stage_widths {
            return Err(invalid(format!(
                "mapping emits codes for {:?}, curve encoder has {:?}",
                m.code_channels, e.trunk.stage_widths
            )));
        }
        Ok(Self {
            style,
            mapping,
            encoder,
        })
    }

    /// Fresh Fixup-initialized networks.
    pub fn init(
        style: StyleEncoderConfig,
        mapping: MappingConfig,
        encoder: CurveEncoderConfig,
        seed: u64,
    ) -> Result<Self> {
        Self::new(
            fixup_init(&ModelConfig::StyleEncoder(style), seed)?,
            fixup_init(&ModelConfig::Mapping(mapping), seed.wrapping_add(1))?,
            fixup_init(&ModelConfig::CurveEncoder(encoder), seed.wrapping_add(2))?,
        )
    }

    /// Picks one model of each kind from a weights bundle.
    pub fn from_models(models: Vec<ModelWeights>) -> Result<Self> {
        let (mut s, mut m, mut e) = (None, None, None);
        for w in models {
            let slot = match w.config() {
                ModelConfig::StyleEncoder(_) => &mut s,
                ModelConfig::Mapping(_) => &mut m,
                ModelConfig::CurveEncoder(_) => &mut e,
            };
            if slot.is_some() {
                return Err(invalid(format!(
                    "bundle holds two {} models",
                    w.config().kind()
                )));
            }
            *slot = Some(w);
        }
        match (s, m, e) {
            (Some(s), Some(m), Some(e)) => Self::new(s, m, e),
            _ => Err(invalid(
                "bundle must hold a style encoder, a mapping network and a curve encoder",
            )),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_models(load_weights(path)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        encode_weights(&[&self.style, &self.mapping, &self.encoder])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn style(&self) -> &ModelWeights {
        &self.style
    }

    pub fn mapping(&self) -> &ModelWeights {
        &self.mapping
    }

    pub fn encoder(&self) -> &ModelWeights {
        &self.encoder
    }

    pub fn style_config(&self) -> &StyleEncoderConfig {
        style_config(&self.style).expect("checked in new")
    }

    pub fn encoder_config(&self) -> &CurveEncoderConfig {
        encoder_config(&self.encoder).expect("checked in new")
    }

    /// Embedding of an image of any size (downsampled to `K` first).
    pub fn embed<T: Sample>(&self, image: &Image<T>) -> Result<Embedding> {
        let k = self.style_config().trunk.input_size;
        style_forward(&downsample(image, k)?, &self.style)
    }

    pub fn codes(&self, latent: &StyleLatent) -> Result<StyleCodes> {
        style_codes(latent, &self.mapping)
    }

    /// Curves for an image of any size (downsampled to `K` first).
    pub fn predict_curves<T: Sample>(
        &self,
        image: &Image<T>,
        source: &StyleCodes,
        target: &StyleCodes,
    ) -> Result<CurveSet> {
        let cfg = self.encoder_config();
        let small = downsample(image, cfg.trunk.input_size)?;
        let u = encoder_forward(&small, source, target, &self.encoder)?;
        Ok(CurveSet::from_flat(&u, &cfg.layout()?)?)
    }
}

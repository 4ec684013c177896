//! A loaded model plus the style registry, shared by the CLI and the server.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use stylecurve_core::enhancer::{enhance, CurveSet};
use stylecurve_core::style::{average_latent, Embedding, StyleLatent};
use stylecurve_core::Image;
use stylecurve_nn::{Pipeline, StyleCodes};

use crate::error::{invalid, Error, Result};

/// Checks a style id: `[A-Za-z0-9_-]+`.
pub fn check_style_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(invalid(format!(
            "style id {id:?} must match [A-Za-z0-9_-]+"
        )))
    }
}

/// The three networks with call counters on the two expensive paths.
#[derive(Debug)]
pub struct Engine {
    pipeline: Pipeline,
    encoder_calls: AtomicU64,
    mapping_calls: AtomicU64,
}

impl Engine {
    pub fn new(pipeline: Pipeline) -> Self {
        Self {
            pipeline,
            encoder_calls: AtomicU64::new(0),
            mapping_calls: AtomicU64::new(0),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(Pipeline::load(path)?))
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    /// Color index depth the curve encoder was trained with.
    pub fn depth(&self) -> u32 {
        self.pipeline.encoder_config().depth
    }

    pub fn embed(&self, image: &Image<f32>) -> Result<Embedding> {
        Ok(self.pipeline.embed(image)?)
    }

    /// Centroid latent of a gallery; no pairing with other styles is needed.
    pub fn gallery_latent(&self, images: &[Image<f32>], provenance: &str) -> Result<StyleLatent> {
        if images.is_empty() {
            return Err(invalid("a style needs at least one image"));
        }
        let embs = images
            .iter()
            .map(|img| self.embed(img))
            .collect::<Result<Vec<_>>>()?;
        if let Some(k) = embs.iter().position(|e| e.norm() == 0.0) {
            return Err(Error::DegenerateGallery(format!(
                "image {k} has a zero embedding"
            )));
        }
        Ok(average_latent(&embs, provenance)?)
    }

    /// Mapping-network forward pass for one latent.
    pub fn codes(&self, latent: &StyleLatent) -> Result<StyleCodes> {
        self.mapping_calls.fetch_add(1, Ordering::Relaxed);
        Ok(self.pipeline.codes(latent)?)
    }

    /// Curve-encoder forward pass on the downsampled image.
    pub fn predict(
        &self,
        image: &Image<f32>,
        source: &StyleCodes,
        target: &StyleCodes,
    ) -> Result<CurveSet> {
        self.encoder_calls.fetch_add(1, Ordering::Relaxed);
        Ok(self.pipeline.predict_curves(image, source, target)?)
    }

    pub fn encoder_calls(&self) -> u64 {
        self.encoder_calls.load(Ordering::Relaxed)
    }

    pub fn mapping_calls(&self) -> u64 {
        self.mapping_calls.load(Ordering::Relaxed)
    }
}

/// Clamped `O = R + I`, as written to disk by both the CLI and the server.
pub fn render(image: &Image<f32>, curves: &CurveSet, depth: u32) -> Result<Image<f32>> {
    Ok(enhance(image, curves, depth, true)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegisteredStyle {
    pub latent: StyleLatent,
    pub codes: StyleCodes,
}

/// Style id to latent, with the mapping-network codes computed once on insert.
#[derive(Clone, Debug, Default)]
pub struct StyleRegistry {
    styles: BTreeMap<String, RegisteredStyle>,
}

impl StyleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads every `<id>.json` latent in `dir`.
    pub fn load_dir(engine: &Engine, dir: impl AsRef<Path>) -> Result<Self> {
        let mut reg = Self::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.sort();
        for p in paths {
            if p.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(id) = p.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if check_style_id(id).is_err() {
                log::warn!("skipping {}: not a valid style id", p.display());
                continue;
            }
            let latent = StyleLatent::load(&p)?;
            reg.insert(engine, id, latent)?;
        }
        Ok(reg)
    }

    /// Adds or replaces a style and returns its codes.
    pub fn insert(
        &mut self,
        engine: &Engine,
        id: &str,
        latent: StyleLatent,
    ) -> Result<&RegisteredStyle> {
        check_style_id(id)?;
        let codes = engine.codes(&latent)?;
        self.styles
            .insert(id.to_string(), RegisteredStyle { latent, codes });
        Ok(&self.styles[id])
    }

    pub fn get(&self, id: &str) -> Result<&RegisteredStyle> {
        self.styles
            .get(id)
            .ok_or_else(|| Error::UnknownStyle(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.styles.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RegisteredStyle)> {
        self.styles.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.styles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.styles.is_empty()
    }
}

/// Writes `dir/<id>.json`.
pub fn save_style(dir: impl AsRef<Path>, id: &str, latent: &StyleLatent) -> Result<()> {
    check_style_id(id)?;
    std::fs::create_dir_all(&dir)?;
    latent.save(dir.as_ref().join(format!("{id}.json")))?;
    Ok(())
}

//! Paired multi-style image sets, in memory and on disk.
//!
//! On disk a dataset is `base/NNNN.png`, `styles.json` listing each style
//! id with its [`SyntheticStyleSpec`], and `styled/<id>/NNNN.png`. All
//! images are 16-bit PNG.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stylecurve_core::io::{load_image, save_image};
use stylecurve_core::Image;

use crate::error::{invalid, Result};
use crate::synth::{procedural_image, synth_style_apply, SyntheticStyleSpec};

pub const STYLES_FILE: &str = "styles.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleEntry {
    pub id: String,
    pub spec: SyntheticStyleSpec,
}

#[derive(Serialize, Deserialize)]
struct StylesFile {
    styles: Vec<StyleEntry>,
}

fn check_ids(styles: &[StyleEntry]) -> Result<()> {
    for (k, s) in styles.iter().enumerate() {
        let ok = !s.id.is_empty()
            && s.id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !ok {
            return Err(invalid(format!(
                "style id {:?} must be [A-Za-z0-9_-]+",
                s.id
            )));
        }
        if styles[..k].iter().any(|o| o.id == s.id) {
            return Err(invalid(format!("duplicate style id {}", s.id)));
        }
        s.spec.validate()?;
    }
    Ok(())
}

/// Base images rendered in several styles, aligned by base index.
#[derive(Clone, Debug, PartialEq)]
pub struct StyledSet {
    pub style_ids: Vec<String>,
    /// `images[q][n]`: base `n` in style `q`, `None` when missing.
    pub images: Vec<Vec<Option<Image<f32>>>>,
}

impl StyledSet {
    pub fn new(style_ids: Vec<String>, images: Vec<Vec<Option<Image<f32>>>>) -> Result<Self> {
        if style_ids.len() != images.len() {
            return Err(invalid("one image list per style is required"));
        }
        let n = images.first().map_or(0, Vec::len);
        if images.iter().any(|v| v.len() != n) {
            return Err(invalid("every style needs the same number of slots"));
        }
        Ok(Self { style_ids, images })
    }

    /// Renders every base in every style (in parallel, deterministic).
    pub fn synthesize(bases: &[Image<f32>], styles: &[StyleEntry]) -> Result<Self> {
        check_ids(styles)?;
        let images = styles
            .iter()
            .map(|s| {
                bases
                    .par_iter()
                    .map(|b| synth_style_apply(b, &s.spec).map(Some))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(styles.iter().map(|s| s.id.clone()).collect(), images)
    }

    pub fn styles(&self) -> usize {
        self.style_ids.len()
    }

    /// Number of base slots.
    pub fn len(&self) -> usize {
        self.images.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, style: usize, base: usize) -> Option<&Image<f32>> {
        self.images.get(style)?.get(base)?.as_ref()
    }

    pub fn present(&self, style: usize) -> usize {
        self.images[style].iter().filter(|i| i.is_some()).count()
    }

    /// Splits off the last `test` base slots as a held-out set.
    pub fn split(&self, test: usize) -> Result<(Self, Self)> {
        if test >= self.len() {
            return Err(invalid(format!(
                "cannot hold out {test} of {} images",
                self.len()
            )));
        }
        let cut = self.len() - test;
        let part = |r: std::ops::Range<usize>| Self {
            style_ids: self.style_ids.clone(),
            images: self.images.iter().map(|v| v[r.clone()].to_vec()).collect(),
        };
        Ok((part(0..cut), part(cut..self.len())))
    }

    /// Subset of styles, in the given order.
    pub fn select_styles(&self, styles: &[usize]) -> Result<Self> {
        if let Some(q) = styles.iter().find(|q| **q >= self.styles()) {
            return Err(invalid(format!("no style {q}")));
        }
        Ok(Self {
            style_ids: styles.iter().map(|&q| self.style_ids[q].clone()).collect(),
            images: styles.iter().map(|&q| self.images[q].clone()).collect(),
        })
    }

    /// Size shared by every present image.
    pub fn image_size(&self) -> Result<(usize, usize)> {
        let mut size = None;
        for img in self.images.iter().flatten().flatten() {
            let s = (img.width(), img.height());
            match size {
                None => size = Some(s),
                Some(t) if t != s => return Err(invalid("images differ in size")),
                _ => {}
            }
        }
        size.ok_or_else(|| invalid("dataset has no images"))
    }
}

/// `count` procedural bases of `size x size`, seeded `seed, seed + 1, ...`.
pub fn procedural_bases(count: usize, size: usize, seed: u64) -> Result<Vec<Image<f32>>> {
    (0..count)
        .into_par_iter()
        .map(|i| procedural_image(seed.wrapping_add(i as u64), size, size))
        .collect()
}

fn file_name(n: usize) -> String {
    format!("{n:04}.png")
}

/// Writes bases, `styles.json` and every styled image; returns the set.
pub fn write_dataset(
    dir: impl AsRef<Path>,
    bases: &[Image<f32>],
    styles: &[StyleEntry],
) -> Result<StyledSet> {
    let dir = dir.as_ref();
    check_ids(styles)?;
    let set = StyledSet::synthesize(bases, styles)?;
    std::fs::create_dir_all(dir.join("base"))?;
    for (n, b) in bases.iter().enumerate() {
        let mut b = b.clone();
        b.set_depth(stylecurve_core::BitDepth::Sixteen);
        save_image(&b, dir.join("base").join(file_name(n)))?;
    }
    for (q, s) in styles.iter().enumerate() {
        let sub = dir.join("styled").join(&s.id);
        std::fs::create_dir_all(&sub)?;
        for (n, img) in set.images[q].iter().enumerate() {
            if let Some(img) = img {
                let mut img = img.clone();
                img.set_depth(stylecurve_core::BitDepth::Sixteen);
                save_image(&img, sub.join(file_name(n)))?;
            }
        }
    }
    let text = serde_json::to_string_pretty(&StylesFile {
        styles: styles.to_vec(),
    })?;
    std::fs::write(dir.join(STYLES_FILE), text)?;
    Ok(set)
}

/// Reads a dataset written by [`write_dataset`]. Styled files that are
/// absent come back as `None`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(Vec<StyleEntry>, StyledSet)> {
    let dir = dir.as_ref();
    let styles: StylesFile =
        serde_json::from_str(&std::fs::read_to_string(dir.join(STYLES_FILE))?)?;
    check_ids(&styles.styles)?;
    let mut count = 0;
    while dir.join("base").join(file_name(count)).exists() {
        count += 1;
    }
    if count == 0 {
        return Err(invalid(format!("no base images under {}", dir.display())));
    }
    let images = styles
        .styles
        .iter()
        .map(|s| {
            (0..count)
                .into_par_iter()
                .map(|n| {
                    let p = dir.join("styled").join(&s.id).join(file_name(n));
                    if p.exists() {
                        load_image(&p).map(Some).map_err(Into::into)
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let ids = styles.styles.iter().map(|s| s.id.clone()).collect();
    Ok((styles.styles, StyledSet::new(ids, images)?))
}

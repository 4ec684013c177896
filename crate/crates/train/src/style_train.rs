//! Style-encoder training with the normalized-softmax loss.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stylecurve_core::style::{average_latent, recall_at_1, Embedding, StyleLatent};
use stylecurve_nn::model::arch::style_graph;
use stylecurve_nn::pipeline::{downsample, image_batch};
use stylecurve_nn::{fixup_init, Graph, ModelConfig, ModelWeights, StyleEncoderConfig, Tensor};

use crate::config::TrainConfig;
use crate::dataset::StyledSet;
use crate::error::{invalid, Result};
use crate::optim::{cosine_lr, Adam};

/// Name of the classifier head tensor, trained at a boosted learning rate.
pub const HEAD_TENSOR: &str = "head.w";

const EMBED_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct StyleEpoch {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub loss: f64,
    /// Train-split Recall@1 per style against the epoch's centers.
    pub recall: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug)]
pub struct StyleTrainOutput {
    pub weights: ModelWeights,
    pub epochs: Vec<StyleEpoch>,
    /// Per-style latent over every train image of that style.
    pub latents: Vec<StyleLatent>,
    /// Embedding pool per style, for latent augmentation downstream.
    pub embeddings: Vec<Vec<Embedding>>,
}

impl StyleTrainOutput {
    pub fn final_recall(&self) -> Option<&BTreeMap<usize, f64>> {
        self.epochs.last().map(|e| &e.recall)
    }
}

/// Downsampled inputs as flat `3 K K` vectors with their style labels.
struct Samples {
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    size: usize,
}

impl Samples {
    fn collect(data: &StyledSet, size: usize) -> Result<Self> {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for q in 0..data.styles() {
            for img in data.images[q].iter().flatten() {
                let small = downsample(img, size)?;
                inputs.push(small.data().iter().map(|v| f64::from(*v)).collect());
                labels.push(q);
            }
        }
        Ok(Self {
            inputs,
            labels,
            size,
        })
    }

    fn batch(&self, idx: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(idx.len() * 3 * self.size * self.size);
        for &i in idx {
            data.extend_from_slice(&self.inputs[i]);
        }
        Ok(Tensor::new(vec![idx.len(), 3, self.size, self.size], data)?)
    }
}

fn style_cfg(weights: &ModelWeights) -> Result<&StyleEncoderConfig> {
    match weights.config() {
        ModelConfig::StyleEncoder(c) => Ok(c),
        other => Err(invalid(format!(
            "expected style encoder weights, got {}",
            other.kind()
        ))),
    }
}

fn embed_samples(weights: &ModelWeights, samples: &Samples) -> Result<Vec<Embedding>> {
    let cfg = style_cfg(weights)?;
    let mut out = Vec::with_capacity(samples.inputs.len());
    let all: Vec<usize> = (0..samples.inputs.len()).collect();
    for idx in all.chunks(EMBED_CHUNK) {
        let mut g = Graph::new();
        let p = weights.bind(&mut g, false)?;
        let x = g.input(samples.batch(idx)?)?;
        let f = style_graph(&mut g, &p, cfg, x)?;
        let e = cfg.embedding_dim();
        for row in g.value(f).data().chunks(e) {
            out.push(Embedding::new(row.to_vec())?);
        }
    }
    Ok(out)
}

/// Embeddings of arbitrary images (downsampled to the encoder's input size).
pub fn embed_images(
    weights: &ModelWeights,
    images: &[&stylecurve_core::Image<f32>],
) -> Result<Vec<Embedding>> {
    let cfg = style_cfg(weights)?;
    let k = cfg.trunk.input_size;
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(EMBED_CHUNK) {
        let small = chunk
            .iter()
            .map(|i| downsample(*i, k))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let refs: Vec<_> = small.iter().collect();
        let mut g = Graph::new();
        let p = weights.bind(&mut g, false)?;
        let x = g.input(image_batch(&refs)?)?;
        let f = style_graph(&mut g, &p, cfg, x)?;
        for row in g.value(f).data().chunks(cfg.embedding_dim()) {
            out.push(Embedding::new(row.to_vec())?);
        }
    }
    Ok(out)
}

fn group(embeddings: &[Embedding], labels: &[usize], styles: usize) -> Vec<Vec<Embedding>> {
    let mut pools = vec![Vec::new(); styles];
    for (f, &q) in embeddings.iter().zip(labels) {
        pools[q].push(f.clone());
    }
    pools
}

fn centers(pools: &[Vec<Embedding>], ids: &[String]) -> Result<Vec<StyleLatent>> {
    pools
        .iter()
        .zip(ids)
        .map(|(p, id)| Ok(average_latent(p, format!("train split of {id}"))?))
        .collect()
}

/// Trains a fresh Fixup-initialized style encoder on `data`.
///
/// `model.styles` is replaced by the dataset's style count.
pub fn train_style_encoder(
    data: &StyledSet,
    mut model: StyleEncoderConfig,
    cfg: &TrainConfig,
) -> Result<StyleTrainOutput> {
    cfg.validate()?;
    if data.styles() < 2 {
        return Err(invalid(format!(
            "need at least 2 styles, got {}",
            data.styles()
        )));
    }
    if let Some(q) = (0..data.styles()).find(|&q| data.present(q) < 2) {
        return Err(invalid(format!(
            "style {} has {} images, need at least 2",
            data.style_ids[q],
            data.present(q)
        )));
    }
    model.styles = data.styles();
    let mut weights = fixup_init(&ModelConfig::StyleEncoder(model.clone()), cfg.seed)?;
    let samples = Samples::collect(data, model.trunk.input_size)?;
    let n = samples.inputs.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total = cfg.epochs * steps_per_epoch;
    let mut adam = Adam::new(&weights);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let lr = cosine_lr(step, total, cfg.lr0, cfg.lr_min)?;
            let labels: Vec<usize> = idx.iter().map(|&i| samples.labels[i]).collect();
            let mut g = Graph::new();
            let p = weights.bind(&mut g, true)?;
            let x = g.input(samples.batch(idx)?)?;
            let f = style_graph(&mut g, &p, &model, x)?;
            let loss = g.cosine_softmax_loss(f, p.var(HEAD_TENSOR)?, &labels, model.scale)?;
            loss_sum += g.value(loss).data()[0];
            let grads = g.backward(loss)?;
            let grads = p.gradients(&g, &grads);
            let mult = cfg.head_lr_multiplier;
            adam.step(&mut weights, &grads, |name| {
                if name == HEAD_TENSOR {
                    lr * mult
                } else {
                    lr
                }
            })?;
            step += 1;
        }
        let emb = embed_samples(&weights, &samples)?;
        let pools = group(&emb, &samples.labels, data.styles());
        let c: BTreeMap<usize, StyleLatent> = centers(&pools, &data.style_ids)?
            .into_iter()
            .enumerate()
            .collect();
        let recall = recall_at_1(&emb, &samples.labels, &c)?;
        let loss = loss_sum / steps_per_epoch as f64;
        log::info!("style epoch {epoch}: loss {loss:.5}, recall {recall:?}");
        epochs.push(StyleEpoch {
            epoch,
            loss,
            recall,
        });
    }

    let emb = embed_samples(&weights, &samples)?;
    let embeddings = group(&emb, &samples.labels, data.styles());
    let latents = centers(&embeddings, &data.style_ids)?;
    Ok(StyleTrainOutput {
        weights,
        epochs,
        latents,
        embeddings,
    })
}

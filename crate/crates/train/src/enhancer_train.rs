//! Enhancer training: mapping network and curve encoder, end to end
//! through the curve renderer and the Lab L1 loss.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stylecurve_core::enhancer::KnotLayout;
use stylecurve_core::style::{average_latent, Embedding, StyleLatent};
use stylecurve_nn::model::arch::{encoder_graph, mapping_graph};
use stylecurve_nn::pipeline::downsample;
use stylecurve_nn::{
    fixup_init, CurveEncoderConfig, Graph, MappingConfig, ModelConfig, ModelWeights, Tensor, Var,
};

use crate::config::TrainConfig;
use crate::dataset::StyledSet;
use crate::error::{invalid, Result};
use crate::optim::{cosine_lr, Adam};

/// Gives up on a step after this many missing pairs per batch slot.
const MAX_DRAWS_PER_SLOT: usize = 1000;

/// One sampled training pair: base `base` moved from style `source` to `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairSample {
    pub base: usize,
    pub source: usize,
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub pairs: Vec<PairSample>,
}

/// Random subset latent for one style: `size` drawn from the configured
/// range, members drawn without replacement.
pub fn subset_latent(
    pool: &[Embedding],
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<StyleLatent> {
    if pool.is_empty() {
        return Err(invalid("empty embedding pool"));
    }
    let hi = cfg.subset_max.unwrap_or(pool.len()).min(pool.len());
    let lo = cfg.subset_min.min(hi);
    let size = rng.gen_range(lo..=hi);
    let picked: Vec<Embedding> = sample(rng, pool.len(), size)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();
    Ok(average_latent(&picked, format!("random subset of {size}"))?)
}

/// Steps the mapping network and curve encoder one batch at a time.
pub struct EnhancerTrainer<'a> {
    data: &'a StyledSet,
    pools: &'a [Vec<Embedding>],
    cfg: TrainConfig,
    mapping_cfg: MappingConfig,
    encoder_cfg: CurveEncoderConfig,
    layout: KnotLayout,
    mapping: ModelWeights,
    encoder: ModelWeights,
    adam_mapping: Adam,
    adam_encoder: Adam,
    rng: ChaCha8Rng,
    /// Downsampled encoder inputs, `small[q][n]`.
    small: Vec<Vec<Option<Vec<f64>>>>,
    size: (usize, usize),
    step: usize,
    total: usize,
    skipped: usize,
}

impl<'a> EnhancerTrainer<'a> {
    /// Fixup-initialized networks (mapping seeded `seed`, encoder `seed + 1`).
    pub fn new(
        data: &'a StyledSet,
        pools: &'a [Vec<Embedding>],
        mapping_cfg: MappingConfig,
        encoder_cfg: CurveEncoderConfig,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        let mapping = fixup_init(&ModelConfig::Mapping(mapping_cfg), cfg.seed)?;
        let encoder = fixup_init(
            &ModelConfig::CurveEncoder(encoder_cfg),
            cfg.seed.wrapping_add(1),
        )?;
        Self::from_weights(data, pools, mapping, encoder, cfg)
    }

    pub fn from_weights(
        data: &'a StyledSet,
        pools: &'a [Vec<Embedding>],
        mapping: ModelWeights,
        encoder: ModelWeights,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let mapping_cfg = match mapping.config() {
            ModelConfig::Mapping(c) => c.clone(),
            other => {
                return Err(invalid(format!(
                    "expected mapping weights, got {}",
                    other.kind()
                )))
            }
        };
        let encoder_cfg = match encoder.config() {
            ModelConfig::CurveEncoder(c) => c.clone(),
            other => {
                return Err(invalid(format!(
                    "expected curve encoder weights, got {}",
                    other.kind()
                )))
            }
        };
        if mapping_cfg.code_channels != encoder_cfg.trunk.stage_widths {
            return Err(invalid("mapping codes do not fit the curve encoder stages"));
        }
        if data.styles() < 2 {
            return Err(invalid(format!(
                "need at least 2 styles, got {}",
                data.styles()
            )));
        }
        if pools.len() != data.styles() {
            return Err(invalid(format!(
                "{} embedding pools for {} styles",
                pools.len(),
                data.styles()
            )));
        }
        for (q, p) in pools.iter().enumerate() {
            if p.is_empty() {
                return Err(invalid(format!(
                    "no embeddings for style {}",
                    data.style_ids[q]
                )));
            }
            if let Some(f) = p.iter().find(|f| f.dim() != mapping_cfg.latent_dim) {
                return Err(invalid(format!(
                    "embedding dimension {} does not match mapping input {}",
                    f.dim(),
                    mapping_cfg.latent_dim
                )));
            }
        }
        let has_pair =
            (0..data.len()).any(|n| (0..data.styles()).any(|q| data.get(q, n).is_some()));
        if !has_pair {
            return Err(invalid("dataset has no usable image pairs"));
        }
        let size = data.image_size()?;
        let k = encoder_cfg.trunk.input_size;
        let small = data
            .images
            .iter()
            .map(|v| {
                v.iter()
                    .map(|img| {
                        img.as_ref()
                            .map(|i| -> Result<Vec<f64>> {
                                Ok(downsample(i, k)?
                                    .data()
                                    .iter()
                                    .map(|v| f64::from(*v))
                                    .collect())
                            })
                            .transpose()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let present: usize = (0..data.styles()).map(|q| data.present(q)).sum();
        let total = cfg.epochs * present.div_ceil(cfg.batch_size);
        Ok(Self {
            data,
            pools,
            layout: encoder_cfg.layout()?,
            adam_mapping: Adam::new(&mapping),
            adam_encoder: Adam::new(&encoder),
            mapping,
            encoder,
            mapping_cfg,
            encoder_cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2)),
            cfg: cfg.clone(),
            small,
            size,
            step: 0,
            total,
            skipped: 0,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.total
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// Sampled pairs that were dropped because an image was missing.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn mapping(&self) -> &ModelWeights {
        &self.mapping
    }

    pub fn encoder(&self) -> &ModelWeights {
        &self.encoder
    }

    pub fn into_weights(self) -> (ModelWeights, ModelWeights) {
        (self.mapping, self.encoder)
    }

    fn sample_pair(&mut self) -> Result<PairSample> {
        let (n_count, q) = (self.data.len(), self.data.styles());
        for _ in 0..MAX_DRAWS_PER_SLOT {
            let p = PairSample {
                base: self.rng.gen_range(0..n_count),
                source: self.rng.gen_range(0..q),
                target: self.rng.gen_range(0..q),
            };
            if self.data.get(p.source, p.base).is_some()
                && self.data.get(p.target, p.base).is_some()
            {
                return Ok(p);
            }
            self.skipped += 1;
        }
        Err(invalid(format!(
            "no complete pair found in {MAX_DRAWS_PER_SLOT} draws"
        )))
    }

    fn latent_batch(&mut self, styles: impl Iterator<Item = usize>) -> Result<Tensor> {
        let dim = self.mapping_cfg.latent_dim;
        let mut data = Vec::new();
        let mut rows = 0;
        for q in styles {
            let l = subset_latent(&self.pools[q], &self.cfg, &mut self.rng)?;
            data.extend_from_slice(l.values());
            rows += 1;
        }
        Ok(Tensor::new(vec![rows, dim], data)?)
    }

    /// One Adam step on a freshly sampled batch. Fails once the schedule is done.
    pub fn step(&mut self) -> Result<StepReport> {
        if self.step >= self.total {
            return Err(invalid(format!(
                "schedule of {} steps is complete",
                self.total
            )));
        }
        let lr = cosine_lr(self.step, self.total, self.cfg.lr0, self.cfg.lr_min)?;
        let pairs = (0..self.cfg.batch_size)
            .map(|_| self.sample_pair())
            .collect::<Result<Vec<_>>>()?;
        let la = self.latent_batch(pairs.iter().map(|p| p.source))?;
        let lb = self.latent_batch(pairs.iter().map(|p| p.target))?;

        let k = self.encoder_cfg.trunk.input_size;
        let (w, h) = self.size;
        let mut small = Vec::with_capacity(pairs.len() * 3 * k * k);
        let mut full = Vec::with_capacity(pairs.len() * 3 * w * h);
        let mut target = Vec::with_capacity(full.capacity());
        for p in &pairs {
            small.extend_from_slice(
                self.small[p.source][p.base]
                    .as_deref()
                    .expect("sampled pair"),
            );
            let a = self.data.get(p.source, p.base).expect("sampled pair");
            let b = self.data.get(p.target, p.base).expect("sampled pair");
            full.extend(a.data().iter().map(|v| f64::from(*v)));
            target.extend(b.data().iter().map(|v| f64::from(*v)));
        }
        let bsz = pairs.len();

        let mut g = Graph::new();
        let pm = self.mapping.bind(&mut g, true)?;
        let pe = self.encoder.bind(&mut g, true)?;
        let la = g.input(la)?;
        let lb = g.input(lb)?;
        let ca = mapping_graph(&mut g, &pm, &self.mapping_cfg, la)?;
        let cb = mapping_graph(&mut g, &pm, &self.mapping_cfg, lb)?;
        let codes: Vec<[Var; 4]> = ca
            .into_iter()
            .zip(cb)
            .map(|((ma, sa), (mb, sb))| [ma, sa, mb, sb])
            .collect();
        let x = g.input(Tensor::new(vec![bsz, 3, k, k], small)?)?;
        let u = encoder_graph(&mut g, &pe, &self.encoder_cfg, x, Some(&codes))?;
        let images = Tensor::new(vec![bsz, 3, h, w], full)?;
        let out = g.render_curves(u, images, self.layout, self.encoder_cfg.depth)?;
        let loss = g.lab_l1_loss(out, Tensor::new(vec![bsz, 3, h, w], target)?)?;
        let value = g.value(loss).data()[0];
        let grads = g.backward(loss)?;
        let gm = pm.gradients(&g, &grads);
        let ge = pe.gradients(&g, &grads);
        self.adam_mapping.step(&mut self.mapping, &gm, |_| lr)?;
        self.adam_encoder.step(&mut self.encoder, &ge, |_| lr)?;

        let report = StepReport {
            step: self.step,
            lr,
            loss: value,
            pairs,
        };
        self.step += 1;
        Ok(report)
    }
}

#[derive(Clone, Debug)]
pub struct EnhancerTrainOutput {
    pub mapping: ModelWeights,
    pub encoder: ModelWeights,
    pub log: Vec<StepReport>,
    pub skipped: usize,
}

/// Runs the full cosine schedule.
pub fn train_enhancer(
    data: &StyledSet,
    pools: &[Vec<Embedding>],
    mapping: MappingConfig,
    encoder: CurveEncoderConfig,
    cfg: &TrainConfig,
) -> Result<EnhancerTrainOutput> {
    let mut t = EnhancerTrainer::new(data, pools, mapping, encoder, cfg)?;
    let mut log = Vec::with_capacity(t.total_steps());
    while t.steps_done() < t.total_steps() {
        let r = t.step()?;
        if r.step % 50 == 0 {
            log::info!(
                "enhancer step {}: lr {:.2e}, loss {:.4}",
                r.step,
                r.lr,
                r.loss
            );
        }
        log.push(r);
    }
    if t.skipped() > 0 {
        log::warn!("skipped {} sampled pairs with a missing image", t.skipped());
    }
    let skipped = t.skipped();
    let (mapping, encoder) = t.into_weights();
    Ok(EnhancerTrainOutput {
        mapping,
        encoder,
        log,
        skipped,
    })
}

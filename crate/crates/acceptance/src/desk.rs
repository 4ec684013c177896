//! Desk-scale training runs on procedurally styled images.

use std::collections::BTreeMap;

use anyhow::ensure;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stylecurve_core::style::{average_latent, recall_at_1, Embedding, StyleLatent};
use stylecurve_core::Image;
use stylecurve_nn::{CurveEncoderConfig, MappingConfig, Pipeline, StyleCodes, StyleEncoderConfig};
use stylecurve_train::eval::{off_diagonal_mean, table_mean};
use stylecurve_train::{
    embed_images, mean_transfer_psnr, presets, procedural_bases, style_matrix_eval, train_enhancer,
    train_style_encoder, StyledSet, TrainConfig,
};

use crate::Check;

pub const BASES: usize = 200;
pub const BASE_SIZE: usize = 64;
pub const HELD_OUT: usize = 40;
/// Network input side; the images themselves are only 64 px.
pub const INPUT_SIZE: usize = 32;
const BASE_SEED: u64 = 2024;

fn style_config() -> StyleEncoderConfig {
    let mut c = StyleEncoderConfig::default();
    c.trunk.input_size = INPUT_SIZE;
    c
}

fn encoder_config() -> CurveEncoderConfig {
    let mut c = CurveEncoderConfig::default();
    c.trunk.input_size = INPUT_SIZE;
    c
}

fn format_table(table: &[Vec<f64>]) -> String {
    let rows: Vec<String> = table
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| format!("{v:.1}"))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    format!("[{}]", rows.join(" | "))
}

/// Held-out Recall@1 of `test` embeddings against the train-split centers.
fn held_out_recall(
    weights: &stylecurve_nn::ModelWeights,
    latents: &[StyleLatent],
    test: &StyledSet,
) -> anyhow::Result<BTreeMap<usize, f64>> {
    let mut embs: Vec<Embedding> = Vec::new();
    let mut labels = Vec::new();
    for q in 0..test.styles() {
        let imgs: Vec<&Image<f32>> = test.images[q].iter().flatten().collect();
        labels.extend(std::iter::repeat(q).take(imgs.len()));
        embs.extend(embed_images(weights, &imgs)?);
    }
    let centers = latents.iter().cloned().enumerate().collect();
    Ok(recall_at_1(&embs, &labels, &centers)?)
}

/// Warm and cool white balance with per-channel gamma, both directions.
pub fn two_style() -> Check {
    let set = StyledSet::synthesize(
        &procedural_bases(BASES, BASE_SIZE, BASE_SEED)?,
        &presets::preset("two")?,
    )?;
    let (train, test) = set.split(HELD_OUT)?;
    let st = train_style_encoder(&train, style_config(), &TrainConfig::default())?;
    let en = train_enhancer(
        &train,
        &st.embeddings,
        MappingConfig::default(),
        encoder_config(),
        &TrainConfig {
            epochs: 20,
            ..Default::default()
        },
    )?;
    let pipeline = Pipeline::new(st.weights.clone(), en.mapping, en.encoder)?;
    let table = style_matrix_eval(&pipeline, &st.latents, &test)?;
    let psnr = off_diagonal_mean(&table);
    let recall = st.final_recall().cloned().unwrap_or_default();
    let min_recall = recall.values().copied().fold(f64::INFINITY, f64::min);
    let held = held_out_recall(&st.weights, &st.latents, &test)?;
    let min_held = held.values().copied().fold(f64::INFINITY, f64::min);
    Ok((
        psnr >= 35.0 && min_recall == 1.0 && min_held == 1.0,
        format!(
            "held-out PSNR {psnr:.2} dB (need >= 35), table {}; Recall@1 train {min_recall}, held-out {min_held} (need 1.0)",
            format_table(&table)
        ),
    ))
}

/// Four trained styles plus a fifth kept out of training, sharing one model.
pub struct FourStyle {
    pipeline: Pipeline,
    latents: Vec<StyleLatent>,
    test: StyledSet,
    style_weights: stylecurve_nn::ModelWeights,
    /// Train-split images of the fifth style, used as the exemplar pool.
    unseen_pool: Vec<Embedding>,
    /// Held-out images of all five styles.
    test_all: StyledSet,
}

impl FourStyle {
    pub fn train() -> anyhow::Result<Self> {
        let all = StyledSet::synthesize(
            &procedural_bases(BASES, BASE_SIZE, BASE_SEED)?,
            &presets::preset("five")?,
        )?;
        let (train_all, test_all) = all.split(HELD_OUT)?;
        let train = train_all.select_styles(&[0, 1, 2, 3])?;
        let test = test_all.select_styles(&[0, 1, 2, 3])?;
        let st = train_style_encoder(
            &train,
            style_config(),
            &TrainConfig {
                epochs: 20,
                ..Default::default()
            },
        )?;
        let en = train_enhancer(
            &train,
            &st.embeddings,
            MappingConfig::default(),
            encoder_config(),
            &TrainConfig {
                epochs: 20,
                ..Default::default()
            },
        )?;
        let pipeline = Pipeline::new(st.weights.clone(), en.mapping, en.encoder)?;
        let gallery: Vec<&Image<f32>> = train_all.images[4].iter().flatten().collect();
        let unseen_pool = embed_images(&st.weights, &gallery)?;
        Ok(Self {
            pipeline,
            latents: st.latents,
            test,
            style_weights: st.weights,
            unseen_pool,
            test_all,
        })
    }

    pub fn matrix(&self) -> Check {
        let table = style_matrix_eval(&self.pipeline, &self.latents, &self.test)?;
        let min = table
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let mean = table_mean(&table);
        let recall = held_out_recall(&self.style_weights, &self.latents, &self.test)?;
        Ok((
            min >= 25.0 && mean >= 30.0,
            format!(
                "min entry {min:.2} dB (need >= 25), mean {mean:.2} dB (need >= 30), off-diagonal mean {:.2} dB, \
                 table {}; held-out Recall@1 {:?}",
                off_diagonal_mean(&table),
                format_table(&table),
                recall.values().collect::<Vec<_>>()
            ),
        ))
    }

    /// Latents from nested exemplar subsets (the 5 include the 1, the 25 the
    /// 5), scored from every trained style into the fifth and averaged over
    /// 10 random draws.
    pub fn unseen(&self) -> Check {
        const SIZES: [usize; 3] = [1, 5, 25];
        const REPEATS: usize = 10;
        ensure!(
            self.unseen_pool.len() >= 25,
            "only {} exemplars",
            self.unseen_pool.len()
        );
        let sources: Vec<StyleCodes> = self
            .latents
            .iter()
            .map(|l| self.pipeline.codes(l))
            .collect::<Result<_, _>>()?;
        let unseen = self.test_all.styles() - 1;
        let pairs_from = |src: usize| -> Vec<(&Image<f32>, &Image<f32>)> {
            (0..self.test_all.len())
                .filter_map(|k| Some((self.test_all.get(src, k)?, self.test_all.get(unseen, k)?)))
                .collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<Vec<usize>> = (0..REPEATS)
            .map(|_| sample(&mut rng, self.unseen_pool.len(), 25).into_vec())
            .collect();
        let mut means = Vec::new();
        for n in SIZES {
            let mut total = 0.0;
            for draw in &draws {
                let pick: Vec<Embedding> = draw[..n]
                    .iter()
                    .map(|&i| self.unseen_pool[i].clone())
                    .collect();
                let target = self
                    .pipeline
                    .codes(&average_latent(&pick, format!("{n} exemplars"))?)?;
                let mut s = 0.0;
                for (src, codes) in sources.iter().enumerate() {
                    s += mean_transfer_psnr(&self.pipeline, codes, &target, &pairs_from(src))?;
                }
                total += s / sources.len() as f64;
            }
            means.push(total / REPEATS as f64);
        }
        let nondecreasing = means.windows(2).all(|w| w[1] >= w[0]);
        let parts: Vec<String> = SIZES
            .iter()
            .zip(&means)
            .map(|(n, m)| format!("n={n}: {m:.2} dB"))
            .collect();
        Ok((
            nondecreasing,
            format!(
                "mean PSNR over {REPEATS} draws {} ({})",
                parts.join(", "),
                if nondecreasing {
                    "nondecreasing"
                } else {
                    "NOT nondecreasing"
                }
            ),
        ))
    }
}

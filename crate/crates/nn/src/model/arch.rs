//! Graph builders for the three networks.

use super::config::{CurveEncoderConfig, MappingConfig, StyleEncoderConfig, TrunkConfig};
use super::weights::Params;
use crate::error::{invalid, Result};
use crate::graph::{Graph, Var};

/// Fixup residual block: `relu(x + scale * conv2(relu(conv1(x + a) + b) + c) + d)`.
fn block(g: &mut Graph, p: &Params, prefix: &str, x: Var) -> Result<Var> {
    let v = |n: &str| p.var(&format!("{prefix}.{n}"));
    let h = g.add_scalar(x, v("bias1a")?)?;
    let h = g.conv2d(h, v("conv1.w")?, None, 1, 1)?;
    let h = g.add_scalar(h, v("bias1b")?)?;
    let h = g.relu(h)?;
    let h = g.add_scalar(h, v("bias2a")?)?;
    let h = g.conv2d(h, v("conv2.w")?, None, 1, 1)?;
    let h = g.mul_scalar(h, v("scale")?)?;
    let h = g.add_scalar(h, v("bias2b")?)?;
    let s = g.add(x, h)?;
    g.relu(s)
}

fn check_input(g: &Graph, x: Var, size: usize) -> Result<()> {
    let (_, c, h, w) = g.value(x).dims4()?;
    if c != 3 || h != size || w != size {
        return Err(invalid(format!(
            "network input must be [B, 3, {size}, {size}], got {:?}",
            g.value(x).shape()
        )));
    }
    Ok(())
}

/// Trunk feature map. `codes[l]` = `[mu_a, sigma_a, mu_b, sigma_b]` is applied
/// after stage `l` when given.
fn trunk(
    g: &mut Graph,
    p: &Params,
    cfg: &TrunkConfig,
    x: Var,
    codes: Option<&[[Var; 4]]>,
) -> Result<Var> {
    check_input(g, x, cfg.input_size)?;
    if let Some(c) = codes {
        if c.len() != cfg.stage_widths.len() {
            return Err(invalid(format!(
                "{} code levels for {} insertion points",
                c.len(),
                cfg.stage_widths.len()
            )));
        }
    }
    let h = g.conv2d(x, p.var("stem.w")?, Some(p.var("stem.b")?), 2, 1)?;
    let mut h = g.relu(h)?;
    for s in 0..cfg.stage_widths.len() {
        if cfg.has_down(s) {
            let d = g.conv2d(
                h,
                p.var(&format!("stage{s}.down.w"))?,
                Some(p.var(&format!("stage{s}.down.b"))?),
                2,
                1,
            )?;
            h = g.relu(d)?;
        }
        for k in 0..cfg.blocks_per_stage {
            h = block(g, p, &format!("stage{s}.block{k}"), h)?;
        }
        if let Some(c) = codes {
            h = g.dual_adain(h, c[s])?;
        }
    }
    Ok(h)
}

/// Last feature map before pooling (for diagnostics).
pub fn style_features(g: &mut Graph, p: &Params, cfg: &StyleEncoderConfig, x: Var) -> Result<Var> {
    trunk(g, p, &cfg.trunk, x, None)
}

/// Embeddings `[B, E]` for images `[B, 3, K, K]`.
pub fn style_graph(g: &mut Graph, p: &Params, cfg: &StyleEncoderConfig, x: Var) -> Result<Var> {
    let h = trunk(g, p, &cfg.trunk, x, None)?;
    g.global_avg_pool(h)
}

/// `(mu, sigma)` per insertion level, each `[N, C_l]`, for latents `[N, E]`.
pub fn mapping_graph(
    g: &mut Graph,
    p: &Params,
    cfg: &MappingConfig,
    latents: Var,
) -> Result<Vec<(Var, Var)>> {
    let (_, e) = g.value(latents).dims2()?;
    if e != cfg.latent_dim {
        return Err(invalid(format!(
            "mapping expects {}-dimensional latents, got {e}",
            cfg.latent_dim
        )));
    }
    let mut h = latents;
    for l in 0..cfg.hidden.len() {
        let z = g.linear(
            h,
            p.var(&format!("fc{l}.w"))?,
            Some(p.var(&format!("fc{l}.b"))?),
        )?;
        h = g.relu(z)?;
    }
    let raw = g.linear(h, p.var("out.w")?, Some(p.var("out.b")?))?;
    let mut out = Vec::with_capacity(cfg.code_channels.len());
    let mut off = 0;
    for &c in &cfg.code_channels {
        let mu = g.slice_cols(raw, off, c)?;
        let s = g.slice_cols(raw, off + c, c)?;
        let sigma = g.sigma_from_raw(s)?;
        out.push((mu, sigma));
        off += 2 * c;
    }
    Ok(out)
}

/// Curve encoder trunk feature map, conditioned when `codes` is given.
pub fn encoder_features(
    g: &mut Graph,
    p: &Params,
    cfg: &CurveEncoderConfig,
    x: Var,
    codes: Option<&[[Var; 4]]>,
) -> Result<Var> {
    trunk(g, p, &cfg.trunk, x, codes)
}

/// Knot vectors `[B, total]`. With `codes = None` the Dual AdaIN layers are skipped.
pub fn encoder_graph(
    g: &mut Graph,
    p: &Params,
    cfg: &CurveEncoderConfig,
    x: Var,
    codes: Option<&[[Var; 4]]>,
) -> Result<Var> {
    let h = trunk(g, p, &cfg.trunk, x, codes)?;
    let pooled = g.global_avg_pool(h)?;
    g.linear(pooled, p.var("fc.w")?, Some(p.var("fc.b")?))
}

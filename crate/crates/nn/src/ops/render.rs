//! Curve rendering as a differentiable op: knot vectors in, `O = R + I` out.
//!
//! Table lookups are gathers, so the backward pass scatter-adds into the
//! sampled tables and then chains through the sampling Jacobian into the
//! knots. Indices themselves get no gradient.

use stylecurve_core::curves::SampleJacobian;
use stylecurve_core::enhancer::{
    build_lut_set, color_index, enhance_with, CurveSet, InputChannel, KnotLayout, OutputChannel,
    RenderMode,
};
use stylecurve_core::{BitDepth, Image};

use crate::error::{invalid, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub(crate) struct RenderCtx {
    /// `[B, 3, H, W]` input images.
    pub images: Tensor,
    pub layout: KnotLayout,
    pub depth: u32,
}

impl RenderCtx {
    pub fn check(&self, u: &Tensor) -> Result<(usize, usize, usize)> {
        let (batch, ch, h, w) = self.images.dims4()?;
        if ch != 3 {
            return Err(invalid(format!("render expects 3 channels, got {ch}")));
        }
        let (ub, total) = u.dims2()?;
        if ub != batch || total != self.layout.total() {
            return Err(invalid(format!(
                "knot tensor must be [{batch}, {}], got {:?}",
                self.layout.total(),
                u.shape()
            )));
        }
        Ok((batch, h, w))
    }

    fn image(&self, s: usize, h: usize, w: usize) -> Result<Image<f64>> {
        let n = 3 * h * w;
        let data = self.images.data()[s * n..(s + 1) * n].to_vec();
        Ok(Image::from_planar(w, h, BitDepth::Sixteen, data)?)
    }
}

pub(crate) fn forward(u: &Tensor, ctx: &RenderCtx) -> Result<Tensor> {
    let (batch, h, w) = ctx.check(u)?;
    let total = ctx.layout.total();
    let n = 3 * h * w;
    let mut out = Tensor::zeros(ctx.images.shape());
    for s in 0..batch {
        let curves = CurveSet::from_flat(&u.data()[s * total..(s + 1) * total], &ctx.layout)?;
        let luts = build_lut_set::<f64>(&curves, ctx.depth, h, w)?;
        let img = enhance_with(&ctx.image(s, h, w)?, &luts, false, RenderMode::Serial)?;
        out.data_mut()[s * n..(s + 1) * n].copy_from_slice(img.data());
    }
    Ok(out)
}

pub(crate) fn backward(u: &Tensor, ctx: &RenderCtx, grad: &Tensor) -> Result<Tensor> {
    let (batch, h, w) = ctx.check(u)?;
    let total = ctx.layout.total();
    let offsets = ctx.layout.offsets();
    let hw = h * w;
    let entries = 1usize << ctx.depth;
    let mut du = Tensor::zeros(u.shape());
    for s in 0..batch {
        let curves = CurveSet::from_flat(&u.data()[s * total..(s + 1) * total], &ctx.layout)?;
        let img = &ctx.images.data()[s * 3 * hw..(s + 1) * 3 * hw];
        let idx: Vec<Vec<usize>> = (0..3)
            .map(|c| {
                img[c * hw..(c + 1) * hw]
                    .iter()
                    .map(|v| color_index(*v, ctx.depth))
                    .collect()
            })
            .collect();
        let g = &grad.data()[s * 3 * hw..(s + 1) * 3 * hw];
        let du_s = &mut du.data_mut()[s * total..(s + 1) * total];
        for j in OutputChannel::ALL {
            let gj = &g[j.index() * hw..(j.index() + 1) * hw];
            for i in InputChannel::ALL {
                let table_grad = match i {
                    InputChannel::R | InputChannel::G | InputChannel::B => {
                        let mut t = vec![0.0; entries];
                        for (k, gv) in idx[i.index()].iter().zip(gj) {
                            t[*k] += gv;
                        }
                        t
                    }
                    InputChannel::Y => gj.chunks(w).map(|row| row.iter().sum()).collect(),
                    InputChannel::X => {
                        let mut t = vec![0.0; w];
                        for row in gj.chunks(w) {
                            for (acc, gv) in t.iter_mut().zip(row) {
                                *acc += gv;
                            }
                        }
                        t
                    }
                };
                let knots = curves.get(i, j);
                let off = offsets[i.index() * 3 + j.index()];
                let dst = &mut du_s[off..off + knots.len()];
                if table_grad.len() == 1 {
                    // single row or column: the table is knot 0
                    dst[0] += table_grad[0];
                } else {
                    SampleJacobian::new(knots, table_grad.len())?
                        .accumulate_transpose(&table_grad, dst);
                }
            }
        }
    }
    Ok(du)
}

//! Dual AdaIN: `y = sigma_b * (x - mu_a) / sigma_a + mu_b` per channel.
//! The statistics come only from the codes, never from `x`.

use crate::error::{invalid, Result};
use crate::tensor::Tensor;

/// Smallest admissible code scale.
pub const SIGMA_MIN: f64 = 1e-3;

/// Codes are `[B, C]`, one row per batch element.
pub(crate) struct Codes<'a> {
    pub mu_a: &'a Tensor,
    pub sigma_a: &'a Tensor,
    pub mu_b: &'a Tensor,
    pub sigma_b: &'a Tensor,
}

pub(crate) fn check(x: &Tensor, c: &Codes) -> Result<(usize, usize, usize)> {
    let (batch, ch, h, w) = x.dims4()?;
    for (name, t) in [
        ("mu_a", c.mu_a),
        ("sigma_a", c.sigma_a),
        ("mu_b", c.mu_b),
        ("sigma_b", c.sigma_b),
    ] {
        if t.shape() != [batch, ch] {
            return Err(invalid(format!(
                "{name} must have shape [{batch}, {ch}] to match the features, got {:?}",
                t.shape()
            )));
        }
    }
    for (name, t) in [("sigma_a", c.sigma_a), ("sigma_b", c.sigma_b)] {
        if let Some(v) = t.data().iter().find(|v| !(**v >= SIGMA_MIN)) {
            return Err(invalid(format!("{name} value {v} is below {SIGMA_MIN}")));
        }
    }
    Ok((batch * ch, h * w, ch))
}

pub(crate) fn forward(x: &Tensor, c: &Codes) -> Result<Tensor> {
    let (planes, n, _) = check(x, c)?;
    let mut out = Tensor::zeros(x.shape());
    for (p, (dst, src)) in out
        .data_mut()
        .chunks_mut(n)
        .zip(x.data().chunks(n))
        .enumerate()
        .take(planes)
    {
        let (ma, sa) = (c.mu_a.data()[p], c.sigma_a.data()[p]);
        let (mb, sb) = (c.mu_b.data()[p], c.sigma_b.data()[p]);
        if ma == mb && sa == sb {
            // exact identity; the affine form would round
            dst.copy_from_slice(src);
            continue;
        }
        for (y, v) in dst.iter_mut().zip(src) {
            *y = sb * (v - ma) / sa + mb;
        }
    }
    Ok(out)
}

/// Gradients in the order `[x, mu_a, sigma_a, mu_b, sigma_b]`.
pub(crate) fn backward(x: &Tensor, c: &Codes, grad: &Tensor) -> Result<[Tensor; 5]> {
    let (_, n, _) = check(x, c)?;
    let mut dx = Tensor::zeros(x.shape());
    let mut d = [
        Tensor::zeros(c.mu_a.shape()),
        Tensor::zeros(c.mu_a.shape()),
        Tensor::zeros(c.mu_a.shape()),
        Tensor::zeros(c.mu_a.shape()),
    ];
    for (p, ((dxp, xp), gp)) in dx
        .data_mut()
        .chunks_mut(n)
        .zip(x.data().chunks(n))
        .zip(grad.data().chunks(n))
        .enumerate()
    {
        let (ma, sa) = (c.mu_a.data()[p], c.sigma_a.data()[p]);
        let sb = c.sigma_b.data()[p];
        let k = sb / sa;
        let mut sum_g = 0.0;
        let mut sum_gc = 0.0;
        for ((o, v), g) in dxp.iter_mut().zip(xp).zip(gp) {
            *o = g * k;
            sum_g += g;
            sum_gc += g * (v - ma);
        }
        d[0].data_mut()[p] = -k * sum_g;
        d[1].data_mut()[p] = -sb * sum_gc / (sa * sa);
        d[2].data_mut()[p] = sum_g;
        d[3].data_mut()[p] = sum_gc / sa;
    }
    let [dma, dsa, dmb, dsb] = d;
    Ok([dx, dma, dsa, dmb, dsb])
}

//! Scalar losses over a batch, each the mean of the per-sample loss.

use stylecurve_core::colorspace::{lab_l1_loss, lab_l1_loss_grad};
use stylecurve_core::style::{classify_loss_grad, ClassifierHead, Embedding};
use stylecurve_core::{BitDepth, Image};

use crate::error::{invalid, Result};
use crate::tensor::Tensor;

fn image_at(t: &Tensor, s: usize) -> Result<Image<f64>> {
    let (_, c, h, w) = t.dims4()?;
    if c != 3 {
        return Err(invalid(format!("expected 3 channels, got {c}")));
    }
    let n = 3 * h * w;
    Ok(Image::from_planar(
        w,
        h,
        BitDepth::Sixteen,
        t.data()[s * n..(s + 1) * n].to_vec(),
    )?)
}

fn check_pair(pred: &Tensor, target: &Tensor) -> Result<usize> {
    if pred.shape() != target.shape() {
        return Err(invalid(format!(
            "prediction {:?} and target {:?} differ in shape",
            pred.shape(),
            target.shape()
        )));
    }
    Ok(pred.dims4()?.0)
}

pub(crate) fn lab_l1_forward(pred: &Tensor, target: &Tensor) -> Result<f64> {
    let batch = check_pair(pred, target)?;
    let mut total = 0.0;
    for s in 0..batch {
        total += lab_l1_loss(&image_at(pred, s)?, &image_at(target, s)?)?;
    }
    Ok(total / batch as f64)
}

pub(crate) fn lab_l1_backward(pred: &Tensor, target: &Tensor, grad: f64) -> Result<Tensor> {
    let batch = check_pair(pred, target)?;
    let scale = grad / batch as f64;
    let mut out = Tensor::zeros(pred.shape());
    let n = pred.len() / batch;
    for s in 0..batch {
        let (_, g) = lab_l1_loss_grad(&image_at(pred, s)?, &image_at(target, s)?)?;
        for (o, v) in out.data_mut()[s * n..(s + 1) * n].iter_mut().zip(g.data()) {
            *o = v * scale;
        }
    }
    Ok(out)
}

pub(crate) struct CosineCe<'a> {
    pub features: &'a Tensor,
    pub weights: &'a Tensor,
    pub labels: &'a [usize],
    pub scale: f64,
}

impl CosineCe<'_> {
    fn head(&self) -> Result<(usize, ClassifierHead)> {
        let (batch, dim) = self.features.dims2()?;
        let (_, wdim) = self.weights.dims2()?;
        if wdim != dim {
            return Err(invalid(format!(
                "classifier rows have {wdim} entries, embeddings have {dim}"
            )));
        }
        if self.labels.len() != batch {
            return Err(invalid(format!(
                "{} labels for a batch of {batch}",
                self.labels.len()
            )));
        }
        let rows = self
            .weights
            .data()
            .chunks(dim)
            .map(<[f64]>::to_vec)
            .collect();
        Ok((batch, ClassifierHead::new(rows, self.scale)?))
    }

    fn embedding(&self, s: usize) -> Result<Embedding> {
        let dim = self.features.shape()[1];
        Ok(Embedding::new(
            self.features.data()[s * dim..(s + 1) * dim].to_vec(),
        )?)
    }

    /// Mean loss and, if `grad` is given, `(d_features, d_weights)` scaled by it.
    pub fn run(&self, grad: Option<f64>) -> Result<(f64, Option<(Tensor, Tensor)>)> {
        let (batch, head) = self.head()?;
        let dim = head.dim();
        let mut total = 0.0;
        let mut df = Tensor::zeros(self.features.shape());
        let mut dw = Tensor::zeros(self.weights.shape());
        let scale = grad.unwrap_or(0.0) / batch as f64;
        for s in 0..batch {
            let r = classify_loss_grad(&self.embedding(s)?, &head, self.labels[s])?;
            total += r.loss;
            if grad.is_some() {
                for (o, v) in df.data_mut()[s * dim..(s + 1) * dim]
                    .iter_mut()
                    .zip(&r.d_embedding)
                {
                    *o = v * scale;
                }
                for (row, dr) in dw.data_mut().chunks_mut(dim).zip(&r.d_weights) {
                    for (o, v) in row.iter_mut().zip(dr) {
                        *o += v * scale;
                    }
                }
            }
        }
        Ok((total / batch as f64, grad.map(|_| (df, dw))))
    }
}

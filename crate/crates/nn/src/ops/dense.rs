//! Fully connected layer: `y = x W^T + b` with `x: [B, in]`, `W: [out, in]`.

use crate::error::{invalid, Result};
use crate::gemm::gemm;
use crate::tensor::Tensor;

fn dims(x: &Tensor, w: &Tensor) -> Result<(usize, usize, usize)> {
    let (batch, fin) = x.dims2()?;
    let (fout, win) = w.dims2()?;
    if win != fin {
        return Err(invalid(format!(
            "linear layer expects {win} features, got {fin}"
        )));
    }
    Ok((batch, fin, fout))
}

pub(crate) fn forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let (batch, fin, fout) = dims(x, w)?;
    let mut out = Tensor::zeros(&[batch, fout]);
    if let Some(b) = b {
        if b.shape() != [fout] {
            return Err(invalid(format!(
                "linear bias must have shape [{fout}], got {:?}",
                b.shape()
            )));
        }
        for row in out.data_mut().chunks_mut(fout) {
            row.copy_from_slice(b.data());
        }
    }
    gemm(
        batch,
        fin,
        fout,
        1.0,
        x.data(),
        false,
        w.data(),
        true,
        1.0,
        out.data_mut(),
    );
    Ok(out)
}

/// Returns `(dx, dW, db)` for the requested subset.
pub(crate) fn backward(
    x: &Tensor,
    w: &Tensor,
    grad: &Tensor,
    need: [bool; 3],
) -> Result<(Option<Tensor>, Option<Tensor>, Option<Tensor>)> {
    let (batch, fin, fout) = dims(x, w)?;
    let dx = need[0].then(|| {
        let mut dx = Tensor::zeros(x.shape());
        gemm(
            batch,
            fout,
            fin,
            1.0,
            grad.data(),
            false,
            w.data(),
            false,
            0.0,
            dx.data_mut(),
        );
        dx
    });
    let dw = need[1].then(|| {
        let mut dw = Tensor::zeros(w.shape());
        gemm(
            fout,
            batch,
            fin,
            1.0,
            grad.data(),
            true,
            x.data(),
            false,
            0.0,
            dw.data_mut(),
        );
        dw
    });
    let db = need[2].then(|| {
        let mut db = Tensor::zeros(&[fout]);
        for row in grad.data().chunks(fout) {
            for (acc, g) in db.data_mut().iter_mut().zip(row) {
                *acc += g;
            }
        }
        db
    });
    Ok((dx, dw, db))
}

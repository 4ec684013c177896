//! 2-D convolution through im2col and a dense matrix product.

use crate::error::{invalid, Result};
use crate::gemm::gemm;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    pub fn new(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<Self> {
        let (batch, cin, h, wd) = x.dims4()?;
        let (cout, wcin, kh, kw) = w.dims4()?;
        if wcin != cin {
            return Err(invalid(format!(
                "conv expects {wcin} input channels, got {cin}"
            )));
        }
        if kh != kw || kh == 0 {
            return Err(invalid(format!(
                "conv kernel must be square, got {kh}x{kw}"
            )));
        }
        if stride == 0 {
            return Err(invalid("conv stride must be positive"));
        }
        if h + 2 * pad < kh || wd + 2 * pad < kh {
            return Err(invalid(format!(
                "conv input {h}x{wd} too small for kernel {kh} with padding {pad}"
            )));
        }
        Ok(Self {
            batch,
            cin,
            h,
            w: wd,
            cout,
            k: kh,
            stride,
            pad,
            ho: (h + 2 * pad - kh) / stride + 1,
            wo: (wd + 2 * pad - kh) / stride + 1,
        })
    }

    fn patch(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn out_pixels(&self) -> usize {
        self.ho * self.wo
    }

    fn in_size(&self) -> usize {
        self.cin * self.h * self.w
    }

    /// Input coordinate hit by output `o` and kernel tap `t`, if not padding.
    #[inline]
    fn src(&self, o: usize, t: usize, limit: usize) -> Option<usize> {
        let p = (o * self.stride + t).checked_sub(self.pad)?;
        (p < limit).then_some(p)
    }
}

/// Lays out one sample as a `(cin*k*k) x (ho*wo)` matrix.
fn im2col(g: &ConvGeom, x: &[f64], cols: &mut [f64]) {
    let n = g.out_pixels();
    for c in 0..g.cin {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = ((c * g.k + ky) * g.k + kx) * n;
                let dst = &mut cols[row..row + n];
                for oy in 0..g.ho {
                    let line = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    match g.src(oy, ky, g.h) {
                        None => line.fill(0.0),
                        Some(iy) => {
                            let src = &plane[iy * g.w..(iy + 1) * g.w];
                            for (ox, v) in line.iter_mut().enumerate() {
                                *v = g.src(ox, kx, g.w).map_or(0.0, |ix| src[ix]);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds columns back onto the input grid.
fn col2im(g: &ConvGeom, cols: &[f64], dx: &mut [f64]) {
    let n = g.out_pixels();
    for c in 0..g.cin {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = ((c * g.k + ky) * g.k + kx) * n;
                let src = &cols[row..row + n];
                for oy in 0..g.ho {
                    let Some(iy) = g.src(oy, ky, g.h) else {
                        continue;
                    };
                    let line = &src[oy * g.wo..(oy + 1) * g.wo];
                    let dst = &mut plane[iy * g.w..(iy + 1) * g.w];
                    for (ox, v) in line.iter().enumerate() {
                        if let Some(ix) = g.src(ox, kx, g.w) {
                            dst[ix] += v;
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn forward(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let g = ConvGeom::new(x, w, stride, pad)?;
    if let Some(b) = b {
        if b.shape() != [g.cout] {
            return Err(invalid(format!(
                "conv bias must have shape [{}], got {:?}",
                g.cout,
                b.shape()
            )));
        }
    }
    let n = g.out_pixels();
    let out_size = g.cout * n;
    let mut out = Tensor::zeros(&[g.batch, g.cout, g.ho, g.wo]);
    let mut cols = vec![0.0; g.patch() * n];
    for s in 0..g.batch {
        im2col(
            &g,
            &x.data()[s * g.in_size()..(s + 1) * g.in_size()],
            &mut cols,
        );
        let y = &mut out.data_mut()[s * out_size..(s + 1) * out_size];
        gemm(
            g.cout,
            g.patch(),
            n,
            1.0,
            w.data(),
            false,
            &cols,
            false,
            0.0,
            y,
        );
        if let Some(b) = b {
            for (co, plane) in y.chunks_mut(n).enumerate() {
                let bias = b.data()[co];
                plane.iter_mut().for_each(|v| *v += bias);
            }
        }
    }
    Ok(out)
}

pub(crate) struct ConvGrads {
    pub dx: Option<Tensor>,
    pub dw: Option<Tensor>,
    pub db: Option<Tensor>,
}

pub(crate) fn backward(
    x: &Tensor,
    w: &Tensor,
    grad: &Tensor,
    stride: usize,
    pad: usize,
    need: [bool; 3],
) -> Result<ConvGrads> {
    let g = ConvGeom::new(x, w, stride, pad)?;
    let n = g.out_pixels();
    let out_size = g.cout * n;
    let [need_dx, need_dw, need_db] = need;
    let mut dx = need_dx.then(|| Tensor::zeros(x.shape()));
    let mut dw = need_dw.then(|| Tensor::zeros(w.shape()));
    let mut db = need_db.then(|| Tensor::zeros(&[g.cout]));
    let mut cols = vec![0.0; g.patch() * n];
    for s in 0..g.batch {
        let gy = &grad.data()[s * out_size..(s + 1) * out_size];
        if let Some(dw) = dw.as_mut() {
            im2col(
                &g,
                &x.data()[s * g.in_size()..(s + 1) * g.in_size()],
                &mut cols,
            );
            // dW += dY * cols^T
            gemm(
                g.cout,
                n,
                g.patch(),
                1.0,
                gy,
                false,
                &cols,
                true,
                1.0,
                dw.data_mut(),
            );
        }
        if let Some(db) = db.as_mut() {
            for (co, plane) in gy.chunks(n).enumerate() {
                db.data_mut()[co] += plane.iter().sum::<f64>();
            }
        }
        if let Some(dx) = dx.as_mut() {
            // dcols = W^T * dY
            gemm(
                g.patch(),
                g.cout,
                n,
                1.0,
                w.data(),
                true,
                gy,
                false,
                0.0,
                &mut cols,
            );
            let size = g.in_size();
            col2im(&g, &cols, &mut dx.data_mut()[s * size..(s + 1) * size]);
        }
    }
    Ok(ConvGrads { dx, dw, db })
}

use rayon::prelude::*;

use super::curveset::{slot, CurveSet, InputChannel, OutputChannel};
use crate::curves::{sample_curve, CurveKnots};
use crate::error::{Error, Result};
use crate::image::{Image, Sample};

/// Index depth used when nothing else is requested, for 8- and 16-bit input alike.
pub const DEFAULT_DEPTH: u32 = 8;
pub const MAX_DEPTH: u32 = 16;

/// Sampled tables for one image size and index depth.
#[derive(Clone, Debug, PartialEq)]
pub struct LutSet<T = f32> {
    depth: u32,
    width: usize,
    height: usize,
    /// `color[j][i]`: table of curve `i -> j`, `2^depth` entries.
    color: [[Vec<T>; 3]; 3],
    /// y-curve tables, one entry per row.
    rows: [Vec<T>; 3],
    /// x-curve tables, one entry per column.
    cols: [Vec<T>; 3],
}

impl<T: Sample> LutSet<T> {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Table for curve `i -> j`.
    pub fn table(&self, i: InputChannel, j: OutputChannel) -> &[T] {
        let j = j.index();
        match i {
            InputChannel::R | InputChannel::G | InputChannel::B => &self.color[j][i.index()],
            InputChannel::Y => &self.rows[j],
            InputChannel::X => &self.cols[j],
        }
    }
}

fn table_values(curve: &CurveKnots, n: usize) -> Result<Vec<f64>> {
    if n == 1 {
        // A single row or column sits at t = 0.
        Ok(vec![curve.values()[0]])
    } else {
        Ok(sample_curve(curve, n)?.into_values())
    }
}

fn cast_table<T: Sample>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::from_f64).collect()
}

/// Samples every curve: color curves at `2^depth` points, the y curves at
/// `height` points and the x curves at `width` points.
pub fn build_lut_set<T: Sample>(
    curves: &CurveSet,
    depth: u32,
    height: usize,
    width: usize,
) -> Result<LutSet<T>> {
    if !(1..=MAX_DEPTH).contains(&depth) {
        return Err(Error::invalid(format!(
            "index depth must be in 1..={MAX_DEPTH}, got {depth}"
        )));
    }
    if height == 0 || width == 0 {
        return Err(Error::invalid(format!(
            "image size must be positive, got {width}x{height}"
        )));
    }
    let entries = 1usize << depth;
    let mut color: [[Vec<T>; 3]; 3] = Default::default();
    let mut rows: [Vec<T>; 3] = Default::default();
    let mut cols: [Vec<T>; 3] = Default::default();
    for j in OutputChannel::ALL {
        for i in [InputChannel::R, InputChannel::G, InputChannel::B] {
            color[j.index()][i.index()] =
                cast_table(table_values(curves.slot(slot(i, j)), entries)?);
        }
        rows[j.index()] = cast_table(table_values(curves.slot(slot(InputChannel::Y, j)), height)?);
        cols[j.index()] = cast_table(table_values(curves.slot(slot(InputChannel::X, j)), width)?);
    }
    Ok(LutSet {
        depth,
        width,
        height,
        color,
        rows,
        cols,
    })
}

/// Table slot of a color value: `min(floor(v * (2^depth - 1)), 2^depth - 1)`.
/// The renderer uses exactly this rule.
#[inline]
pub fn color_index<T: Sample>(v: T, depth: u32) -> usize {
    let top = (1usize << depth) - 1;
    index_at(v, T::from_f64(top as f64), top)
}

#[inline(always)]
fn index_at<T: Sample>(v: T, scale: T, top: usize) -> usize {
    // Truncation equals floor for the non-negative inputs we accept.
    (v * scale).to_index().min(top)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RenderMode {
    /// One thread, row after row.
    Serial,
    /// Rows partitioned across the rayon pool.
    #[default]
    Parallel,
}

/// One output row. Summation order is fixed (r, g, b, y, x) so every
/// partitioning of rows gives bit-identical results.
#[inline]
fn render_row<T: Sample>(
    luts: &LutSet<T>,
    y: usize,
    src: [&[T]; 3],
    dst: [&mut [T]; 3],
    add_input: bool,
) {
    let top = (1usize << luts.depth) - 1;
    let scale = T::from_f64(top as f64);
    let [out_r, out_g, out_b] = dst;
    let [src_r, src_g, src_b] = src;
    let row_term = [luts.rows[0][y], luts.rows[1][y], luts.rows[2][y]];
    let [cr, cg, cb] = &luts.color;
    for x in 0..out_r.len() {
        let ir = index_at(src_r[x], scale, top);
        let ig = index_at(src_g[x], scale, top);
        let ib = index_at(src_b[x], scale, top);
        let mut v = [
            cr[0][ir] + cr[1][ig],
            cg[0][ir] + cg[1][ig],
            cb[0][ir] + cb[1][ig],
        ];
        v[0] = ((v[0] + cr[2][ib]) + row_term[0]) + luts.cols[0][x];
        v[1] = ((v[1] + cg[2][ib]) + row_term[1]) + luts.cols[1][x];
        v[2] = ((v[2] + cb[2][ib]) + row_term[2]) + luts.cols[2][x];
        if add_input {
            out_r[x] = v[0] + src_r[x];
            out_g[x] = v[1] + src_g[x];
            out_b[x] = v[2] + src_b[x];
        } else {
            out_r[x] = v[0];
            out_g[x] = v[1];
            out_b[x] = v[2];
        }
    }
}

fn check_sizes<T: Sample>(image: &Image<T>, luts: &LutSet<T>) -> Result<()> {
    if image.width() != luts.width || image.height() != luts.height {
        return Err(Error::invalid(format!(
            "tables built for {}x{}, image is {}x{}",
            luts.width,
            luts.height,
            image.width(),
            image.height()
        )));
    }
    Ok(())
}

fn render<T: Sample>(
    image: &Image<T>,
    luts: &LutSet<T>,
    add_input: bool,
    mode: RenderMode,
) -> Result<Image<T>> {
    check_sizes(image, luts)?;
    let w = image.width();
    let mut out = Image::zeros(w, image.height(), image.depth())?;
    let n = out.pixel_count();
    let (pr, rest) = out.data_mut().split_at_mut(n);
    let (pg, pb) = rest.split_at_mut(n);
    let (sr, sg, sb) = (image.plane(0), image.plane(1), image.plane(2));
    let row_src = |y: usize| {
        let r = y * w..(y + 1) * w;
        [&sr[r.clone()], &sg[r.clone()], &sb[r]]
    };
    match mode {
        RenderMode::Serial => {
            for (y, ((r, g), b)) in pr
                .chunks_mut(w)
                .zip(pg.chunks_mut(w))
                .zip(pb.chunks_mut(w))
                .enumerate()
            {
                render_row(luts, y, row_src(y), [r, g, b], add_input);
            }
        }
        RenderMode::Parallel => {
            pr.par_chunks_mut(w)
                .zip(pg.par_chunks_mut(w))
                .zip(pb.par_chunks_mut(w))
                .enumerate()
                .for_each(|(y, ((r, g), b))| render_row(luts, y, row_src(y), [r, g, b], add_input));
        }
    }
    Ok(out)
}

/// Residual image `R`, rows rendered in parallel.
pub fn render_residual<T: Sample>(image: &Image<T>, luts: &LutSet<T>) -> Result<Image<T>> {
    render(image, luts, false, RenderMode::Parallel)
}

/// Residual image `R` on the calling thread only.
pub fn render_residual_serial<T: Sample>(image: &Image<T>, luts: &LutSet<T>) -> Result<Image<T>> {
    render(image, luts, false, RenderMode::Serial)
}

/// `O = R + I` from prebuilt tables, optionally clamped to `[0, 1]`.
pub fn enhance_with<T: Sample>(
    image: &Image<T>,
    luts: &LutSet<T>,
    clamp: bool,
    mode: RenderMode,
) -> Result<Image<T>> {
    let mut out = render(image, luts, true, mode)?;
    if clamp {
        out.clamp01();
    }
    Ok(out)
}

/// Builds tables for this image and returns `O = R + I`.
pub fn enhance<T: Sample>(
    image: &Image<T>,
    curves: &CurveSet,
    depth: u32,
    clamp: bool,
) -> Result<Image<T>> {
    let luts = build_lut_set(curves, depth, image.height(), image.width())?;
    enhance_with(image, &luts, clamp, RenderMode::Parallel)
}

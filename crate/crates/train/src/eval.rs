//! Held-out evaluation: style-transfer PSNR and CSV reports.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use stylecurve_core::enhancer::enhance;
use stylecurve_core::style::StyleLatent;
use stylecurve_core::Image;
use stylecurve_nn::{Pipeline, StyleCodes};

use crate::dataset::StyledSet;
use crate::enhancer_train::StepReport;
use crate::error::{invalid, Result};
use crate::metrics::psnr;

/// Enhances `source` from codes `a` to codes `b` (clamped, as exported).
pub fn transfer(
    pipeline: &Pipeline,
    source: &Image<f32>,
    a: &StyleCodes,
    b: &StyleCodes,
) -> Result<Image<f32>> {
    let curves = pipeline.predict_curves(source, a, b)?;
    Ok(enhance(
        source,
        &curves,
        pipeline.encoder_config().depth,
        true,
    )?)
}

/// Mean PSNR of `transfer(source) vs target` over aligned pairs, in parallel.
pub fn mean_transfer_psnr(
    pipeline: &Pipeline,
    a: &StyleCodes,
    b: &StyleCodes,
    pairs: &[(&Image<f32>, &Image<f32>)],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(invalid("no pairs to evaluate"));
    }
    let scores = pairs
        .par_iter()
        .map(|(s, t)| psnr(&transfer(pipeline, s, a, b)?, *t))
        .collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// `Q x Q` table: entry `[a][b]` is the mean PSNR of mapping style `a`
/// images to style `b` over every held-out base present in both.
pub fn style_matrix_eval(
    pipeline: &Pipeline,
    latents: &[StyleLatent],
    test: &StyledSet,
) -> Result<Vec<Vec<f64>>> {
    if latents.len() != test.styles() {
        return Err(invalid(format!(
            "{} latents for {} styles",
            latents.len(),
            test.styles()
        )));
    }
    let codes = latents
        .iter()
        .map(|l| pipeline.codes(l))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let q = test.styles();
    let mut table = vec![vec![0.0; q]; q];
    for a in 0..q {
        for b in 0..q {
            let pairs: Vec<_> = (0..test.len())
                .filter_map(|n| Some((test.get(a, n)?, test.get(b, n)?)))
                .collect();
            if pairs.is_empty() {
                return Err(invalid(format!(
                    "no held-out pair for {} -> {}",
                    test.style_ids[a], test.style_ids[b]
                )));
            }
            table[a][b] = mean_transfer_psnr(pipeline, &codes[a], &codes[b], &pairs)?;
        }
    }
    Ok(table)
}

/// Mean over the off-diagonal (`a != b`) entries.
pub fn off_diagonal_mean(table: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0;
    for (a, row) in table.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            if a != b {
                sum += v;
                count += 1;
            }
        }
    }
    sum / count as f64
}

/// Mean over every entry.
pub fn table_mean(table: &[Vec<f64>]) -> f64 {
    let n: usize = table.iter().map(Vec::len).sum();
    table.iter().flatten().sum::<f64>() / n as f64
}

pub fn matrix_csv(ids: &[String], table: &[Vec<f64>]) -> String {
    let mut out = String::from("source");
    for id in ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(table) {
        out.push_str(id);
        for v in row {
            let _ = write!(out, ",{v:.4}");
        }
        out.push('\n');
    }
    out
}

pub fn metrics_csv(log: &[StepReport]) -> String {
    let mut out = String::from("step,lr,loss\n");
    for r in log {
        let _ = writeln!(out, "{},{:e},{:e}", r.step, r.lr, r.loss);
    }
    out
}

pub fn write_matrix_csv(path: impl AsRef<Path>, ids: &[String], table: &[Vec<f64>]) -> Result<()> {
    std::fs::write(path, matrix_csv(ids, table))?;
    Ok(())
}

pub fn write_metrics_csv(path: impl AsRef<Path>, log: &[StepReport]) -> Result<()> {
    std::fs::write(path, metrics_csv(log))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_summaries_and_csv() {
        let t = vec![vec![40.0, 30.0], vec![20.0, 50.0]];
        assert_eq!(off_diagonal_mean(&t), 25.0);
        assert_eq!(table_mean(&t), 35.0);
        let csv = matrix_csv(&["a".into(), "b".into()], &t);
        assert_eq!(csv, "source,a,b\na,40.0000,30.0000\nb,20.0000,50.0000\n");
    }

    #[test]
    fn metrics_csv_rows() {
        let log = vec![StepReport {
            step: 3,
            lr: 0.001,
            loss: 2.5,
            pairs: vec![],
        }];
        assert_eq!(metrics_csv(&log), "step,lr,loss\n3,1e-3,2.5e0\n");
    }
}

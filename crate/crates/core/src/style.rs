//! Style embeddings: normalized-softmax classification loss, centroid
//! latents and nearest-centroid recall.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::jsonfmt;

/// Default logit scale `s` for the cosine classifier.
pub const DEFAULT_SCALE: f64 = 30.0;
/// Centroids shorter than this before renormalization are rejected.
pub const DEGENERATE_THRESHOLD: f64 = 1e-8;
pub const LATENT_FORMAT_VERSION: u64 = 1;
const UNIT_TOLERANCE: f64 = 1e-6;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw style-encoder output after global pooling.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "embedding dimension must be at least 2, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding has non-finite entries"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| c * v).collect())
    }

    fn nonzero_norm(&self) -> Result<f64> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::invalid("embedding has zero norm"));
        }
        Ok(n)
    }
}

/// Unit-norm style code with a note on where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleLatent {
    values: Vec<f64>,
    provenance: String,
}

impl StyleLatent {
    /// Wraps an already-normalized vector.
    pub fn new(values: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        let n = norm(&values);
        if values.len() < 2 || !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::invalid(format!(
                "style latent must be a unit vector of dimension >= 2 (norm {n})"
            )));
        }
        Ok(Self {
            values,
            provenance: provenance.into(),
        })
    }

    pub fn from_embedding(f: &Embedding, provenance: impl Into<String>) -> Result<Self> {
        let n = f.nonzero_norm()?;
        Ok(Self {
            values: f.values().iter().map(|v| v / n).collect(),
            provenance: provenance.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = jsonfmt::object(
            &[
                ("version".into(), LATENT_FORMAT_VERSION.to_string()),
                ("dimension".into(), self.values.len().to_string()),
                ("values".into(), jsonfmt::array(&self.values)),
                ("provenance".into(), jsonfmt::string(&self.provenance)),
            ],
            0,
        );
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        match v.get("version").and_then(Value::as_u64) {
            Some(LATENT_FORMAT_VERSION) => {}
            other => {
                return Err(Error::invalid(format!(
                    "unsupported style latent version {other:?}"
                )))
            }
        }
        let dim = v
            .get("dimension")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::invalid("missing \"dimension\""))? as usize;
        let values = v
            .get("values")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::invalid("missing \"values\" array"))?
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| Error::invalid("non-numeric latent value"))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(Error::invalid(format!(
                "declared dimension {dim} but {} values",
                values.len()
            )));
        }
        let provenance = v
            .get("provenance")
            .and_then(Value::as_str)
            .unwrap_or_default();
        Self::new(values, provenance)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Bias-free final layer of the style classifier: one weight row per style.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead {
    weights: Vec<Vec<f64>>,
    scale: f64,
}

impl ClassifierHead {
    pub fn new(weights: Vec<Vec<f64>>, scale: f64) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::invalid("classifier needs at least 2 styles"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!(
                "scale must be positive, got {scale}"
            )));
        }
        let dim = weights[0].len();
        for (q, w) in weights.iter().enumerate() {
            if w.len() != dim {
                return Err(Error::invalid(format!(
                    "weight row {q} has dimension {}, expected {dim}",
                    w.len()
                )));
            }
            let n = norm(w);
            if n == 0.0 || !n.is_finite() {
                return Err(Error::invalid(format!("weight row {q} has zero norm")));
            }
        }
        Ok(Self { weights, scale })
    }

    pub fn styles(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Cosine similarity of `f` to every weight row.
    pub fn cosines(&self, f: &Embedding) -> Result<Vec<f64>> {
        self.check_dim(f)?;
        let nf = f.nonzero_norm()?;
        Ok(self
            .weights
            .iter()
            .map(|w| dot(f.values(), w) / (nf * norm(w)))
            .collect())
    }

    fn check_dim(&self, f: &Embedding) -> Result<()> {
        if f.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "embedding dimension {} does not match classifier {}",
                f.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_label(&self, p: usize) -> Result<()> {
        if p >= self.styles() {
            return Err(Error::invalid(format!(
                "style label {p} not in 0..{}",
                self.styles()
            )));
        }
        Ok(())
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `-log softmax(s * cos)_p` over the classifier's styles.
pub fn classify_loss(f: &Embedding, head: &ClassifierHead, p: usize) -> Result<f64> {
    Ok(classify_loss_grad(f, head, p)?.loss)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifyGrad {
    pub loss: f64,
    pub d_embedding: Vec<f64>,
    /// One row per style, same layout as [`ClassifierHead::weights`].
    pub d_weights: Vec<Vec<f64>>,
}

/// Loss together with its gradient with respect to `f` and every weight row.
pub fn classify_loss_grad(f: &Embedding, head: &ClassifierHead, p: usize) -> Result<ClassifyGrad> {
    head.check_label(p)?;
    head.check_dim(f)?;
    let nf = f.nonzero_norm()?;
    let f_hat: Vec<f64> = f.values().iter().map(|v| v / nf).collect();
    let norms: Vec<f64> = head.weights.iter().map(|w| norm(w)).collect();
    let cos: Vec<f64> = head
        .weights
        .iter()
        .zip(&norms)
        .map(|(w, nw)| dot(&f_hat, w) / nw)
        .collect();
    let logits: Vec<f64> = cos.iter().map(|c| head.scale * c).collect();
    let lse = log_sum_exp(&logits);
    let loss = lse - logits[p];

    let mut d_embedding = vec![0.0; f.dim()];
    let mut d_weights = Vec::with_capacity(head.styles());
    for (q, (w, nw)) in head.weights.iter().zip(&norms).enumerate() {
        let prob = (logits[q] - lse).exp();
        let d_cos = head.scale * (prob - if q == p { 1.0 } else { 0.0 });
        // d cos / d f = (w_hat - cos f_hat) / |f|,  d cos / d w = (f_hat - cos w_hat) / |w|
        let mut dw = Vec::with_capacity(w.len());
        for k in 0..w.len() {
            let w_hat = w[k] / nw;
            d_embedding[k] += d_cos * (w_hat - cos[q] * f_hat[k]) / nf;
            dw.push(d_cos * (f_hat[k] - cos[q] * w_hat) / nw);
        }
        d_weights.push(dw);
    }
    Ok(ClassifyGrad {
        loss,
        d_embedding,
        d_weights,
    })
}

/// Mean of the L2-normalized embeddings, normalized again.
pub fn average_latent(
    embeddings: &[Embedding],
    provenance: impl Into<String>,
) -> Result<StyleLatent> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::invalid("need at least one embedding"))?;
    let dim = first.dim();
    let mut acc = vec![0.0; dim];
    for (k, f) in embeddings.iter().enumerate() {
        if f.dim() != dim {
            return Err(Error::invalid(format!(
                "embedding {k} has dimension {}, expected {dim}",
                f.dim()
            )));
        }
        let n = f.nonzero_norm()?;
        for (a, v) in acc.iter_mut().zip(f.values()) {
            *a += v / n;
        }
    }
    let count = embeddings.len() as f64;
    for a in &mut acc {
        *a /= count;
    }
    let n = norm(&acc);
    if n < DEGENERATE_THRESHOLD {
        return Err(Error::DegenerateCentroid {
            norm: n,
            threshold: DEGENERATE_THRESHOLD,
        });
    }
    Ok(StyleLatent {
        values: acc.into_iter().map(|v| v / n).collect(),
        provenance: provenance.into(),
    })
}

/// Index of the closest center by cosine similarity; ties go to the lowest key.
pub fn nearest_center(f: &Embedding, centers: &BTreeMap<usize, StyleLatent>) -> Result<usize> {
    let nf = f.nonzero_norm()?;
    let mut best: Option<(usize, f64)> = None;
    for (&style, c) in centers {
        if c.dim() != f.dim() {
            return Err(Error::invalid(format!(
                "center {style} has dimension {}, embedding has {}",
                c.dim(),
                f.dim()
            )));
        }
        let cos = dot(f.values(), c.values()) / nf;
        if best.map_or(true, |(_, b)| cos > b) {
            best = Some((style, cos));
        }
    }
    best.map(|(s, _)| s)
        .ok_or_else(|| Error::invalid("no centers to compare against"))
}

/// Per-style fraction of embeddings whose nearest center carries their label.
///
/// Only styles that occur in `labels` appear in the result.
pub fn recall_at_1(
    embeddings: &[Embedding],
    labels: &[usize],
    centers: &BTreeMap<usize, StyleLatent>,
) -> Result<BTreeMap<usize, f64>> {
    if embeddings.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} embeddings but {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    let mut hits: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (f, &label) in embeddings.iter().zip(labels) {
        if !centers.contains_key(&label) {
            return Err(Error::invalid(format!("no center for style {label}")));
        }
        let entry = hits.entry(label).or_default();
        entry.1 += 1;
        if nearest_center(f, centers)? == label {
            entry.0 += 1;
        }
    }
    Ok(hits
        .into_iter()
        .map(|(s, (hit, total))| (s, hit as f64 / total as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_softmax_is_log_q() {
        let w = vec![vec![0.3, -0.2, 0.9]; 5];
        let head = ClassifierHead::new(w, 30.0).unwrap();
        let l = classify_loss(&emb(&[1.0, 2.0, 3.0]), &head, 2).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn two_style_reference_value() {
        let head = ClassifierHead::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).unwrap();
        let l = classify_loss(&emb(&[2.0, 0.0]), &head, 0).unwrap();
        // ln(1 + e^-1), evaluated independently
        assert!((l - 0.31326168751822286).abs() < 1e-12);
    }

    #[test]
    fn loss_errors() {
        let head = ClassifierHead::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).unwrap();
        assert!(classify_loss(&emb(&[0.0, 0.0]), &head, 0).is_err());
        assert!(classify_loss(&emb(&[1.0, 0.0]), &head, 2).is_err());
        assert!(classify_loss(&emb(&[1.0, 0.0, 1.0]), &head, 0).is_err());
        assert!(ClassifierHead::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]], 1.0).is_err());
        assert!(ClassifierHead::new(vec![vec![1.0, 0.0]], 1.0).is_err());
        assert!(ClassifierHead::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.0).is_err());
    }

    #[test]
    fn grad_value_matches_loss() {
        let head = ClassifierHead::new(
            vec![
                vec![0.3, -0.2, 0.9],
                vec![-1.0, 0.5, 0.1],
                vec![0.2, 0.2, 0.2],
            ],
            7.0,
        )
        .unwrap();
        let f = emb(&[0.4, -0.8, 0.3]);
        let g = classify_loss_grad(&f, &head, 1).unwrap();
        assert_eq!(g.loss, classify_loss(&f, &head, 1).unwrap());
        // gradient is orthogonal to f: the loss is scale invariant
        assert!(dot(&g.d_embedding, f.values()).abs() < 1e-12);
    }

    #[test]
    fn average_examples() {
        let l = average_latent(&[emb(&[3.0, 4.0])], "one").unwrap();
        assert!((l.values()[0] - 0.6).abs() < 1e-15 && (l.values()[1] - 0.8).abs() < 1e-15);
        assert_eq!(l.provenance(), "one");
        let l = average_latent(&[emb(&[1.0, 0.0]), emb(&[0.0, 1.0])], "").unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((l.values()[0] - r).abs() < 1e-15 && (l.values()[1] - r).abs() < 1e-15);
        assert!(matches!(
            average_latent(&[emb(&[1.0, 0.0]), emb(&[-1.0, 0.0])], ""),
            Err(Error::DegenerateCentroid { .. })
        ));
        assert!(matches!(
            average_latent(&[], ""),
            Err(Error::InvalidInput(_))
        ));
        assert!(average_latent(&[emb(&[0.0, 0.0])], "").is_err());
    }

    #[test]
    fn recall_examples() {
        let centers: BTreeMap<usize, StyleLatent> = [
            (0, StyleLatent::new(vec![1.0, 0.0], "a").unwrap()),
            (1, StyleLatent::new(vec![0.0, 1.0], "b").unwrap()),
        ]
        .into();
        let r = recall_at_1(
            &[emb(&[1.0, 0.0]), emb(&[0.0, 2.0]), emb(&[0.1, 3.0])],
            &[0, 1, 1],
            &centers,
        )
        .unwrap();
        assert_eq!(r, BTreeMap::from([(0, 1.0), (1, 1.0)]));
        // equidistant: lowest style index wins
        let r = recall_at_1(&[emb(&[1.0, 1.0])], &[1], &centers).unwrap();
        assert_eq!(r[&1], 0.0);
        assert_eq!(nearest_center(&emb(&[1.0, 1.0]), &centers).unwrap(), 0);
        assert!(recall_at_1(&[emb(&[1.0, 1.0])], &[3], &centers).is_err());
        assert!(recall_at_1(&[emb(&[1.0, 1.0])], &[], &centers).is_err());
    }

    #[test]
    fn latent_json_round_trip() {
        let l = average_latent(
            &[emb(&[0.3, -1.7, 2.2]), emb(&[1.0, 0.1, 0.0])],
            "user gallery",
        )
        .unwrap();
        let back = StyleLatent::from_json(&l.to_json()).unwrap();
        assert_eq!(back, l);
        let mut v: Value = serde_json::from_str(&l.to_json()).unwrap();
        v["dimension"] = 4.into();
        assert!(StyleLatent::from_value(&v).is_err());
        let mut v: Value = serde_json::from_str(&l.to_json()).unwrap();
        v["values"] = serde_json::json!([1.0, 1.0, 0.0]);
        assert!(StyleLatent::from_value(&v).is_err());
    }
}

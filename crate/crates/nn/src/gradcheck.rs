//! Central finite-difference check of graph gradients.

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Analytic and numeric gradients of one scalar function.
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub analytic: Vec<Tensor>,
    pub numeric: Vec<Tensor>,
}

impl GradCheck {
    /// `|a - n| / max(|a|, |n|)` over all parameters, 0 when both vanish.
    pub fn relative_error(&self) -> f64 {
        let mut diff = 0.0;
        let mut na = 0.0;
        let mut nn = 0.0;
        for (a, n) in self.analytic.iter().zip(&self.numeric) {
            for (x, y) in a.data().iter().zip(n.data()) {
                diff += (x - y) * (x - y);
                na += x * x;
                nn += y * y;
            }
        }
        let scale = na.sqrt().max(nn.sqrt());
        if scale == 0.0 {
            0.0
        } else {
            diff.sqrt() / scale
        }
    }
}

/// Builds `f` on fresh graphs with `params` bound as trainable leaves and
/// compares the tape gradient to central differences with step `h`.
pub fn check_gradients<F>(params: &[Tensor], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars = ps
            .iter()
            .map(|t| g.param(t.clone()))
            .collect::<Result<Vec<_>>>()?;
        let root = f(&mut g, &vars)?;
        Ok(g.value(root).data()[0])
    };

    let mut g = Graph::new();
    let vars = params
        .iter()
        .map(|t| g.param(t.clone()))
        .collect::<Result<Vec<_>>>()?;
    let root = f(&mut g, &vars)?;
    let grads = g.backward(root)?;
    let analytic = vars
        .iter()
        .map(|&v| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(g.value(v).shape()))
        })
        .collect();

    let mut work = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut d = Tensor::zeros(params[p].shape());
        for k in 0..params[p].len() {
            let orig = work[p].data()[k];
            work[p].data_mut()[k] = orig + h;
            let up = eval(&work)?;
            work[p].data_mut()[k] = orig - h;
            let down = eval(&work)?;
            work[p].data_mut()[k] = orig;
            d.data_mut()[k] = (up - down) / (2.0 * h);
        }
        numeric.push(d);
    }
    Ok(GradCheck { analytic, numeric })
}

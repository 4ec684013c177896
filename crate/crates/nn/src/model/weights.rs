use indexmap::IndexMap;

use super::config::ModelConfig;
use crate::error::{invalid, Result};
use crate::graph::{Gradients, Graph, Var};
use crate::tensor::Tensor;

/// Named tensors of one network plus the configuration they were built for.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    config: ModelConfig,
    tensors: IndexMap<String, Tensor>,
}

impl ModelWeights {
    /// Checks that `tensors` holds exactly the config's manifest, in order.
    pub fn new(config: ModelConfig, tensors: IndexMap<String, Tensor>) -> Result<Self> {
        config.validate()?;
        let manifest = config.manifest();
        if manifest.len() != tensors.len() {
            return Err(invalid(format!(
                "{} expects {} tensors, got {}",
                config.kind(),
                manifest.len(),
                tensors.len()
            )));
        }
        for ((name, shape), (have, t)) in manifest.iter().zip(&tensors) {
            if name != have || shape.as_slice() != t.shape() {
                return Err(invalid(format!(
                    "expected tensor {name} {shape:?}, found {have} {:?}",
                    t.shape()
                )));
            }
            if !t.is_finite() {
                return Err(invalid(format!("tensor {name} has non-finite values")));
            }
        }
        Ok(Self { config, tensors })
    }

    /// All-zero weights for `config`.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let tensors = config
            .manifest()
            .into_iter()
            .map(|(n, s)| {
                let t = Tensor::zeros(&s);
                (n, t)
            })
            .collect();
        Self::new(config, tensors)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &IndexMap<String, Tensor> {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    /// Mutable access to the values. Shapes cannot change through this.
    pub fn values_mut(&mut self) -> impl Iterator<Item = (&str, &mut [f64])> {
        self.tensors
            .iter_mut()
            .map(|(n, t)| (n.as_str(), t.data_mut()))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Adds every tensor to `g`, trainable or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Result<Params> {
        let mut vars = IndexMap::with_capacity(self.tensors.len());
        for (name, t) in &self.tensors {
            let v = if trainable {
                g.param(t.clone())?
            } else {
                g.input(t.clone())?
            };
            vars.insert(name.clone(), v);
        }
        Ok(Params { vars })
    }
}

/// Graph handles of one bound [`ModelWeights`].
#[derive(Clone, Debug)]
pub struct Params {
    vars: IndexMap<String, Var>,
}

impl Params {
    /// Handles supplied by the caller, e.g. leaves created outside [`ModelWeights::bind`].
    pub fn from_vars(vars: impl IntoIterator<Item = (String, Var)>) -> Self {
        Self {
            vars: vars.into_iter().collect(),
        }
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| invalid(format!("no parameter named {name}")))
    }

    /// Gradient for every parameter in manifest order; unused ones are zero.
    pub fn gradients(&self, g: &Graph, grads: &Gradients) -> Vec<Tensor> {
        self.vars
            .values()
            .map(|&v| {
                grads
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(g.value(v).shape()))
            })
            .collect()
    }
}

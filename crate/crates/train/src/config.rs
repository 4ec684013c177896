use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_min: f64,
    pub seed: u64,
    /// Learning-rate multiplier for the style classifier head.
    pub head_lr_multiplier: f64,
    /// Smallest exemplar subset averaged into a training latent.
    pub subset_min: usize,
    /// Largest subset; `None` means the whole pool.
    pub subset_max: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            lr0: 1e-3,
            lr_min: 1e-6,
            seed: 0,
            head_lr_multiplier: 10.0,
            subset_min: 2,
            subset_max: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        if !(self.lr0.is_finite() && self.lr_min >= 0.0 && self.lr0 > self.lr_min) {
            return Err(invalid(format!(
                "need lr0 > lr_min >= 0, got {} and {}",
                self.lr0, self.lr_min
            )));
        }
        if !(self.head_lr_multiplier.is_finite() && self.head_lr_multiplier > 0.0) {
            return Err(invalid("head learning-rate multiplier must be positive"));
        }
        if self.subset_min == 0 || self.subset_max.is_some_and(|m| m < self.subset_min) {
            return Err(invalid(format!(
                "bad subset range {}..={:?}",
                self.subset_min, self.subset_max
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(
            (c.batch_size, c.lr0, c.head_lr_multiplier),
            (16, 1e-3, 10.0)
        );
        assert_eq!((c.subset_min, c.subset_max), (2, None));
    }

    #[test]
    fn rejects_bad_values() {
        let base = TrainConfig::default();
        for bad in [
            TrainConfig {
                batch_size: 0,
                ..base.clone()
            },
            TrainConfig {
                lr0: 1e-6,
                lr_min: 1e-6,
                ..base.clone()
            },
            TrainConfig {
                lr_min: -1.0,
                ..base.clone()
            },
            TrainConfig {
                head_lr_multiplier: 0.0,
                ..base.clone()
            },
            TrainConfig {
                subset_min: 0,
                ..base.clone()
            },
            TrainConfig {
                subset_min: 4,
                subset_max: Some(3),
                ..base.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        TrainConfig { epochs: 0, ..base }.validate().unwrap();
    }
}

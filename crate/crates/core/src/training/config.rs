use crate::decoder::{Mode, ModelConfig};
use crate::error::{Error, Result};

/// Training hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// Side of the square LR patch fed to the encoder.
    pub patch_size: usize,
    /// HR pixels sampled (without replacement) from each patch.
    pub pixels_per_patch: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Draw only integer scales from `[scale_min, scale_max]`.
    pub integer_scales: bool,
    pub lr: f64,
    /// Halve (by `lr_decay_factor`) every this many epochs.
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// The published schedule: 48×48 LR patches, 2304 pixels each, scales
    /// in `[1, 4]`, Adam at 1e-4 halved every 200 of 1000 epochs.
    pub fn paper(mode: Mode) -> Self {
        TrainConfig {
            model: ModelConfig::paper(mode),
            patch_size: 48,
            pixels_per_patch: 2304,
            scale_min: 1.0,
            scale_max: 4.0,
            integer_scales: false,
            lr: 1e-4,
            lr_decay_every: 200,
            lr_decay_factor: 0.5,
            epochs: 1000,
            iters_per_epoch: 1000,
            batch_size: 16,
            seed: 0,
        }
    }

    /// Same mechanism on a laptop budget: 30 epochs of 100 iterations with
    /// the learning rate halved every 10 epochs.
    pub fn desk(mode: Mode) -> Self {
        TrainConfig {
            model: ModelConfig::desk(mode),
            epochs: 30,
            iters_per_epoch: 100,
            lr_decay_every: 10,
            batch_size: 4,
            ..Self::paper(mode)
        }
    }

    /// The desk schedule on 32–64 px images: 8×8 LR patches (so a ×4 crop
    /// still fits), every pixel of a ×1 crop, larger batches and step size.
    pub fn toy(mode: Mode) -> Self {
        TrainConfig {
            patch_size: 8,
            pixels_per_patch: 64,
            batch_size: 32,
            lr: 4e-3,
            ..Self::desk(mode)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let check = |ok: bool, key: &str, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(key, msg))
            }
        };
        check(self.patch_size >= 8, "patch_size", format!("must be ≥ 8, got {}", self.patch_size))?;
        check(
            self.pixels_per_patch >= 1 && self.pixels_per_patch <= self.patch_size * self.patch_size,
            "pixels_per_patch",
            format!(
                "must be in [1, patch_size²] = [1, {}], got {}",
                self.patch_size * self.patch_size,
                self.pixels_per_patch
            ),
        )?;
        check(
            self.scale_min >= 1.0 && self.scale_max <= 8.0 && self.scale_min <= self.scale_max,
            "scale_min",
            format!(
                "scale range [{}, {}] must lie within [1, 8]",
                self.scale_min, self.scale_max
            ),
        )?;
        check(
            !self.integer_scales || self.scale_min.ceil() <= self.scale_max.floor(),
            "integer_scales",
            "scale range contains no integer".into(),
        )?;
        check(self.lr > 0.0 && self.lr.is_finite(), "lr", format!("must be positive, got {}", self.lr))?;
        check(self.lr_decay_every >= 1, "lr_decay_every", "must be ≥ 1".into())?;
        check(
            self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0,
            "lr_decay_factor",
            "must be in (0, 1]".into(),
        )?;
        check(self.epochs >= 1, "epochs", "must be ≥ 1".into())?;
        check(self.iters_per_epoch >= 1, "iters_per_epoch", "must be ≥ 1".into())?;
        check(self.batch_size >= 1, "batch_size", "must be ≥ 1".into())?;
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based): step decay.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay_factor.powi((epoch / self.lr_decay_every) as i32)
    }
}

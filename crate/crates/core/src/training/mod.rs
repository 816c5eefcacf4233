//! Patch sampling, L1 regression and Adam with step decay.

mod adam;
mod config;
mod data;

use std::path::Path;

pub use adam::{adam_step, AdamState};
pub use config::TrainConfig;
pub use data::{png_files, sample_batch, sample_item, Batch, Dataset, Sample};

use crate::decoder::{rgb_tensor, Model, QueryPoint};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::params::Bound;
use crate::rng::{stream, Rng};
use crate::tensor::Tape;

/// Loss of one optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub iteration: usize,
    pub loss: f64,
    pub lr: f64,
}

pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<LossRecord>,
    pub adam: AdamState,
}

/// Mean L1 loss of `model` on `batch`, and the per-parameter gradients.
pub fn loss_and_gradients(model: &Model, batch: &Batch) -> Result<(f64, Vec<Option<crate::Tensor>>)> {
    let mut tape = Tape::new();
    let p = Bound::bind(&mut tape, model.params(), true);
    let items: Vec<(&Image, &[QueryPoint])> = batch
        .items
        .iter()
        .map(|s| (&s.lr, s.queries.as_slice()))
        .collect();
    let pred = model.forward_batch(&mut tape, &p, &items)?;
    let targets: Vec<[f32; 3]> = batch.items.iter().flat_map(|s| s.targets.iter().copied()).collect();
    let target = tape.constant(rgb_tensor(&targets)?);
    let loss = tape.l1_loss(pred, target)?;
    let value = tape.value(loss).item()? as f64;
    let mut grads = tape.backward(loss)?;
    Ok((value, p.gradients(&mut grads)))
}

/// One Adam step on `batch`; returns the loss before the update.
pub fn train_step(model: &mut Model, state: &mut AdamState, batch: &Batch, lr: f64) -> Result<f64> {
    let (loss, grads) = loss_and_gradients(model, batch)?;
    if loss.is_finite() {
        adam_step(model.params_mut(), &grads, state, lr)?;
    }
    Ok(loss)
}

/// Trains a fresh model. Initialization and data draw from independent
/// streams of `config.seed`, so the result is a function of
/// `(config, dataset)` alone.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(dataset, config, |_| {})
}

/// [`train`], calling `observe` after every step.
pub fn train_with(
    dataset: &Dataset,
    config: &TrainConfig,
    mut observe: impl FnMut(&LossRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("dataset has no images".into()));
    }
    let mut model = Model::new(config.model.clone(), config.seed)?;
    let mut adam = AdamState::new(model.params());
    let mut rng: Rng = stream(config.seed, "data");
    let mut history = Vec::with_capacity(config.epochs * config.iters_per_epoch);
    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        for iteration in 0..config.iters_per_epoch {
            let batch = sample_batch(dataset, config, &mut rng)?;
            let loss = train_step(&mut model, &mut adam, &batch, lr)?;
            if !loss.is_finite() || !model.params().all_finite() {
                return Err(Error::NonFinite { epoch, iteration });
            }
            let record = LossRecord {
                epoch,
                iteration,
                loss,
                lr,
            };
            observe(&record);
            history.push(record);
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        adam,
    })
}

/// Writes `epoch,iteration,loss,lr` rows with a header.
pub fn write_loss_csv(path: impl AsRef<Path>, history: &[LossRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["epoch", "iteration", "loss", "lr"])?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.iteration.to_string(),
            r.loss.to_string(),
            r.lr.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parses a file written by [`write_loss_csv`].
pub fn read_loss_csv(path: impl AsRef<Path>) -> Result<Vec<LossRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let field = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| Error::Decode { path: path.to_path_buf(), message: format!("missing column {i}") })
        };
        let bad = |e: &dyn std::fmt::Display| Error::Decode { path: path.to_path_buf(), message: e.to_string() };
        out.push(LossRecord {
            epoch: field(0)?.parse().map_err(|e| bad(&e))?,
            iteration: field(1)?.parse().map_err(|e| bad(&e))?,
            loss: field(2)?.parse().map_err(|e| bad(&e))?,
            lr: field(3)?.parse().map_err(|e| bad(&e))?,
        });
    }
    Ok(out)
}

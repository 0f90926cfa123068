use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use super::loss::{argmax_rows, softmax_cross_entropy};
use super::optim::{Optimizer, OptimizerConfig};
use super::{Mode, Network, NetworkSpec};
use crate::data::{DataSplit, Dataset};
use crate::error::{Error, Result};
use crate::Real;

/// Samples per forward pass when evaluating.
pub const EVAL_BATCH: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub epochs: usize,
    /// Drives shuffling and dropout masks; initialization uses the spec seed.
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 {
            return Err(Error::argument("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// Non-finite values serialize as JSON `null` and read back as NaN.
fn nan_from_null<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    #[serde(deserialize_with = "nan_from_null")]
    pub train_loss: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub test_loss: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    #[serde(deserialize_with = "nan_from_null")]
    pub final_test_acc: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub final_test_loss: f64,
    /// One entry per completed epoch. A diverged run stops after the epoch
    /// in which a non-finite loss or gradient appeared.
    pub per_epoch: Vec<EpochMetrics>,
    pub wall_seconds: f64,
    pub seed: u64,
    pub diverged: bool,
}

pub const EPOCH_CSV_HEADER: [&str; 4] = ["epoch", "train_loss", "test_loss", "test_acc"];

impl RunResult {
    /// Writes one row per epoch under [`EPOCH_CSV_HEADER`].
    pub fn write_epochs_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(EPOCH_CSV_HEADER)?;
        for e in &self.per_epoch {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.test_loss.to_string(),
                e.test_acc.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Whole-set mean cross-entropy and accuracy in eval mode.
pub fn evaluate<T: Real>(net: &Network<T>, ds: &Dataset) -> Result<(f64, f64)> {
    if ds.is_empty() {
        return Err(Error::argument("cannot evaluate on an empty dataset"));
    }
    let input = net.spec().input_shape.clone();
    let idx: Vec<usize> = (0..ds.len()).collect();
    let (mut loss, mut correct) = (0.0, 0usize);
    for chunk in idx.chunks(EVAL_BATCH) {
        let x = ds.batch::<T>(chunk, &input)?;
        let y = ds.batch_labels(chunk);
        let logits = net.predict(&x)?;
        loss += softmax_cross_entropy(&logits, &y)?.0 * chunk.len() as f64;
        correct += argmax_rows(&logits)
            .iter()
            .zip(&y)
            .filter(|(p, t)| p == t)
            .count();
    }
    let n = ds.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn train<T: Real>(spec: &NetworkSpec, config: &TrainConfig, data: &DataSplit) -> Result<RunResult> {
    Ok(train_network::<T>(spec, config, data, |_| {})?.1)
}

/// Trains from a fresh initialization and returns the final network along
/// with its metrics. `on_epoch` sees each epoch's metrics as they complete.
pub fn train_network<T: Real>(
    spec: &NetworkSpec,
    config: &TrainConfig,
    data: &DataSplit,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Network<T>, RunResult)> {
    config.validate()?;
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::argument("train and test sets must be nonempty"));
    }
    let start = Instant::now();
    let mut net = Network::<T>::new(spec)?;
    let mut opt = Optimizer::new(config.optimizer, &net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let input = spec.input_shape.clone();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut per_epoch = Vec::with_capacity(config.epochs);
    let mut diverged = false;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let x = data.train.batch::<T>(chunk, &input)?;
            let y = data.train.batch_labels(chunk);
            let (_, tape) = net.forward(&x, Mode::Train, &mut rng)?;
            let (loss, grads) = net.backward(&tape, &y)?;
            if !loss.is_finite() || !grads.all_finite() {
                loss_sum = f64::NAN;
                diverged = true;
                break;
            }
            opt.step(&mut net, &grads)?;
            loss_sum += loss * chunk.len() as f64;
        }
        let (test_loss, test_acc) = evaluate(&net, &data.test)?;
        diverged |= !test_loss.is_finite();
        let m = EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / data.train.len() as f64,
            test_loss,
            test_acc,
        };
        on_epoch(&m);
        per_epoch.push(m);
        if diverged {
            break;
        }
    }
    let last = per_epoch.last().copied();
    let result = RunResult {
        final_test_acc: last.map_or(f64::NAN, |m| m.test_acc),
        final_test_loss: last.map_or(f64::NAN, |m| m.test_loss),
        per_epoch,
        wall_seconds: start.elapsed().as_secs_f64(),
        seed: config.seed,
        diverged,
    };
    Ok((net, result))
}

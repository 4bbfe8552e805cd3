//! Mini-batch gradient descent with early stopping, and grid search over
//! batch size and learning rate.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{DecodeMode, ModelConfig, Seq2Seq};
use super::tagger::Tagger;
use super::NeuralError;
use crate::dataset::Corpus;
use crate::scalar::Scalar;
use crate::vocab::{OovPolicy, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without a strictly lower dev error before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Half-width of the uniform weight initialisation.
    pub init_scale: f64,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub decode_mode: DecodeMode,
    pub oov: OovPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            learning_rate: 0.5,
            patience: 5,
            max_epochs: 100,
            seed: 0,
            init_scale: 0.4,
            clip_norm: Some(5.0),
            decode_mode: DecodeMode::Constrained,
            oov: OovPolicy::Unk,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(NeuralError::Train("batch_size, patience and max_epochs must be at least 1".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(NeuralError::Train(format!("init scale {} is not a non-negative number", self.init_scale)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(NeuralError::Train(format!("learning rate {} is not a non-negative number", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl History {
    /// `# key=value` provenance lines, then `epoch\ttrain_loss\tdev_metric` rows.
    pub fn to_text(&self, meta: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in meta {
            writeln!(out, "# {k}={v}").unwrap();
        }
        writeln!(out, "# best_epoch={}", self.best_epoch).unwrap();
        out.push_str("epoch\ttrain_loss\tdev_metric\n");
        for r in &self.records {
            writeln!(out, "{}\t{:.8}\t{:.8}", r.epoch, r.train_loss, r.dev_metric).unwrap();
        }
        out
    }

    pub fn best_metric(&self) -> Option<f64> {
        self.records.iter().find(|r| r.epoch == self.best_epoch).map(|r| r.dev_metric)
    }
}

/// Tracks the best dev metric and counts epochs without strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: None, stale: 0 }
    }

    pub fn observe(&mut self, metric: f64) -> StopDecision {
        let improved = self.best.is_none_or(|b| metric < b);
        if improved {
            self.best = Some(metric);
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        StopDecision { improved, stop: self.stale >= self.patience }
    }
}

pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the lowest dev error.
    pub tagger: Tagger<T>,
    pub history: History,
}

pub fn train<T: Scalar>(
    train: &Corpus,
    dev: &Corpus,
    vocab: &Vocabulary,
    mconfig: &ModelConfig,
    tconfig: &TrainConfig,
) -> Result<TrainOutcome<T>, NeuralError> {
    tconfig.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(NeuralError::Train("train and dev corpora must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tconfig.seed);
    let model = Seq2Seq::<T>::init(mconfig.clone(), tconfig.init_scale, &mut rng)?;
    let mut tagger = Tagger::new(model, vocab.clone())?;
    let examples = tagger.examples(train, tconfig.oov);
    let lr = T::lit(tconfig.learning_rate);
    let diverged = |epoch: usize, what: &str| NeuralError::Diverged {
        epoch,
        learning_rate: tconfig.learning_rate,
        what: what.to_string(),
    };

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut stopper = EarlyStopping::new(tconfig.patience);
    let mut history = History::default();
    let mut best = tagger.clone();
    for epoch in 1..=tconfig.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(tconfig.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let (loss, mut grad) = tagger.model.loss_and_gradients(&batch).map_err(|e| match e {
                NeuralError::NonFinite(what) => diverged(epoch, &what),
                other => other,
            })?;
            if let Some(max_norm) = tconfig.clip_norm {
                let norm = grad.norm().to_f64().unwrap_or(f64::INFINITY);
                if norm > max_norm {
                    grad.scale(T::lit(max_norm / norm));
                }
            }
            tagger.model.params_mut().add_scaled(&grad, -lr);
            loss_sum += loss.to_f64().unwrap_or(f64::NAN);
            batches += 1;
        }
        if !tagger.model.params().all_finite() {
            return Err(diverged(epoch, "parameters"));
        }
        let dev_metric = tagger.evaluate(dev, tconfig.decode_mode, tconfig.oov)?.mean_errors_per_point;
        history.records.push(EpochRecord { epoch, train_loss: loss_sum / batches as f64, dev_metric });
        let decision = stopper.observe(dev_metric);
        if decision.improved {
            best = tagger.clone();
            history.best_epoch = epoch;
        }
        if decision.stop {
            break;
        }
    }
    Ok(TrainOutcome { tagger: best, history })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { batch_sizes: vec![16, 32, 64], learning_rates: vec![0.1, 0.03, 0.01] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Best dev metric, or the reason the cell was excluded.
    pub result: Result<f64, String>,
}

pub struct GridOutcome<T> {
    pub config: TrainConfig,
    pub outcome: TrainOutcome<T>,
    pub cells: Vec<GridCell>,
}

/// Trains one model per grid cell and keeps the lowest best-dev error.
/// Ties go to the lower learning rate, then the smaller batch. Cells whose
/// training diverges are excluded.
pub fn grid_search<T: Scalar>(
    train_corpus: &Corpus,
    dev: &Corpus,
    vocab: &Vocabulary,
    mconfig: &ModelConfig,
    base: &TrainConfig,
    grid: &GridSpec,
) -> Result<GridOutcome<T>, NeuralError> {
    if grid.batch_sizes.is_empty() || grid.learning_rates.is_empty() {
        return Err(NeuralError::Train("grid must have at least one batch size and learning rate".into()));
    }
    let mut cells = Vec::new();
    let mut best: Option<(f64, TrainConfig, TrainOutcome<T>)> = None;
    for &batch_size in &grid.batch_sizes {
        for &learning_rate in &grid.learning_rates {
            let config = TrainConfig { batch_size, learning_rate, ..base.clone() };
            match train::<T>(train_corpus, dev, vocab, mconfig, &config) {
                Ok(outcome) => {
                    let metric = outcome.history.best_metric().unwrap_or(f64::INFINITY);
                    cells.push(GridCell { batch_size, learning_rate, result: Ok(metric) });
                    let key = (metric, learning_rate, batch_size);
                    let better = match &best {
                        None => true,
                        Some((m, c, _)) => key.partial_cmp(&(*m, c.learning_rate, c.batch_size)) == Some(std::cmp::Ordering::Less),
                    };
                    if better {
                        best = Some((metric, config, outcome));
                    }
                }
                Err(e) if e.is_numeric() => {
                    cells.push(GridCell { batch_size, learning_rate, result: Err(e.to_string()) });
                }
                Err(e) => return Err(e),
            }
        }
    }
    let (_, config, outcome) = best.ok_or_else(|| NeuralError::NonFinite("training in every grid cell".into()))?;
    Ok(GridOutcome { config, outcome, cells })
}

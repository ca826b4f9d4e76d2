use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ane::AneModel;
use crate::datagen::TurnPair;
use crate::diffcore::{Adam, Checkpoint, Tape};
use crate::error::{Error, Result};
use crate::lexicon::Utterance;
use crate::rewriter::pointer::{derive_pointer_targets, PointerSeq};
use crate::rewriter::{NeuralKind, NeuralModel};

/// Hyper-parameters of a rewriter training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
}

impl TrainConfig {
    /// Hidden 128, learning rate 1e-4, batch 128.
    pub fn two_step() -> Self {
        TrainConfig { hidden: 128, lr: 1e-4, batch: 128, epochs: 10 }
    }

    /// Hidden 128, learning rate 3e-4, batch 32.
    pub fn pointer() -> Self {
        TrainConfig { hidden: 128, lr: 3e-4, batch: 32, epochs: 10 }
    }

    pub fn for_kind(kind: NeuralKind) -> Self {
        match kind {
            NeuralKind::TwoStep => Self::two_step(),
            NeuralKind::Pointer => Self::pointer(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch == 0 {
            return Err(Error::Config("hidden and batch must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }

    pub(crate) fn to_header(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("hidden".to_string(), self.hidden.to_string()),
            ("lr".to_string(), self.lr.to_string()),
            ("batch".to_string(), self.batch.to_string()),
            ("epochs".to_string(), self.epochs.to_string()),
        ])
    }

    pub(crate) fn from_header(ck: &Checkpoint) -> Result<Self> {
        Ok(TrainConfig {
            hidden: ck.parse_field("hidden")?,
            lr: ck.parse_field("lr")?,
            batch: ck.parse_field("batch")?,
            epochs: ck.parse_field("epochs")?,
        })
    }
}

/// Progress report after each epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-example sequence loss over the epoch, measured before each
    /// batch's update.
    pub mean_loss: f64,
    pub examples: usize,
    /// Pairs dropped because a reference word occurs in neither turn.
    pub skipped: usize,
}

/// A pair with its derived pointer target.
#[derive(Clone, Debug)]
pub struct TrainingExample {
    pub utt1: Utterance,
    pub utt2: Utterance,
    pub target: PointerSeq,
}

/// Derives targets for every pair; returns the usable examples and the
/// number skipped.
pub fn training_examples(corpus: &[TurnPair]) -> (Vec<TrainingExample>, usize) {
    let mut out = Vec::with_capacity(corpus.len());
    let mut skipped = 0;
    for pair in corpus {
        match derive_pointer_targets(&pair.first_asr, &pair.followup, &pair.reference) {
            Some(target) => {
                out.push(TrainingExample { utt1: pair.first_asr.clone(), utt2: pair.followup.clone(), target })
            }
            None => skipped += 1,
        }
    }
    (out, skipped)
}

impl NeuralModel {
    /// Mean teacher-forced sequence loss over `examples`.
    pub fn mean_loss(&self, examples: &[TrainingExample]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut total = 0.0;
        for ex in examples {
            let mut tape = Tape::new();
            let l = self.sequence_loss(&mut tape, &ex.utt1, &ex.utt2, &ex.target)?;
            total += tape.scalar(l);
        }
        Ok(total / examples.len() as f64)
    }
}

/// Trains a rewriter of `kind` with teacher forcing and Adam. Each batch's
/// loss is the mean over its examples of the summed per-step negative log
/// probabilities. The embedding model is only read.
pub fn train_neural(
    kind: NeuralKind,
    corpus: &[TurnPair],
    ane: &AneModel,
    config: &TrainConfig,
    seed: u64,
    on_epoch: &mut dyn FnMut(&EpochStats, &NeuralModel),
) -> Result<NeuralModel> {
    config.validate()?;
    let (examples, skipped) = training_examples(corpus);
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = NeuralModel::new(kind, ane.clone(), config.clone(), &mut rng);
    let opt = Adam::new(config.lr);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch) {
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let ex = &examples[i];
                let mut tape = Tape::new();
                let loss = model.sequence_loss(&mut tape, &ex.utt1, &ex.utt2, &ex.target)?;
                total += tape.scalar(loss);
                tape.backward(loss, scale, model.store_mut());
            }
            model.store_mut().adam_step(&opt)?;
        }
        let stats = EpochStats { epoch: epoch + 1, mean_loss: total / examples.len() as f64, examples: examples.len(), skipped };
        on_epoch(&stats, &model);
    }
    Ok(model)
}

/// [`train_neural`] for the two-step-attention model.
pub fn train_2sa(corpus: &[TurnPair], ane: &AneModel, config: &TrainConfig, seed: u64) -> Result<NeuralModel> {
    train_neural(NeuralKind::TwoStep, corpus, ane, config, seed, &mut |_, _| {})
}

/// [`train_neural`] for the pointer-network baseline.
pub fn train_ptr(corpus: &[TurnPair], ane: &AneModel, config: &TrainConfig, seed: u64) -> Result<NeuralModel> {
    train_neural(NeuralKind::Pointer, corpus, ane, config, seed, &mut |_, _| {})
}

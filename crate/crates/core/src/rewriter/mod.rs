//! Neural query rewriters: the two-step-attention pointer decoder and the
//! pointer-network baseline, their training loop and beam-search inference.

pub mod beam;
pub mod encoder;
pub mod pointer;
pub mod pointer_net;
pub mod train;
pub mod two_step;

use std::collections::BTreeMap;
use std::path::Path;

use crate::ane::AneModel;
use crate::diffcore::{Checkpoint, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::lexicon::Utterance;

pub use beam::{beam_search, BeamResult, StepDecoder};
pub use encoder::{encode_turn, EncodedTurn, WordVectors};
pub use pointer::{derive_pointer_targets, Pointer, PointerSeq, Turn};
pub use pointer_net::{PointerInputs, PointerNet, PointerState};
pub use train::{train_2sa, train_neural, train_ptr, training_examples, EpochStats, TrainConfig, TrainingExample};
pub use two_step::{DecoderStepState, StepDistribution, StepMasks, StepOutput, TwoStepInputs, TwoStepNet};

pub const DEFAULT_BEAM_WIDTH: usize = 3;

/// The output of any rewriting engine.
#[derive(Clone, Debug, PartialEq)]
pub struct Rewrite {
    pub utterance: Utterance,
    /// The pointer trace, for pointer-based engines.
    pub pointers: Option<PointerSeq>,
    pub log_prob: Option<f64>,
    /// Beam search hit `max_len` and closed the hypothesis with eos.
    pub truncated: bool,
    /// The decoder emitted only eos; the first turn is returned unchanged.
    pub empty: bool,
}

/// Anything that merges a first turn and a follow-up into a rewrite.
pub trait Rewriter {
    fn engine(&self) -> &'static str;
    fn rewrite(&self, utt1: &Utterance, utt2: &Utterance) -> Result<Rewrite>;
}

/// Which neural architecture a checkpoint holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeuralKind {
    TwoStep,
    Pointer,
}

impl NeuralKind {
    pub fn tag(self) -> &'static str {
        match self {
            NeuralKind::TwoStep => "2sa",
            NeuralKind::Pointer => "ptr",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "2sa" => Ok(NeuralKind::TwoStep),
            "ptr" => Ok(NeuralKind::Pointer),
            other => Err(Error::Checkpoint(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
enum Net {
    TwoStep(TwoStepNet),
    Pointer(PointerNet),
}

/// Trained rewriter weights together with the frozen embedding model they
/// were trained against.
#[derive(Clone, Debug)]
pub struct NeuralModel {
    store: ParamStore,
    net: Net,
    vectors: WordVectors,
    config: TrainConfig,
    /// Beam width used by [`Rewriter::rewrite`].
    pub beam_width: usize,
}

impl NeuralModel {
    pub fn new(kind: NeuralKind, ane: AneModel, config: TrainConfig, rng: &mut impl rand::Rng) -> Self {
        let mut store = ParamStore::new();
        let input = ane.dim();
        let net = match kind {
            NeuralKind::TwoStep => Net::TwoStep(TwoStepNet::new(&mut store, input, config.hidden, rng)),
            NeuralKind::Pointer => Net::Pointer(PointerNet::new(&mut store, input, config.hidden, rng)),
        };
        NeuralModel { store, net, vectors: WordVectors::new(ane), config, beam_width: DEFAULT_BEAM_WIDTH }
    }

    pub fn kind(&self) -> NeuralKind {
        match self.net {
            Net::TwoStep(_) => NeuralKind::TwoStep,
            Net::Pointer(_) => NeuralKind::Pointer,
        }
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub(crate) fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn vectors(&self) -> &WordVectors {
        &self.vectors
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn two_step(&self) -> Option<&TwoStepNet> {
        match &self.net {
            Net::TwoStep(n) => Some(n),
            Net::Pointer(_) => None,
        }
    }

    pub fn pointer_net(&self) -> Option<&PointerNet> {
        match &self.net {
            Net::Pointer(n) => Some(n),
            Net::TwoStep(_) => None,
        }
    }

    /// Teacher-forced loss of one example on `tape`.
    pub fn sequence_loss(&self, tape: &mut Tape, utt1: &Utterance, utt2: &Utterance, target: &PointerSeq) -> Result<crate::diffcore::Var> {
        match &self.net {
            Net::TwoStep(n) => n.sequence_loss(tape, &self.store, &self.vectors, utt1, utt2, target),
            Net::Pointer(n) => n.sequence_loss(tape, &self.store, &self.vectors, utt1, utt2, target),
        }
    }

    /// Beam search with the engine's inference rules: the left-to-right
    /// attention policy for 2SA, the plain pointer distribution for the
    /// baseline. `max_len` defaults to `|utt1| + |utt2|`.
    pub fn decode(&self, utt1: &Utterance, utt2: &Utterance, width: usize, max_len: Option<usize>) -> Result<BeamResult> {
        let max_len = max_len.unwrap_or(utt1.len() + utt2.len());
        let mut tape = Tape::new();
        match &self.net {
            Net::TwoStep(net) => {
                let inputs = net.encode(&mut tape, &self.store, &self.vectors, utt1, utt2)?;
                let mut d = TwoStepDecoder { net, store: &self.store, inputs, tape };
                beam_search(&mut d, width, max_len)
            }
            Net::Pointer(net) => {
                let inputs = net.encode(&mut tape, &self.store, &self.vectors, utt1, utt2)?;
                let mut d = PointerDecoder { net, store: &self.store, inputs, tape };
                beam_search(&mut d, width, max_len)
            }
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut header = self.config.to_header();
        header.insert("kind".into(), self.kind().tag().into());
        let ane = self.vectors.ane().to_checkpoint();
        for (k, v) in &ane.header {
            header.insert(format!("ane.{k}"), v.clone());
        }
        let mut ck = Checkpoint::from_store(&self.store, header);
        ck.tensors.extend(ane.tensors);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let kind = NeuralKind::from_tag(ck.get("kind")?)?;
        let config = TrainConfig::from_header(ck)?;
        let (ane_tensors, own): (Vec<_>, Vec<_>) = ck.tensors.iter().cloned().partition(|t| t.name.starts_with("ane."));
        let ane_header: BTreeMap<String, String> =
            ck.header.iter().filter_map(|(k, v)| k.strip_prefix("ane.").map(|k| (k.to_string(), v.clone()))).collect();
        let ane = AneModel::from_checkpoint(&Checkpoint { header: ane_header, tensors: ane_tensors })?;
        let store = Checkpoint { header: BTreeMap::new(), tensors: own }.to_store();
        let net = match kind {
            NeuralKind::TwoStep => Net::TwoStep(TwoStepNet::bind(&store)?),
            NeuralKind::Pointer => Net::Pointer(PointerNet::bind(&store)?),
        };
        let (input, hidden) = match &net {
            Net::TwoStep(n) => (n.input_dim(), n.hidden()),
            Net::Pointer(n) => (n.input_dim(), n.hidden()),
        };
        if input != ane.dim() || hidden != config.hidden {
            return Err(Error::Checkpoint("rewriter tensor shapes disagree with header".into()));
        }
        Ok(NeuralModel { store, net, vectors: WordVectors::new(ane), config, beam_width: DEFAULT_BEAM_WIDTH })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

impl Rewriter for NeuralModel {
    fn engine(&self) -> &'static str {
        self.kind().tag()
    }

    fn rewrite(&self, utt1: &Utterance, utt2: &Utterance) -> Result<Rewrite> {
        let r = self.decode(utt1, utt2, self.beam_width, None)?;
        let seq = PointerSeq::new(r.pointers, utt1.len(), utt2.len())?;
        let (utterance, empty) = match seq.render(utt1, utt2) {
            Some(u) => (u, false),
            None => (utt1.clone(), true),
        };
        Ok(Rewrite { utterance, pointers: Some(seq), log_prob: Some(r.log_prob), truncated: r.truncated, empty })
    }
}

struct TwoStepDecoder<'a> {
    net: &'a TwoStepNet,
    store: &'a ParamStore,
    inputs: TwoStepInputs,
    tape: Tape,
}

impl StepDecoder for TwoStepDecoder<'_> {
    type State = DecoderStepState;

    fn start(&mut self) -> Result<DecoderStepState> {
        Ok(self.net.initial_state(&mut self.tape, self.store))
    }

    fn expand(&mut self, state: &DecoderStepState) -> Result<Vec<(Pointer, f64, DecoderStepState)>> {
        let masks = TwoStepNet::policy_masks(state, &self.inputs);
        let out = self.net.step_exhaustible(&mut self.tape, self.store, state, &self.inputs, &masks)?;
        let sel = self.tape.value(out.log_selector).to_vec();
        let mut next = Vec::new();
        for (turn, slot, log_alpha) in [(Turn::First, 0, out.log_alpha1), (Turn::Second, 1, out.log_alpha2)] {
            let Some(la) = log_alpha else { continue };
            for (j, &a) in self.tape.value(la).iter().enumerate() {
                if a.is_finite() {
                    let p = Pointer::Word { turn, index: j + 1 };
                    next.push((p, sel[slot] + a, self.net.advance(state, &out, &self.inputs, p)));
                }
            }
        }
        next.push((Pointer::Eos, sel[2], self.net.advance(state, &out, &self.inputs, Pointer::Eos)));
        Ok(next)
    }
}

struct PointerDecoder<'a> {
    net: &'a PointerNet,
    store: &'a ParamStore,
    inputs: PointerInputs,
    tape: Tape,
}

impl StepDecoder for PointerDecoder<'_> {
    type State = PointerState;

    fn start(&mut self) -> Result<PointerState> {
        Ok(self.net.initial_state(&mut self.tape, self.store))
    }

    fn expand(&mut self, state: &PointerState) -> Result<Vec<(Pointer, f64, PointerState)>> {
        let (log_p, s) = self.net.step(&mut self.tape, self.store, state, &self.inputs)?;
        let values = self.tape.value(log_p).to_vec();
        Ok(values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .filter_map(|(pos, &v)| {
                let p = self.inputs.pointer_at(pos)?;
                Some((p, v, self.net.advance(s, &self.inputs, p)))
            })
            .collect())
    }
}

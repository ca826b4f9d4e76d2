//! Baseline pointer network over `utt1 [SEP] utt2 [EOS]`.
//!
//! One BLSTM encodes the concatenation; the decoder's attention weights over
//! its positions are the output distribution. Pointing at the trailing
//! sentinel ends the sequence. The separator can never be pointed at.

use rand::Rng;

use crate::diffcore::layers::lookup;
use crate::diffcore::{Attention, Blstm, Init, Lstm, LstmState, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::lexicon::Utterance;
use crate::rewriter::encoder::WordVectors;
use crate::rewriter::pointer::{Pointer, PointerSeq, Turn};

const SEP_ROW: usize = 0;
const EOS_ROW: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointerNet {
    /// Learned input vectors for the separator and the end sentinel.
    pub special: ParamId,
    pub encoder: Blstm,
    pub start: ParamId,
    pub decoder: Lstm,
    pub attention: Attention,
}

/// The encoded concatenation of both turns.
#[derive(Clone, Debug)]
pub struct PointerInputs {
    pub vectors: Vec<Var>,
    projected: Vec<Var>,
    pub len1: usize,
    pub len2: usize,
}

impl PointerInputs {
    pub fn sep_position(&self) -> usize {
        self.len1
    }

    pub fn eos_position(&self) -> usize {
        self.len1 + 1 + self.len2
    }

    pub fn positions(&self) -> usize {
        self.len1 + self.len2 + 2
    }

    pub fn position_of(&self, p: Pointer) -> usize {
        match p {
            Pointer::Word { turn: Turn::First, index } => index - 1,
            Pointer::Word { turn: Turn::Second, index } => self.len1 + index,
            Pointer::Eos => self.eos_position(),
        }
    }

    /// Inverse of [`PointerInputs::position_of`]; the separator has no pointer.
    pub fn pointer_at(&self, position: usize) -> Option<Pointer> {
        if position < self.len1 {
            Some(Pointer::first(position + 1))
        } else if position == self.len1 {
            None
        } else if position < self.eos_position() {
            Some(Pointer::second(position - self.len1))
        } else if position == self.eos_position() {
            Some(Pointer::Eos)
        } else {
            None
        }
    }

    /// Every position except the separator.
    pub fn mask(&self) -> Vec<bool> {
        (0..self.positions()).map(|i| i != self.sep_position()).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PointerState {
    pub s: LstmState,
    pub y_prev: Var,
}

impl PointerNet {
    pub fn new(store: &mut ParamStore, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let enc_out = 2 * hidden;
        PointerNet {
            special: store.add("ptr.special", &[2, input], Init::Uniform(0.1), rng),
            encoder: Blstm::new(store, "ptr.enc", input, hidden, rng),
            start: store.add("ptr.start", &[enc_out], Init::Uniform(0.1), rng),
            decoder: Lstm::new(store, "ptr.dec", enc_out, hidden, rng),
            attention: Attention::new(store, "ptr.att", hidden, enc_out, hidden, rng),
        }
    }

    pub fn bind(store: &ParamStore) -> Result<Self> {
        Ok(PointerNet {
            special: lookup(store, "ptr.special")?,
            encoder: Blstm::bind(store, "ptr.enc")?,
            start: lookup(store, "ptr.start")?,
            decoder: Lstm::bind(store, "ptr.dec")?,
            attention: Attention::bind(store, "ptr.att")?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.decoder.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.fwd.input
    }

    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        vectors: &WordVectors,
        utt1: &Utterance,
        utt2: &Utterance,
    ) -> Result<PointerInputs> {
        let mut xs = vectors.leaves(tape, utt1)?;
        xs.push(tape.row(store, self.special, SEP_ROW));
        xs.extend(vectors.leaves(tape, utt2)?);
        xs.push(tape.row(store, self.special, EOS_ROW));
        let encoded = self.encoder.run(tape, store, &xs)?;
        let projected = self.attention.project_keys(tape, store, &encoded);
        Ok(PointerInputs { vectors: encoded, projected, len1: utt1.len(), len2: utt2.len() })
    }

    pub fn initial_state(&self, tape: &mut Tape, store: &ParamStore) -> PointerState {
        PointerState { s: self.decoder.zero_state(tape), y_prev: tape.param(store, self.start) }
    }

    /// One decoder step; returns log-probabilities over all positions (the
    /// separator at `-inf`) and the new LSTM state.
    pub fn step(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        state: &PointerState,
        inputs: &PointerInputs,
    ) -> Result<(Var, LstmState)> {
        let s = self.decoder.step(tape, store, state.y_prev, state.s)?;
        let mask = inputs.mask();
        let a = self.attention.attend(tape, store, s.h, &inputs.vectors, &inputs.projected, Some(&mask))?;
        Ok((tape.log_softmax(a.scores, Some(mask)), s))
    }

    pub fn advance(&self, s: LstmState, inputs: &PointerInputs, pointer: Pointer) -> PointerState {
        PointerState { s, y_prev: inputs.vectors[inputs.position_of(pointer)] }
    }

    pub fn sequence_loss(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        vectors: &WordVectors,
        utt1: &Utterance,
        utt2: &Utterance,
        target: &PointerSeq,
    ) -> Result<Var> {
        let inputs = self.encode(tape, store, vectors, utt1, utt2)?;
        let mut state = self.initial_state(tape, store);
        let mut losses = Vec::with_capacity(target.pointers().len());
        for &p in target.pointers() {
            let (log_p, s) = self.step(tape, store, &state, &inputs)?;
            let pos = inputs.position_of(p);
            if pos >= inputs.positions() {
                return Err(Error::Shape(format!("target {p} is outside the input")));
            }
            let ll = tape.pick(log_p, pos);
            losses.push(tape.scale_const(ll, -1.0));
            state = self.advance(s, &inputs, p);
        }
        Ok(tape.sum(&losses))
    }
}

//! The two-step-attention pointer decoder.
//!
//! Each decoder step runs an LSTM on `[y_{t-1}; c1_{t-1}; c2_{t-1}]`, attends
//! over the first turn with the new state, attends over the second turn with
//! the state and the first-turn context, and finally a selector picks turn 1,
//! turn 2 or end of sequence. The output distribution is
//! `p = [p1 * alpha1 ; p2 * alpha2 ; p_eos]`.

use rand::Rng;

use crate::diffcore::layers::lookup;
use crate::diffcore::{Attention, Blstm, Init, Lstm, LstmState, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::lexicon::Utterance;
use crate::rewriter::encoder::{encode_turn, EncodedTurn, WordVectors};
use crate::rewriter::pointer::{Pointer, PointerSeq, Turn};

/// Parameter handles of the 2SA model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoStepNet {
    pub enc1: Blstm,
    pub enc2: Blstm,
    pub start: ParamId,
    pub decoder: Lstm,
    pub att1: Attention,
    pub att2: Attention,
    pub selector_w: ParamId,
    pub selector_b: ParamId,
}

/// Both encoded turns plus their attention key projections.
#[derive(Clone, Debug)]
pub struct TwoStepInputs {
    pub turn1: EncodedTurn,
    pub turn2: EncodedTurn,
    proj1: Vec<Var>,
    proj2: Vec<Var>,
}

/// Decoder recurrence: LSTM state, the previous step's two contexts and the
/// previously emitted word vector. Cursors hold the last index emitted from
/// each turn and only drive inference masks.
#[derive(Clone, Copy, Debug)]
pub struct DecoderStepState {
    pub s: LstmState,
    pub c1: Var,
    pub c2: Var,
    pub y_prev: Var,
    pub cursor1: usize,
    pub cursor2: usize,
}

/// Tape handles produced by one decoder step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Log selector probabilities `[ln p1, ln p2, ln p_eos]`.
    pub log_selector: Var,
    /// Log attention over each turn; `None` when the turn was exhausted.
    pub log_alpha1: Option<Var>,
    pub log_alpha2: Option<Var>,
    pub s: LstmState,
    pub c1: Var,
    pub c2: Var,
}

/// Plain-value view of a step's output distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDistribution {
    pub p1: f64,
    pub p2: f64,
    pub p_eos: f64,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    /// `|utt1| + |utt2| + 1` entries; the last is `p_eos`.
    pub p: Vec<f64>,
}

/// Per-turn availability masks (`true` = may be pointed at).
#[derive(Clone, Debug, Default)]
pub struct StepMasks {
    pub turn1: Option<Vec<bool>>,
    pub turn2: Option<Vec<bool>>,
}

fn exp_all(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|v| v.exp()).collect()
}

impl TwoStepNet {
    pub fn new(store: &mut ParamStore, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let enc_out = 2 * hidden;
        TwoStepNet {
            enc1: Blstm::new(store, "2sa.enc1", input, hidden, rng),
            enc2: Blstm::new(store, "2sa.enc2", input, hidden, rng),
            start: store.add("2sa.start", &[enc_out], Init::Uniform(0.1), rng),
            decoder: Lstm::new(store, "2sa.dec", 3 * enc_out, hidden, rng),
            att1: Attention::new(store, "2sa.att1", hidden, enc_out, hidden, rng),
            att2: Attention::new(store, "2sa.att2", hidden + enc_out, enc_out, hidden, rng),
            selector_w: store.add("2sa.sel.w", &[3, hidden + 2 * enc_out], Init::Glorot, rng),
            selector_b: store.add("2sa.sel.b", &[3], Init::Zeros, rng),
        }
    }

    pub fn bind(store: &ParamStore) -> Result<Self> {
        Ok(TwoStepNet {
            enc1: Blstm::bind(store, "2sa.enc1")?,
            enc2: Blstm::bind(store, "2sa.enc2")?,
            start: lookup(store, "2sa.start")?,
            decoder: Lstm::bind(store, "2sa.dec")?,
            att1: Attention::bind(store, "2sa.att1")?,
            att2: Attention::bind(store, "2sa.att2")?,
            selector_w: lookup(store, "2sa.sel.w")?,
            selector_b: lookup(store, "2sa.sel.b")?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.decoder.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.enc1.fwd.input
    }

    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        vectors: &WordVectors,
        utt1: &Utterance,
        utt2: &Utterance,
    ) -> Result<TwoStepInputs> {
        let turn1 = encode_turn(tape, store, &self.enc1, vectors, utt1)?;
        let turn2 = encode_turn(tape, store, &self.enc2, vectors, utt2)?;
        let proj1 = self.att1.project_keys(tape, store, &turn1.vectors);
        let proj2 = self.att2.project_keys(tape, store, &turn2.vectors);
        Ok(TwoStepInputs { turn1, turn2, proj1, proj2 })
    }

    /// Learned start vector as `y_{-1}`, zero state and zero contexts.
    pub fn initial_state(&self, tape: &mut Tape, store: &ParamStore) -> DecoderStepState {
        let enc_out = 2 * self.hidden();
        DecoderStepState {
            s: self.decoder.zero_state(tape),
            c1: tape.zeros(enc_out),
            c2: tape.zeros(enc_out),
            y_prev: tape.param(store, self.start),
            cursor1: 0,
            cursor2: 0,
        }
    }

    /// One decoder step. Every mask must leave at least one position open;
    /// a fully masked turn is [`Error::NoCandidate`].
    pub fn step(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        state: &DecoderStepState,
        inputs: &TwoStepInputs,
        masks: &StepMasks,
    ) -> Result<StepOutput> {
        self.step_inner(tape, store, state, inputs, masks, false)
    }

    /// Like [`TwoStepNet::step`], but a fully masked turn gets a zero context
    /// and is removed from the selector instead of failing. Inference uses
    /// this once the left-to-right policy has used up a turn.
    pub fn step_exhaustible(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        state: &DecoderStepState,
        inputs: &TwoStepInputs,
        masks: &StepMasks,
    ) -> Result<StepOutput> {
        self.step_inner(tape, store, state, inputs, masks, true)
    }

    fn step_inner(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        state: &DecoderStepState,
        inputs: &TwoStepInputs,
        masks: &StepMasks,
        exhaustible: bool,
    ) -> Result<StepOutput> {
        for (mask, turn) in [(&masks.turn1, &inputs.turn1), (&masks.turn2, &inputs.turn2)] {
            if let Some(m) = mask {
                if m.len() != turn.len() {
                    return Err(Error::Shape(format!("mask has {} entries for {} words", m.len(), turn.len())));
                }
            }
        }
        let open = |m: &Option<Vec<bool>>| m.as_ref().map_or(true, |m| m.iter().any(|&b| b));
        let (open1, open2) = (open(&masks.turn1), open(&masks.turn2));
        if !exhaustible && !(open1 && open2) {
            return Err(Error::NoCandidate);
        }

        let x = tape.concat(&[state.y_prev, state.c1, state.c2]);
        let s = self.decoder.step(tape, store, x, state.s)?;
        let enc_out = 2 * self.hidden();

        let (c1, log_alpha1) = if open1 {
            let a = self.att1.attend(tape, store, s.h, &inputs.turn1.vectors, &inputs.proj1, masks.turn1.as_deref())?;
            (a.context, Some(tape.log_softmax(a.scores, masks.turn1.clone())))
        } else {
            (tape.zeros(enc_out), None)
        };
        let (c2, log_alpha2) = if open2 {
            let q = tape.concat(&[s.h, c1]);
            let a = self.att2.attend(tape, store, q, &inputs.turn2.vectors, &inputs.proj2, masks.turn2.as_deref())?;
            (a.context, Some(tape.log_softmax(a.scores, masks.turn2.clone())))
        } else {
            (tape.zeros(enc_out), None)
        };

        let features = tape.concat(&[s.h, c1, c2]);
        let logits = tape.matvec(store, self.selector_w, features);
        let bias = tape.param(store, self.selector_b);
        let logits = tape.add(logits, bias);
        let selector_mask = if open1 && open2 { None } else { Some(vec![open1, open2, true]) };
        let log_selector = tape.log_softmax(logits, selector_mask);
        Ok(StepOutput { log_selector, log_alpha1, log_alpha2, s, c1, c2 })
    }

    /// `-ln p(target)` for one step, computed as `-(ln p_k + ln alpha_k[j])`.
    pub fn step_loss(&self, tape: &mut Tape, out: &StepOutput, target: Pointer) -> Result<Var> {
        let ll = match target {
            Pointer::Eos => tape.pick(out.log_selector, 2),
            Pointer::Word { turn, index } => {
                let (slot, log_alpha) = match turn {
                    Turn::First => (0, out.log_alpha1),
                    Turn::Second => (1, out.log_alpha2),
                };
                let log_alpha = log_alpha.ok_or(Error::NoCandidate)?;
                if index == 0 || index > tape.dim(log_alpha) {
                    return Err(Error::Shape(format!("target {target} is outside the turn")));
                }
                let sel = tape.pick(out.log_selector, slot);
                let att = tape.pick(log_alpha, index - 1);
                tape.add(sel, att)
            }
        };
        Ok(tape.scale_const(ll, -1.0))
    }

    /// State after emitting `pointer` from step output `out`.
    pub fn advance(&self, state: &DecoderStepState, out: &StepOutput, inputs: &TwoStepInputs, pointer: Pointer) -> DecoderStepState {
        let mut next = DecoderStepState { s: out.s, c1: out.c1, c2: out.c2, ..*state };
        if let Pointer::Word { turn, index } = pointer {
            match turn {
                Turn::First => {
                    next.y_prev = inputs.turn1.vectors[index - 1];
                    next.cursor1 = index;
                }
                Turn::Second => {
                    next.y_prev = inputs.turn2.vectors[index - 1];
                    next.cursor2 = index;
                }
            }
        }
        next
    }

    /// Teacher-forced sequence loss: the sum of per-step negative log
    /// probabilities, with unmasked attention throughout.
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
            let out = self.step(tape, store, &state, &inputs, &StepMasks::default())?;
            losses.push(self.step_loss(tape, &out, p)?);
            state = self.advance(&state, &out, &inputs, p);
        }
        Ok(tape.sum(&losses))
    }

    /// Masks for the left-to-right policy: positions at or before the
    /// cursor of their turn are closed.
    pub fn policy_masks(state: &DecoderStepState, inputs: &TwoStepInputs) -> StepMasks {
        StepMasks {
            turn1: Some((1..=inputs.turn1.len()).map(|i| i > state.cursor1).collect()),
            turn2: Some((1..=inputs.turn2.len()).map(|i| i > state.cursor2).collect()),
        }
    }
}

impl StepOutput {
    /// Reads the full output distribution off the tape.
    pub fn distribution(&self, tape: &Tape, inputs: &TwoStepInputs) -> StepDistribution {
        let sel = exp_all(tape.value(self.log_selector));
        let alpha = |la: Option<Var>, n: usize| la.map_or_else(|| vec![0.0; n], |v| exp_all(tape.value(v)));
        let alpha1 = alpha(self.log_alpha1, inputs.turn1.len());
        let alpha2 = alpha(self.log_alpha2, inputs.turn2.len());
        let mut p: Vec<f64> = alpha1.iter().map(|a| sel[0] * a).collect();
        p.extend(alpha2.iter().map(|a| sel[1] * a));
        p.push(sel[2]);
        StepDistribution { p1: sel[0], p2: sel[1], p_eos: sel[2], alpha1, alpha2, p }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::ane::{AneConfig, AneModel};
    use crate::diffcore::grad_check;

    fn setup(seed: u64, hidden: usize) -> (ParamStore, TwoStepNet, WordVectors) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors = WordVectors::new(AneModel::new(AneConfig { dim: 4, char_dim: 3, ..AneConfig::default() }, &mut rng));
        let mut store = ParamStore::new();
        let net = TwoStepNet::new(&mut store, 4, hidden, &mut rng);
        (store, net, vectors)
    }

    fn u(s: &str) -> Utterance {
        Utterance::parse(s).unwrap()
    }

    #[test]
    fn distribution_shape_and_normalization() {
        let (store, net, vectors) = setup(1, 5);
        let mut tape = Tape::new();
        let inputs = net.encode(&mut tape, &store, &vectors, &u("a b c"), &u("d e f g")).unwrap();
        let state = net.initial_state(&mut tape, &store);
        let out = net.step(&mut tape, &store, &state, &inputs, &StepMasks::default()).unwrap();
        let d = out.distribution(&tape, &inputs);
        assert_eq!(d.p.len(), 8);
        assert!((d.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((d.p1 + d.p2 + d.p_eos - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fully_masked_turn_is_an_error_unless_exhaustible() {
        let (store, net, vectors) = setup(2, 4);
        let mut tape = Tape::new();
        let inputs = net.encode(&mut tape, &store, &vectors, &u("a b"), &u("c")).unwrap();
        let state = net.initial_state(&mut tape, &store);
        let masks = StepMasks { turn1: Some(vec![false, false]), turn2: None };
        assert!(matches!(net.step(&mut tape, &store, &state, &inputs, &masks), Err(Error::NoCandidate)));
        let out = net.step_exhaustible(&mut tape, &store, &state, &inputs, &masks).unwrap();
        let d = out.distribution(&tape, &inputs);
        assert_eq!(d.p1, 0.0);
        assert!((d.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn step_loss_is_negative_log_of_p() {
        let (store, net, vectors) = setup(3, 4);
        let mut tape = Tape::new();
        let inputs = net.encode(&mut tape, &store, &vectors, &u("a b"), &u("c d e")).unwrap();
        let state = net.initial_state(&mut tape, &store);
        let out = net.step(&mut tape, &store, &state, &inputs, &StepMasks::default()).unwrap();
        let d = out.distribution(&tape, &inputs);
        for (target, idx) in [(Pointer::first(2), 1), (Pointer::second(3), 4), (Pointer::Eos, 5)] {
            let l = net.step_loss(&mut tape, &out, target).unwrap();
            assert!((tape.scalar(l) + d.p[idx].ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn full_step_gradients_match_finite_differences() {
        for seed in 0..4 {
            let (mut store, net, vectors) = setup(10 + seed, 3);
            let (a, b) = (u("call uncle of"), u("no uncle levar"));
            let target = PointerSeq::new(vec![Pointer::first(1), Pointer::second(3), Pointer::Eos], 3, 3).unwrap();
            let report = grad_check(&mut store, 1e-5, 1e-4, |tape, store| {
                net.sequence_loss(tape, store, &vectors, &a, &b, &target).unwrap()
            });
            assert!(report.passed(), "{report:?}");
        }
    }
}

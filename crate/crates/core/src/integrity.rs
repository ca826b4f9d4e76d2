//! Finite-difference checks of every trainable component on small random
//! instances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ane::{triplet_loss, AneConfig, AneModel, AneNet};
use crate::diffcore::{grad_check, Blstm, GradCheckReport, ParamStore, Var};
use crate::lexicon::{Utterance, Word};
use crate::rewriter::{encode_turn, Pointer, PointerNet, PointerSeq, TwoStepNet, WordVectors};

pub const TOLERANCE: f64 = 1e-4;

/// Largest dimension used by any instance.
pub const MAX_DIM: usize = 8;

const WORDS: &[&str] =
    &["call", "cull", "uncle", "levar", "of", "r", "no", "i", "said", "play", "jazz", "seven", "heaven", "mom", "two"];

/// Summary for one component across all its instances.
#[derive(Clone, Debug)]
pub struct ComponentCheck {
    pub component: &'static str,
    pub instances: usize,
    pub checked: usize,
    pub max_rel_error: f64,
    pub failures: usize,
}

impl ComponentCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.max_rel_error < TOLERANCE
    }
}

fn fold(component: &'static str, reports: Vec<GradCheckReport>) -> ComponentCheck {
    ComponentCheck {
        component,
        instances: reports.len(),
        checked: reports.iter().map(|r| r.checked).sum(),
        max_rel_error: reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max),
        failures: reports.iter().map(|r| r.failures.len()).sum(),
    }
}

fn word(rng: &mut impl Rng) -> Word {
    Word::new(WORDS.choose(rng).expect("words")).expect("valid word")
}

fn utterance(rng: &mut impl Rng, max_len: usize) -> Utterance {
    let n = rng.gen_range(1..=max_len);
    Utterance::new((0..n).map(|_| word(rng)).collect()).expect("non-empty")
}

fn small_vectors(rng: &mut impl Rng, dim: usize) -> WordVectors {
    let char_dim = rng.gen_range(2..=MAX_DIM);
    WordVectors::new(AneModel::new(AneConfig { dim, char_dim, ..AneConfig::default() }, rng))
}

/// A random target for the two turns: a few random pointers and eos.
fn random_target(rng: &mut impl Rng, len1: usize, len2: usize) -> PointerSeq {
    let n = rng.gen_range(0..=3);
    let mut ps: Vec<Pointer> = (0..n)
        .map(|_| if rng.gen_bool(0.5) { Pointer::first(rng.gen_range(1..=len1)) } else { Pointer::second(rng.gen_range(1..=len2)) })
        .collect();
    ps.push(Pointer::Eos);
    PointerSeq::new(ps, len1, len2).expect("in range")
}

/// Triplet loss through the character LSTM.
pub fn check_ane(instances: usize, seed: u64) -> ComponentCheck {
    let reports = (0..instances)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64) << 8));
            let (char_dim, dim) = (rng.gen_range(2..=MAX_DIM), rng.gen_range(2..=MAX_DIM));
            let mut store = ParamStore::new();
            let net = AneNet::new(&mut store, char_dim, dim, &mut rng);
            let (a, p, n) = (word(&mut rng), word(&mut rng), word(&mut rng));
            let margin = rng.gen_range(0.5..1.5);
            grad_check(&mut store, 1e-6, TOLERANCE, |tape, store| {
                let ea = net.embed(tape, store, &a).expect("embed");
                let ep = net.embed(tape, store, &p).expect("embed");
                let en = net.embed(tape, store, &n).expect("embed");
                triplet_loss(tape, ea, ep, en, margin)
            })
        })
        .collect();
    fold("ane", reports)
}

/// A BLSTM turn encoder under a fixed random linear read-out.
pub fn check_encoder(instances: usize, seed: u64) -> ComponentCheck {
    let reports = (0..instances)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64) << 8) ^ 1);
            let input = rng.gen_range(2..=MAX_DIM);
            let hidden = rng.gen_range(1..=MAX_DIM / 2);
            let vectors = small_vectors(&mut rng, input);
            let mut store = ParamStore::new();
            let enc = Blstm::new(&mut store, "enc", input, hidden, &mut rng);
            let utt = utterance(&mut rng, 4);
            let readout: Vec<f64> = (0..utt.len() * 2 * hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
            grad_check(&mut store, 1e-5, TOLERANCE, |tape, store| {
                let out = encode_turn(tape, store, &enc, &vectors, &utt).expect("encode");
                let parts: Vec<Var> = out.vectors.iter().map(|&v| tape.tanh(v)).collect();
                let cat = tape.concat(&parts);
                let w = tape.leaf(readout.clone());
                tape.dot(cat, w)
            })
        })
        .collect();
    fold("encoder", reports)
}

/// Teacher-forced 2SA loss over a short random target: encoders, decoder
/// LSTM, both attentions and the selector.
pub fn check_two_step(instances: usize, seed: u64) -> ComponentCheck {
    let reports = (0..instances)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64) << 8) ^ 2);
            let input = rng.gen_range(2..=MAX_DIM);
            let hidden = rng.gen_range(1..=MAX_DIM / 2);
            let vectors = small_vectors(&mut rng, input);
            let mut store = ParamStore::new();
            let net = TwoStepNet::new(&mut store, input, hidden, &mut rng);
            let (a, b) = (utterance(&mut rng, 4), utterance(&mut rng, 3));
            let target = random_target(&mut rng, a.len(), b.len());
            grad_check(&mut store, 1e-5, TOLERANCE, |tape, store| {
                net.sequence_loss(tape, store, &vectors, &a, &b, &target).expect("loss")
            })
        })
        .collect();
    fold("2sa decoder", reports)
}

/// Teacher-forced loss of the baseline pointer network.
pub fn check_pointer(instances: usize, seed: u64) -> ComponentCheck {
    let reports = (0..instances)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64) << 8) ^ 3);
            let input = rng.gen_range(2..=MAX_DIM);
            let hidden = rng.gen_range(1..=MAX_DIM / 2);
            let vectors = small_vectors(&mut rng, input);
            let mut store = ParamStore::new();
            let net = PointerNet::new(&mut store, input, hidden, &mut rng);
            let (a, b) = (utterance(&mut rng, 4), utterance(&mut rng, 3));
            let target = random_target(&mut rng, a.len(), b.len());
            grad_check(&mut store, 1e-5, TOLERANCE, |tape, store| {
                net.sequence_loss(tape, store, &vectors, &a, &b, &target).expect("loss")
            })
        })
        .collect();
    fold("pointer decoder", reports)
}

/// All four components, `instances` random instances each.
pub fn check_all(instances: usize, seed: u64) -> Vec<ComponentCheck> {
    vec![
        check_ane(instances, seed),
        check_encoder(instances, seed),
        check_two_step(instances, seed),
        check_pointer(instances, seed),
    ]
}

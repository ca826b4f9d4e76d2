//! Synthetic correction data.
//!
//! A reference transcription is passed through a confusion channel that swaps
//! one word for a similar-sounding word or word pair, standing in for a
//! speech recognizer. The follow-up turn repeats the reference words behind
//! the error with a little random context and sometimes a prefix such as
//! "no i said".

mod corpus_io;
mod neighbors;
pub mod templates;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{Utterance, Word};
use crate::rewriter::derive_pointer_targets;

pub use corpus_io::{read_corpus, write_corpus, CORPUS_VERSION};
pub use neighbors::{Neighbor, NeighborIndex, NEIGHBORS};

/// Softmax temperature used to pick among the nearest substitutes.
pub const TEMPERATURE: f64 = 0.2;

/// One first turn, its follow-up and the intended first-turn transcription.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnPair {
    pub first_asr: Utterance,
    pub followup: Utterance,
    pub reference: Utterance,
    pub is_correction: bool,
    /// `(start, len)` of the substituted words in `first_asr`, 0-based.
    pub error_span: Option<(usize, usize)>,
}

impl TurnPair {
    pub fn validate(&self) -> Result<()> {
        if self.is_correction {
            if self.first_asr == self.reference {
                return Err(Error::Validation("a correction pair must have a misrecognized first turn".into()));
            }
            let Some((start, len)) = self.error_span else {
                return Err(Error::Validation("a correction pair needs an error span".into()));
            };
            if len == 0 || start + len > self.first_asr.len() {
                return Err(Error::Validation(format!("error span ({start}, {len}) is out of range")));
            }
        }
        Ok(())
    }
}

/// Generator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    /// Probability of 0, 1 and 2 context words on each side of the error.
    pub window_probs: [f64; 3],
    pub prefix_prob: f64,
    pub prefixes: Vec<String>,
    /// Fraction of generated pairs that are corrections.
    pub correction_proportion: f64,
    /// Chance that a non-correction first turn is also misrecognized.
    pub corruption_rate: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            window_probs: [0.85, 0.10, 0.05],
            prefix_prob: 0.10,
            prefixes: ["no i said", "i said", "no", "i meant", "no i meant"].map(String::from).to_vec(),
            correction_proportion: 0.048,
            corruption_rate: 0.1,
        }
    }
}

impl GenConfig {
    /// Defaults with every pair a correction, for training sets.
    pub fn training() -> Self {
        GenConfig { correction_proportion: 1.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = self.window_probs.iter().chain([&self.prefix_prob, &self.correction_proportion, &self.corruption_rate]);
        if probs.into_iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if (self.window_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("context window probabilities must sum to 1".into()));
        }
        if self.prefix_prob > 0.0 && self.prefixes.is_empty() {
            return Err(Error::Config("prefix probability is positive but the prefix list is empty".into()));
        }
        for p in &self.prefixes {
            Utterance::parse(p)?;
        }
        Ok(())
    }
}

/// Applies the confusion channel to `reference`. With probability `rate`
/// one word (chosen with weight 2 if it has at least two phones, else 1)
/// is replaced by one of its [`NEIGHBORS`] nearest single words or word
/// pairs, sampled by a softmax over negative distance at [`TEMPERATURE`].
/// Returns the hypothesis and the 0-based span of the substitute in it.
pub fn corrupt(
    reference: &Utterance,
    index: &NeighborIndex,
    rng: &mut impl Rng,
    rate: f64,
) -> Result<(Utterance, Option<(usize, usize)>)> {
    index.check_size()?;
    if rate <= 0.0 || !rng.gen_bool(rate.min(1.0)) {
        return Ok((reference.clone(), None));
    }
    let words = reference.words();
    let weights = words
        .iter()
        .map(|w| Ok(if index.lexicon().pronounce(w)?.len() >= 2 { 2.0 } else { 1.0 }))
        .collect::<Result<Vec<f64>>>()?;
    let pos = WeightedIndex::new(&weights).expect("positive weights").sample(rng);
    let neighbors = index.nearest(&words[pos])?;
    let best = neighbors[0].distance;
    let soft: Vec<f64> = neighbors.iter().map(|n| (-(n.distance - best) / TEMPERATURE).exp()).collect();
    let pick = &neighbors[WeightedIndex::new(&soft).expect("positive weights").sample(rng)];
    let mut out: Vec<Word> = words[..pos].to_vec();
    out.extend(pick.words.iter().cloned());
    out.extend(words[pos + 1..].iter().cloned());
    Ok((Utterance::new(out)?, Some((pos, pick.words.len()))))
}

/// The random choices behind one recovery utterance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecoveryTrace {
    /// Drawn context sizes, before clipping at the utterance edges.
    pub left: usize,
    pub right: usize,
    /// Index into the prefix list, when a prefix was added.
    pub prefix: Option<usize>,
}

/// The reference-side span matching hypothesis span `span`.
pub fn reference_span(reference: &Utterance, hypothesis: &Utterance, span: (usize, usize)) -> Result<(usize, usize)> {
    let (start, len) = span;
    let ref_len = (reference.len() + len).checked_sub(hypothesis.len()).filter(|&l| l >= 1);
    match ref_len {
        Some(l) if start + l <= reference.len() => Ok((start, l)),
        _ => Err(Error::Validation(format!("error span ({start}, {len}) does not align with the reference"))),
    }
}

/// Builds a repetition follow-up: the reference words behind the error,
/// widened by a random number of neighbouring words on each side and
/// optionally led by a prefix.
pub fn generate_recovery(
    reference: &Utterance,
    hypothesis: &Utterance,
    span: (usize, usize),
    rng: &mut impl Rng,
    cfg: &GenConfig,
) -> Result<Utterance> {
    Ok(generate_recovery_traced(reference, hypothesis, span, rng, cfg)?.0)
}

/// [`generate_recovery`] that also reports its random choices.
pub fn generate_recovery_traced(
    reference: &Utterance,
    hypothesis: &Utterance,
    span: (usize, usize),
    rng: &mut impl Rng,
    cfg: &GenConfig,
) -> Result<(Utterance, RecoveryTrace)> {
    let (start, len) = reference_span(reference, hypothesis, span)?;
    let window = WeightedIndex::new(cfg.window_probs).map_err(|e| Error::Config(e.to_string()))?;
    let left = window.sample(rng);
    let right = window.sample(rng);
    let prefix = if cfg.prefix_prob > 0.0 && rng.gen_bool(cfg.prefix_prob) {
        Some(rng.gen_range(0..cfg.prefixes.len()))
    } else {
        None
    };
    let lo = start.saturating_sub(left);
    let hi = (start + len + right).min(reference.len());
    let mut words = match prefix {
        Some(i) => Utterance::parse(&cfg.prefixes[i])?.into_words(),
        None => Vec::new(),
    };
    words.extend(reference.words()[lo..hi].iter().cloned());
    Ok((Utterance::new(words)?, RecoveryTrace { left, right, prefix }))
}

/// The generator for example `index` under `seed`: ChaCha8 keyed by the
/// seed, on stream `index`.
pub fn example_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One pair per reference. Each pair is a correction with probability
/// `cfg.correction_proportion`. A correction corrupts the reference and
/// follows up with a recovery; a non-correction corrupts with
/// `cfg.corruption_rate` and follows up with a different reference.
pub fn generate_corpus(references: &[Utterance], index: &NeighborIndex, cfg: &GenConfig, seed: u64) -> Result<Vec<TurnPair>> {
    cfg.validate()?;
    if references.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    references
        .iter()
        .enumerate()
        .map(|(i, reference)| generate_pair(references, i, reference, index, cfg, &mut example_rng(seed, i as u64)))
        .collect()
}

fn generate_pair(
    references: &[Utterance],
    i: usize,
    reference: &Utterance,
    index: &NeighborIndex,
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TurnPair> {
    if rng.gen_bool(cfg.correction_proportion) {
        let (first_asr, span) = corrupt(reference, index, rng, 1.0)?;
        let span = span.expect("rate 1 always corrupts");
        let followup = generate_recovery(reference, &first_asr, span, rng, cfg)?;
        let rendered = derive_pointer_targets(&first_asr, &followup, reference).and_then(|t| t.render(&first_asr, &followup));
        if rendered.as_ref() != Some(reference) {
            return Err(Error::Validation(format!("pointer targets for {reference:?} do not reproduce it")));
        }
        let pair = TurnPair { first_asr, followup, reference: reference.clone(), is_correction: true, error_span: Some(span) };
        pair.validate()?;
        Ok(pair)
    } else {
        let (first_asr, _) = corrupt(reference, index, rng, cfg.corruption_rate)?;
        let followup = unrelated(references, i, rng)?;
        Ok(TurnPair { first_asr, followup, reference: reference.clone(), is_correction: false, error_span: None })
    }
}

/// A reference other than `references[i]` (and not equal to it), chosen
/// uniformly; a fixed fallback query when every reference is identical.
fn unrelated(references: &[Utterance], i: usize, rng: &mut ChaCha8Rng) -> Result<Utterance> {
    let own = &references[i];
    if references.iter().all(|r| r == own) {
        return Utterance::parse(if own.to_string() == "what is the weather" { "play some music" } else { "what is the weather" });
    }
    loop {
        let j = rng.gen_range(0..references.len());
        if references[j] != *own {
            return Ok(references[j].clone());
        }
    }
}

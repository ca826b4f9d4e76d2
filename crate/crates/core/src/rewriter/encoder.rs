use std::collections::HashMap;
use std::sync::Mutex;

use crate::ane::AneModel;
use crate::diffcore::{Blstm, ParamStore, Tape, Var};
use crate::error::Result;
use crate::lexicon::{Utterance, Word};

/// Read-only access to a trained [`AneModel`] with memoized word vectors.
/// Nothing here can change the embedding weights.
#[derive(Debug)]
pub struct WordVectors {
    ane: AneModel,
    cache: Mutex<HashMap<Word, Vec<f64>>>,
}

impl Clone for WordVectors {
    fn clone(&self) -> Self {
        WordVectors::new(self.ane.clone())
    }
}

impl WordVectors {
    pub fn new(ane: AneModel) -> Self {
        WordVectors { ane, cache: Mutex::new(HashMap::new()) }
    }

    pub fn ane(&self) -> &AneModel {
        &self.ane
    }

    pub fn dim(&self) -> usize {
        self.ane.dim()
    }

    pub fn get(&self, word: &Word) -> Result<Vec<f64>> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(word) {
            return Ok(v.clone());
        }
        let v = self.ane.embed(word)?;
        self.cache.lock().expect("cache lock").insert(word.clone(), v.clone());
        Ok(v)
    }

    /// One constant leaf per word of `utt`.
    pub fn leaves(&self, tape: &mut Tape, utt: &Utterance) -> Result<Vec<Var>> {
        utt.words().iter().map(|w| Ok(tape.leaf(self.get(w)?))).collect()
    }
}

/// Context-aware vectors for one utterance, `2 * hidden` wide, one per word.
#[derive(Clone, Debug)]
pub struct EncodedTurn {
    pub vectors: Vec<Var>,
}

impl EncodedTurn {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Runs `encoder` over the frozen word vectors of `utt`.
pub fn encode_turn(
    tape: &mut Tape,
    store: &ParamStore,
    encoder: &Blstm,
    vectors: &WordVectors,
    utt: &Utterance,
) -> Result<EncodedTurn> {
    let xs = vectors.leaves(tape, utt)?;
    Ok(EncodedTurn { vectors: encoder.run(tape, store, &xs)? })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::ane::AneConfig;
    use crate::diffcore::grad_check;

    fn small_ane(rng: &mut ChaCha8Rng) -> WordVectors {
        WordVectors::new(AneModel::new(AneConfig { dim: 4, char_dim: 3, ..AneConfig::default() }, rng))
    }

    #[test]
    fn one_word_gives_one_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vectors = small_ane(&mut rng);
        let mut store = ParamStore::new();
        let enc = Blstm::new(&mut store, "enc", 4, 5, &mut rng);
        let mut tape = Tape::new();
        let out = encode_turn(&mut tape, &store, &enc, &vectors, &Utterance::parse("levar").unwrap()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(tape.dim(out.vectors[0]), 10);
    }

    #[test]
    fn encoding_gradients_match_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vectors = small_ane(&mut rng);
            let mut store = ParamStore::new();
            let enc = Blstm::new(&mut store, "enc", 4, 3, &mut rng);
            let utt = Utterance::parse("call uncle levar").unwrap();
            let report = grad_check(&mut store, 1e-5, 1e-4, |tape, store| {
                let out = encode_turn(tape, store, &enc, &vectors, &utt).unwrap();
                let parts: Vec<Var> = out.vectors.iter().map(|&v| tape.tanh(v)).collect();
                let cat = tape.concat(&parts);
                let w = tape.leaf((0..18).map(|i| (i as f64 * 0.37).sin()).collect());
                tape.dot(cat, w)
            });
            assert!(report.passed(), "{report:?}");
        }
    }
}

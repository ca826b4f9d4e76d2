use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, Word};
use crate::phonetics::ConfusionMatrix;

/// How many substitutes the confusion channel chooses among.
pub const NEIGHBORS: usize = 5;

/// A substitute for a word: one or two vocabulary words.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub words: Vec<Word>,
    pub distance: f64,
}

/// Nearest single words and word pairs of the lexicon vocabulary under the
/// raw phone edit distance. Results are memoized per query word.
#[derive(Debug)]
pub struct NeighborIndex {
    lexicon: Lexicon,
    matrix: ConfusionMatrix,
    vocab: Vec<Word>,
    phones: Vec<Vec<u8>>,
    cache: Mutex<HashMap<Word, Vec<Neighbor>>>,
}

/// Candidate `k` in canonical order: singles `0..n`, then pairs `(i, j)` at
/// `n + i * n + j`.
#[derive(Clone, Copy)]
struct Candidate {
    id: usize,
    first: usize,
    second: Option<usize>,
    len: usize,
}

impl NeighborIndex {
    pub fn new(lexicon: Lexicon, matrix: ConfusionMatrix) -> Self {
        let vocab = lexicon.words();
        let phones = vocab
            .iter()
            .map(|w| matrix.resolve(lexicon.get(w.surface()).expect("vocabulary word")).unwrap_or_default())
            .collect();
        NeighborIndex { lexicon, matrix, vocab, phones, cache: Mutex::new(HashMap::new()) }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn matrix(&self) -> &ConfusionMatrix {
        &self.matrix
    }

    pub fn vocabulary(&self) -> &[Word] {
        &self.vocab
    }

    pub(crate) fn check_size(&self) -> Result<()> {
        if self.vocab.len() < NEIGHBORS + 1 {
            return Err(Error::VocabularyTooSmall { found: self.vocab.len(), needed: NEIGHBORS + 1 });
        }
        Ok(())
    }

    /// The [`NEIGHBORS`] candidates closest to `word`, excluding `word`
    /// itself, ordered by distance and then by canonical candidate order
    /// (single words before pairs, each in vocabulary order).
    pub fn nearest(&self, word: &Word) -> Result<Vec<Neighbor>> {
        self.check_size()?;
        if let Some(hit) = self.cache.lock().expect("cache lock").get(word) {
            return Ok(hit.clone());
        }
        let query = self.matrix.resolve(&self.lexicon.pronounce(word)?)?;
        let found = self.search(word, &query);
        self.cache.lock().expect("cache lock").insert(word.clone(), found.clone());
        Ok(found)
    }

    fn search(&self, word: &Word, query: &[u8]) -> Vec<Neighbor> {
        let n = self.vocab.len();
        let mut candidates: Vec<Candidate> = (0..n)
            .filter(|&i| self.vocab[i] != *word)
            .map(|i| Candidate { id: i, first: i, second: None, len: self.phones[i].len() })
            .collect();
        for i in 0..n {
            for j in 0..n {
                let len = self.phones[i].len() + self.phones[j].len();
                candidates.push(Candidate { id: n + i * n + j, first: i, second: Some(j), len });
            }
        }
        // Length difference times the cheaper of insertion and deletion is a
        // lower bound on the distance, so visit candidates by that bound.
        let unit = self.matrix.ins_cost().min(self.matrix.del_cost());
        let bound = |c: &Candidate| c.len.abs_diff(query.len()) as f64 * unit;
        candidates.sort_by(|a, b| bound(a).total_cmp(&bound(b)).then(a.id.cmp(&b.id)));

        let mut best: Vec<(f64, usize, Candidate)> = Vec::with_capacity(NEIGHBORS + 1);
        let mut buf = Vec::new();
        for c in candidates {
            if best.len() == NEIGHBORS && bound(&c) > best[NEIGHBORS - 1].0 {
                break;
            }
            buf.clear();
            buf.extend_from_slice(&self.phones[c.first]);
            if let Some(j) = c.second {
                buf.extend_from_slice(&self.phones[j]);
            }
            let d = self.matrix.distance_resolved(query, &buf);
            let key = (d, c.id);
            if best.len() < NEIGHBORS || key < (best[NEIGHBORS - 1].0, best[NEIGHBORS - 1].1) {
                let at = best.partition_point(|b| (b.0, b.1) < key);
                best.insert(at, (d, c.id, c));
                best.truncate(NEIGHBORS);
            }
        }
        best.into_iter()
            .map(|(distance, _, c)| {
                let mut words = vec![self.vocab[c.first].clone()];
                words.extend(c.second.map(|j| self.vocab[j].clone()));
                Neighbor { words, distance }
            })
            .collect()
    }
}

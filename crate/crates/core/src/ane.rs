//! Acoustic-neighbour word embeddings.
//!
//! A word is embedded by running an LSTM over learned character vectors and
//! keeping the final hidden state. Training pulls each word towards its
//! phonetically nearest lexicon entry and away from a random far one, so
//! that similar-sounding words end up close together.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffcore::layers::lookup;
use crate::diffcore::{Adam, Checkpoint, Init, Lstm, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, Word};
use crate::phonetics::ConfusionMatrix;

/// Characters the embedding table covers: `a-z`, `0-9`, `'`.
pub const ALPHABET_SIZE: usize = 37;

pub const MIN_TRAINING_WORDS: usize = 20;

fn char_index(c: char) -> Option<usize> {
    match c {
        'a'..='z' => Some(c as usize - 'a' as usize),
        '0'..='9' => Some(26 + c as usize - '0' as usize),
        '\'' => Some(36),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AneConfig {
    pub dim: usize,
    pub char_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub margin: f64,
    /// Negatives are drawn from words whose phonetic distance to the anchor
    /// exceeds this quantile of the anchor's distances.
    pub negative_quantile: f64,
    /// Triplets sampled per anchor word in each epoch.
    pub triplets_per_anchor: usize,
}

impl Default for AneConfig {
    fn default() -> Self {
        AneConfig { dim: 32, char_dim: 16, epochs: 30, lr: 0.01, batch: 16, margin: 0.4, negative_quantile: 0.5, triplets_per_anchor: 4 }
    }
}

/// Parameter handles of the grapheme network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AneNet {
    pub chars: ParamId,
    pub lstm: Lstm,
}

impl AneNet {
    pub fn new(store: &mut ParamStore, char_dim: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let chars = store.add("ane.chars", &[ALPHABET_SIZE, char_dim], Init::Glorot, rng);
        let lstm = Lstm::new(store, "ane.lstm", char_dim, dim, rng);
        AneNet { chars, lstm }
    }

    pub fn bind(store: &ParamStore) -> Result<Self> {
        Ok(AneNet { chars: lookup(store, "ane.chars")?, lstm: Lstm::bind(store, "ane.lstm")? })
    }

    pub fn dim(&self) -> usize {
        self.lstm.hidden
    }

    /// Final hidden state of the LSTM over the word's characters.
    pub fn embed(&self, tape: &mut Tape, store: &ParamStore, word: &Word) -> Result<Var> {
        word.check_charset()?;
        let mut state = self.lstm.zero_state(tape);
        for c in word.graphemes() {
            let x = tape.row(store, self.chars, char_index(c).expect("charset checked"));
            state = self.lstm.step(tape, store, x, state)?;
        }
        Ok(state.h)
    }
}

/// A trained (or freshly initialized) embedding model.
#[derive(Clone, Debug)]
pub struct AneModel {
    store: ParamStore,
    net: AneNet,
    config: AneConfig,
}

impl AneModel {
    pub fn new(config: AneConfig, rng: &mut impl Rng) -> Self {
        let mut store = ParamStore::new();
        let net = AneNet::new(&mut store, config.char_dim, config.dim, rng);
        AneModel { store, net, config }
    }

    /// All weights zero; every word embeds to the zero vector.
    pub fn zeroed(config: AneConfig) -> Self {
        let mut model = Self::new(config, &mut ChaCha8Rng::seed_from_u64(0));
        for id in model.store.ids().collect::<Vec<_>>() {
            model.store.value_mut(id).iter_mut().for_each(|v| *v = 0.0);
        }
        model
    }

    pub fn dim(&self) -> usize {
        self.net.dim()
    }

    pub fn config(&self) -> &AneConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn net(&self) -> AneNet {
        self.net
    }

    pub fn embed(&self, word: &Word) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let v = self.net.embed(&mut tape, &self.store, word)?;
        Ok(tape.value(v).to_vec())
    }

    /// The `k` words of `vocabulary` with highest cosine similarity to `word`,
    /// excluding `word` itself.
    pub fn nearest(&self, word: &Word, vocabulary: &[Word], k: usize) -> Result<Vec<(Word, f64)>> {
        let target = self.embed(word)?;
        let mut scored = vocabulary
            .iter()
            .filter(|w| *w != word)
            .map(|w| Ok((w.clone(), cosine(&target, &self.embed(w)?))))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let c = &self.config;
        let header = BTreeMap::from([
            ("kind".to_string(), "ane".to_string()),
            ("dim".to_string(), c.dim.to_string()),
            ("char_dim".to_string(), c.char_dim.to_string()),
            ("epochs".to_string(), c.epochs.to_string()),
            ("lr".to_string(), c.lr.to_string()),
            ("batch".to_string(), c.batch.to_string()),
            ("margin".to_string(), c.margin.to_string()),
            ("negative_quantile".to_string(), c.negative_quantile.to_string()),
            ("triplets_per_anchor".to_string(), c.triplets_per_anchor.to_string()),
        ]);
        Checkpoint::from_store(&self.store, header)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.get("kind")? != "ane" {
            return Err(Error::Checkpoint(format!("expected an ane checkpoint, found {}", ck.get("kind")?)));
        }
        let config = AneConfig {
            dim: ck.parse_field("dim")?,
            char_dim: ck.parse_field("char_dim")?,
            epochs: ck.parse_field("epochs")?,
            lr: ck.parse_field("lr")?,
            batch: ck.parse_field("batch")?,
            margin: ck.parse_field("margin")?,
            negative_quantile: ck.parse_field("negative_quantile")?,
            triplets_per_anchor: ck.parse_field("triplets_per_anchor")?,
        };
        let store = ck.to_store();
        let net = AneNet::bind(&store)?;
        if net.dim() != config.dim || store.get(net.chars).cols() != config.char_dim {
            return Err(Error::Checkpoint("ane tensor shapes disagree with header".into()));
        }
        Ok(AneModel { store, net, config })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Pairwise normalized phone distances between lexicon words, row = anchor.
pub fn phonetic_distance_matrix(lex: &Lexicon, words: &[Word], m: &ConfusionMatrix) -> Result<Vec<Vec<f64>>> {
    let resolved = words.iter().map(|w| m.resolve(&lex.pronounce(w)?)).collect::<Result<Vec<_>>>()?;
    Ok(resolved
        .iter()
        .map(|a| resolved.iter().map(|b| m.distance_resolved(a, b) / a.len() as f64).collect())
        .collect())
}

/// Triplet hinge on unit-normalized embeddings:
/// `max(0, margin + |a - p| - |a - n|)`.
pub fn triplet_loss(tape: &mut Tape, anchor: Var, positive: Var, negative: Var, margin: f64) -> Var {
    let a = tape.l2_normalize(anchor);
    let p = tape.l2_normalize(positive);
    let n = tape.l2_normalize(negative);
    let ap = tape.sub(a, p);
    let an = tape.sub(a, n);
    let d_ap = tape.norm(ap);
    let d_an = tape.norm(an);
    let gap = tape.sub(d_ap, d_an);
    let shifted = tape.add_const(gap, margin);
    tape.relu(shifted)
}

/// Trains an embedding model on the lexicon's words with phonetic triplets.
pub fn train_ane(lex: &Lexicon, m: &ConfusionMatrix, config: &AneConfig, seed: u64) -> Result<AneModel> {
    let words = lex.words();
    if words.len() < MIN_TRAINING_WORDS {
        return Err(Error::LexiconTooSmall { found: words.len(), needed: MIN_TRAINING_WORDS });
    }
    let dist = phonetic_distance_matrix(lex, &words, m)?;
    let n = words.len();
    let mut positives = Vec::with_capacity(n);
    let mut negatives = Vec::with_capacity(n);
    for a in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&b| b != a).collect();
        others.sort_by(|&x, &y| dist[a][x].total_cmp(&dist[a][y]).then(x.cmp(&y)));
        positives.push(others[0]);
        let q = ((others.len() - 1) as f64 * config.negative_quantile).floor() as usize;
        let cutoff = dist[a][others[q]];
        let mut pool: Vec<usize> = others.iter().copied().filter(|&b| dist[a][b] > cutoff).collect();
        if pool.is_empty() {
            pool = others[1..].to_vec();
        }
        negatives.push(pool);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = AneModel::new(config.clone(), &mut rng);
    let opt = Adam::new(config.lr);
    let mut order: Vec<usize> = (0..n).flat_map(|a| std::iter::repeat(a).take(config.triplets_per_anchor)).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch.max(1)) {
            let scale = 1.0 / chunk.len() as f64;
            for &a in chunk {
                let neg = negatives[a][rng.gen_range(0..negatives[a].len())];
                let mut tape = Tape::new();
                let ea = model.net.embed(&mut tape, &model.store, &words[a])?;
                let ep = model.net.embed(&mut tape, &model.store, &words[positives[a]])?;
                let en = model.net.embed(&mut tape, &model.store, &words[neg])?;
                let loss = triplet_loss(&mut tape, ea, ep, en, config.margin);
                tape.backward(loss, scale, &mut model.store);
            }
            model.store.adam_step(&opt)?;
        }
    }
    Ok(model)
}

//! The n-gram replacement baseline.
//!
//! Every n-gram of the first turn is paired with every n-gram of the
//! follow-up and scored by normalized phone distance over the concatenated
//! pronunciations. The closest pair is spliced into the first turn.
//!
//! Only follow-up n-grams that contain a word absent from the first turn
//! compete, so copying a span onto itself (distance 0) cannot win over
//! the actual correction. When the follow-up adds no new word every pair
//! competes, which makes `rule_rewrite(u, u) == u`.

use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, Utterance, Word};
use crate::phonetics::ConfusionMatrix;
use crate::rewriter::{Rewrite, Rewriter};

pub const DEFAULT_MAX_N: usize = 3;

/// A proposed replacement of `span1` in turn 1 by `span2` from turn 2.
/// Spans are `(start, len)`, 0-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplacementCandidate {
    pub span1: (usize, usize),
    pub span2: (usize, usize),
    pub norm_dist: f64,
}

fn spans(len: usize, max_n: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..=max_n.min(len)).flat_map(move |n| (0..=len - n).map(move |s| (s, n)))
}

/// All n-gram pairs with `1 <= n <= max_n` on each side, scored by the phone
/// distance of the span pronunciations divided by the phone count of
/// `span1`.
pub fn candidate_pairs(
    utt1: &Utterance,
    utt2: &Utterance,
    lex: &Lexicon,
    m: &ConfusionMatrix,
    max_n: usize,
) -> Result<Vec<ReplacementCandidate>> {
    if max_n == 0 {
        return Err(Error::Validation("max_n must be at least 1".into()));
    }
    let resolve = |u: &Utterance| -> Result<Vec<Vec<u8>>> { u.words().iter().map(|w| m.resolve(&lex.pronounce(w)?)).collect() };
    let (p1, p2) = (resolve(utt1)?, resolve(utt2)?);
    let joined = |ps: &[Vec<u8>], (s, n): (usize, usize)| ps[s..s + n].concat();
    let mut out = Vec::new();
    for span1 in spans(utt1.len(), max_n) {
        let a = joined(&p1, span1);
        for span2 in spans(utt2.len(), max_n) {
            let b = joined(&p2, span2);
            out.push(ReplacementCandidate { span1, span2, norm_dist: m.distance_resolved(&a, &b) / a.len() as f64 });
        }
    }
    Ok(out)
}

/// Whether `span2` brings in a word that turn 1 lacks.
pub fn is_novel(candidate: &ReplacementCandidate, utt1: &Utterance, utt2: &Utterance) -> bool {
    let (s, n) = candidate.span2;
    utt2.words()[s..s + n].iter().any(|w| !utt1.words().contains(w))
}

/// Candidates allowed to win: those with a novel follow-up word, or all of
/// them when there are none.
pub fn eligible(candidates: &[ReplacementCandidate], utt1: &Utterance, utt2: &Utterance) -> Vec<ReplacementCandidate> {
    let novel: Vec<_> = candidates.iter().copied().filter(|c| is_novel(c, utt1, utt2)).collect();
    if novel.is_empty() {
        candidates.to_vec()
    } else {
        novel
    }
}

/// Total order used to pick the winner: distance, then earlier `span1`,
/// then longer `span2`, then earlier `span2`, then shorter `span1`.
pub fn preference(a: &ReplacementCandidate, b: &ReplacementCandidate) -> std::cmp::Ordering {
    a.norm_dist
        .total_cmp(&b.norm_dist)
        .then(a.span1.0.cmp(&b.span1.0))
        .then(b.span2.1.cmp(&a.span2.1))
        .then(a.span2.0.cmp(&b.span2.0))
        .then(a.span1.1.cmp(&b.span1.1))
}

/// Replaces the best eligible turn-1 span with its follow-up span.
pub fn rule_rewrite(
    utt1: &Utterance,
    utt2: &Utterance,
    lex: &Lexicon,
    m: &ConfusionMatrix,
    max_n: usize,
) -> Result<(Utterance, ReplacementCandidate)> {
    let candidates = candidate_pairs(utt1, utt2, lex, m, max_n)?;
    let best = eligible(&candidates, utt1, utt2).into_iter().min_by(preference).expect("non-empty utterances have candidates");
    let (s1, n1) = best.span1;
    let (s2, n2) = best.span2;
    let mut words: Vec<Word> = utt1.words()[..s1].to_vec();
    words.extend_from_slice(&utt2.words()[s2..s2 + n2]);
    words.extend_from_slice(&utt1.words()[s1 + n1..]);
    Ok((Utterance::new(words)?, best))
}

/// [`rule_rewrite`] as a [`Rewriter`].
#[derive(Clone, Debug)]
pub struct RuleRewriter {
    pub lexicon: Lexicon,
    pub matrix: ConfusionMatrix,
    pub max_n: usize,
}

impl Rewriter for RuleRewriter {
    fn engine(&self) -> &'static str {
        "rule"
    }

    fn rewrite(&self, utt1: &Utterance, utt2: &Utterance) -> Result<Rewrite> {
        let (utterance, _) = rule_rewrite(utt1, utt2, &self.lexicon, &self.matrix, self.max_n)?;
        Ok(Rewrite { utterance, pointers: None, log_prob: None, truncated: false, empty: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::toy_lexicon;

    fn u(s: &str) -> Utterance {
        Utterance::parse(s).unwrap()
    }

    #[test]
    fn worked_example() {
        let (lex, m) = (toy_lexicon(), ConfusionMatrix::default_matrix());
        let (out, best) = rule_rewrite(&u("call uncle of r"), &u("no i said uncle levar"), &lex, &m, 3).unwrap();
        assert_eq!(out.to_string(), "call uncle levar");
        assert_eq!(best.span1, (1, 3));
        assert_eq!(best.span2, (3, 2));
    }

    #[test]
    fn candidate_counts() {
        let (lex, m) = (toy_lexicon(), ConfusionMatrix::default_matrix());
        assert_eq!(candidate_pairs(&u("call mom"), &u("call dad"), &lex, &m, 2).unwrap().len(), 9);
        assert_eq!(candidate_pairs(&u("a b c d"), &u("x y"), &lex, &m, 3).unwrap().len(), 9 * 3);
        assert!(candidate_pairs(&u("a"), &u("b"), &lex, &m, 0).is_err());
    }

    #[test]
    fn identical_spans_score_zero_and_identity_holds() {
        let (lex, m) = (toy_lexicon(), ConfusionMatrix::default_matrix());
        let a = u("play some jazz in the kitchen");
        let c = candidate_pairs(&a, &a, &lex, &m, 3).unwrap();
        assert!(c.iter().filter(|c| c.span1 == c.span2).all(|c| c.norm_dist == 0.0));
        let (out, best) = rule_rewrite(&a, &a, &lex, &m, 3).unwrap();
        assert_eq!(out, a);
        assert_eq!(best.norm_dist, 0.0);
    }
}

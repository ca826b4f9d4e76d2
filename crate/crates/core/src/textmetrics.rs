//! Word error rate and its relative reduction.

use crate::error::{Error, Result};
use crate::lexicon::{Utterance, Word};

/// Word edits against a reference of `ref_len` words.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WerScore {
    pub edits: usize,
    pub ref_len: usize,
    pub wer: f64,
}

impl WerScore {
    fn new(edits: usize, ref_len: usize) -> Result<Self> {
        if ref_len == 0 {
            return Err(Error::EmptyReference);
        }
        Ok(WerScore { edits, ref_len, wer: edits as f64 / ref_len as f64 })
    }
}

/// Unit-cost Levenshtein distance over words.
pub fn word_edit_distance(hyp: &[Word], reference: &[Word]) -> usize {
    let mut prev: Vec<usize> = (0..=reference.len()).collect();
    let mut cur = vec![0; reference.len() + 1];
    for (i, h) in hyp.iter().enumerate() {
        cur[0] = i + 1;
        for (j, r) in reference.iter().enumerate() {
            let sub = prev[j] + usize::from(h != r);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[reference.len()]
}

pub fn wer(hyp: &Utterance, reference: &Utterance) -> Result<WerScore> {
    WerScore::new(word_edit_distance(hyp.words(), reference.words()), reference.len())
}

/// Corpus-level WER: total edits over total reference words.
pub fn corpus_wer<'a>(pairs: impl IntoIterator<Item = (&'a Utterance, &'a Utterance)>) -> Result<WerScore> {
    let (edits, ref_len) = pairs.into_iter().fold((0, 0), |(e, n), (hyp, reference)| {
        (e + word_edit_distance(hyp.words(), reference.words()), n + reference.len())
    });
    WerScore::new(edits, ref_len)
}

/// `1 - wer_rewrite / wer_original`. Negative when rewrites add errors.
pub fn werr(wer_rewrite: f64, wer_original: f64) -> Result<f64> {
    if wer_original <= 0.0 {
        return Err(Error::UndefinedWerr);
    }
    Ok(1.0 - wer_rewrite / wer_original)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn u(s: &str) -> Utterance {
        Utterance::parse(s).unwrap()
    }

    // Every monotone matching of hyp/ref positions, scored with unit costs.
    fn brute_force(hyp: &[usize], reference: &[usize]) -> usize {
        let (lh, lr) = (hyp.len(), reference.len());
        let mut best = usize::MAX;
        for sh in 0u32..(1 << lh) {
            for sr in 0u32..(1 << lr) {
                if sh.count_ones() != sr.count_ones() {
                    continue;
                }
                let k = sh.count_ones() as usize;
                let ih = (0..lh).filter(|i| sh >> i & 1 == 1);
                let ir = (0..lr).filter(|j| sr >> j & 1 == 1);
                let subs: usize = ih.zip(ir).map(|(i, j)| usize::from(hyp[i] != reference[j])).sum();
                best = best.min(subs + (lh - k) + (lr - k));
            }
        }
        best
    }

    #[test]
    fn identical_is_zero() {
        let s = wer(&u("call uncle levar"), &u("call uncle levar")).unwrap();
        assert_eq!(s.edits, 0);
        assert_eq!(s.wer, 0.0);
    }

    #[test]
    fn worked_example() {
        let s = wer(&u("call uncle of r"), &u("call uncle levar")).unwrap();
        assert_eq!((s.edits, s.ref_len), (2, 3));
        assert_eq!(s.wer, 2.0 / 3.0);
    }

    #[test]
    fn corpus_wer_pools_counts() {
        let (h1, r1) = (u("call uncle of r"), u("call uncle levar"));
        let (h2, r2) = (u("play jazz"), u("play jazz"));
        let s = corpus_wer([(&h1, &r1), (&h2, &r2)]).unwrap();
        assert_eq!((s.edits, s.ref_len), (2, 5));
    }

    #[test]
    fn werr_cases() {
        assert_eq!(werr(0.0, 0.3).unwrap(), 1.0);
        assert_eq!(werr(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(werr(0.5, 0.25).unwrap(), -1.0);
        assert!(matches!(werr(0.1, 0.0), Err(Error::UndefinedWerr)));
    }

    fn words(ids: &[usize]) -> Vec<Word> {
        ids.iter().map(|i| Word::new(&format!("w{i}")).unwrap()).collect()
    }

    proptest! {
        #[test]
        fn dp_matches_enumeration(h in prop::collection::vec(0usize..3, 0..=5), r in prop::collection::vec(0usize..3, 0..=5)) {
            prop_assert_eq!(word_edit_distance(&words(&h), &words(&r)), brute_force(&h, &r));
        }

        #[test]
        fn zero_iff_equal(h in prop::collection::vec(0usize..3, 1..=5), r in prop::collection::vec(0usize..3, 1..=5)) {
            let (hu, ru) = (Utterance::new(words(&h)).unwrap(), Utterance::new(words(&r)).unwrap());
            prop_assert_eq!(wer(&hu, &ru).unwrap().wer == 0.0, h == r);
        }

        #[test]
        fn werr_decreases_in_rewrite_wer(a in 0.0f64..2.0, b in 0.0f64..2.0, orig in 0.01f64..2.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(werr(lo, orig).unwrap() >= werr(hi, orig).unwrap());
        }
    }
}

//! Rewrite trigger: emit a rewrite only when it sounds close to the original.

use crate::error::Result;
use crate::lexicon::{Lexicon, Utterance};
use crate::phonetics::{normalized_phone_distance, ConfusionMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriggerDecision {
    pub distance: f64,
    pub threshold: f64,
    pub fire: bool,
}

/// Phone edit distance between the two utterances' concatenated
/// pronunciations, divided by the phone count of `original`.
pub fn rewrite_distance(original: &Utterance, rewrite: &Utterance, lex: &Lexicon, m: &ConfusionMatrix) -> Result<f64> {
    let a = lex.pronounce_all(original.words())?;
    let b = lex.pronounce_all(rewrite.words())?;
    normalized_phone_distance(&a, &b, m)
}

/// Fires when `distance < threshold`; a threshold of 0 never fires.
pub fn decide(distance: f64, threshold: f64) -> TriggerDecision {
    TriggerDecision { distance, threshold, fire: distance < threshold }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::toy_lexicon;

    fn u(s: &str) -> Utterance {
        Utterance::parse(s).unwrap()
    }

    #[test]
    fn distances() {
        let (lex, m) = (toy_lexicon(), ConfusionMatrix::default_matrix());
        let orig = u("call uncle of r");
        assert_eq!(rewrite_distance(&orig, &orig, &lex, &m).unwrap(), 0.0);
        let near = rewrite_distance(&orig, &u("call uncle levar"), &lex, &m).unwrap();
        let far = rewrite_distance(&orig, &u("play some jazz"), &lex, &m).unwrap();
        assert!(near > 0.0 && near < far, "{near} {far}");
        let doubled = rewrite_distance(&u("call uncle of r call uncle of r"), &u("call uncle levar call uncle levar"), &lex, &m).unwrap();
        assert!((doubled - near).abs() < 1e-12);
    }

    #[test]
    fn strict_threshold() {
        assert!(!decide(0.0, 0.0).fire);
        assert!(decide(0.1, 0.2).fire);
        assert!(!decide(0.0, -1.0).fire);
        assert!(!decide(0.2, 0.2).fire);
    }
}

//! Beam search over pointer sequences.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::rewriter::pointer::Pointer;

/// A decoder that can score continuations of a partial hypothesis.
pub trait StepDecoder {
    type State: Clone;

    fn start(&mut self) -> Result<Self::State>;

    /// Legal next pointers with their log-probabilities and the state that
    /// follows each. Masked (impossible) pointers are left out.
    fn expand(&mut self, state: &Self::State) -> Result<Vec<(Pointer, f64, Self::State)>>;
}

/// A finished hypothesis. The pointers end with [`Pointer::Eos`].
#[derive(Clone, Debug, PartialEq)]
pub struct BeamResult {
    pub pointers: Vec<Pointer>,
    pub log_prob: f64,
    /// Set when the hypothesis was closed because it reached `max_len`.
    pub truncated: bool,
}

/// Best first: higher log-probability, then shorter, then the smaller
/// pointer sequence.
pub fn rank(a: (&[Pointer], f64), b: (&[Pointer], f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.len().cmp(&b.0.len())).then_with(|| a.0.cmp(b.0))
}

struct Hyp<S> {
    pointers: Vec<Pointer>,
    log_prob: f64,
    state: S,
}

/// Searches with `width` live hypotheses and at most `max_len` word
/// pointers per hypothesis. At `max_len` only eos may follow, at its own
/// model probability, and the result is flagged `truncated`.
///
/// Each round ranks every continuation of every live hypothesis and keeps
/// the best `width`; kept continuations ending in eos are finished. The
/// search stops once no live hypothesis can beat the best finished one,
/// since extending a hypothesis never raises its log-probability. With
/// `width` of at least the number of legal continuations the search is
/// exhaustive. When `width > 1` the greedy path is also decoded and the
/// better of the two results is returned, so widening the beam never
/// lowers the score.
pub fn beam_search<D: StepDecoder>(decoder: &mut D, width: usize, max_len: usize) -> Result<BeamResult> {
    if width == 0 || max_len == 0 {
        return Err(Error::Validation("beam width and max_len must be at least 1".into()));
    }
    let best = search(decoder, width, max_len)?;
    if width == 1 {
        return Ok(best);
    }
    let greedy = search(decoder, 1, max_len)?;
    Ok(match rank((&greedy.pointers, greedy.log_prob), (&best.pointers, best.log_prob)) {
        Ordering::Less => greedy,
        _ => best,
    })
}

fn search<D: StepDecoder>(decoder: &mut D, width: usize, max_len: usize) -> Result<BeamResult> {
    let mut live = vec![Hyp { pointers: Vec::new(), log_prob: 0.0, state: decoder.start()? }];
    let mut finished: Vec<BeamResult> = Vec::new();
    while !live.is_empty() {
        let mut candidates: Vec<Hyp<D::State>> = Vec::new();
        for hyp in &live {
            let at_cap = hyp.pointers.len() >= max_len;
            for (p, lp, state) in decoder.expand(&hyp.state)? {
                if at_cap && p != Pointer::Eos {
                    continue;
                }
                if !lp.is_finite() {
                    continue;
                }
                let mut pointers = hyp.pointers.clone();
                pointers.push(p);
                candidates.push(Hyp { pointers, log_prob: hyp.log_prob + lp, state });
            }
        }
        candidates.sort_by(|a, b| rank((&a.pointers, a.log_prob), (&b.pointers, b.log_prob)));
        candidates.truncate(width);
        live.clear();
        for c in candidates {
            if c.pointers.last() == Some(&Pointer::Eos) {
                let truncated = c.pointers.len() > max_len;
                finished.push(BeamResult { pointers: c.pointers, log_prob: c.log_prob, truncated });
            } else {
                live.push(c);
            }
        }
        let best_finished = finished.iter().map(|f| f.log_prob).fold(f64::NEG_INFINITY, f64::max);
        let best_live = live.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
        if best_finished > best_live {
            break;
        }
    }
    finished.sort_by(|a, b| rank((&a.pointers, a.log_prob), (&b.pointers, b.log_prob)));
    finished.into_iter().next().ok_or(Error::NoCandidate)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A fixed table of step log-probabilities keyed by prefix length.
    struct Table {
        steps: Vec<Vec<(Pointer, f64)>>,
    }

    impl StepDecoder for Table {
        type State = usize;
        fn start(&mut self) -> Result<usize> {
            Ok(0)
        }
        fn expand(&mut self, t: &usize) -> Result<Vec<(Pointer, f64, usize)>> {
            let row = &self.steps[(*t).min(self.steps.len() - 1)];
            Ok(row.iter().map(|&(p, q)| (p, q.ln(), t + 1)).collect())
        }
    }

    #[test]
    fn width_one_is_greedy() {
        let mut d = Table {
            steps: vec![
                vec![(Pointer::first(1), 0.6), (Pointer::first(2), 0.4)],
                vec![(Pointer::Eos, 0.6), (Pointer::second(1), 0.4)],
                vec![(Pointer::Eos, 1.0)],
            ],
        };
        let r = beam_search(&mut d, 1, 5).unwrap();
        assert_eq!(r.pointers, vec![Pointer::first(1), Pointer::Eos]);
        assert!((r.log_prob - (0.36f64).ln()).abs() < 1e-12);
        assert!(!r.truncated);
    }

    #[test]
    fn wider_beam_finds_better_late_path() {
        // greedy takes 1-1 (0.6) then must pay 0.1; 1-2 (0.4) then eos 1.0 wins
        struct Branch;
        impl StepDecoder for Branch {
            type State = Vec<Pointer>;
            fn start(&mut self) -> Result<Vec<Pointer>> {
                Ok(Vec::new())
            }
            fn expand(&mut self, s: &Vec<Pointer>) -> Result<Vec<(Pointer, f64, Vec<Pointer>)>> {
                let next = |p: Pointer| {
                    let mut v = s.clone();
                    v.push(p);
                    v
                };
                let row: Vec<(Pointer, f64)> = match s.as_slice() {
                    [] => vec![(Pointer::first(1), 0.6), (Pointer::first(2), 0.4)],
                    [p] if *p == Pointer::first(1) => vec![(Pointer::Eos, 0.1), (Pointer::second(1), 0.9)],
                    [p] if *p == Pointer::first(2) => vec![(Pointer::Eos, 1.0)],
                    _ => vec![(Pointer::Eos, 0.1)],
                };
                Ok(row.into_iter().map(|(p, q)| (p, q.ln(), next(p))).collect())
            }
        }
        let greedy = beam_search(&mut Branch, 1, 4).unwrap();
        let beam = beam_search(&mut Branch, 3, 4).unwrap();
        assert_eq!(beam.pointers, vec![Pointer::first(2), Pointer::Eos]);
        assert!(beam.log_prob >= greedy.log_prob);
    }

    #[test]
    fn cap_forces_eos_and_flags() {
        let mut d = Table { steps: vec![vec![(Pointer::first(1), 0.9), (Pointer::Eos, 0.1)]] };
        let r = beam_search(&mut d, 1, 2).unwrap();
        assert_eq!(r.pointers, vec![Pointer::first(1), Pointer::first(1), Pointer::Eos]);
        assert!(r.truncated);
        assert!((r.log_prob - (0.9f64 * 0.9 * 0.1).ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_width_rejected() {
        let mut d = Table { steps: vec![vec![(Pointer::Eos, 1.0)]] };
        assert!(beam_search(&mut d, 0, 2).is_err());
        assert!(beam_search(&mut d, 1, 0).is_err());
    }
}

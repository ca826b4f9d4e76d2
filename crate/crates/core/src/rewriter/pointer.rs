use std::fmt;

use crate::error::{Error, Result};
use crate::lexicon::{Utterance, Word};

/// Which input utterance a pointer refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Turn {
    First,
    Second,
}

impl Turn {
    pub fn number(self) -> u8 {
        match self {
            Turn::First => 1,
            Turn::Second => 2,
        }
    }
}

/// A copy instruction: word `index` (1-based) of a turn, or end of sequence.
///
/// The derived order sorts all word pointers before [`Pointer::Eos`], turn 1
/// before turn 2, then by index. Beam search uses it to break ties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pointer {
    Word { turn: Turn, index: usize },
    Eos,
}

impl Pointer {
    pub fn first(index: usize) -> Self {
        Pointer::Word { turn: Turn::First, index }
    }

    pub fn second(index: usize) -> Self {
        Pointer::Word { turn: Turn::Second, index }
    }
}

impl fmt::Display for Pointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pointer::Word { turn, index } => write!(f, "{}-{}", turn.number(), index),
            Pointer::Eos => f.write_str("eos"),
        }
    }
}

/// A pointer sequence terminated by exactly one [`Pointer::Eos`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointerSeq(Vec<Pointer>);

impl PointerSeq {
    /// Checks the eos layout and that indices fit the turn lengths.
    pub fn new(pointers: Vec<Pointer>, len1: usize, len2: usize) -> Result<Self> {
        match pointers.iter().position(|p| *p == Pointer::Eos) {
            Some(i) if i + 1 == pointers.len() => {}
            _ => return Err(Error::Validation("pointer sequence must end with its only eos".into())),
        }
        for p in &pointers {
            if let Pointer::Word { turn, index } = *p {
                let len = if turn == Turn::First { len1 } else { len2 };
                if index == 0 || index > len {
                    return Err(Error::Validation(format!("pointer {p} is out of range")));
                }
            }
        }
        Ok(PointerSeq(pointers))
    }

    pub fn pointers(&self) -> &[Pointer] {
        &self.0
    }

    /// The word pointers, without the trailing eos.
    pub fn words(&self) -> &[Pointer] {
        &self.0[..self.0.len() - 1]
    }

    /// True when indices strictly increase within each turn.
    pub fn is_monotonic(&self) -> bool {
        let mut last = [0usize; 2];
        self.words().iter().all(|p| match *p {
            Pointer::Word { turn, index } => {
                let slot = &mut last[turn.number() as usize - 1];
                let ok = index > *slot;
                *slot = index;
                ok
            }
            Pointer::Eos => false,
        })
    }

    /// Surface words of the pointed-to positions, or `None` when the
    /// sequence is only eos.
    pub fn render(&self, utt1: &Utterance, utt2: &Utterance) -> Option<Utterance> {
        let words: Vec<Word> = self
            .words()
            .iter()
            .map(|p| match *p {
                Pointer::Word { turn: Turn::First, index } => utt1.words()[index - 1].clone(),
                Pointer::Word { turn: Turn::Second, index } => utt2.words()[index - 1].clone(),
                Pointer::Eos => unreachable!("eos only at the end"),
            })
            .collect();
        Utterance::new(words).ok()
    }
}

impl fmt::Display for PointerSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Training target for a rewrite: each reference word points at a copy of
/// itself, turn 1 preferred. Within a turn the first occurrence after the
/// last one used is taken, falling back to the first occurrence overall.
/// Returns `None` when a reference word occurs in neither turn.
pub fn derive_pointer_targets(utt1: &Utterance, utt2: &Utterance, reference: &Utterance) -> Option<PointerSeq> {
    let mut last = [0usize; 2];
    let mut out = Vec::with_capacity(reference.len() + 1);
    for word in reference.words() {
        let pick = [(Turn::First, utt1), (Turn::Second, utt2)].into_iter().find_map(|(turn, utt)| {
            let slot = last[turn.number() as usize - 1];
            let positions: Vec<usize> =
                utt.words().iter().enumerate().filter(|(_, w)| *w == word).map(|(i, _)| i + 1).collect();
            let index = positions.iter().copied().find(|&i| i > slot).or_else(|| positions.first().copied())?;
            Some((turn, index))
        });
        let (turn, index) = pick?;
        last[turn.number() as usize - 1] = index;
        out.push(Pointer::Word { turn, index });
    }
    out.push(Pointer::Eos);
    Some(PointerSeq(out))
}

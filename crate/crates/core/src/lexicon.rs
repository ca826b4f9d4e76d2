//! Words, utterances, phones and pronunciation lookup.
//!
//! A [`Lexicon`] maps lowercase word surfaces to phone sequences drawn from a
//! fixed 39-symbol ARPAbet inventory (no stress markers). Words missing from
//! the lexicon are pronounced by [`g2p_fallback`], a frozen one-letter,
//! one-phone table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lowercase token. Its graphemes are the characters of the surface.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Word(String);

impl Word {
    /// Lowercases `surface`; rejects empty input and embedded whitespace.
    pub fn new(surface: &str) -> Result<Self> {
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::InvalidWord(surface.to_string()));
        }
        Ok(Word(surface.to_lowercase()))
    }

    pub fn surface(&self) -> &str {
        &self.0
    }

    pub fn graphemes(&self) -> impl Iterator<Item = char> + '_ {
        self.0.chars()
    }

    /// Checks the word only uses `[a-z0-9']`, the alphabet phonetic models accept.
    pub fn check_charset(&self) -> Result<()> {
        match self.0.chars().find(|&c| !is_supported_char(c)) {
            Some(ch) => Err(Error::UnsupportedCharacter { word: self.0.clone(), ch }),
            None => Ok(()),
        }
    }
}

pub(crate) fn is_supported_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '\''
}

impl TryFrom<String> for Word {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Word::new(&s)
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A non-empty sequence of words. Serializes as its space-joined text.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Utterance(Vec<Word>);

impl Utterance {
    pub fn new(words: Vec<Word>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::EmptyUtterance);
        }
        Ok(Utterance(words))
    }

    /// Lowercases the text, drops punctuation other than apostrophes and
    /// splits on whitespace. `"No, I said Uncle LeVar"` parses to five words.
    pub fn parse(text: &str) -> Result<Self> {
        let cleaned: String = text
            .chars()
            .map(|c| if c.is_ascii_punctuation() && c != '\'' { ' ' } else { c })
            .collect();
        let words = cleaned.split_whitespace().map(Word::new).collect::<Result<Vec<_>>>()?;
        Utterance::new(words)
    }

    pub fn words(&self) -> &[Word] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_words(self) -> Vec<Word> {
        self.0
    }
}

impl TryFrom<String> for Utterance {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Utterance::parse(&s)
    }
}

impl From<Utterance> for String {
    fn from(u: Utterance) -> String {
        u.to_string()
    }
}

impl FromStr for Utterance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Utterance::parse(s)
    }
}

impl fmt::Display for Utterance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(w.surface())?;
        }
        Ok(())
    }
}

macro_rules! phones {
    ($($name:ident),* $(,)?) => {
        /// ARPAbet phone without stress.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Phone {
            $($name),*
        }

        impl Phone {
            /// The full inventory, in declaration order.
            pub const ALL: [Phone; 39] = [$(Phone::$name),*];

            pub fn symbol(self) -> &'static str {
                match self {
                    $(Phone::$name => stringify!($name)),*
                }
            }
        }

        impl FromStr for Phone {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $(stringify!($name) => Ok(Phone::$name),)*
                    _ => Err(Error::UnknownPhone(s.to_string())),
                }
            }
        }
    };
}

phones!(
    AA, AE, AH, AO, AW, AY, B, CH, D, DH, EH, ER, EY, F, G, HH, IH, IY, JH, K, L, M, N, NG, OW, OY,
    P, R, S, SH, T, TH, UH, UW, V, W, Y, Z, ZH,
);

impl Phone {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Ordered phones of a pronunciation. Non-empty when it comes from a lexicon
/// or the fallback; spans built internally may be empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PhoneSeq(pub Vec<Phone>);

impl PhoneSeq {
    pub fn phones(&self) -> &[Phone] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extend_from(&mut self, other: &PhoneSeq) {
        self.0.extend_from_slice(&other.0);
    }
}

impl FromStr for PhoneSeq {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.split_whitespace().map(str::parse).collect::<Result<Vec<_>>>().map(PhoneSeq)
    }
}

impl fmt::Display for PhoneSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(p.symbol())?;
        }
        Ok(())
    }
}

/// Word surface to pronunciation. Immutable once loaded.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, PhoneSeq>,
    inventory: BTreeSet<Phone>,
}

impl Lexicon {
    /// Parses `word PH1 PH2 ...` lines. Lines starting with `#` and blank lines
    /// are skipped; a repeated word keeps its last entry.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("non-empty line has a field");
            let phones = fields
                .map(|p| {
                    p.parse::<Phone>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("unknown phone {p:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if phones.is_empty() {
                return Err(Error::Parse { line: line_no, message: format!("word {word:?} has no phones") });
            }
            lex.insert(word, PhoneSeq(phones));
        }
        Ok(lex)
    }

    pub fn insert(&mut self, word: &str, phones: PhoneSeq) {
        self.inventory.extend(phones.phones().iter().copied());
        self.entries.insert(word.to_lowercase(), phones);
    }

    pub fn get(&self, surface: &str) -> Option<&PhoneSeq> {
        self.entries.get(surface)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn inventory(&self) -> &BTreeSet<Phone> {
        &self.inventory
    }

    /// Entries in surface order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &PhoneSeq)> {
        self.entries.iter().map(|(w, p)| (w.as_str(), p))
    }

    /// Sorted word list; every entry is a valid [`Word`].
    pub fn words(&self) -> Vec<Word> {
        self.entries.keys().map(|w| Word(w.clone())).collect()
    }

    /// Lexicon entry if present, otherwise the letter table.
    pub fn pronounce(&self, word: &Word) -> Result<PhoneSeq> {
        match self.entries.get(word.surface()) {
            Some(p) => Ok(p.clone()),
            None => g2p_fallback(word),
        }
    }

    /// Concatenated pronunciations of `words`, without boundary symbols.
    pub fn pronounce_all<'a>(&self, words: impl IntoIterator<Item = &'a Word>) -> Result<PhoneSeq> {
        let mut out = PhoneSeq::default();
        for w in words {
            out.extend_from(&self.pronounce(w)?);
        }
        Ok(out)
    }
}

/// The bundled toy lexicon source.
pub const TOY_LEXICON: &str = include_str!("../data/toy_lexicon.txt");

/// Parses [`TOY_LEXICON`].
pub fn toy_lexicon() -> Lexicon {
    Lexicon::parse(TOY_LEXICON).expect("bundled lexicon parses")
}

/// Letter-to-phone table used when a word is missing from the lexicon.
/// Digits map to the first phone of their spelled-out name.
pub const LETTER_TABLE: [(char, Phone); 36] = [
    ('a', Phone::AE),
    ('b', Phone::B),
    ('c', Phone::K),
    ('d', Phone::D),
    ('e', Phone::EH),
    ('f', Phone::F),
    ('g', Phone::G),
    ('h', Phone::HH),
    ('i', Phone::IH),
    ('j', Phone::JH),
    ('k', Phone::K),
    ('l', Phone::L),
    ('m', Phone::M),
    ('n', Phone::N),
    ('o', Phone::AA),
    ('p', Phone::P),
    ('q', Phone::K),
    ('r', Phone::R),
    ('s', Phone::S),
    ('t', Phone::T),
    ('u', Phone::AH),
    ('v', Phone::V),
    ('w', Phone::W),
    ('x', Phone::K),
    ('y', Phone::Y),
    ('z', Phone::Z),
    ('0', Phone::Z),
    ('1', Phone::W),
    ('2', Phone::T),
    ('3', Phone::TH),
    ('4', Phone::F),
    ('5', Phone::F),
    ('6', Phone::S),
    ('7', Phone::S),
    ('8', Phone::EY),
    ('9', Phone::N),
];

fn letter_phone(c: char) -> Option<Phone> {
    LETTER_TABLE.iter().find(|(l, _)| *l == c).map(|&(_, p)| p)
}

/// One phone per letter or digit; apostrophes are silent.
pub fn g2p_fallback(word: &Word) -> Result<PhoneSeq> {
    word.check_charset()?;
    let phones: Vec<Phone> = word.graphemes().filter_map(letter_phone).collect();
    if phones.is_empty() {
        // only apostrophes
        return Err(Error::UnsupportedCharacter { word: word.surface().to_string(), ch: '\'' });
    }
    Ok(PhoneSeq(phones))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Word::new(s).unwrap()
    }

    fn seq(s: &str) -> PhoneSeq {
        s.parse().unwrap()
    }

    #[test]
    fn parses_single_entry() {
        let lex = Lexicon::parse("call K AO L").unwrap();
        assert_eq!(lex.get("call"), Some(&seq("K AO L")));
        assert_eq!(lex.inventory().len(), 3);
    }

    #[test]
    fn empty_file_is_empty_lexicon() {
        assert!(Lexicon::parse("").unwrap().is_empty());
        assert!(Lexicon::parse("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn last_entry_wins() {
        let lex = Lexicon::parse("a AH\na EY").unwrap();
        assert_eq!(lex.get("a"), Some(&seq("EY")));
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        match Lexicon::parse("call K AO L\nlonely") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match Lexicon::parse("# c\ncall K XX L") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fallback_letters() {
        assert_eq!(g2p_fallback(&w("ab")).unwrap(), seq("AE B"));
        assert_eq!(g2p_fallback(&w("r")).unwrap(), seq("R"));
        assert_eq!(g2p_fallback(&w("levar")).unwrap().len(), 5);
        assert_eq!(g2p_fallback(&w("r2d2")).unwrap(), seq("R T D T"));
    }

    #[test]
    fn fallback_rejects_unsupported_characters() {
        assert!(matches!(g2p_fallback(&w("café")), Err(Error::UnsupportedCharacter { ch: 'é', .. })));
        assert!(g2p_fallback(&w("a-b")).is_err());
    }

    // The published table in the book must match this golden string.
    #[test]
    fn letter_table_golden() {
        let rendered: Vec<String> = LETTER_TABLE.iter().map(|(c, p)| format!("{c}:{p}")).collect();
        assert_eq!(
            rendered.join(" "),
            "a:AE b:B c:K d:D e:EH f:F g:G h:HH i:IH j:JH k:K l:L m:M n:N o:AA p:P q:K r:R s:S t:T \
             u:AH v:V w:W x:K y:Y z:Z 0:Z 1:W 2:T 3:TH 4:F 5:F 6:S 7:S 8:EY 9:N"
        );
    }

    #[test]
    fn pronounce_prefers_lexicon() {
        let lex = Lexicon::parse("call K AO L\nr AA R").unwrap();
        assert_eq!(lex.pronounce(&w("call")).unwrap(), seq("K AO L"));
        assert_eq!(lex.pronounce(&w("r")).unwrap(), seq("AA R"));
        assert_eq!(Lexicon::default().pronounce(&w("r")).unwrap(), seq("R"));
    }

    #[test]
    fn word_folds_case_and_rejects_whitespace() {
        assert_eq!(w("LeVar").surface(), "levar");
        assert!(Word::new("").is_err());
        assert!(Word::new("a b").is_err());
        assert_eq!(w("uncle").graphemes().collect::<String>(), "uncle");
    }

    #[test]
    fn utterance_parse_strips_punctuation() {
        let u = Utterance::parse("No, I said Uncle LeVar").unwrap();
        assert_eq!(u.to_string(), "no i said uncle levar");
        assert!(Utterance::parse(" , ").is_err());
        assert_eq!(Utterance::parse("won't").unwrap().len(), 1);
    }

    #[test]
    fn toy_lexicon_is_well_formed() {
        let lex = toy_lexicon();
        assert!(lex.len() >= 300);
        for (word, phones) in lex.iter() {
            Word::new(word).unwrap().check_charset().unwrap();
            assert!(!phones.is_empty());
        }
        assert_eq!(lex.get("levar"), Some(&seq("L AH V AA R")));
    }
}

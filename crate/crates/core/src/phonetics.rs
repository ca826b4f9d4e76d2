//! Phone confusion costs and weighted Levenshtein distance over phones.
//!
//! The built-in matrix derives substitution costs from a small articulatory
//! feature table: every phone carries four categorical features (class plus
//! three class-specific ones) and the cost of swapping two phones is the
//! fraction of features on which they disagree. Consonant/vowel swaps
//! therefore always cost 1. Insertions and deletions cost 1.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lexicon::{Phone, PhoneSeq};

/// Tolerance for the symmetry check when loading a matrix.
const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Feature {
    Consonant,
    Vowel,
    Voiced,
    Voiceless,
    Bilabial,
    Labiodental,
    Dental,
    Alveolar,
    Postalveolar,
    Palatal,
    Velar,
    Glottal,
    Stop,
    Affricate,
    Fricative,
    Nasal,
    Lateral,
    Approximant,
    High,
    Mid,
    Low,
    Front,
    Central,
    Back,
    Tense,
    Lax,
    FrontGlide,
    BackGlide,
    Rhotic,
}

fn features(p: Phone) -> [Feature; 4] {
    use Feature::*;
    let c = |v, pl, m| [Consonant, v, pl, m];
    let v = |h, b, k| [Vowel, h, b, k];
    match p {
        Phone::B => c(Voiced, Bilabial, Stop),
        Phone::P => c(Voiceless, Bilabial, Stop),
        Phone::D => c(Voiced, Alveolar, Stop),
        Phone::T => c(Voiceless, Alveolar, Stop),
        Phone::G => c(Voiced, Velar, Stop),
        Phone::K => c(Voiceless, Velar, Stop),
        Phone::CH => c(Voiceless, Postalveolar, Affricate),
        Phone::JH => c(Voiced, Postalveolar, Affricate),
        Phone::F => c(Voiceless, Labiodental, Fricative),
        Phone::V => c(Voiced, Labiodental, Fricative),
        Phone::TH => c(Voiceless, Dental, Fricative),
        Phone::DH => c(Voiced, Dental, Fricative),
        Phone::S => c(Voiceless, Alveolar, Fricative),
        Phone::Z => c(Voiced, Alveolar, Fricative),
        Phone::SH => c(Voiceless, Postalveolar, Fricative),
        Phone::ZH => c(Voiced, Postalveolar, Fricative),
        Phone::HH => c(Voiceless, Glottal, Fricative),
        Phone::M => c(Voiced, Bilabial, Nasal),
        Phone::N => c(Voiced, Alveolar, Nasal),
        Phone::NG => c(Voiced, Velar, Nasal),
        Phone::L => c(Voiced, Alveolar, Lateral),
        Phone::R => c(Voiced, Alveolar, Approximant),
        Phone::W => c(Voiced, Bilabial, Approximant),
        Phone::Y => c(Voiced, Palatal, Approximant),
        Phone::IY => v(High, Front, Tense),
        Phone::IH => v(High, Front, Lax),
        Phone::EY => v(Mid, Front, FrontGlide),
        Phone::EH => v(Mid, Front, Lax),
        Phone::AE => v(Low, Front, Lax),
        Phone::AA => v(Low, Back, Tense),
        Phone::AO => v(Mid, Back, Tense),
        Phone::AH => v(Mid, Central, Lax),
        Phone::UH => v(High, Back, Lax),
        Phone::UW => v(High, Back, Tense),
        Phone::OW => v(Mid, Back, BackGlide),
        Phone::AW => v(Low, Central, BackGlide),
        Phone::AY => v(Low, Central, FrontGlide),
        Phone::OY => v(Mid, Back, FrontGlide),
        Phone::ER => v(Mid, Central, Rhotic),
    }
}

/// `1 - shared / total` over the feature table.
pub fn feature_cost(a: Phone, b: Phone) -> f64 {
    let (fa, fb) = (features(a), features(b));
    let shared = fa.iter().zip(&fb).filter(|(x, y)| x == y).count();
    1.0 - shared as f64 / fa.len() as f64
}

/// Symmetric phone substitution costs plus insertion and deletion costs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    phones: Vec<Phone>,
    slot: [Option<u8>; 39],
    sub: Vec<f64>,
    ins: f64,
    del: f64,
}

impl ConfusionMatrix {
    fn with_phones(phones: Vec<Phone>, fill: f64) -> Self {
        let mut slot = [None; 39];
        for (i, p) in phones.iter().enumerate() {
            slot[p.index()] = Some(i as u8);
        }
        let n = phones.len();
        let mut sub = vec![fill; n * n];
        for i in 0..n {
            sub[i * n + i] = 0.0;
        }
        ConfusionMatrix { phones, slot, sub, ins: 1.0, del: 1.0 }
    }

    /// The built-in feature-based matrix over all 39 phones.
    pub fn default_matrix() -> Self {
        let mut m = Self::with_phones(Phone::ALL.to_vec(), 1.0);
        let n = m.phones.len();
        for i in 0..n {
            for j in 0..n {
                m.sub[i * n + j] = feature_cost(m.phones[i], m.phones[j]);
            }
        }
        m
    }

    /// Parses the CSV layout written by [`ConfusionMatrix::to_csv`]: a header
    /// `phone,P1,P2,...`, one row per phone, and optional `_ins,<cost>` /
    /// `_del,<cost>` rows. Empty or missing cells default to 1.0; a cell given
    /// on one side only is mirrored. Costs are clamped to `[0, 1]`.
    pub fn from_csv(text: &str, inventory: &BTreeSet<Phone>) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Validation("empty matrix file".into()))?;
        let parse_phone = |sym: &str| -> Result<Phone> {
            let p: Phone = sym.trim().parse()?;
            if inventory.contains(&p) {
                Ok(p)
            } else {
                Err(Error::UnknownPhone(sym.trim().to_string()))
            }
        };
        let phones = header.split(',').skip(1).map(parse_phone).collect::<Result<Vec<_>>>()?;
        let n = phones.len();
        if phones.iter().collect::<BTreeSet<_>>().len() != n {
            return Err(Error::Validation("duplicate phone in header".into()));
        }
        let mut m = Self::with_phones(phones, f64::NAN);
        let parse_cost = |cell: &str, line: usize| -> Result<Option<f64>> {
            let cell = cell.trim();
            if cell.is_empty() {
                return Ok(None);
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse { line, message: format!("bad cost {cell:?}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("non-finite cost {cell:?}") });
            }
            Ok(Some(v))
        };
        for (i, line) in lines {
            let line_no = i + 1;
            let mut cells = line.split(',');
            let label = cells.next().unwrap_or("").trim();
            match label {
                "_ins" | "_del" => {
                    let v = cells
                        .next()
                        .and_then(|c| parse_cost(c, line_no).transpose())
                        .transpose()?
                        .ok_or_else(|| Error::Parse { line: line_no, message: format!("{label} needs a cost") })?;
                    if v <= 0.0 {
                        return Err(Error::Validation(format!("{label} cost must be positive")));
                    }
                    let v = v.min(1.0);
                    if label == "_ins" {
                        m.ins = v;
                    } else {
                        m.del = v;
                    }
                }
                _ => {
                    let row = m.slot_of(parse_phone(label)?)?;
                    for (col, cell) in cells.enumerate() {
                        if col >= n {
                            return Err(Error::Parse { line: line_no, message: "too many cells".into() });
                        }
                        if let Some(v) = parse_cost(cell, line_no)? {
                            if row == col && v != 0.0 {
                                return Err(Error::Validation(format!(
                                    "diagonal cost for {} is {v}, expected 0",
                                    m.phones[row]
                                )));
                            }
                            m.sub[row * n + col] = v;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (m.sub[i * n + j], m.sub[j * n + i]);
                let v = match (a.is_nan(), b.is_nan()) {
                    (true, true) => 1.0,
                    (false, true) => a,
                    (true, false) => b,
                    (false, false) => {
                        if (a - b).abs() > SYMMETRY_TOLERANCE {
                            return Err(Error::Validation(format!(
                                "asymmetric costs for {}/{}: {a} vs {b}",
                                m.phones[i], m.phones[j]
                            )));
                        }
                        a
                    }
                };
                let v = v.clamp(0.0, 1.0);
                m.sub[i * n + j] = v;
                m.sub[j * n + i] = v;
            }
        }
        Ok(m)
    }

    /// Renders the matrix in the layout [`ConfusionMatrix::from_csv`] reads.
    /// Values use the shortest decimal form that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phone");
        for p in &self.phones {
            write!(out, ",{p}").unwrap();
        }
        out.push('\n');
        let n = self.phones.len();
        for (i, p) in self.phones.iter().enumerate() {
            out.push_str(p.symbol());
            for j in 0..n {
                write!(out, ",{}", self.sub[i * n + j]).unwrap();
            }
            out.push('\n');
        }
        writeln!(out, "_ins,{}", self.ins).unwrap();
        writeln!(out, "_del,{}", self.del).unwrap();
        out
    }

    pub fn phones(&self) -> &[Phone] {
        &self.phones
    }

    pub fn ins_cost(&self) -> f64 {
        self.ins
    }

    pub fn del_cost(&self) -> f64 {
        self.del
    }

    /// Overrides insertion and deletion costs.
    pub fn with_indel(mut self, ins: f64, del: f64) -> Self {
        self.ins = ins;
        self.del = del;
        self
    }

    fn slot_of(&self, p: Phone) -> Result<usize> {
        self.slot[p.index()].map(usize::from).ok_or_else(|| Error::UnknownPhone(p.symbol().to_string()))
    }

    pub fn sub_cost(&self, a: Phone, b: Phone) -> Result<f64> {
        let (i, j) = (self.slot_of(a)?, self.slot_of(b)?);
        Ok(self.sub[i * self.phones.len() + j])
    }

    /// Resolves phones to matrix slots once, for repeated distance queries.
    pub fn resolve(&self, seq: &PhoneSeq) -> Result<Vec<u8>> {
        seq.phones().iter().map(|&p| self.slot_of(p).map(|s| s as u8)).collect()
    }

    /// Edit distance over pre-resolved slots. Inputs must come from [`Self::resolve`].
    pub fn distance_resolved(&self, a: &[u8], b: &[u8]) -> f64 {
        let n = self.phones.len();
        let mut prev: Vec<f64> = (0..=b.len()).map(|j| j as f64 * self.ins).collect();
        let mut cur = vec![0.0; b.len() + 1];
        for (i, &pa) in a.iter().enumerate() {
            cur[0] = (i + 1) as f64 * self.del;
            let row = &self.sub[pa as usize * n..(pa as usize + 1) * n];
            for (j, &pb) in b.iter().enumerate() {
                let sub = prev[j] + row[pb as usize];
                let del = prev[j + 1] + self.del;
                let ins = cur[j] + self.ins;
                cur[j + 1] = sub.min(del).min(ins);
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        prev[b.len()]
    }
}

/// Minimal-cost alignment of `a` onto `b` under `m`. Deleting a phone of `a`
/// costs `m.del_cost()`, inserting a phone of `b` costs `m.ins_cost()`.
pub fn phone_edit_distance(a: &PhoneSeq, b: &PhoneSeq, m: &ConfusionMatrix) -> Result<f64> {
    Ok(m.distance_resolved(&m.resolve(a)?, &m.resolve(b)?))
}

/// [`phone_edit_distance`] divided by the length of `a`.
pub fn normalized_phone_distance(a: &PhoneSeq, b: &PhoneSeq, m: &ConfusionMatrix) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyNormalizer);
    }
    Ok(phone_edit_distance(a, b, m)? / a.len() as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn seq(s: &str) -> PhoneSeq {
        s.parse().unwrap()
    }

    /// Enumerates every monotone set of substitution pairs; the remaining
    /// phones are deleted or inserted. Independent of the DP recurrence.
    pub(crate) fn brute_force_distance(a: &[Phone], b: &[Phone], m: &ConfusionMatrix) -> f64 {
        let (la, lb) = (a.len(), b.len());
        let mut best = f64::INFINITY;
        for sa in 0u32..(1 << la) {
            for sb in 0u32..(1 << lb) {
                if sa.count_ones() != sb.count_ones() {
                    continue;
                }
                let ia = (0..la).filter(|i| sa >> i & 1 == 1);
                let ib = (0..lb).filter(|j| sb >> j & 1 == 1);
                let k = sa.count_ones() as usize;
                let subs: f64 = ia.zip(ib).map(|(i, j)| m.sub_cost(a[i], b[j]).unwrap()).sum();
                let cost = subs + (la - k) as f64 * m.del_cost() + (lb - k) as f64 * m.ins_cost();
                best = best.min(cost);
            }
        }
        best
    }

    fn all_phones() -> BTreeSet<Phone> {
        Phone::ALL.iter().copied().collect()
    }

    #[test]
    fn parses_off_diagonal_cost() {
        let m = ConfusionMatrix::from_csv("phone,P,B\nP,0,0.3\nB,0.3,0\n", &all_phones()).unwrap();
        assert_eq!(m.sub_cost(Phone::P, Phone::B).unwrap(), 0.3);
        assert_eq!(m.ins_cost(), 1.0);
    }

    #[test]
    fn rejects_nonzero_diagonal() {
        let err = ConfusionMatrix::from_csv("phone,P,B\nP,0.1,0.3\nB,0.3,0\n", &all_phones());
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_asymmetry_and_unknown_phones() {
        let err = ConfusionMatrix::from_csv("phone,P,B\nP,0,0.3\nB,0.4,0\n", &all_phones());
        assert!(matches!(err, Err(Error::Validation(_))));
        let err = ConfusionMatrix::from_csv("phone,P,QQ\n", &all_phones());
        assert!(matches!(err, Err(Error::UnknownPhone(_))));
        let only_p: BTreeSet<Phone> = [Phone::P].into_iter().collect();
        let err = ConfusionMatrix::from_csv("phone,P,B\n", &only_p);
        assert!(matches!(err, Err(Error::UnknownPhone(_))));
    }

    #[test]
    fn missing_pairs_default_to_one_and_mirror() {
        let m = ConfusionMatrix::from_csv("phone,P,B,R\nP,0,0.3,\n_ins,0.5\n", &all_phones()).unwrap();
        assert_eq!(m.sub_cost(Phone::P, Phone::R).unwrap(), 1.0);
        assert_eq!(m.sub_cost(Phone::B, Phone::P).unwrap(), 0.3);
        assert_eq!(m.ins_cost(), 0.5);
        assert_eq!(m.del_cost(), 1.0);
    }

    #[test]
    fn costs_are_clamped() {
        let m = ConfusionMatrix::from_csv("phone,P,B\nP,0,3\n_del,7\n", &all_phones()).unwrap();
        assert_eq!(m.sub_cost(Phone::P, Phone::B).unwrap(), 1.0);
        assert_eq!(m.del_cost(), 1.0);
    }

    #[test]
    fn csv_round_trip_of_default() {
        let m = ConfusionMatrix::default_matrix();
        let back = ConfusionMatrix::from_csv(&m.to_csv(), &all_phones()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn default_matrix_shape() {
        let m = ConfusionMatrix::default_matrix();
        assert_eq!(m.sub_cost(Phone::P, Phone::B).unwrap(), 0.25);
        assert_eq!(m.sub_cost(Phone::K, Phone::AA).unwrap(), 1.0);
        assert_eq!(m.sub_cost(Phone::IY, Phone::IH).unwrap(), 0.25);
        for &a in &Phone::ALL {
            assert_eq!(m.sub_cost(a, a).unwrap(), 0.0);
            for &b in &Phone::ALL {
                assert_eq!(m.sub_cost(a, b).unwrap(), m.sub_cost(b, a).unwrap());
                if a != b {
                    assert!(m.sub_cost(a, b).unwrap() > 0.0, "{a} {b}");
                }
            }
        }
    }

    #[test]
    fn worked_distances() {
        let m = ConfusionMatrix::default_matrix();
        assert_eq!(phone_edit_distance(&seq("K AO L"), &seq("K AO L"), &m).unwrap(), 0.0);
        assert_eq!(phone_edit_distance(&seq("K AO L"), &seq("K AO"), &m).unwrap(), 1.0);
        assert_eq!(normalized_phone_distance(&seq("K"), &PhoneSeq::default(), &m).unwrap(), 1.0);
        let d = phone_edit_distance(&seq("K AO L AA"), &seq("K AO L"), &m).unwrap();
        assert_eq!(normalized_phone_distance(&seq("K AO L AA"), &seq("K AO L"), &m).unwrap(), d / 4.0);
        assert_eq!(d, 1.0);
        assert!(matches!(
            normalized_phone_distance(&PhoneSeq::default(), &seq("K"), &m),
            Err(Error::EmptyNormalizer)
        ));
    }

    #[test]
    fn unknown_phone_in_distance() {
        let m = ConfusionMatrix::from_csv("phone,P,B\n", &all_phones()).unwrap();
        assert!(matches!(phone_edit_distance(&seq("P"), &seq("K"), &m), Err(Error::UnknownPhone(_))));
    }

    fn phone_seq(max: usize) -> impl Strategy<Value = PhoneSeq> {
        prop::collection::vec(0..Phone::ALL.len(), 0..=max)
            .prop_map(|v| PhoneSeq(v.into_iter().map(|i| Phone::ALL[i]).collect()))
    }

    proptest! {
        #[test]
        fn dp_matches_enumeration(a in phone_seq(6), b in phone_seq(6), ins in 0.2f64..1.0, del in 0.2f64..1.0) {
            let m = ConfusionMatrix::default_matrix().with_indel(ins, del);
            let dp = phone_edit_distance(&a, &b, &m).unwrap();
            let bf = brute_force_distance(a.phones(), b.phones(), &m);
            prop_assert!((dp - bf).abs() < 1e-9, "dp {} bf {}", dp, bf);
        }

        #[test]
        fn identity_and_symmetry(a in phone_seq(8), b in phone_seq(8)) {
            let m = ConfusionMatrix::default_matrix();
            prop_assert_eq!(phone_edit_distance(&a, &a, &m).unwrap(), 0.0);
            let ab = phone_edit_distance(&a, &b, &m).unwrap();
            let ba = phone_edit_distance(&b, &a, &m).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
        }

        #[test]
        fn triangle_inequality(a in phone_seq(6), b in phone_seq(6), c in phone_seq(6)) {
            let m = ConfusionMatrix::default_matrix();
            let ab = phone_edit_distance(&a, &b, &m).unwrap();
            let bc = phone_edit_distance(&b, &c, &m).unwrap();
            let ac = phone_edit_distance(&a, &c, &m).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}

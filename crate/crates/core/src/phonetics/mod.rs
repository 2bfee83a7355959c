//! Pronunciation lookup and phonetic codes.
//!
//! [`PhoneticLexicon`] holds ARPAbet pronunciations parsed from a CMUdict
//! file. Syllable counts, stress patterns and rhyme keys are derived from the
//! first pronunciation of a word; [`double_metaphone`] produces spelling-based
//! codes for direct sound-alike matching.

mod cmudict;
mod metaphone;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cmudict::parse_cmudict;
pub use metaphone::{double_metaphone, DoubleMetaphone, MetaphoneCode};

#[derive(Debug, Error)]
pub enum PhoneticsError {
    #[error("lexicon contains no valid entries ({malformed} malformed lines)")]
    EmptyLexicon { malformed: usize },
    #[error("invalid ARPAbet symbol {0:?}")]
    InvalidPhoneme(String),
    #[error("empty pronunciation")]
    EmptyPronunciation,
    #[error("failed to read lexicon: {0}")]
    Io(#[from] std::io::Error),
}

macro_rules! arpabet {
    ($( $sym:ident => $vowel:literal ),* $(,)?) => {
        /// The 39 ARPAbet phoneme symbols used by CMUdict.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Arpabet { $( $sym ),* }

        impl Arpabet {
            pub const ALL: &'static [Arpabet] = &[$( Arpabet::$sym ),*];

            pub fn is_vowel(self) -> bool {
                match self { $( Arpabet::$sym => $vowel ),* }
            }

            pub fn as_str(self) -> &'static str {
                match self { $( Arpabet::$sym => stringify!($sym) ),* }
            }

            fn from_symbol(s: &str) -> Option<Self> {
                match s { $( stringify!($sym) => Some(Arpabet::$sym), )* _ => None }
            }
        }
    };
}

arpabet! {
    AA => true, AE => true, AH => true, AO => true, AW => true, AY => true,
    B => false, CH => false, D => false, DH => false,
    EH => true, ER => true, EY => true,
    F => false, G => false, HH => false,
    IH => true, IY => true,
    JH => false, K => false, L => false, M => false, N => false, NG => false,
    OW => true, OY => true,
    P => false, R => false, S => false, SH => false, T => false, TH => false,
    UH => true, UW => true,
    V => false, W => false, Y => false, Z => false, ZH => false,
}

/// One ARPAbet phoneme; vowels carry a stress digit (0, 1 or 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phoneme {
    symbol: Arpabet,
    stress: Option<u8>,
}

impl Phoneme {
    pub fn symbol(self) -> Arpabet {
        self.symbol
    }

    pub fn stress(self) -> Option<u8> {
        self.stress
    }

    pub fn is_vowel(self) -> bool {
        self.symbol.is_vowel()
    }
}

impl FromStr for Phoneme {
    type Err = PhoneticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || PhoneticsError::InvalidPhoneme(s.to_string());
        let (base, stress) = match s.as_bytes().last() {
            Some(d @ b'0'..=b'2') => (&s[..s.len() - 1], Some(d - b'0')),
            _ => (s, None),
        };
        let symbol = Arpabet::from_symbol(base).ok_or_else(invalid)?;
        // Vowels need exactly one stress digit, consonants none.
        if symbol.is_vowel() != stress.is_some() {
            return Err(invalid());
        }
        Ok(Phoneme { symbol, stress })
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol.as_str())?;
        if let Some(d) = self.stress {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl Serialize for Phoneme {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Phoneme {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A non-empty phoneme sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pronunciation(Vec<Phoneme>);

impl Pronunciation {
    pub fn new(phonemes: Vec<Phoneme>) -> Result<Self, PhoneticsError> {
        if phonemes.is_empty() {
            return Err(PhoneticsError::EmptyPronunciation);
        }
        Ok(Pronunciation(phonemes))
    }

    pub fn phonemes(&self) -> &[Phoneme] {
        &self.0
    }

    pub fn syllables(&self) -> u32 {
        self.0.iter().filter(|p| p.stress.is_some()).count() as u32
    }

    pub fn stress_pattern(&self) -> String {
        self.0
            .iter()
            .filter_map(|p| p.stress)
            .map(|d| (b'0' + d) as char)
            .collect()
    }

    /// Suffix from the last primary-stressed vowel, or from the last vowel of
    /// any stress when no primary stress exists. `None` without vowels.
    pub fn rhyme_key(&self) -> Option<RhymeKey> {
        let start = self
            .0
            .iter()
            .rposition(|p| p.stress == Some(1))
            .or_else(|| self.0.iter().rposition(|p| p.stress.is_some()))?;
        Some(RhymeKey(self.0[start..].to_vec()))
    }
}

impl FromStr for Pronunciation {
    type Err = PhoneticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let phonemes = s
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<Phoneme>, _>>()?;
        Pronunciation::new(phonemes)
    }
}

impl fmt::Display for Pronunciation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        join_phonemes(f, &self.0)
    }
}

/// Phoneme suffix that defines rhyme: equal keys rhyme.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RhymeKey(pub Vec<Phoneme>);

impl fmt::Display for RhymeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        join_phonemes(f, &self.0)
    }
}

fn join_phonemes(f: &mut fmt::Formatter<'_>, phonemes: &[Phoneme]) -> fmt::Result {
    for (i, p) in phonemes.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{p}")?;
    }
    Ok(())
}

/// Word → pronunciations, keyed by uppercase spelling. Variant order is the
/// order of appearance in the source file.
#[derive(Debug, Clone, Default)]
pub struct PhoneticLexicon {
    entries: HashMap<String, Vec<Pronunciation>>,
    order: Vec<String>,
    malformed: usize,
}

impl PhoneticLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a pronunciation variant for `word`.
    pub fn insert(&mut self, word: &str, pronunciation: Pronunciation) {
        let key = word.to_uppercase();
        match self.entries.get_mut(&key) {
            Some(variants) => variants.push(pronunciation),
            None => {
                self.order.push(key.clone());
                self.entries.insert(key, vec![pronunciation]);
            }
        }
    }

    pub fn pronunciations(&self, word: &str) -> Option<&[Pronunciation]> {
        self.entries.get(&word.to_uppercase()).map(Vec::as_slice)
    }

    pub fn first(&self, word: &str) -> Option<&Pronunciation> {
        self.pronunciations(word).and_then(|v| v.first())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(&word.to_uppercase())
    }

    /// Number of distinct words.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Lines skipped as malformed while parsing.
    pub fn malformed_lines(&self) -> usize {
        self.malformed
    }

    /// Words in insertion order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    /// Entries in insertion order with all their variants.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Pronunciation])> {
        self.order
            .iter()
            .map(move |w| (w.as_str(), self.entries[w].as_slice()))
    }

    /// Serializes in CMUdict layout: `WORD  PH PH ...`, variants as `WORD(n)`.
    pub fn to_cmudict_string(&self) -> String {
        let mut out = String::new();
        for (word, variants) in self.iter() {
            for (i, p) in variants.iter().enumerate() {
                if i == 0 {
                    out.push_str(word);
                } else {
                    out.push_str(&format!("{word}({i})"));
                }
                out.push_str("  ");
                out.push_str(&p.to_string());
                out.push('\n');
            }
        }
        out
    }

    pub(crate) fn set_malformed(&mut self, n: usize) {
        self.malformed = n;
    }

    pub fn syllable_count(&self, word: &str, fallback: bool) -> Option<u32> {
        match self.first(word) {
            Some(p) => Some(p.syllables()),
            None if fallback => heuristic_syllables(word),
            None => None,
        }
    }

    pub fn stress_pattern(&self, word: &str) -> Option<String> {
        self.first(word).map(Pronunciation::stress_pattern)
    }

    pub fn rhyme_key(&self, word: &str) -> Option<RhymeKey> {
        self.first(word).and_then(Pronunciation::rhyme_key)
    }
}

/// Grapheme syllable estimate for out-of-lexicon words: maximal runs of
/// `aeiouy`, minus one for a terminal silent `e` (unless that reaches zero),
/// clamped to at least one. `None` for strings without ASCII letters.
pub fn heuristic_syllables(word: &str) -> Option<u32> {
    let letters: Vec<u8> = word
        .bytes()
        .filter(u8::is_ascii_alphabetic)
        .map(|b| b.to_ascii_lowercase())
        .collect();
    if letters.is_empty() {
        return None;
    }
    let is_vowel = |b: u8| matches!(b, b'a' | b'e' | b'i' | b'o' | b'u' | b'y');
    let mut groups = 0u32;
    let mut in_group = false;
    for &b in &letters {
        let v = is_vowel(b);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    let n = letters.len();
    // A final 'e' forming its own vowel group is treated as silent.
    if n >= 2 && letters[n - 1] == b'e' && !is_vowel(letters[n - 2]) && groups > 1 {
        groups -= 1;
    }
    Some(groups.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(lines: &str) -> PhoneticLexicon {
        parse_cmudict(lines.as_bytes()).unwrap()
    }

    #[test]
    fn phoneme_validation() {
        assert!("AE1".parse::<Phoneme>().is_ok());
        assert!("AE".parse::<Phoneme>().is_err());
        assert!("K1".parse::<Phoneme>().is_err());
        assert!("QX".parse::<Phoneme>().is_err());
        assert_eq!("OW1".parse::<Phoneme>().unwrap().to_string(), "OW1");
    }

    #[test]
    fn derived_fields() {
        let l = lex("HELLO  HH AH0 L OW1\nSTRENGTHS  S T R EH1 NG K TH S\nPOTENTIAL  P AH0 T EH1 N SH AH0 L\nCAT  K AE1 T\nHAT  HH AE1 T\n");
        assert_eq!(l.syllable_count("hello", false), Some(2));
        assert_eq!(l.syllable_count("strengths", false), Some(1));
        assert_eq!(l.stress_pattern("potential").as_deref(), Some("010"));
        assert_eq!(l.stress_pattern("cat").as_deref(), Some("1"));
        assert_eq!(l.stress_pattern("zzzq"), None);
        let cat = l.rhyme_key("cat").unwrap();
        assert_eq!(cat.to_string(), "AE1 T");
        assert_eq!(Some(cat), l.rhyme_key("hat"));
    }

    #[test]
    fn rhyme_key_without_primary_stress_uses_last_vowel() {
        let p: Pronunciation = "DH AH0".parse().unwrap();
        assert_eq!(p.rhyme_key().unwrap().to_string(), "AH0");
        let p: Pronunciation = "P AH2 S T EH0 R".parse().unwrap();
        assert_eq!(p.rhyme_key().unwrap().to_string(), "EH0 R");
        // "pst": no vowel at all.
        let p: Pronunciation = "P S T".parse().unwrap();
        assert!(p.rhyme_key().is_none());
    }

    #[test]
    fn fallback_heuristic() {
        let l = PhoneticLexicon::new();
        assert_eq!(l.syllable_count("zzz", true), Some(1));
        assert_eq!(l.syllable_count("zzz", false), None);
        assert_eq!(heuristic_syllables("cake"), Some(1));
        assert_eq!(heuristic_syllables("the"), Some(1));
        assert_eq!(heuristic_syllables("banana"), Some(3));
        assert_eq!(heuristic_syllables("agree"), Some(2));
        assert_eq!(heuristic_syllables("rhythm"), Some(1));
        assert_eq!(heuristic_syllables("!"), None);
    }

    #[test]
    fn lookup_is_case_insensitive() {
        let l = lex("cat K AE1 T\n");
        assert!(l.contains("CAT") && l.contains("Cat"));
    }
}

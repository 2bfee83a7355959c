//! ASCII letter sets and multisets over `a..=z`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("'{0}' is not an ASCII letter")]
pub struct NotALetter(pub char);

/// A set of lowercase ASCII letters, stored as a bitmask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LetterSet(u32);

impl LetterSet {
    pub const EMPTY: LetterSet = LetterSet(0);

    pub fn from_bits(bits: u32) -> Self {
        LetterSet(bits & 0x03ff_ffff)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Letters occurring in `text`, case-insensitively. Non-ASCII letters
    /// are ignored.
    pub fn of_text(text: &str) -> Self {
        let mut bits = 0u32;
        for b in text.bytes() {
            if b.is_ascii_alphabetic() {
                bits |= 1 << (b.to_ascii_lowercase() - b'a');
            }
        }
        LetterSet(bits)
    }

    pub fn insert(&mut self, letter: char) -> Result<(), NotALetter> {
        if !letter.is_ascii_alphabetic() {
            return Err(NotALetter(letter));
        }
        self.0 |= 1 << (letter.to_ascii_lowercase() as u8 - b'a');
        Ok(())
    }

    pub fn contains(self, letter: char) -> bool {
        letter.is_ascii_alphabetic() && self.0 & (1 << (letter.to_ascii_lowercase() as u8 - b'a')) != 0
    }

    pub fn union(self, other: LetterSet) -> LetterSet {
        LetterSet(self.0 | other.0)
    }

    pub fn intersects(self, other: LetterSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_superset_of(self, other: LetterSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = char> {
        (0..26u8).filter(move |i| self.0 & (1 << i) != 0).map(|i| (b'a' + i) as char)
    }
}

impl fmt::Display for LetterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

impl FromStr for LetterSet {
    type Err = NotALetter;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = LetterSet::EMPTY;
        for c in s.chars() {
            set.insert(c)?;
        }
        Ok(set)
    }
}

impl FromIterator<char> for LetterSet {
    /// Non-letters are silently dropped.
    fn from_iter<I: IntoIterator<Item = char>>(iter: I) -> Self {
        let mut set = LetterSet::EMPTY;
        for c in iter {
            let _ = set.insert(c);
        }
        set
    }
}

/// Count of each letter `a..=z`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LetterCounts([u16; 26]);

impl LetterCounts {
    pub fn of_text(text: &str) -> Self {
        let mut counts = [0u16; 26];
        for b in text.bytes() {
            if b.is_ascii_alphabetic() {
                let slot = &mut counts[(b.to_ascii_lowercase() - b'a') as usize];
                *slot = slot.saturating_add(1);
            }
        }
        LetterCounts(counts)
    }

    pub fn get(&self, letter: char) -> u16 {
        if letter.is_ascii_alphabetic() {
            self.0[(letter.to_ascii_lowercase() as u8 - b'a') as usize]
        } else {
            0
        }
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    /// Multiset inclusion: every letter occurs at most as often as in `other`.
    pub fn is_subset_of(&self, other: &LetterCounts) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    pub fn letters(&self) -> LetterSet {
        let mut bits = 0u32;
        for (i, &c) in self.0.iter().enumerate() {
            if c > 0 {
                bits |= 1 << i;
            }
        }
        LetterSet(bits)
    }

    /// Nonzero counts in alphabetical order.
    pub fn nonzero(&self) -> impl Iterator<Item = (char, u16)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| ((b'a' + i as u8) as char, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_parse_and_display_are_sorted() {
        let set: LetterSet = "Eae".parse().unwrap();
        assert_eq!(set.to_string(), "ae");
        assert_eq!(set.len(), 2);
        assert!("e1".parse::<LetterSet>().is_err());
    }

    #[test]
    fn counts_and_inclusion() {
        let stone = LetterCounts::of_text("stone");
        let target = LetterCounts::of_text("elations");
        assert!(stone.is_subset_of(&target));
        assert!(!LetterCounts::of_text("steel").is_subset_of(&target));
        assert_eq!(LetterCounts::of_text("cat").nonzero().collect::<Vec<_>>(), vec![('a', 1), ('c', 1), ('t', 1)]);
        assert_eq!(LetterCounts::of_text("Été").total(), 1);
    }
}

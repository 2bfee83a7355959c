//! Corpus loading, lipogram verification, tokenization and splitting.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::catalog::{TokenCatalog, TokenId, UNKNOWN_TOKEN};
use crate::letters::LetterSet;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("sequence of {0} tokens is too short to split")]
    SequenceTooShort(usize),
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),
    #[error("catalog has no {UNKNOWN_TOKEN} token for out-of-vocabulary words")]
    NoUnknownToken,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// A word containing a banned letter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Byte offset of the word in the text.
    pub offset: usize,
    pub word: String,
    /// First banned letter in the word, lowercased.
    pub letter: char,
}

/// Words (runs of alphanumerics, apostrophes and hyphens) containing any
/// letter of `banned`, case-insensitively.
pub fn verify_lipogram(text: &str, banned: LetterSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let is_word = |c: char| c.is_alphanumeric() || matches!(c, '\'' | '\u{2019}' | '-');
    let mut iter = text.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        if !is_word(c) {
            continue;
        }
        let mut end = start + c.len_utf8();
        while let Some(&(i, c)) = iter.peek() {
            if !is_word(c) {
                break;
            }
            end = i + c.len_utf8();
            iter.next();
        }
        let word = &text[start..end];
        if let Some(letter) = word.chars().find(|&c| banned.contains(c)) {
            out.push(Violation { offset: start, word: word.to_string(), letter: letter.to_ascii_lowercase() });
        }
    }
    out
}

/// Splits on whitespace, separates punctuation into single-character
/// tokens and lowercases ASCII. An apostrophe or hyphen stays inside a word
/// when it sits between two alphanumerics.
pub fn tokenize_words(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut word = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let joiner = matches!(c, '\'' | '\u{2019}' | '-')
                && !word.is_empty()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            if c.is_alphanumeric() || joiner {
                word.push(c.to_ascii_lowercase());
            } else {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// Train and test blocks of one contiguous split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
    pub ratio_permille: u32,
    /// Block order in the source: train first, or test first.
    pub train_first: bool,
}

impl<T: Clone> CorpusSplit<T> {
    /// Blocks concatenated in source order.
    pub fn rejoin(&self) -> Vec<T> {
        let (a, b) = if self.train_first { (&self.train, &self.test) } else { (&self.test, &self.train) };
        a.iter().chain(b).cloned().collect()
    }
}

/// Cuts `tokens` into two contiguous blocks; the train block holds
/// `floor(ratio * len)` tokens, clamped so neither block is empty. The seed
/// decides which block comes first.
pub fn split_corpus<T: Clone>(tokens: &[T], ratio: f64, seed: u64) -> Result<CorpusSplit<T>, CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(ratio));
    }
    let len = tokens.len();
    if len < 2 {
        return Err(CorpusError::SequenceTooShort(len));
    }
    let train_len = ((ratio * len as f64).floor() as usize).clamp(1, len - 1);
    let train_first = ChaCha8Rng::seed_from_u64(seed).gen_bool(0.5);
    let (train, test) = if train_first {
        (tokens[..train_len].to_vec(), tokens[train_len..].to_vec())
    } else {
        let cut = len - train_len;
        (tokens[cut..].to_vec(), tokens[..cut].to_vec())
    };
    Ok(CorpusSplit { train, test, seed, ratio_permille: (ratio * 1000.0).round() as u32, train_first })
}

/// Paths listed in a manifest, resolved against the manifest's directory.
/// Blank lines and `#` comments are skipped.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

/// Reads a plain text file, or every member of a `.manifest` / `.list`
/// file, joined with newlines.
pub fn load_corpus(path: &Path) -> Result<String, CorpusError> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|source| CorpusError::Io { path: p.to_path_buf(), source });
    let is_manifest = matches!(path.extension().and_then(|e| e.to_str()), Some("manifest" | "list"));
    if !is_manifest {
        return read(path);
    }
    let mut out = String::new();
    for member in read_manifest(path)? {
        out.push_str(&read(&member)?);
        out.push('\n');
    }
    Ok(out)
}

/// `<unk>` followed by the distinct words in order of first occurrence.
pub fn build_vocabulary<S: AsRef<str>>(words: &[S]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut vocab = vec![UNKNOWN_TOKEN.to_string()];
    seen.insert(UNKNOWN_TOKEN);
    for w in words {
        let w = w.as_ref();
        if seen.insert(w) {
            vocab.push(w.to_string());
        }
    }
    vocab
}

/// Maps words to ids; words outside the catalog become `<unk>`.
pub fn encode<S: AsRef<str>>(words: &[S], catalog: &TokenCatalog) -> Result<Vec<TokenId>, CorpusError> {
    let unk = catalog.id_of(UNKNOWN_TOKEN);
    words
        .iter()
        .map(|w| catalog.id_of(w.as_ref()).or(unk).ok_or(CorpusError::NoUnknownToken))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e() -> LetterSet {
        "e".parse().unwrap()
    }

    #[test]
    fn lipogram_examples() {
        assert!(verify_lipogram("a big dog", e()).is_empty());
        assert_eq!(
            verify_lipogram("the dog", e()),
            vec![Violation { offset: 0, word: "the".into(), letter: 'e' }]
        );
        assert_eq!(verify_lipogram("Echo", e()).len(), 1);
        assert_eq!(verify_lipogram("a cat, then", e())[0].offset, 7);
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize_words("Don't stop!"), ["don't", "stop", "!"]);
        assert!(tokenize_words("").is_empty());
        assert_eq!(tokenize_words("e-mail"), ["e-mail"]);
        assert_eq!(tokenize_words("\"Call me Ishmael.\""), ["\"", "call", "me", "ishmael", ".", "\""]);
        assert_eq!(tokenize_words("sea--that 'tis"), ["sea", "-", "-", "that", "'", "tis"]);
    }

    #[test]
    fn split_examples() {
        let v: Vec<u32> = (0..100).collect();
        let s = split_corpus(&v, 0.9, 0).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (90, 10));
        assert_eq!(s.rejoin(), v);
        let s = split_corpus(&[1, 2], 0.5, 0).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (1, 1));
        assert!(matches!(split_corpus(&[1], 0.5, 0), Err(CorpusError::SequenceTooShort(1))));
        assert!(matches!(split_corpus(&[1, 2], 1.0, 0), Err(CorpusError::InvalidRatio(_))));
    }

    #[test]
    fn both_block_orders_occur() {
        let v: Vec<u32> = (0..10).collect();
        let orders: HashSet<bool> = (0..32).map(|seed| split_corpus(&v, 0.5, seed).unwrap().train_first).collect();
        assert_eq!(orders.len(), 2);
    }

    #[test]
    fn vocabulary_and_encoding() {
        let words = ["the", "cat", "the", "hat"];
        let vocab = build_vocabulary(&words);
        assert_eq!(vocab, ["<unk>", "the", "cat", "hat"]);
        let cat = TokenCatalog::builder(vocab).build().unwrap();
        assert_eq!(encode(&["hat", "dog"], &cat).unwrap(), vec![TokenId(3), TokenId(0)]);
    }

    #[test]
    fn manifest_members_in_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "one").unwrap();
        fs::write(dir.path().join("b.txt"), "two").unwrap();
        fs::write(dir.path().join("c.manifest"), "# books\nb.txt\n\na.txt\n").unwrap();
        assert_eq!(load_corpus(&dir.path().join("c.manifest")).unwrap(), "two\none\n");
    }
}

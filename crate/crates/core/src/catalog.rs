//! Immutable vocabulary with precomputed per-token features.
//!
//! Every filter reads only what is stored here, so the whole vocabulary can
//! be tested per decode step without recomputing phonetics or lookups.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embeddings::EmbeddingTable;
use crate::letters::{LetterCounts, LetterSet};
use crate::phonetics::{heuristic_syllables, double_metaphone, MetaphoneCode, PhoneticLexicon, RhymeKey};

/// Dense token index into a [`TokenCatalog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for TokenId {
    fn from(i: usize) -> Self {
        TokenId(i as u32)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("duplicate token {0:?}")]
    DuplicateToken(String),
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("token id {id} out of range for catalog of size {size}")]
    IdOutOfRange { id: u32, size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WordBoundaryClass {
    WordStart,
    Continuation,
    Special,
}

/// How a tokenizer marks word boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryMarker {
    /// Every token is a whole word.
    WordLevel,
    /// Tokens beginning a word carry a prefix marker (`▁` or `Ġ`).
    SpaceMarkerPrefix(String),
    /// Tokens that continue into the next token carry a suffix marker (`@@`).
    Suffix(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizationScheme {
    pub marker: BoundaryMarker,
    /// Tokens classified [`WordBoundaryClass::Special`] regardless of marker.
    pub specials: BTreeSet<String>,
}

/// Reserved token that stands in for out-of-vocabulary words.
pub const UNKNOWN_TOKEN: &str = "<unk>";

impl TokenizationScheme {
    pub fn word_level() -> Self {
        TokenizationScheme { marker: BoundaryMarker::WordLevel, specials: BTreeSet::new() }
    }

    pub fn space_prefix(marker: impl Into<String>) -> Self {
        TokenizationScheme { marker: BoundaryMarker::SpaceMarkerPrefix(marker.into()), specials: BTreeSet::new() }
    }

    pub fn suffix(marker: impl Into<String>) -> Self {
        TokenizationScheme { marker: BoundaryMarker::Suffix(marker.into()), specials: BTreeSet::new() }
    }

    pub fn with_specials<I, S>(mut self, specials: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.specials.extend(specials.into_iter().map(Into::into));
        self
    }

    pub fn is_subword(&self) -> bool {
        !matches!(self.marker, BoundaryMarker::WordLevel)
    }

    pub fn classify(&self, token: &str) -> WordBoundaryClass {
        if self.specials.contains(token) {
            return WordBoundaryClass::Special;
        }
        match &self.marker {
            BoundaryMarker::WordLevel => WordBoundaryClass::WordStart,
            BoundaryMarker::SpaceMarkerPrefix(m) => {
                if !m.is_empty() && token.starts_with(m.as_str()) {
                    WordBoundaryClass::WordStart
                } else {
                    WordBoundaryClass::Continuation
                }
            }
            BoundaryMarker::Suffix(m) => {
                if !m.is_empty() && token.ends_with(m.as_str()) {
                    WordBoundaryClass::Continuation
                } else {
                    WordBoundaryClass::WordStart
                }
            }
        }
    }

    /// Strips one boundary marker and lowercases ASCII letters. Non-ASCII
    /// characters pass through unchanged.
    pub fn normalize(&self, token: &str) -> String {
        let stripped = match &self.marker {
            BoundaryMarker::WordLevel => token,
            BoundaryMarker::SpaceMarkerPrefix(m) => token.strip_prefix(m.as_str()).unwrap_or(token),
            BoundaryMarker::Suffix(m) => token.strip_suffix(m.as_str()).unwrap_or(token),
        };
        stripped.to_ascii_lowercase()
    }
}

pub fn classify_boundary(token: &str, scheme: &TokenizationScheme) -> WordBoundaryClass {
    scheme.classify(token)
}

/// Phonetic features of one pronunciation variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PronunciationFeatures {
    pub syllables: u32,
    pub stress_pattern: String,
    pub rhyme_key: Option<RhymeKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenFeatures {
    pub surface: String,
    pub normalized: String,
    pub boundary: WordBoundaryClass,
    #[serde(skip)]
    pub letters: LetterCounts,
    #[serde(skip)]
    pub letter_set: LetterSet,
    /// Character count of `normalized`.
    pub length: usize,
    pub syllables: Option<u32>,
    pub stress_pattern: Option<String>,
    pub rhyme_key: Option<RhymeKey>,
    pub metaphone: Option<MetaphoneCode>,
    #[serde(skip)]
    pub embedding: Option<Vec<f32>>,
    /// Every lexicon variant, first one first; empty when out of lexicon.
    #[serde(skip)]
    pub pronunciations: Vec<PronunciationFeatures>,
    /// Normalized form starts with an apostrophe, e.g. `'s`, `'re`.
    pub contraction: bool,
}

impl TokenFeatures {
    fn compute(
        surface: &str,
        scheme: &TokenizationScheme,
        lexicon: Option<&PhoneticLexicon>,
        embeddings: Option<&EmbeddingTable>,
        syllable_fallback: bool,
    ) -> Self {
        let boundary = scheme.classify(surface);
        let normalized = scheme.normalize(surface);
        let letters = LetterCounts::of_text(&normalized);
        let pronunciations: Vec<PronunciationFeatures> = lexicon
            .and_then(|l| l.pronunciations(&normalized))
            .map(|variants| {
                variants
                    .iter()
                    .map(|p| PronunciationFeatures {
                        syllables: p.syllables(),
                        stress_pattern: p.stress_pattern(),
                        rhyme_key: p.rhyme_key(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        let first = pronunciations.first();
        let syllables = match first {
            Some(p) => Some(p.syllables),
            None if syllable_fallback => heuristic_syllables(&normalized),
            None => None,
        };
        let metaphone = if letters.total() > 0 { Some(double_metaphone(&normalized)) } else { None };
        TokenFeatures {
            surface: surface.to_string(),
            length: normalized.chars().count(),
            boundary,
            letter_set: letters.letters(),
            letters,
            syllables,
            stress_pattern: first.map(|p| p.stress_pattern.clone()),
            rhyme_key: first.and_then(|p| p.rhyme_key.clone()),
            metaphone,
            embedding: embeddings.and_then(|e| e.get(&normalized)).map(<[f32]>::to_vec),
            contraction: normalized.starts_with('\'') && normalized.len() > 1,
            pronunciations,
            normalized,
        }
    }
}

/// Vocabulary with dense ids `0..size`.
#[derive(Debug, Clone)]
pub struct TokenCatalog {
    features: Vec<TokenFeatures>,
    index: HashMap<String, TokenId>,
    scheme: TokenizationScheme,
    lexicon: Option<Arc<PhoneticLexicon>>,
    embeddings: Option<Arc<EmbeddingTable>>,
    syllable_fallback: bool,
    checksum: String,
}

/// Builder for [`TokenCatalog`].
#[derive(Debug, Clone)]
pub struct CatalogBuilder {
    tokens: Vec<String>,
    scheme: TokenizationScheme,
    lexicon: Option<Arc<PhoneticLexicon>>,
    embeddings: Option<Arc<EmbeddingTable>>,
    syllable_fallback: bool,
}

impl CatalogBuilder {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CatalogBuilder {
            tokens: tokens.into_iter().map(Into::into).collect(),
            scheme: TokenizationScheme::word_level(),
            lexicon: None,
            embeddings: None,
            syllable_fallback: false,
        }
    }

    pub fn scheme(mut self, scheme: TokenizationScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn lexicon(mut self, lexicon: Arc<PhoneticLexicon>) -> Self {
        self.lexicon = Some(lexicon);
        self
    }

    pub fn embeddings(mut self, embeddings: Arc<EmbeddingTable>) -> Self {
        self.embeddings = Some(embeddings);
        self
    }

    pub fn syllable_fallback(mut self, enabled: bool) -> Self {
        self.syllable_fallback = enabled;
        self
    }

    pub fn build(self) -> Result<TokenCatalog, CatalogError> {
        if self.tokens.is_empty() {
            return Err(CatalogError::EmptyVocabulary);
        }
        let mut index = HashMap::with_capacity(self.tokens.len());
        for (i, t) in self.tokens.iter().enumerate() {
            if index.insert(t.clone(), TokenId::from(i)).is_some() {
                return Err(CatalogError::DuplicateToken(t.clone()));
            }
        }
        let lexicon = self.lexicon.as_deref();
        let embeddings = self.embeddings.as_deref();
        let features = self
            .tokens
            .iter()
            .map(|t| TokenFeatures::compute(t, &self.scheme, lexicon, embeddings, self.syllable_fallback))
            .collect();
        Ok(TokenCatalog {
            checksum: vocabulary_checksum(&self.tokens),
            features,
            index,
            scheme: self.scheme,
            lexicon: self.lexicon,
            embeddings: self.embeddings,
            syllable_fallback: self.syllable_fallback,
        })
    }
}

/// SHA-256 over the newline-joined token list, hex encoded.
pub fn vocabulary_checksum<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut hasher = Sha256::new();
    for t in tokens {
        hasher.update(t.as_ref().as_bytes());
        hasher.update(b"\n");
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl TokenCatalog {
    pub fn builder<I, S>(tokens: I) -> CatalogBuilder
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CatalogBuilder::new(tokens)
    }

    pub fn size(&self) -> usize {
        self.features.len()
    }

    pub fn features_of(&self, id: TokenId) -> Result<&TokenFeatures, CatalogError> {
        self.features
            .get(id.index())
            .ok_or(CatalogError::IdOutOfRange { id: id.0, size: self.size() })
    }

    /// Panics when `id` is out of range.
    pub fn features(&self, id: TokenId) -> &TokenFeatures {
        &self.features[id.index()]
    }

    pub fn all_features(&self) -> &[TokenFeatures] {
        &self.features
    }

    pub fn surface(&self, id: TokenId) -> &str {
        &self.features[id.index()].surface
    }

    pub fn boundary_class(&self, id: TokenId) -> WordBoundaryClass {
        self.features[id.index()].boundary
    }

    pub fn id_of(&self, surface: &str) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    pub fn contains_id(&self, id: TokenId) -> bool {
        id.index() < self.size()
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> {
        (0..self.size()).map(TokenId::from)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.surface.as_str())
    }

    pub fn scheme(&self) -> &TokenizationScheme {
        &self.scheme
    }

    pub fn lexicon(&self) -> Option<&Arc<PhoneticLexicon>> {
        self.lexicon.as_ref()
    }

    pub fn embeddings(&self) -> Option<&Arc<EmbeddingTable>> {
        self.embeddings.as_ref()
    }

    pub fn syllable_fallback(&self) -> bool {
        self.syllable_fallback
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// Surface strings of `ids`, joined by single spaces.
    pub fn render(&self, ids: &[TokenId]) -> String {
        ids.iter().map(|&id| self.surface(id)).collect::<Vec<_>>().join(" ")
    }
}

//! Token predicates and their AND-composition into a vocabulary mask.

mod spec;

use std::collections::HashSet;

use serde_json::{json, Value};
use thiserror::Error;

use crate::catalog::{TokenCatalog, TokenFeatures, TokenId, WordBoundaryClass};
use crate::letters::LetterCounts;
use crate::phonetics::{double_metaphone, MetaphoneCode, RhymeKey};

pub use spec::{
    parse_filters, FilterSpec, Meter, MeterMode, Resource, RhymeMode, SecondaryStress, Threshold, Variants,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("cannot parse filter {item:?}: {reason}")]
    Parse { item: String, reason: String },
    #[error("filter {spec} needs {resource}, but the catalog was built without it")]
    MissingResource { spec: String, resource: Resource },
    #[error("filter {spec}: {target:?} is not in the {resource}")]
    UnknownTarget { spec: String, target: String, resource: Resource },
    #[error("filter {spec}: {reason}")]
    InvalidCombination { spec: String, reason: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

/// Line position for context-dependent filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GenerationContext {
    /// Syllables already placed in the current line.
    pub syllables_before: u32,
    /// Syllables per line, when some filter defines lines.
    pub line_length: Option<u32>,
}

/// Forms of "to be" banned under E-Prime.
pub const EPRIME_WORDS: &[&str] = &[
    "be", "is", "am", "are", "was", "were", "been", "being", "isn't", "aren't", "wasn't", "weren't", "ain't",
];

/// Named filter bundles.
pub const PRESETS: &[(&str, &[&str])] = &[("lipogram-e", &["ban_letters=e"]), ("eprime", &["eprime"])];

/// Expands a preset name (case-insensitive; `e-prime` is accepted too).
pub fn preset(name: &str) -> Result<Vec<FilterSpec>, FilterError> {
    let key = name.trim().to_ascii_lowercase();
    let key = if key == "e-prime" { "eprime".to_string() } else { key };
    let (_, items) = PRESETS
        .iter()
        .find(|(n, _)| *n == key)
        .ok_or_else(|| FilterError::UnknownPreset(name.to_string()))?;
    parse_filters(items.iter())
}

/// Bitset over the token ids of one catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllowedSet {
    words: Vec<u64>,
    universe: usize,
    count: usize,
}

impl AllowedSet {
    pub fn empty(universe: usize) -> Self {
        AllowedSet { words: vec![0; universe.div_ceil(64)], universe, count: 0 }
    }

    pub fn full(universe: usize) -> Self {
        let mut set = AllowedSet::empty(universe);
        for w in &mut set.words {
            *w = u64::MAX;
        }
        if universe % 64 != 0 {
            if let Some(last) = set.words.last_mut() {
                *last = (1u64 << (universe % 64)) - 1;
            }
        }
        set.count = universe;
        set
    }

    pub fn from_fn(universe: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut words = vec![0u64; universe.div_ceil(64)];
        let mut count = 0;
        for (w, word) in words.iter_mut().enumerate() {
            let base = w * 64;
            let end = (base + 64).min(universe);
            let mut bits = 0u64;
            for i in base..end {
                if f(i) {
                    bits |= 1 << (i - base);
                }
            }
            count += bits.count_ones() as usize;
            *word = bits;
        }
        AllowedSet { words, universe, count }
    }

    pub fn contains(&self, id: TokenId) -> bool {
        let i = id.index();
        i < self.universe && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn remove(&mut self, id: TokenId) {
        let i = id.index();
        if self.contains(id) {
            self.words[i / 64] &= !(1 << (i % 64));
            self.count -= 1;
        }
    }

    /// Number of allowed tokens.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Size of the catalog this set ranges over.
    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn intersect(&self, other: &AllowedSet) -> AllowedSet {
        assert_eq!(self.universe, other.universe, "allowed sets over different catalogs");
        let words: Vec<u64> = self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect();
        let count = words.iter().map(|w| w.count_ones() as usize).sum();
        AllowedSet { words, universe: self.universe, count }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            let mut rest = bits;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(TokenId::from(w * 64 + b))
            })
        })
    }
}

/// A spec with its targets resolved against a catalog.
#[derive(Debug, Clone)]
pub struct CompiledSpec {
    spec: FilterSpec,
    check: Check,
}

#[derive(Debug, Clone)]
enum Check {
    BanLetters(u32),
    RequireLetters(u32),
    StartsWith(String),
    EndsWith(String),
    Contains(String),
    BansStrings(Vec<String>),
    LengthMin(usize),
    LengthMax(usize),
    LengthExact(usize),
    Syllables { cmp: Cmp, n: u32, variants: Variants },
    Meter { pattern: Vec<u8>, mode: MeterMode, secondary: SecondaryStress, variants: Variants },
    Rhymes { keys: Vec<RhymeKey>, mode: RhymeMode, variants: Variants },
    Phonetic(MetaphoneCode),
    PartialAnagram(LetterCounts),
    FullAnagram(LetterCounts),
    Palindrome,
    BannedWords(HashSet<String>),
    EPrime,
    Semantic { target: Vec<f32>, threshold: f64 },
    WordStartOnly,
}

#[derive(Debug, Clone, Copy)]
enum Cmp {
    Eq,
    Min,
    Max,
}

impl Cmp {
    fn test(self, value: u32, n: u32) -> bool {
        match self {
            Cmp::Eq => value == n,
            Cmp::Min => value >= n,
            Cmp::Max => value <= n,
        }
    }
}

impl CompiledSpec {
    /// Resolves the filter's targets. Fails when the catalog lacks a resource
    /// it needs or a phonetic/semantic target is unknown.
    pub fn compile(spec: &FilterSpec, catalog: &TokenCatalog) -> Result<Self, FilterError> {
        spec.validate()?;
        let missing = |resource| FilterError::MissingResource { spec: spec.to_string(), resource };
        let unknown = |target: &str, resource| FilterError::UnknownTarget {
            spec: spec.to_string(),
            target: target.to_string(),
            resource,
        };
        use FilterSpec as F;
        let check = match spec {
            F::BanLetters(set) => Check::BanLetters(set.bits()),
            F::RequireLetters(set) => Check::RequireLetters(set.bits()),
            F::StartsWith(s) => Check::StartsWith(s.clone()),
            F::EndsWith(s) => Check::EndsWith(s.clone()),
            F::ContainsString(s) => Check::Contains(s.clone()),
            F::BansStrings(list) => Check::BansStrings(list.clone()),
            F::LengthMin(n) => Check::LengthMin(*n as usize),
            F::LengthMax(n) => Check::LengthMax(*n as usize),
            F::LengthExact(n) => Check::LengthExact(*n as usize),
            F::SyllableCount { n, variants } | F::SyllableMin { n, variants } | F::SyllableMax { n, variants } => {
                if catalog.lexicon().is_none() && !catalog.syllable_fallback() {
                    return Err(missing(Resource::Lexicon));
                }
                let cmp = match spec {
                    F::SyllableCount { .. } => Cmp::Eq,
                    F::SyllableMin { .. } => Cmp::Min,
                    _ => Cmp::Max,
                };
                Check::Syllables { cmp, n: *n, variants: *variants }
            }
            F::MeterPattern { pattern, mode, secondary, variants } => {
                if catalog.lexicon().is_none() {
                    return Err(missing(Resource::Lexicon));
                }
                Check::Meter {
                    pattern: pattern.as_str().bytes().collect(),
                    mode: *mode,
                    secondary: *secondary,
                    variants: *variants,
                }
            }
            F::RhymesWith { word, mode, variants } => {
                let lexicon = catalog.lexicon().ok_or_else(|| missing(Resource::Lexicon))?;
                let prons = lexicon.pronunciations(word).ok_or_else(|| unknown(word, Resource::Lexicon))?;
                let take = match variants {
                    Variants::First => 1,
                    Variants::Any => prons.len(),
                };
                let keys: Vec<RhymeKey> = prons.iter().take(take).filter_map(|p| p.rhyme_key()).collect();
                Check::Rhymes { keys, mode: *mode, variants: *variants }
            }
            F::PhoneticMatch(word) => Check::Phonetic(double_metaphone(word)),
            F::PartialAnagramOf(word) => Check::PartialAnagram(LetterCounts::of_text(word)),
            F::FullAnagramOf(word) => Check::FullAnagram(LetterCounts::of_text(word)),
            F::Palindrome => Check::Palindrome,
            F::BannedWords(list) => Check::BannedWords(list.iter().cloned().collect()),
            F::EPrime => Check::EPrime,
            F::SemanticSimilarity { word, threshold } => {
                let table = catalog.embeddings().ok_or_else(|| missing(Resource::Embeddings))?;
                let target = table.get(word).ok_or_else(|| unknown(word, Resource::Embeddings))?;
                Check::Semantic { target: target.to_vec(), threshold: threshold.get() }
            }
            F::WordStartOnly => Check::WordStartOnly,
        };
        Ok(CompiledSpec { spec: spec.clone(), check })
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    /// Pure predicate. Special tokens never pass, and tokens lacking a
    /// feature the filter reads never pass.
    pub fn evaluate(&self, f: &TokenFeatures, ctx: &GenerationContext) -> bool {
        if f.boundary == WordBoundaryClass::Special {
            return false;
        }
        match &self.check {
            Check::BanLetters(bits) => f.letter_set.bits() & bits == 0,
            Check::RequireLetters(bits) => f.letter_set.bits() & bits == *bits,
            Check::StartsWith(s) => f.normalized.starts_with(s.as_str()),
            Check::EndsWith(s) => f.normalized.ends_with(s.as_str()),
            Check::Contains(s) => f.normalized.contains(s.as_str()),
            Check::BansStrings(list) => !list.iter().any(|s| f.normalized.contains(s.as_str())),
            Check::LengthMin(n) => f.length >= *n,
            Check::LengthMax(n) => f.length <= *n,
            Check::LengthExact(n) => f.length == *n,
            Check::Syllables { cmp, n, variants } => match variants {
                Variants::Any if !f.pronunciations.is_empty() => {
                    f.pronunciations.iter().any(|p| cmp.test(p.syllables, *n))
                }
                _ => f.syllables.is_some_and(|s| cmp.test(s, *n)),
            },
            Check::Meter { pattern, mode, secondary, variants } => {
                let window: &[u8] = match mode {
                    MeterMode::Word => pattern,
                    MeterMode::Line => {
                        let start = ctx.syllables_before as usize % pattern.len();
                        &pattern[start..]
                    }
                };
                let fits = |stress: &str| meter_matches(stress.as_bytes(), window, *mode, *secondary);
                match variants {
                    Variants::First => f.pronunciations.first().is_some_and(|p| fits(&p.stress_pattern)),
                    Variants::Any => f.pronunciations.iter().any(|p| fits(&p.stress_pattern)),
                }
            }
            Check::Rhymes { keys, mode, variants } => {
                let take = match variants {
                    Variants::First => 1,
                    Variants::Any => f.pronunciations.len(),
                };
                let mut prons = f.pronunciations.iter().take(take);
                if *mode == RhymeMode::LineEnd {
                    if let Some(line) = ctx.line_length {
                        let Some(syl) = f.syllables else { return false };
                        let before = ctx.syllables_before % line.max(1);
                        if before + syl != line {
                            return true;
                        }
                    }
                }
                prons.any(|p| p.rhyme_key.as_ref().is_some_and(|k| keys.contains(k)))
            }
            Check::Phonetic(target) => f.metaphone.as_ref().is_some_and(|m| m.matches(target)),
            Check::PartialAnagram(target) => f.letters.total() > 0 && f.letters.is_subset_of(target),
            Check::FullAnagram(target) => f.letters.total() > 0 && f.letters == *target,
            Check::Palindrome => {
                let chars: Vec<char> = f.normalized.chars().filter(|c| c.is_alphanumeric()).collect();
                !chars.is_empty() && chars.iter().eq(chars.iter().rev())
            }
            Check::BannedWords(set) => !set.contains(&f.normalized),
            Check::EPrime => !is_eprime_banned(f),
            Check::Semantic { target, threshold } => f
                .embedding
                .as_deref()
                .and_then(|v| crate::scalar::cosine::<f64>(v, target))
                .is_some_and(|c| c >= *threshold),
            Check::WordStartOnly => f.boundary == WordBoundaryClass::WordStart,
        }
    }
}

fn meter_matches(stress: &[u8], window: &[u8], mode: MeterMode, secondary: SecondaryStress) -> bool {
    let length_ok = match mode {
        MeterMode::Word => stress.len() == window.len(),
        MeterMode::Line => !stress.is_empty() && stress.len() <= window.len(),
    };
    length_ok
        && stress.iter().zip(window).all(|(&d, &p)| match (p, d) {
            (b'x', _) => true,
            (b'0', b'0') => true,
            (b'0', b'2') => secondary == SecondaryStress::Wildcard,
            (b'1', b'1' | b'2') => true,
            _ => false,
        })
}

fn is_eprime_banned(f: &TokenFeatures) -> bool {
    let word = f.normalized.replace('\u{2019}', "'");
    if EPRIME_WORDS.contains(&word.as_str()) {
        return true;
    }
    if f.contraction && word == "'s" {
        return true;
    }
    word.len() > 2 && (word.ends_with("'re") || word.ends_with("'m"))
}

/// Ordered AND-composition of compiled specs.
#[derive(Debug, Clone, Default)]
pub struct CompositeFilter {
    specs: Vec<CompiledSpec>,
    line_length: Option<u32>,
}

impl CompositeFilter {
    /// Passes every token.
    pub fn universal() -> Self {
        CompositeFilter::default()
    }

    pub fn compose(specs: &[FilterSpec], catalog: &TokenCatalog) -> Result<Self, FilterError> {
        let compiled = specs
            .iter()
            .map(|s| CompiledSpec::compile(s, catalog))
            .collect::<Result<Vec<_>, _>>()?;
        let line_length = specs.iter().find_map(|s| match s {
            FilterSpec::MeterPattern { pattern, mode: MeterMode::Line, .. } => Some(pattern.len() as u32),
            _ => None,
        });
        if line_length.is_none() {
            if let Some(s) = specs
                .iter()
                .find(|s| matches!(s, FilterSpec::RhymesWith { mode: RhymeMode::LineEnd, .. }))
            {
                return Err(FilterError::InvalidCombination {
                    spec: s.to_string(),
                    reason: "mode=line_end needs a meter filter with mode=line to define lines".into(),
                });
            }
        }
        Ok(CompositeFilter { specs: compiled, line_length })
    }

    pub fn specs(&self) -> impl Iterator<Item = &FilterSpec> {
        self.specs.iter().map(CompiledSpec::spec)
    }

    pub fn compiled(&self) -> &[CompiledSpec] {
        &self.specs
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn is_context_dependent(&self) -> bool {
        self.specs.iter().any(|c| c.spec.is_context_dependent())
    }

    /// Appends a compiled spec (used for decoder-implied constraints).
    pub fn push(&mut self, spec: CompiledSpec) {
        self.specs.push(spec);
    }

    pub fn passes(&self, f: &TokenFeatures, ctx: &GenerationContext) -> bool {
        self.specs.iter().all(|c| c.evaluate(f, ctx))
    }

    /// First spec (in composition order) that rejects the token.
    pub fn first_rejection(&self, f: &TokenFeatures, ctx: &GenerationContext) -> Option<&FilterSpec> {
        self.specs.iter().find(|c| !c.evaluate(f, ctx)).map(CompiledSpec::spec)
    }

    pub fn apply(&self, catalog: &TokenCatalog, ctx: &GenerationContext) -> AllowedSet {
        let features = catalog.all_features();
        if self.specs.is_empty() {
            return AllowedSet::full(features.len());
        }
        AllowedSet::from_fn(features.len(), |i| self.passes(&features[i], ctx))
    }

    /// Line position after the tokens in `context`.
    pub fn context_for(&self, catalog: &TokenCatalog, context: &[TokenId]) -> GenerationContext {
        let Some(line) = self.line_length.filter(|&l| l > 0) else {
            return GenerationContext::default();
        };
        let total: u32 = context
            .iter()
            .filter_map(|&id| catalog.features_of(id).ok().and_then(|f| f.syllables))
            .sum();
        GenerationContext { syllables_before: total % line, line_length: Some(line) }
    }

    /// Canonical items, comma-separated; `(none)` when empty.
    pub fn describe(&self) -> String {
        if self.specs.is_empty() {
            return "(none)".into();
        }
        self.specs().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    }
}

/// Single-spec application, mostly for tests and diagnostics.
pub fn apply_spec(
    spec: &FilterSpec,
    catalog: &TokenCatalog,
    ctx: &GenerationContext,
) -> Result<AllowedSet, FilterError> {
    Ok(CompositeFilter::compose(std::slice::from_ref(spec), catalog)?.apply(catalog, ctx))
}

/// Machine-readable description of every filter kind, for form rendering.
pub fn schema() -> Value {
    let kind = |name: &str, param: Value, example: &str, options: Value, requires: Value, help: &str| {
        json!({
            "name": name,
            "param": param,
            "example": example,
            "options": options,
            "requires": requires,
            "description": help,
        })
    };
    let none = Value::Null;
    let variants = json!([{ "key": "variants", "values": ["first", "any"], "default": "first" }]);
    let lexicon = json!("lexicon");
    let filters = vec![
        kind("ban_letters", json!("letters"), "ban_letters=e", json!([]), none.clone(), "Token contains none of the letters."),
        kind("require_letters", json!("letters"), "require_letters=a", json!([]), none.clone(), "Token contains every letter."),
        kind("starts_with", json!("string"), "starts_with=th", json!([]), none.clone(), "Token starts with the string."),
        kind("ends_with", json!("string"), "ends_with=ing", json!([]), none.clone(), "Token ends with the string."),
        kind("contains", json!("string"), "contains=oo", json!([]), none.clone(), "Token contains the string."),
        kind("bans_strings", json!("string list"), "bans_strings=th,ng", json!([]), none.clone(), "Token contains none of the strings."),
        kind("length_min", json!("integer"), "length_min=4", json!([]), none.clone(), "At least n characters."),
        kind("length_max", json!("integer"), "length_max=6", json!([]), none.clone(), "At most n characters."),
        kind("length", json!("integer"), "length=5", json!([]), none.clone(), "Exactly n characters."),
        kind("syllables", json!("integer"), "syllables=2", variants.clone(), lexicon.clone(), "Exactly n syllables."),
        kind("syllables_min", json!("integer"), "syllables_min=2", variants.clone(), lexicon.clone(), "At least n syllables."),
        kind("syllables_max", json!("integer"), "syllables_max=1", variants.clone(), lexicon.clone(), "At most n syllables."),
        kind(
            "meter",
            json!("pattern over 0, 1, x"),
            "meter=0101",
            json!([
                { "key": "mode", "values": ["word", "line"], "default": "word" },
                { "key": "secondary", "values": ["wildcard", "strict"], "default": "wildcard" },
                { "key": "variants", "values": ["first", "any"], "default": "first" }
            ]),
            lexicon.clone(),
            "Stress pattern matches; 1 also matches secondary stress.",
        ),
        kind(
            "rhymes_with",
            json!("word"),
            "rhymes_with=cat",
            json!([
                { "key": "mode", "values": ["always", "line_end"], "default": "always" },
                { "key": "variants", "values": ["first", "any"], "default": "first" }
            ]),
            lexicon,
            "Same rhyme key as the word.",
        ),
        kind("phonetic_match", json!("word"), "phonetic_match=smith", json!([]), none.clone(), "Shares a double metaphone code with the word."),
        kind("partial_anagram_of", json!("word"), "partial_anagram_of=elations", json!([]), none.clone(), "Letters drawn from the word's letters."),
        kind("full_anagram_of", json!("word"), "full_anagram_of=listen", json!([]), none.clone(), "Exactly the word's letters."),
        kind("palindrome", none.clone(), "palindrome", json!([]), none.clone(), "Reads the same reversed."),
        kind("banned_words", json!("word list"), "banned_words=very,really", json!([]), none.clone(), "Token is not one of the words."),
        kind("eprime", none.clone(), "eprime", json!([]), none.clone(), "No form of the verb to be."),
        kind("semantic", json!("word:threshold"), "semantic=dog:0.5", json!([]), json!("embeddings"), "Cosine similarity to the word at least the threshold."),
        kind("word_start_only", none.clone(), "word_start_only", json!([]), none, "Token begins a word."),
    ];
    let presets: Vec<Value> = PRESETS.iter().map(|(n, items)| json!({ "name": n, "filters": items })).collect();
    json!({ "filters": filters, "presets": presets })
}

//! Random catalogs, specs and distributions shared by property tests.
#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use ctgs_core::embeddings::EmbeddingTable;
use ctgs_core::filter::{FilterSpec, GenerationContext, Meter, MeterMode, RhymeMode, SecondaryStress, Threshold, Variants};
use ctgs_core::letters::LetterSet;
use ctgs_core::phonetics::{parse_cmudict, PhoneticLexicon};
use ctgs_core::lm::{Distribution, LanguageModel, LmError};
use ctgs_core::{TokenCatalog, TokenId, TokenizationScheme};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn full_lexicon() -> Arc<PhoneticLexicon> {
    static LEX: OnceLock<Arc<PhoneticLexicon>> = OnceLock::new();
    LEX.get_or_init(|| {
        let file = File::open(data_dir().join("cmudict.dict")).expect("bundled cmudict");
        Arc::new(parse_cmudict(BufReader::new(file)).unwrap())
    })
    .clone()
}

pub const POOL: &[&str] = &[
    "the", "cat", "hat", "a", "dog", "then", "data", "stone", "steel", "is", "was", "are", "be", "been",
    "isn't", "'s", "'re", "'m", "you're", "it's", "level", "noon", "civic", "hello", "potential", "away",
    "day", "night", "light", "bright", "tree", "free", "sea", "whale", "ship", "sail", "captain", "ocean",
    "listen", "silent", "enlist", "tinsel", "elations", "salient", "toast", "tomato", "banana", "rhythm",
    "strengths", "smith", "schmidt", "thompson", "read", "live", "record", "present", "object", "running",
    "quickly", "jump", "over", "lazy", "fox", "brown", "quick", "zzzq", "xyzzy", "pst", ",", ".", "!", "?",
    ";", "-", "\"", "<unk>", "42", "e-mail", "don't", "o'clock", "café", "naïve", "i", "I'm", "am",
    "being", "ain't", "were", "weren't", "aren't", "wasn't", "art", "star", "rats", "tars", "arts", "moon",
    "june", "tune", "soon", "spoon", "blue", "true", "glue", "water", "river", "mountain", "valley",
];

/// Words from [`POOL`] that have a lexicon entry, usable as rhyme targets.
pub const RHYME_TARGETS: &[&str] = &["cat", "day", "light", "tree", "moon", "blue", "star", "sea", "june"];

pub fn embeddings_for(words: &[&str], rng: &mut impl Rng) -> EmbeddingTable {
    EmbeddingTable::from_vectors(words.iter().map(|w| {
        let mut v: Vec<f32> = (0..6).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        (*w, v)
    }))
}

/// A word-level catalog of 1..=max tokens drawn from [`POOL`], with the full
/// lexicon, `<unk>` special, and embeddings for roughly two thirds of them.
pub fn random_catalog(rng: &mut impl Rng, max: usize) -> TokenCatalog {
    let n = rng.gen_range(1..=max.min(POOL.len()));
    let tokens: Vec<&str> = POOL.choose_multiple(rng, n).copied().collect();
    let with_vectors: Vec<&str> = tokens.iter().copied().filter(|_| rng.gen_bool(0.66)).chain(["dog", "sea"]).collect();
    let mut with_vectors = with_vectors;
    with_vectors.dedup();
    let table = embeddings_for(&with_vectors, rng);
    TokenCatalog::builder(tokens)
        .scheme(TokenizationScheme::word_level().with_specials(["<unk>"]))
        .lexicon(full_lexicon())
        .embeddings(Arc::new(table))
        .syllable_fallback(rng.gen_bool(0.5))
        .build()
        .unwrap()
}

fn letters(rng: &mut impl Rng) -> LetterSet {
    let n = rng.gen_range(1..=3);
    (0..n).map(|_| (b'a' + rng.gen_range(0..26u8)) as char).collect()
}

fn fragment(rng: &mut impl Rng) -> String {
    let word: Vec<char> = loop {
        let w = POOL.choose(rng).unwrap();
        if w.chars().all(|c| c.is_ascii_lowercase()) {
            break w.chars().collect();
        }
    };
    let start = rng.gen_range(0..word.len());
    let end = rng.gen_range(start + 1..=word.len().min(start + 3));
    word[start..end].iter().collect()
}

fn variants(rng: &mut impl Rng) -> Variants {
    if rng.gen_bool(0.3) {
        Variants::Any
    } else {
        Variants::First
    }
}

fn plain_word(rng: &mut impl Rng) -> String {
    loop {
        let w = POOL.choose(rng).unwrap();
        if w.chars().all(|c| c.is_ascii_lowercase() || c == '\'') && !w.is_empty() {
            return w.to_string();
        }
    }
}

/// Any filter kind except line-end rhymes (which need a line-mode meter in
/// the same composition). Semantic targets are drawn from words that have
/// vectors in every [`random_catalog`].
pub fn random_spec(rng: &mut impl Rng) -> FilterSpec {
    match rng.gen_range(0..22) {
        0 => FilterSpec::BanLetters(letters(rng)),
        1 => FilterSpec::RequireLetters(letters(rng)),
        2 => FilterSpec::StartsWith(fragment(rng)),
        3 => FilterSpec::EndsWith(fragment(rng)),
        4 => FilterSpec::ContainsString(fragment(rng)),
        5 => FilterSpec::BansStrings((0..rng.gen_range(1..3)).map(|_| fragment(rng)).collect()),
        6 => FilterSpec::LengthMin(rng.gen_range(0..8)),
        7 => FilterSpec::LengthMax(rng.gen_range(0..8)),
        8 => FilterSpec::LengthExact(rng.gen_range(0..8)),
        9 => FilterSpec::SyllableCount { n: rng.gen_range(0..4), variants: variants(rng) },
        10 => FilterSpec::SyllableMin { n: rng.gen_range(0..4), variants: variants(rng) },
        11 => FilterSpec::SyllableMax { n: rng.gen_range(0..4), variants: variants(rng) },
        12 => {
            let len = rng.gen_range(1..=4);
            let pattern: String = (0..len).map(|_| *[b'0', b'1', b'x'].choose(rng).unwrap() as char).collect();
            FilterSpec::MeterPattern {
                pattern: Meter::new(&pattern).unwrap(),
                mode: if rng.gen_bool(0.3) { MeterMode::Line } else { MeterMode::Word },
                secondary: if rng.gen_bool(0.3) { SecondaryStress::Strict } else { SecondaryStress::Wildcard },
                variants: variants(rng),
            }
        }
        13 => FilterSpec::RhymesWith {
            word: RHYME_TARGETS.choose(rng).unwrap().to_string(),
            mode: RhymeMode::Always,
            variants: variants(rng),
        },
        14 => FilterSpec::PhoneticMatch(plain_word(rng)),
        15 => FilterSpec::PartialAnagramOf(plain_word(rng)),
        16 => FilterSpec::FullAnagramOf(plain_word(rng)),
        17 => FilterSpec::Palindrome,
        18 => FilterSpec::BannedWords((0..rng.gen_range(1..4)).map(|_| plain_word(rng)).collect()),
        19 => FilterSpec::EPrime,
        20 => FilterSpec::SemanticSimilarity {
            word: ["dog", "sea"].choose(rng).unwrap().to_string(),
            threshold: Threshold::new((rng.gen_range(-1.0f64..=1.0) * 100.0).round() / 100.0).unwrap(),
        },
        _ => FilterSpec::WordStartOnly,
    }
}

pub fn random_specs(rng: &mut impl Rng, max: usize) -> Vec<FilterSpec> {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| random_spec(rng)).collect()
}

pub fn random_context(rng: &mut impl Rng) -> GenerationContext {
    GenerationContext {
        syllables_before: rng.gen_range(0..6),
        line_length: if rng.gen_bool(0.5) { Some(rng.gen_range(1..8)) } else { None },
    }
}

/// Normalized random weights with roughly one in eight entries zero.
pub fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.125) { 0.0 } else { rng.gen_range(1e-6..1.0f64).powi(3) })
            .collect();
        let sum: f64 = w.iter().sum();
        if sum > 0.0 {
            return w.into_iter().map(|x| x / sum).collect();
        }
    }
}

/// A model whose distribution is a fixed pseudo-random function of the
/// context.
pub struct TableModel {
    pub vocab: usize,
    pub seed: u64,
}

impl LanguageModel<f64> for TableModel {
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution<f64>, LmError> {
        let key = context.iter().fold(self.seed, |h, t| h.wrapping_mul(0x100000001b3).wrapping_add(t.0 as u64 + 1));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        Ok(Distribution::new(random_distribution(&mut rng, self.vocab))?)
    }

    fn describe(&self) -> String {
        format!("table({})", self.seed)
    }
}

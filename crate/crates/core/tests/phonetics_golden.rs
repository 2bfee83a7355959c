use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::OnceLock;

use ctgs_core::phonetics::{double_metaphone, parse_cmudict, DoubleMetaphone, PhoneticLexicon};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(path)
}

fn lexicon() -> &'static PhoneticLexicon {
    static LEX: OnceLock<PhoneticLexicon> = OnceLock::new();
    LEX.get_or_init(|| parse_cmudict(BufReader::new(File::open(data("cmudict.dict")).unwrap())).unwrap())
}

#[test]
fn full_dictionary_syllables_match_stress_length() {
    let lex = lexicon();
    assert!(lex.len() > 120_000, "only {} words parsed", lex.len());
    let mut checked = 0;
    for (word, variants) in lex.iter() {
        for p in variants {
            assert_eq!(p.syllables() as usize, p.stress_pattern().len(), "{word}");
        }
        assert_eq!(
            lex.syllable_count(word, false).map(|n| n as usize),
            lex.stress_pattern(word).map(|s| s.len()),
            "{word}"
        );
        checked += 1;
    }
    assert_eq!(checked, lex.len());
}

#[test]
fn published_entries() {
    let lex = lexicon();
    assert_eq!(lex.first("hello").unwrap().to_string(), "HH AH0 L OW1");
    assert_eq!(lex.syllable_count("hello", false), Some(2));
    assert_eq!(lex.syllable_count("strengths", false), Some(1));
    assert_eq!(lex.stress_pattern("potential").as_deref(), Some("010"));
    assert_eq!(lex.stress_pattern("cat").as_deref(), Some("1"));
    assert_eq!(lex.rhyme_key("cat").unwrap().to_string(), "AE1 T");
    assert_eq!(lex.rhyme_key("cat"), lex.rhyme_key("hat"));
    let read = lex.pronunciations("read").unwrap();
    assert_eq!(read[0].to_string(), "R EH1 D");
    assert_eq!(read[1].to_string(), "R IY1 D");
}

#[test]
fn double_metaphone_matches_reference_list() {
    let text = std::fs::read_to_string(data("golden/double_metaphone.tsv")).unwrap();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        let (word, primary, alternate) = (cols[0], cols[1], cols[2]);
        let code = double_metaphone(word);
        if code.primary != primary || code.alternate != alternate {
            mismatches.push(format!("{word}: got {}/{}, want {primary}/{alternate}", code.primary, code.alternate));
        }
        checked += 1;
    }
    assert_eq!(checked, 200);
    assert!(mismatches.is_empty(), "{} mismatches:\n{}", mismatches.len(), mismatches.join("\n"));
}

#[test]
fn reserialized_dictionary_keeps_entries_and_variant_order() {
    let lex = lexicon();
    let again = parse_cmudict(lex.to_cmudict_string().as_bytes()).unwrap();
    assert_eq!(again.len(), lex.len());
    for (word, variants) in lex.iter() {
        assert_eq!(again.pronunciations(word).unwrap(), variants, "{word}");
    }
}

#[test]
fn rhyme_relation_is_symmetric_and_transitive() {
    let lex = lexicon();
    let words: Vec<&str> = lex.words().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sample: Vec<&str> = words.choose_multiple(&mut rng, 3000).copied().collect();
    let rhymes = |a: &str, b: &str| {
        let (ka, kb) = (lex.rhyme_key(a), lex.rhyme_key(b));
        ka.is_some() && ka == kb
    };
    for w in sample.chunks(3) {
        if let [a, b, c] = w {
            assert_eq!(rhymes(a, b), rhymes(b, a));
            if rhymes(a, b) && rhymes(b, c) {
                assert!(rhymes(a, c));
            }
        }
    }
    let cat_like: Vec<&str> = words.iter().copied().filter(|w| rhymes(w, "CAT")).take(50).collect();
    assert!(cat_like.len() > 10);
    for a in &cat_like {
        for b in &cat_like {
            assert!(rhymes(a, b) && rhymes(b, a));
        }
    }
}

proptest! {
    #[test]
    fn metaphone_ignores_case(word in "[a-zA-Zçéñ' -]{0,14}") {
        prop_assert_eq!(double_metaphone(&word), double_metaphone(&word.to_uppercase()));
        prop_assert_eq!(double_metaphone(&word), double_metaphone(&word.to_lowercase()));
    }

    #[test]
    fn metaphone_respects_max_length(word in "[a-z]{0,20}", max in 1usize..8) {
        let code = DoubleMetaphone::with_max_len(max).encode(&word);
        prop_assert!(code.primary.len() <= max && code.alternate.len() <= max);
        if word.is_empty() {
            prop_assert!(code.primary.is_empty() && code.alternate.is_empty());
        }
    }

    #[test]
    fn lexicon_words_agree_with_first_variant(i in 0usize..130_000) {
        let lex = lexicon();
        let word = lex.words().nth(i % lex.len()).unwrap();
        let first = lex.first(word).unwrap();
        prop_assert_eq!(lex.syllable_count(word, true), Some(first.syllables()));
        prop_assert_eq!(lex.stress_pattern(&word.to_lowercase()), Some(first.stress_pattern()));
    }
}

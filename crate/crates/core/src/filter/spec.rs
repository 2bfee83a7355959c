use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FilterError;
use crate::letters::LetterSet;

/// Pronunciation variants consulted by a phonetic spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variants {
    /// Only the first lexicon pronunciation.
    #[default]
    First,
    /// Passes if any pronunciation variant passes.
    Any,
}

/// How a meter pattern is matched against a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MeterMode {
    /// The token's whole stress pattern must match the pattern.
    #[default]
    Word,
    /// The pattern describes a line; the token must match the next stretch
    /// of it given the syllables already in the line.
    Line,
}

/// Treatment of secondary stress (digit 2) in meter matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SecondaryStress {
    /// Matches `0`, `1` and `x`.
    #[default]
    Wildcard,
    /// Matches `1` and `x` only.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RhymeMode {
    /// Every token must rhyme with the target.
    #[default]
    Always,
    /// Only a token that completes the current line must rhyme.
    LineEnd,
}

/// Stress pattern over `0`, `1` and `x`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Meter(String);

impl Meter {
    pub fn new(pattern: &str) -> Result<Self, String> {
        if pattern.is_empty() {
            return Err("meter pattern is empty".into());
        }
        if let Some(c) = pattern.chars().find(|c| !matches!(c, '0' | '1' | 'x')) {
            return Err(format!("meter pattern may only contain 0, 1 and x, found {c:?}"));
        }
        Ok(Meter(pattern.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Meter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Cosine threshold in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self, String> {
        if (-1.0..=1.0).contains(&value) {
            Ok(Threshold(value))
        } else {
            Err(format!("threshold {value} outside [-1, 1]"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// A declarative token predicate.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterSpec {
    BanLetters(LetterSet),
    RequireLetters(LetterSet),
    StartsWith(String),
    EndsWith(String),
    ContainsString(String),
    BansStrings(Vec<String>),
    LengthMin(u32),
    LengthMax(u32),
    LengthExact(u32),
    SyllableCount { n: u32, variants: Variants },
    SyllableMin { n: u32, variants: Variants },
    SyllableMax { n: u32, variants: Variants },
    MeterPattern { pattern: Meter, mode: MeterMode, secondary: SecondaryStress, variants: Variants },
    RhymesWith { word: String, mode: RhymeMode, variants: Variants },
    PhoneticMatch(String),
    PartialAnagramOf(String),
    FullAnagramOf(String),
    Palindrome,
    BannedWords(Vec<String>),
    EPrime,
    SemanticSimilarity { word: String, threshold: Threshold },
    WordStartOnly,
}

/// Resources a spec needs from the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resource {
    Lexicon,
    Embeddings,
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resource::Lexicon => "lexicon",
            Resource::Embeddings => "embeddings",
        })
    }
}

impl FilterSpec {
    /// Canonical name used in the textual syntax.
    pub fn name(&self) -> &'static str {
        use FilterSpec::*;
        match self {
            BanLetters(_) => "ban_letters",
            RequireLetters(_) => "require_letters",
            StartsWith(_) => "starts_with",
            EndsWith(_) => "ends_with",
            ContainsString(_) => "contains",
            BansStrings(_) => "bans_strings",
            LengthMin(_) => "length_min",
            LengthMax(_) => "length_max",
            LengthExact(_) => "length",
            SyllableCount { .. } => "syllables",
            SyllableMin { .. } => "syllables_min",
            SyllableMax { .. } => "syllables_max",
            MeterPattern { .. } => "meter",
            RhymesWith { .. } => "rhymes_with",
            PhoneticMatch(_) => "phonetic_match",
            PartialAnagramOf(_) => "partial_anagram_of",
            FullAnagramOf(_) => "full_anagram_of",
            Palindrome => "palindrome",
            BannedWords(_) => "banned_words",
            EPrime => "eprime",
            SemanticSimilarity { .. } => "semantic",
            WordStartOnly => "word_start_only",
        }
    }

    pub fn required_resource(&self) -> Option<Resource> {
        use FilterSpec::*;
        match self {
            MeterPattern { .. } | RhymesWith { .. } => Some(Resource::Lexicon),
            SemanticSimilarity { .. } => Some(Resource::Embeddings),
            _ => None,
        }
    }

    /// Reads [`GenerationContext`](super::GenerationContext).
    pub fn is_context_dependent(&self) -> bool {
        matches!(
            self,
            FilterSpec::MeterPattern { mode: MeterMode::Line, .. }
                | FilterSpec::RhymesWith { mode: RhymeMode::LineEnd, .. }
        )
    }

    /// Checks parameter ranges and that string arguments survive the textual
    /// syntax. Parsing always validates; call this for specs built in code.
    pub fn validate(&self) -> Result<(), FilterError> {
        let fail = |reason: String| Err(FilterError::Parse { item: self.to_string(), reason });
        use FilterSpec::*;
        match self {
            BanLetters(set) | RequireLetters(set) if set.is_empty() => fail("letter set is empty".into()),
            StartsWith(s) | EndsWith(s) | ContainsString(s) | PhoneticMatch(s) | PartialAnagramOf(s)
            | FullAnagramOf(s) | RhymesWith { word: s, .. } | SemanticSimilarity { word: s, .. } => check_atom(s).or_else(fail),
            BansStrings(list) | BannedWords(list) => {
                if list.is_empty() {
                    return fail("list is empty".into());
                }
                list.iter().try_for_each(|s| check_atom(s)).or_else(fail)
            }
            MeterPattern { pattern, .. } => Meter::new(pattern.as_str()).map(|_| ()).or_else(fail),
            _ => Ok(()),
        }
    }
}

/// String arguments are stored lowercased and must not contain characters
/// reserved by the syntax.
fn check_atom(s: &str) -> Result<(), String> {
    if s.is_empty() {
        return Err("empty argument".into());
    }
    if let Some(c) = s.chars().find(|c| c.is_whitespace() || matches!(c, ',' | ';' | '=' | ':')) {
        return Err(format!("argument {s:?} contains reserved character {c:?}"));
    }
    if s.chars().any(|c| c.is_ascii_uppercase()) {
        return Err(format!("argument {s:?} must be lowercase"));
    }
    Ok(())
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FilterSpec::*;
        let name = self.name();
        match self {
            BanLetters(set) | RequireLetters(set) => write!(f, "{name}={set}"),
            StartsWith(s) | EndsWith(s) | ContainsString(s) | PhoneticMatch(s) | PartialAnagramOf(s)
            | FullAnagramOf(s) => write!(f, "{name}={s}"),
            BansStrings(list) | BannedWords(list) => write!(f, "{name}={}", list.join(",")),
            LengthMin(n) | LengthMax(n) | LengthExact(n) => write!(f, "{name}={n}"),
            SyllableCount { n, variants } | SyllableMin { n, variants } | SyllableMax { n, variants } => {
                write!(f, "{name}={n}")?;
                write_variants(f, *variants)
            }
            MeterPattern { pattern, mode, secondary, variants } => {
                write!(f, "{name}={pattern}")?;
                if *mode == MeterMode::Line {
                    f.write_str(";mode=line")?;
                }
                if *secondary == SecondaryStress::Strict {
                    f.write_str(";secondary=strict")?;
                }
                write_variants(f, *variants)
            }
            RhymesWith { word, mode, variants } => {
                write!(f, "{name}={word}")?;
                if *mode == RhymeMode::LineEnd {
                    f.write_str(";mode=line_end")?;
                }
                write_variants(f, *variants)
            }
            SemanticSimilarity { word, threshold } => write!(f, "{name}={word}:{}", threshold.get()),
            Palindrome | EPrime | WordStartOnly => f.write_str(name),
        }
    }
}

fn write_variants(f: &mut fmt::Formatter<'_>, variants: Variants) -> fmt::Result {
    match variants {
        Variants::First => Ok(()),
        Variants::Any => f.write_str(";variants=any"),
    }
}

impl FromStr for FilterSpec {
    type Err = FilterError;

    /// Parses `name`, `name=value` or `name=value;option=value;...`.
    fn from_str(item: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| FilterError::Parse { item: item.to_string(), reason };
        let trimmed = item.trim();
        let mut parts = trimmed.split(';');
        let head = parts.next().unwrap_or_default();
        let (name, value) = match head.split_once('=') {
            Some((n, v)) => (n.trim(), Some(v.trim())),
            None => (head.trim(), None),
        };
        let mut options = Options::default();
        for opt in parts {
            let (k, v) = opt.split_once('=').ok_or_else(|| err(format!("option {opt:?} is not key=value")))?;
            options.set(k.trim(), v.trim()).map_err(err)?;
        }

        let need = || value.filter(|v| !v.is_empty()).ok_or_else(|| err(format!("{name} needs a value")));
        let none = || match value {
            Some(_) => Err(err(format!("{name} takes no value"))),
            None => Ok(()),
        };
        let number = || -> Result<u32, FilterError> {
            let v = need()?;
            v.parse().map_err(|_| err(format!("{v:?} is not a non-negative integer")))
        };
        let letters = || -> Result<LetterSet, FilterError> {
            let v = need()?;
            v.parse::<LetterSet>().map_err(|e| err(e.to_string()))
        };
        let word = || need().map(str::to_lowercase);
        let list = || -> Result<Vec<String>, FilterError> {
            Ok(need()?.split(',').map(|s| s.trim().to_lowercase()).collect())
        };

        use FilterSpec::*;
        let spec = match name {
            "ban_letters" => BanLetters(letters()?),
            "require_letters" => RequireLetters(letters()?),
            "starts_with" => StartsWith(word()?),
            "ends_with" => EndsWith(word()?),
            "contains" => ContainsString(word()?),
            "bans_strings" => BansStrings(list()?),
            "length_min" => LengthMin(number()?),
            "length_max" => LengthMax(number()?),
            "length" => LengthExact(number()?),
            "syllables" => SyllableCount { n: number()?, variants: options.variants() },
            "syllables_min" => SyllableMin { n: number()?, variants: options.variants() },
            "syllables_max" => SyllableMax { n: number()?, variants: options.variants() },
            "meter" => FilterSpec::MeterPattern {
                pattern: Meter::new(&need()?.to_lowercase()).map_err(err)?,
                mode: options.meter_mode().map_err(err)?,
                secondary: options.secondary,
                variants: options.variants(),
            },
            "rhymes_with" => RhymesWith {
                word: word()?,
                mode: options.rhyme_mode().map_err(err)?,
                variants: options.variants(),
            },
            "phonetic_match" => PhoneticMatch(word()?),
            "partial_anagram_of" => PartialAnagramOf(word()?),
            "full_anagram_of" => FullAnagramOf(word()?),
            "palindrome" => none().map(|_| Palindrome)?,
            "banned_words" => BannedWords(list()?),
            "eprime" => none().map(|_| EPrime)?,
            "semantic" => {
                let v = need()?;
                let (w, t) = v.rsplit_once(':').ok_or_else(|| err("expected word:threshold".into()))?;
                let t: f64 = t.parse().map_err(|_| err(format!("{t:?} is not a number")))?;
                SemanticSimilarity { word: w.to_lowercase(), threshold: Threshold::new(t).map_err(err)? }
            }
            "word_start_only" => none().map(|_| WordStartOnly)?,
            other => return Err(err(format!("unknown filter {other:?}"))),
        };
        options.check_used(&spec).map_err(err)?;
        spec.validate().map_err(|e| match e {
            FilterError::Parse { reason, .. } => err(reason),
            other => other,
        })?;
        Ok(spec)
    }
}

#[derive(Default)]
struct Options {
    variants: Option<Variants>,
    mode: Option<String>,
    secondary: SecondaryStress,
    secondary_set: bool,
}

impl Options {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match (key, value) {
            ("variants", "any") => self.variants = Some(Variants::Any),
            ("variants", "first") => self.variants = Some(Variants::First),
            ("mode", m) => self.mode = Some(m.to_string()),
            ("secondary", "strict") => {
                self.secondary = SecondaryStress::Strict;
                self.secondary_set = true;
            }
            ("secondary", "wildcard") => self.secondary_set = true,
            _ => return Err(format!("unknown option {key}={value}")),
        }
        Ok(())
    }

    fn variants(&self) -> Variants {
        self.variants.unwrap_or_default()
    }

    fn meter_mode(&self) -> Result<MeterMode, String> {
        match self.mode.as_deref() {
            None | Some("word") => Ok(MeterMode::Word),
            Some("line") => Ok(MeterMode::Line),
            Some(m) => Err(format!("meter mode must be word or line, got {m:?}")),
        }
    }

    fn rhyme_mode(&self) -> Result<RhymeMode, String> {
        match self.mode.as_deref() {
            None | Some("always") => Ok(RhymeMode::Always),
            Some("line_end") => Ok(RhymeMode::LineEnd),
            Some(m) => Err(format!("rhyme mode must be always or line_end, got {m:?}")),
        }
    }

    /// Rejects options the parsed spec does not understand.
    fn check_used(&self, spec: &FilterSpec) -> Result<(), String> {
        use FilterSpec::*;
        let phonetic = matches!(
            spec,
            SyllableCount { .. } | SyllableMin { .. } | SyllableMax { .. } | MeterPattern { .. } | RhymesWith { .. }
        );
        if self.variants.is_some() && !phonetic {
            return Err(format!("{} does not take a variants option", spec.name()));
        }
        if self.mode.is_some() && !matches!(spec, MeterPattern { .. } | RhymesWith { .. }) {
            return Err(format!("{} does not take a mode option", spec.name()));
        }
        if self.secondary_set && !matches!(spec, MeterPattern { .. }) {
            return Err(format!("{} does not take a secondary option", spec.name()));
        }
        Ok(())
    }
}

impl Serialize for FilterSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FilterSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses every item, reporting the first failure.
pub fn parse_filters<I, S>(items: I) -> Result<Vec<FilterSpec>, FilterError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    items.into_iter().map(|s| s.as_ref().parse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_examples_round_trip() {
        for item in [
            "ban_letters=e",
            "require_letters=a",
            "length_min=4",
            "syllables=2",
            "rhymes_with=cat",
            "meter=0101",
            "partial_anagram_of=elations",
            "semantic=dog:0.5",
            "eprime",
            "meter=01x1;mode=line;secondary=strict;variants=any",
            "rhymes_with=day;mode=line_end",
            "banned_words=very,really",
            "semantic=cat:-0.25",
        ] {
            let spec: FilterSpec = item.parse().unwrap();
            assert_eq!(spec.to_string(), item);
        }
    }

    #[test]
    fn letters_are_normalized() {
        let spec: FilterSpec = "ban_letters=EaE".parse().unwrap();
        assert_eq!(spec.to_string(), "ban_letters=ae");
    }

    #[test]
    fn errors_name_the_item() {
        for bad in [
            "syllables=banana",
            "semantic=dog:1.5",
            "meter=012",
            "ban_letters=3",
            "frobnicate=1",
            "eprime=1",
            "length_min=",
            "ban_letters=e;variants=any",
            "meter=01;mode=sideways",
        ] {
            match bad.parse::<FilterSpec>() {
                Err(FilterError::Parse { item, .. }) => assert_eq!(item, bad),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn validate_catches_code_built_specs() {
        assert!(FilterSpec::StartsWith("a b".into()).validate().is_err());
        assert!(FilterSpec::BanLetters(LetterSet::EMPTY).validate().is_err());
        assert!(FilterSpec::LengthMin(0).validate().is_ok());
    }
}

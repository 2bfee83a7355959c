//! Lexicon, embeddings, catalogs and models behind `--model`.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ctgs_core::catalog::UNKNOWN_TOKEN;
use ctgs_core::corpus::{build_vocabulary, encode, load_corpus, tokenize_words};
use ctgs_core::embeddings::EmbeddingTable;
use ctgs_core::lm::{train_ngram, ModelFile, NGramModel, ProviderHandle};
use ctgs_core::phonetics::{parse_cmudict, PhoneticLexicon};
use ctgs_core::{SharedModel64, TokenCatalog, TokenizationScheme};

use crate::error::CliError;

pub const BUNDLED_CMUDICT: &str = include_str!("../../../data/cmudict.dict");
pub const BUNDLED_ENGLISH: &str = include_str!("../../../data/corpus/moby-dick-excerpt.txt");
pub const BUNDLED_LIPOGRAM: &str = include_str!("../../../data/corpus/lipogram-no-e.txt");

/// Order and smoothing of the model trained when no `--model` is given.
pub const BUILTIN_ORDER: usize = 3;
pub const BUILTIN_K: f64 = 0.1;

pub fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn load_lexicon(path: Option<&Path>) -> Result<Arc<PhoneticLexicon>, CliError> {
    let lex = match path {
        None => parse_cmudict(BUNDLED_CMUDICT.as_bytes()),
        Some(p) => parse_cmudict(BufReader::new(File::open(p).map_err(io_error(p))?)),
    }
    .map_err(|e| CliError::Usage(format!("--lexicon: {e}")))?;
    Ok(Arc::new(lex))
}

pub fn load_embeddings(path: &Path) -> Result<Arc<EmbeddingTable>, CliError> {
    let file = File::open(path).map_err(io_error(path))?;
    let table = EmbeddingTable::parse(BufReader::new(file)).map_err(|e| CliError::Usage(format!("--embeddings: {e}")))?;
    Ok(Arc::new(table))
}

/// Feature resources shared by every catalog the CLI builds.
#[derive(Clone)]
pub struct Resources {
    pub lexicon: Arc<PhoneticLexicon>,
    pub embeddings: Option<Arc<EmbeddingTable>>,
    pub syllable_fallback: bool,
}

impl Resources {
    pub fn catalog(&self, tokens: &[String], specials: &[String]) -> Result<TokenCatalog, CliError> {
        let mut builder = TokenCatalog::builder(tokens.iter())
            .scheme(TokenizationScheme::word_level().with_specials(specials.iter()))
            .lexicon(Arc::clone(&self.lexicon))
            .syllable_fallback(self.syllable_fallback);
        if let Some(e) = &self.embeddings {
            builder = builder.embeddings(Arc::clone(e));
        }
        builder.build().map_err(|e| CliError::Domain(e.to_string()))
    }
}

/// A trained word-level model together with its catalog.
pub struct Trained {
    pub catalog: Arc<TokenCatalog>,
    pub model: NGramModel,
    pub tokens: Vec<String>,
}

/// Trains on `text` with a vocabulary of `<unk>` plus every word in it.
pub fn train_on_text(text: &str, order: usize, k: f64, res: &Resources) -> Result<Trained, CliError> {
    let words = tokenize_words(text);
    let tokens = build_vocabulary(&words);
    let catalog = res.catalog(&tokens, &[UNKNOWN_TOKEN.to_string()])?;
    let ids = encode(&words, &catalog)?;
    let model = train_ngram(&ids, order, k, catalog.size(), catalog.checksum())?;
    Ok(Trained { catalog: Arc::new(catalog), model, tokens })
}

/// Where `--model` points.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    /// Trigram trained at startup on the bundled English excerpt.
    Builtin,
    File(PathBuf),
    /// `provider:HOST:PORT`, with the vocabulary read from `--vocab`.
    Provider(String),
}

impl ModelSource {
    pub fn parse(s: Option<&str>) -> Self {
        match s {
            None | Some("builtin") => ModelSource::Builtin,
            Some(s) => match s.strip_prefix("provider:") {
                Some(addr) => ModelSource::Provider(addr.to_string()),
                None => ModelSource::File(PathBuf::from(s)),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSource::Builtin => "builtin".into(),
            ModelSource::File(p) => p.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned()),
            ModelSource::Provider(addr) => format!("provider:{addr}"),
        }
    }
}

pub fn load_model(
    source: &ModelSource,
    vocab: Option<&Path>,
    res: &Resources,
) -> Result<(Arc<TokenCatalog>, SharedModel64), CliError> {
    match source {
        ModelSource::Builtin => {
            let t = train_on_text(BUNDLED_ENGLISH, BUILTIN_ORDER, BUILTIN_K, res)?;
            Ok((t.catalog, Arc::new(t.model)))
        }
        ModelSource::File(path) => {
            let file = ModelFile::read(BufReader::new(File::open(path).map_err(io_error(path))?))?;
            let catalog = res.catalog(&file.tokens, &file.specials)?;
            if catalog.checksum() != file.model.checksum() {
                return Err(CliError::Domain(format!(
                    "{}: model checksum does not match its vocabulary",
                    path.display()
                )));
            }
            Ok((Arc::new(catalog), Arc::new(file.model)))
        }
        ModelSource::Provider(addr) => {
            let path = vocab.ok_or_else(|| CliError::Usage("--model provider:ADDR needs --vocab FILE".into()))?;
            let text = std::fs::read_to_string(path).map_err(io_error(path))?;
            let tokens: Vec<String> = text.lines().map(str::to_string).collect();
            let specials: Vec<String> = tokens.iter().filter(|t| *t == UNKNOWN_TOKEN).cloned().collect();
            let catalog = res.catalog(&tokens, &specials)?;
            let handle = ProviderHandle::connect(addr.clone(), catalog.checksum(), catalog.size())?;
            Ok((Arc::new(catalog), Arc::new(handle)))
        }
    }
}

/// Text of a corpus path (plain file or manifest).
pub fn read_corpus(path: &Path) -> Result<String, CliError> {
    Ok(load_corpus(path)?)
}

//! `--config` files and their merge with command-line flags.

use std::path::{Path, PathBuf};

use ctgs_core::filter::{parse_filters, preset};
use ctgs_core::{FilterSpec, SamplingParams, Strategy};
use serde::Deserialize;

use crate::error::CliError;
use crate::resources::io_error;

/// Keys accepted in a TOML config file; each mirrors the global flag of the
/// same name (`filters` for the repeatable `--filter`).
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub vocab: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub syllable_fallback: Option<bool>,
    #[serde(default)]
    pub filters: Vec<String>,
    pub preset: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub strategy: Option<String>,
    pub backtrack: Option<usize>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))
    }

    /// Flag values win; an empty flag list keeps the file's filters.
    pub fn overlay(self, flags: FileConfig) -> FileConfig {
        FileConfig {
            model: flags.model.or(self.model),
            vocab: flags.vocab.or(self.vocab),
            lexicon: flags.lexicon.or(self.lexicon),
            embeddings: flags.embeddings.or(self.embeddings),
            syllable_fallback: flags.syllable_fallback.or(self.syllable_fallback),
            filters: if flags.filters.is_empty() { self.filters } else { flags.filters },
            preset: flags.preset.or(self.preset),
            n: flags.n.or(self.n),
            seed: flags.seed.or(self.seed),
            strategy: flags.strategy.or(self.strategy),
            backtrack: flags.backtrack.or(self.backtrack),
            out: flags.out.or(self.out),
        }
    }

    /// Parsed filters followed by the preset's, if any.
    pub fn specs(&self) -> Result<Vec<FilterSpec>, CliError> {
        let mut specs = parse_filters(&self.filters)?;
        if let Some(name) = &self.preset {
            specs.extend(preset(name)?);
        }
        Ok(specs)
    }

    pub fn has_constraint(&self) -> bool {
        !self.filters.is_empty() || self.preset.is_some()
    }

    pub fn sampling(&self) -> Result<SamplingParams, CliError> {
        let text = self.strategy.as_deref().unwrap_or(DEFAULT_STRATEGY);
        let strategy: Strategy = text.parse().map_err(|e| CliError::Usage(format!("--strategy: {e}")))?;
        Ok(SamplingParams::new(strategy))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

pub const DEFAULT_STRATEGY: &str = "temp:1";
pub const DEFAULT_LENGTH: usize = 50;

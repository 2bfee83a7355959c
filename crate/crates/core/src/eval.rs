//! Perplexity, constraint error rate and the with/without-filter experiment.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::catalog::{TokenCatalog, TokenId};
use crate::decoder::{DecodeError, SamplingParams, Session};
use crate::filter::{CompositeFilter, FilterError, FilterSpec};
use crate::lm::{LanguageModel, LmError};
use crate::scalar::Scalar;

/// Default number of generated tokens behind each error-rate figure.
pub const DEFAULT_GENERATION_LENGTH: usize = 2000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("text is empty")]
    EmptyText,
    #[error("token at position {0} is banned by the filter, so masked perplexity is undefined")]
    MaskedTruthToken(usize),
    #[error("experiment has no cells")]
    NoCells,
    #[error(transparent)]
    Model(#[from] LmError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// `exp` of the mean negative log-probability of each token given its
/// prefix. With a filter, each step's distribution is masked and
/// renormalized first.
pub fn perplexity<T: Scalar>(
    model: &dyn LanguageModel<T>,
    catalog: &TokenCatalog,
    filter: Option<&CompositeFilter>,
    text: &[TokenId],
) -> Result<f64, EvalError> {
    if text.is_empty() {
        return Err(EvalError::EmptyText);
    }
    // Context-free filters give the same mask at every step.
    let fixed = filter
        .filter(|f| !f.is_context_dependent())
        .map(|f| f.apply(catalog, &Default::default()));
    let mut nll = 0.0f64;
    for (i, &truth) in text.iter().enumerate() {
        let prefix = &text[..i];
        let dist = model.next_distribution(prefix)?;
        let p = dist.prob(truth).to_f64_lossy();
        let p = match filter {
            None => p,
            Some(f) => {
                let owned;
                let allowed = match &fixed {
                    Some(a) => a,
                    None => {
                        owned = f.apply(catalog, &f.context_for(catalog, prefix));
                        &owned
                    }
                };
                if !allowed.contains(truth) {
                    return Err(EvalError::MaskedTruthToken(i));
                }
                p / dist.mass(allowed).to_f64_lossy()
            }
        };
        nll -= p.ln();
    }
    Ok((nll / text.len() as f64).exp())
}

/// Percentage of `tokens` failing `filter`; 0 for an empty sequence.
pub fn constraint_error_rate(tokens: &[TokenId], filter: &CompositeFilter, catalog: &TokenCatalog) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let failures = tokens
        .iter()
        .enumerate()
        .filter(|&(i, &id)| {
            let ctx = filter.context_for(catalog, &tokens[..i]);
            !filter.passes(catalog.features(id), &ctx)
        })
        .count();
    100.0 * failures as f64 / tokens.len() as f64
}

/// One model under evaluation.
pub struct ModelCell<T: Scalar> {
    pub label: String,
    pub model: Arc<dyn LanguageModel<T>>,
}

/// Every model, with and without the constraint.
pub struct ExperimentConfig<T: Scalar> {
    pub catalog: Arc<TokenCatalog>,
    pub models: Vec<ModelCell<T>>,
    pub constraint: Vec<FilterSpec>,
    /// Filter-compliant held-out text.
    pub test: Vec<TokenId>,
    pub generation_length: usize,
    pub sampling: SamplingParams,
    pub seed: u64,
    pub corpus_checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub label: String,
    pub perplexity: f64,
    pub ignored_error_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// Tab-separated rows after `#` metadata lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str("label\tperplexity\tignored_error_pct\n");
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{:.4}\t{:.4}", r.label, r.perplexity, r.ignored_error_pct);
        }
        out
    }

    pub fn row(&self, label: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// Runs every (model, with/without constraint) cell: perplexity on the test
/// text and the error rate of a fresh generation, both judged against the
/// constraint. Rows are ordered by label.
pub fn run_experiment<T: Scalar>(config: &ExperimentConfig<T>) -> Result<EvalReport, EvalError> {
    if config.models.is_empty() {
        return Err(EvalError::NoCells);
    }
    let catalog = &config.catalog;
    let constraint = CompositeFilter::compose(&config.constraint, catalog)?;
    let mut rows = Vec::new();
    for cell in &config.models {
        for filtered in [false, true] {
            let ppl = perplexity(cell.model.as_ref(), catalog, filtered.then_some(&constraint), &config.test)?;
            let specs = if filtered { config.constraint.clone() } else { Vec::new() };
            let mut session = Session::new(Arc::clone(catalog), Arc::clone(&cell.model), specs, config.sampling, config.seed)?;
            let generated = session.generate(config.generation_length, 0)?;
            rows.push(EvalRow {
                label: format!("{}/{}", cell.label, if filtered { "with_filter" } else { "without_filter" }),
                perplexity: ppl,
                ignored_error_pct: constraint_error_rate(&generated, &constraint, catalog),
            });
        }
    }
    rows.sort_by(|a, b| a.label.cmp(&b.label));
    let describe = config.models.iter().map(|m| format!("{}={}", m.label, m.model.describe())).collect::<Vec<_>>();
    let metadata = vec![
        ("corpus_checksum".to_string(), config.corpus_checksum.clone()),
        ("models".to_string(), describe.join("; ")),
        ("filter".to_string(), constraint.describe()),
        ("strategy".to_string(), config.sampling.strategy.to_string()),
        ("generation_length".to_string(), config.generation_length.to_string()),
        ("test_tokens".to_string(), config.test.len().to_string()),
        ("seed".to_string(), config.seed.to_string()),
    ];
    Ok(EvalReport { metadata, rows })
}

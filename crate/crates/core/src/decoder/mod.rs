//! Constrained decoding: mask, renormalize, choose.

mod sampling;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::catalog::{TokenCatalog, TokenId};
use crate::filter::{AllowedSet, CompiledSpec, CompositeFilter, FilterError, FilterSpec, GenerationContext};
use crate::lm::{Distribution, LanguageModel, LmError};
use crate::scalar::Scalar;

pub use sampling::{SamplingParams, Strategy, StrategyError};

/// Number of unfiltered tokens explained in a dead-end report.
pub const DIAGNOSTIC_TOKENS: usize = 10;

/// One of the top unfiltered tokens at a dead end and why it was rejected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub token: TokenId,
    pub surface: String,
    pub probability: f64,
    /// Canonical text of the first rejecting spec, or `backtrack` for a
    /// token banned at this position by backtracking.
    pub rejected_by: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeadEndReport {
    /// Context length at the failing step.
    pub position: usize,
    pub allowed_count: usize,
    pub top_rejections: Vec<Rejection>,
    /// Tokens produced by the failing `generate` call before the dead end.
    pub partial: Vec<TokenId>,
}

impl fmt::Display for DeadEndReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dead end at position {}: no token passes the filters", self.position)?;
        for r in &self.top_rejections {
            write!(f, "\n  {:<16} p={:.6} rejected by {}", r.surface, r.probability, r.rejected_by)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("{0}")]
    DeadEnd(Box<DeadEndReport>),
    #[error("allowed tokens carry zero probability at position {position}")]
    ZeroMass { position: usize },
    #[error("token {token} is not allowed: rejected by {rejected_by}")]
    TokenNotAllowed { token: TokenId, rejected_by: String },
    #[error("token id {0} is not in the catalog")]
    UnknownToken(TokenId),
    #[error("cannot undo {requested} steps, only {available} recorded")]
    UndoPastBeginning { requested: usize, available: usize },
    #[error("model vocabulary ({model}) does not match catalog size ({catalog})")]
    VocabularyMismatch { model: usize, catalog: usize },
    #[error("list size must be at least 1")]
    InvalidCount,
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Model(#[from] LmError),
}

/// Outcome of one constrained step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<T> {
    pub chosen: TokenId,
    pub renormalized_prob: T,
    pub alternatives: Vec<(TokenId, T)>,
    pub allowed_count: usize,
}

/// Ranked continuations at the current position.
#[derive(Debug, Clone, PartialEq)]
pub struct Continuations<T> {
    pub entries: Vec<(TokenId, T)>,
    pub allowed_count: usize,
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub token: TokenId,
    /// Accepted by the user past the filter.
    pub forced: bool,
    /// Chosen by the decoder rather than accepted explicitly.
    pub generated: bool,
    /// Filter active when the token was placed.
    pub filter: Arc<CompositeFilter>,
    pub context: GenerationContext,
    rng_before: ChaCha8Rng,
}

/// Generation state over one catalog and model.
pub struct Session<T: Scalar> {
    catalog: Arc<TokenCatalog>,
    model: Arc<dyn LanguageModel<T>>,
    specs: Vec<FilterSpec>,
    filter: Arc<CompositeFilter>,
    context: Vec<TokenId>,
    history: Vec<StepRecord>,
    sampling: SamplingParams,
    seed: u64,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Clone for Session<T> {
    fn clone(&self) -> Self {
        Session {
            catalog: Arc::clone(&self.catalog),
            model: Arc::clone(&self.model),
            specs: self.specs.clone(),
            filter: Arc::clone(&self.filter),
            context: self.context.clone(),
            history: self.history.clone(),
            sampling: self.sampling,
            seed: self.seed,
            rng: self.rng.clone(),
        }
    }
}

impl<T: Scalar> fmt::Debug for Session<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("model", &self.model.describe())
            .field("filters", &self.filter.describe())
            .field("context", &self.context)
            .field("sampling", &self.sampling)
            .field("seed", &self.seed)
            .finish()
    }
}

/// Composes `specs`, adding `word_start_only` for subword catalogs.
pub fn compose_for_session(specs: &[FilterSpec], catalog: &TokenCatalog) -> Result<CompositeFilter, FilterError> {
    let mut filter = CompositeFilter::compose(specs, catalog)?;
    if catalog.scheme().is_subword() && !specs.contains(&FilterSpec::WordStartOnly) {
        filter.push(CompiledSpec::compile(&FilterSpec::WordStartOnly, catalog)?);
    }
    Ok(filter)
}

impl<T: Scalar> Session<T> {
    pub fn new(
        catalog: Arc<TokenCatalog>,
        model: Arc<dyn LanguageModel<T>>,
        specs: Vec<FilterSpec>,
        sampling: SamplingParams,
        seed: u64,
    ) -> Result<Self, DecodeError> {
        if model.vocab_size() != catalog.size() {
            return Err(DecodeError::VocabularyMismatch { model: model.vocab_size(), catalog: catalog.size() });
        }
        sampling.strategy.validate()?;
        let filter = Arc::new(compose_for_session(&specs, &catalog)?);
        Ok(Session {
            catalog,
            model,
            specs,
            filter,
            context: Vec::new(),
            history: Vec::new(),
            sampling,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn catalog(&self) -> &Arc<TokenCatalog> {
        &self.catalog
    }

    pub fn model(&self) -> &Arc<dyn LanguageModel<T>> {
        &self.model
    }

    pub fn specs(&self) -> &[FilterSpec] {
        &self.specs
    }

    pub fn filter(&self) -> &CompositeFilter {
        &self.filter
    }

    pub fn context(&self) -> &[TokenId] {
        &self.context
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn sampling(&self) -> SamplingParams {
        self.sampling
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn text(&self) -> String {
        self.catalog.render(&self.context)
    }

    /// Replaces the filters from the next step on; the context is kept.
    pub fn set_filters(&mut self, specs: Vec<FilterSpec>) -> Result<(), FilterError> {
        self.filter = Arc::new(compose_for_session(&specs, &self.catalog)?);
        self.specs = specs;
        Ok(())
    }

    pub fn generation_context(&self) -> GenerationContext {
        self.filter.context_for(&self.catalog, &self.context)
    }

    /// Allowed tokens at the current position.
    pub fn allowed(&self) -> AllowedSet {
        self.filter.apply(&self.catalog, &self.generation_context())
    }

    fn allowed_without(&self, banned: Option<&HashSet<TokenId>>) -> (GenerationContext, AllowedSet) {
        let ctx = self.generation_context();
        let mut allowed = self.filter.apply(&self.catalog, &ctx);
        for &id in banned.into_iter().flatten() {
            allowed.remove(id);
        }
        (ctx, allowed)
    }

    fn dead_end(&self, ctx: &GenerationContext, banned: Option<&HashSet<TokenId>>) -> DecodeError {
        let mut top_rejections = Vec::new();
        if let Ok(dist) = self.model.next_distribution(&self.context) {
            for (id, p) in dist.top(DIAGNOSTIC_TOKENS) {
                let features = self.catalog.features(id);
                let rejected_by = match self.filter.first_rejection(features, ctx) {
                    Some(spec) => spec.to_string(),
                    None if banned.is_some_and(|b| b.contains(&id)) => "backtrack".to_string(),
                    None => "none".to_string(),
                };
                top_rejections.push(Rejection {
                    token: id,
                    surface: features.surface.clone(),
                    probability: p.to_f64_lossy(),
                    rejected_by,
                });
            }
        }
        DecodeError::DeadEnd(Box::new(DeadEndReport {
            position: self.context.len(),
            allowed_count: 0,
            top_rejections,
            partial: Vec::new(),
        }))
    }

    fn masked(&self, banned: Option<&HashSet<TokenId>>) -> Result<(GenerationContext, Distribution<T>, usize), DecodeError> {
        let (ctx, allowed) = self.allowed_without(banned);
        if allowed.is_empty() {
            return Err(self.dead_end(&ctx, banned));
        }
        let dist = self.model.next_distribution(&self.context)?;
        let masked = dist.masked(&allowed).ok_or(DecodeError::ZeroMass { position: self.context.len() })?;
        Ok((ctx, masked, allowed.count()))
    }

    /// Top `m` continuations of the masked, renormalized distribution.
    pub fn list_continuations(&self, m: usize) -> Result<Continuations<T>, DecodeError> {
        if m == 0 {
            return Err(DecodeError::InvalidCount);
        }
        let (ctx, allowed) = self.allowed_without(None);
        if allowed.is_empty() {
            return Err(self.dead_end(&ctx, None));
        }
        let dist = self.model.next_distribution(&self.context)?;
        let masked = dist.masked(&allowed).ok_or(DecodeError::ZeroMass { position: self.context.len() })?;
        Ok(Continuations { entries: masked.top_within(&allowed, m), allowed_count: allowed.count() })
    }

    /// Chooses and appends one token.
    pub fn constrained_step(&mut self) -> Result<StepResult<T>, DecodeError> {
        self.step_with_bans(None)
    }

    fn step_with_bans(&mut self, banned: Option<&HashSet<TokenId>>) -> Result<StepResult<T>, DecodeError> {
        let (ctx, masked, allowed_count) = self.masked(banned)?;
        let rng_before = self.rng.clone();
        let chosen = self
            .sampling
            .strategy
            .pick(&masked, &mut self.rng)
            .ok_or(DecodeError::ZeroMass { position: self.context.len() })?;
        let alternatives = masked.top(self.sampling.alternatives);
        self.history.push(StepRecord {
            token: chosen,
            forced: false,
            generated: true,
            filter: Arc::clone(&self.filter),
            context: ctx,
            rng_before,
        });
        self.context.push(chosen);
        Ok(StepResult { chosen, renormalized_prob: masked.prob(chosen), alternatives, allowed_count })
    }

    /// Appends a token chosen by the caller. Unless `user_forced`, the token
    /// must pass the current filters.
    pub fn accept_token(&mut self, id: TokenId, user_forced: bool) -> Result<(), DecodeError> {
        let features = self.catalog.features_of(id).map_err(|_| DecodeError::UnknownToken(id))?;
        let ctx = self.generation_context();
        let rejection = self.filter.first_rejection(features, &ctx);
        if let (Some(spec), false) = (rejection, user_forced) {
            return Err(DecodeError::TokenNotAllowed { token: id, rejected_by: spec.to_string() });
        }
        self.history.push(StepRecord {
            token: id,
            forced: user_forced,
            generated: false,
            filter: Arc::clone(&self.filter),
            context: ctx,
            rng_before: self.rng.clone(),
        });
        self.context.push(id);
        Ok(())
    }

    /// Removes the last `steps` tokens and restores the random state from
    /// before the earliest of them.
    pub fn undo(&mut self, steps: usize) -> Result<(), DecodeError> {
        if steps > self.history.len() {
            return Err(DecodeError::UndoPastBeginning { requested: steps, available: self.history.len() });
        }
        if steps == 0 {
            return Ok(());
        }
        let keep = self.history.len() - steps;
        self.rng = self.history[keep].rng_before.clone();
        self.history.truncate(keep);
        self.context.truncate(keep);
        Ok(())
    }

    /// Runs up to `n` constrained steps. On a dead end with budget left,
    /// removes the last generated token, bans it at that position and
    /// retries; each retry costs one unit of `backtrack_budget`.
    pub fn generate(&mut self, n: usize, backtrack_budget: usize) -> Result<Vec<TokenId>, DecodeError> {
        let start = self.context.len();
        let mut budget = backtrack_budget;
        let mut bans: HashMap<usize, HashSet<TokenId>> = HashMap::new();
        while self.context.len() - start < n {
            let pos = self.context.len();
            match self.step_with_bans(bans.get(&pos)) {
                Ok(_) => {}
                Err(DecodeError::DeadEnd(mut report)) => {
                    if budget > 0 && pos > start {
                        budget -= 1;
                        let last = self.context[pos - 1];
                        self.undo(1)?;
                        bans.retain(|&p, _| p < pos);
                        bans.entry(pos - 1).or_default().insert(last);
                        continue;
                    }
                    report.partial = self.context[start..].to_vec();
                    return Err(DecodeError::DeadEnd(report));
                }
                Err(e) => return Err(e),
            }
        }
        Ok(self.context[start..].to_vec())
    }

    /// Positions of non-forced tokens that fail the filter recorded with
    /// them. Always empty for sessions driven through this API.
    pub fn audit(&self) -> Vec<usize> {
        self.history
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.forced && !r.filter.passes(self.catalog.features(r.token), &r.context))
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::parse_filters;
    use crate::lm::UniformModel;
    use crate::phonetics::parse_cmudict;

    struct Fixed(Vec<f64>);

    impl LanguageModel<f64> for Fixed {
        fn vocab_size(&self) -> usize {
            self.0.len()
        }
        fn next_distribution(&self, _: &[TokenId]) -> Result<Distribution<f64>, LmError> {
            Ok(Distribution::new(self.0.clone())?)
        }
        fn describe(&self) -> String {
            "fixed".into()
        }
    }

    fn session(tokens: &[&str], model: Arc<dyn LanguageModel<f64>>, filters: &[&str]) -> Session<f64> {
        let catalog = Arc::new(TokenCatalog::builder(tokens.iter().copied()).build().unwrap());
        Session::new(catalog, model, parse_filters(filters).unwrap(), SamplingParams::default(), 0).unwrap()
    }

    #[test]
    fn greedy_step_renormalizes() {
        let mut s = session(&["a", "b", "c"], Arc::new(Fixed(vec![0.5, 0.3, 0.2])), &["banned_words=c"]);
        let r = s.constrained_step().unwrap();
        assert_eq!(r.chosen, TokenId(0));
        assert!((r.renormalized_prob - 0.625).abs() < 1e-12);
        assert_eq!(r.allowed_count, 2);
        assert_eq!(r.alternatives.len(), 2);
        assert!((r.alternatives[1].1 - 0.375).abs() < 1e-12);
        let c = s.list_continuations(2).unwrap();
        assert_eq!(c.entries.iter().map(|e| e.0).collect::<Vec<_>>(), [TokenId(0), TokenId(1)]);
        assert!((c.entries[0].1 - 0.625).abs() < 1e-12 && (c.entries[1].1 - 0.375).abs() < 1e-12);
    }

    #[test]
    fn all_banned_is_a_dead_end() {
        let mut s = session(&["the", "then"], Arc::new(UniformModel::new(2)), &["ban_letters=e"]);
        match s.generate(1, 0) {
            Err(DecodeError::DeadEnd(r)) => {
                assert_eq!(r.allowed_count, 0);
                assert!(r.partial.is_empty());
                assert_eq!(r.top_rejections.len(), 2);
                assert_eq!(r.top_rejections[0].rejected_by, "ban_letters=e");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn uniform_continuations() {
        let s = session(&["a", "b", "c", "d"], Arc::new(UniformModel::new(4)), &[]);
        let c = s.list_continuations(4).unwrap();
        assert_eq!(c.entries.len(), 4);
        assert!(c.entries.iter().all(|e| e.1 == 0.25));
        assert_eq!(s.list_continuations(9).unwrap().entries.len(), 4);
    }

    #[test]
    fn accept_guard_and_force() {
        let mut s = session(&["cat", "the"], Arc::new(UniformModel::new(2)), &["ban_letters=e"]);
        s.accept_token(TokenId(0), false).unwrap();
        assert!(matches!(s.accept_token(TokenId(1), false), Err(DecodeError::TokenNotAllowed { .. })));
        s.accept_token(TokenId(1), true).unwrap();
        assert!(s.history()[1].forced);
        assert_eq!(s.context().len(), 2);
        assert!(s.audit().is_empty());
        assert!(matches!(s.undo(3), Err(DecodeError::UndoPastBeginning { .. })));
        s.undo(2).unwrap();
        assert!(s.context().is_empty());
    }

    #[test]
    fn undo_restores_randomness() {
        let catalog = Arc::new(TokenCatalog::builder(["a", "b", "c", "d"]).build().unwrap());
        let mut s: Session<f64> = Session::new(
            catalog,
            Arc::new(UniformModel::new(4)),
            vec![],
            SamplingParams::new(Strategy::Temperature(1.0)),
            42,
        )
        .unwrap();
        let first = s.generate(5, 0).unwrap();
        s.undo(5).unwrap();
        assert_eq!(s.generate(5, 0).unwrap(), first);
    }

    #[test]
    fn backtracking_recovers_from_a_dead_end() {
        let lex = parse_cmudict(&b"POTENTIAL  P AH0 T EH1 N SH AH0 L\nAWAY  AH0 W EY1\n"[..]).unwrap();
        let catalog = Arc::new(TokenCatalog::builder(["potential", "away"]).lexicon(Arc::new(lex)).build().unwrap());
        let model: Arc<dyn LanguageModel<f64>> = Arc::new(Fixed(vec![0.9, 0.1]));
        let specs = parse_filters(["meter=0101;mode=line"]).unwrap();
        let mut s = Session::new(Arc::clone(&catalog), Arc::clone(&model), specs.clone(), SamplingParams::default(), 0).unwrap();
        assert!(matches!(s.generate(2, 0), Err(DecodeError::DeadEnd(r)) if r.partial == vec![TokenId(0)]));
        let mut s = Session::new(catalog, model, specs, SamplingParams::default(), 0).unwrap();
        assert_eq!(s.generate(2, 2).unwrap(), vec![TokenId(1), TokenId(1)]);
        assert!(s.audit().is_empty());
    }

    #[test]
    fn subword_catalogs_only_start_words() {
        let catalog = Arc::new(
            TokenCatalog::builder(["▁cat", "s", "▁dog"])
                .scheme(crate::catalog::TokenizationScheme::space_prefix("▁"))
                .build()
                .unwrap(),
        );
        let s: Session<f64> = Session::new(catalog, Arc::new(UniformModel::new(3)), vec![], SamplingParams::default(), 0).unwrap();
        assert_eq!(s.allowed().count(), 2);
        assert!(!s.allowed().contains(TokenId(1)));
    }
}

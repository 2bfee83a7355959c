//! Next-token distributions over a catalog.

mod ngram;
mod provider;

use std::fmt;

use thiserror::Error;

use crate::catalog::TokenId;
use crate::filter::AllowedSet;
use crate::scalar::Scalar;

pub use ngram::{train_ngram, ModelFile, NGramModel};
pub use provider::{serve_provider, spawn_provider, ProviderHandle};

#[derive(Debug, Error)]
pub enum LmError {
    #[error("corpus has {len} tokens, fewer than the model order {order}")]
    CorpusTooShort { len: usize, order: usize },
    #[error("smoothing constant must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
    #[error("model order must be at least 1")]
    InvalidOrder,
    #[error("token id {id} outside vocabulary of size {vocab_size}")]
    InvalidToken { id: u32, vocab_size: usize },
    #[error("provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("provider serves catalog {found}, expected {expected}")]
    CatalogMismatch { expected: String, found: String },
    #[error("malformed distribution: {0}")]
    MalformedDistribution(#[from] DistributionError),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("distribution is empty")]
    Empty,
    #[error("expected {expected} entries, got {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("entry {index} is negative or not finite")]
    InvalidEntry { index: usize },
    #[error("entries sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("could not parse {0:?} as a log-probability")]
    Unparsable(String),
}

/// Source of next-token distributions.
pub trait LanguageModel<T: Scalar>: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Distribution for the token following `context`.
    fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution<T>, LmError>;

    /// Short human-readable description for reports.
    fn describe(&self) -> String;
}

/// Probability vector indexed by token id; non-negative and normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    probs: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    /// Validates an already normalized vector.
    pub fn new(probs: Vec<T>) -> Result<Self, DistributionError> {
        let sum = check_entries(&probs)?;
        if (sum - T::one()).abs() > T::normalization_tolerance(probs.len()) {
            return Err(DistributionError::NotNormalized { sum: sum.to_f64_lossy() });
        }
        Ok(Distribution { probs })
    }

    /// Scales non-negative weights to sum to one.
    pub fn from_weights(weights: Vec<T>) -> Result<Self, DistributionError> {
        let sum = check_entries(&weights)?;
        if sum <= T::zero() {
            return Err(DistributionError::NotNormalized { sum: 0.0 });
        }
        Ok(Distribution { probs: weights.into_iter().map(|w| w / sum).collect() })
    }

    /// Accepts natural-log probabilities whose exponentials sum to one
    /// within `tolerance`, then renormalizes exactly.
    pub fn from_log_probs(logprobs: &[T], tolerance: f64) -> Result<Self, DistributionError> {
        if logprobs.is_empty() {
            return Err(DistributionError::Empty);
        }
        let mut probs = Vec::with_capacity(logprobs.len());
        for (index, &lp) in logprobs.iter().enumerate() {
            if lp.is_nan() || lp > T::zero() && lp.is_infinite() {
                return Err(DistributionError::InvalidEntry { index });
            }
            probs.push(lp.exp());
        }
        let sum: T = probs.iter().copied().sum();
        if (sum.to_f64_lossy() - 1.0).abs() > tolerance {
            return Err(DistributionError::NotNormalized { sum: sum.to_f64_lossy() });
        }
        Distribution::from_weights(probs)
    }

    pub fn uniform(n: usize) -> Result<Self, DistributionError> {
        if n == 0 {
            return Err(DistributionError::Empty);
        }
        Ok(Distribution { probs: vec![T::one() / T::of(n as f64); n] })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, id: TokenId) -> T {
        self.probs[id.index()]
    }

    pub fn log_prob(&self, id: TokenId) -> T {
        self.probs[id.index()].ln()
    }

    pub fn log_probs(&self) -> Vec<T> {
        self.probs.iter().map(|p| p.ln()).collect()
    }

    /// Probability mass on `allowed`.
    pub fn mass(&self, allowed: &AllowedSet) -> T {
        allowed.iter().map(|id| self.probs[id.index()]).sum()
    }

    /// Zeroes tokens outside `allowed` and renormalizes the rest. `None`
    /// when the surviving mass is zero.
    pub fn masked(&self, allowed: &AllowedSet) -> Option<Distribution<T>> {
        assert_eq!(allowed.universe(), self.probs.len(), "mask and distribution sizes differ");
        let mass = self.mass(allowed);
        if mass <= T::zero() {
            return None;
        }
        let mut probs = vec![T::zero(); self.probs.len()];
        for id in allowed.iter() {
            probs[id.index()] = self.probs[id.index()] / mass;
        }
        Some(Distribution { probs })
    }

    /// Top `m` tokens among those with positive probability, by probability
    /// descending then id ascending.
    pub fn top(&self, m: usize) -> Vec<(TokenId, T)> {
        let entries: Vec<(TokenId, T)> = self
            .probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > T::zero())
            .map(|(i, &p)| (TokenId::from(i), p))
            .collect();
        top_ranked(entries, m)
    }

    /// Top `m` tokens of `allowed`, including zero-probability ones.
    pub fn top_within(&self, allowed: &AllowedSet, m: usize) -> Vec<(TokenId, T)> {
        top_ranked(allowed.iter().map(|id| (id, self.probs[id.index()])).collect(), m)
    }
}

fn check_entries<T: Scalar>(values: &[T]) -> Result<T, DistributionError> {
    if values.is_empty() {
        return Err(DistributionError::Empty);
    }
    if let Some(index) = values.iter().position(|p| !p.is_finite() || *p < T::zero()) {
        return Err(DistributionError::InvalidEntry { index });
    }
    Ok(values.iter().copied().sum())
}

/// Ranking order used everywhere: probability descending, then id ascending.
pub fn rank_cmp<T: Scalar>(a: &(TokenId, T), b: &(TokenId, T)) -> std::cmp::Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
}

/// Sorts by [`rank_cmp`] and keeps the first `m`.
pub fn top_ranked<T: Scalar>(mut entries: Vec<(TokenId, T)>, m: usize) -> Vec<(TokenId, T)> {
    if m == 0 {
        return Vec::new();
    }
    if m < entries.len() {
        entries.select_nth_unstable_by(m - 1, rank_cmp);
        entries.truncate(m);
    }
    entries.sort_by(rank_cmp);
    entries
}

/// Same distribution regardless of context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformModel {
    vocab_size: usize,
}

impl UniformModel {
    pub fn new(vocab_size: usize) -> Self {
        UniformModel { vocab_size }
    }
}

impl<T: Scalar> LanguageModel<T> for UniformModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution<T>, LmError> {
        check_context(context, self.vocab_size)?;
        Ok(Distribution::uniform(self.vocab_size)?)
    }

    fn describe(&self) -> String {
        format!("uniform over {} tokens", self.vocab_size)
    }
}

pub(crate) fn check_context(context: &[TokenId], vocab_size: usize) -> Result<(), LmError> {
    match context.iter().find(|id| id.index() >= vocab_size) {
        Some(id) => Err(LmError::InvalidToken { id: id.0, vocab_size }),
        None => Ok(()),
    }
}

impl fmt::Display for UniformModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "uniform({})", self.vocab_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_quarter() {
        let d: Distribution<f64> = UniformModel::new(4).next_distribution(&[]).unwrap();
        assert!(d.probs().iter().all(|&p| p == 0.25));
        assert!(LanguageModel::<f64>::next_distribution(&UniformModel::new(4), &[TokenId(9)]).is_err());
    }

    #[test]
    fn masking_renormalizes() {
        let d = Distribution::new(vec![0.5f64, 0.3, 0.2]).unwrap();
        let allowed = AllowedSet::from_fn(3, |i| i != 2);
        let m = d.masked(&allowed).unwrap();
        assert!((m.probs()[0] - 0.625).abs() < 1e-12);
        assert!((m.probs()[1] - 0.375).abs() < 1e-12);
        assert_eq!(m.probs()[2], 0.0);
        assert!(d.masked(&AllowedSet::empty(3)).is_none());
    }

    #[test]
    fn validation() {
        assert!(matches!(Distribution::new(vec![0.5f64, 0.4]), Err(DistributionError::NotNormalized { .. })));
        assert!(matches!(Distribution::new(vec![1.5f64, -0.5]), Err(DistributionError::InvalidEntry { index: 1 })));
        assert!(Distribution::<f64>::new(vec![]).is_err());
        let lp = [0.5f64.ln(), 0.50005f64.ln()];
        let d = Distribution::from_log_probs(&lp, 1e-4).unwrap();
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(Distribution::from_log_probs(&[0.5f64.ln(), 0.6f64.ln()], 1e-4).is_err());
        let d = Distribution::from_log_probs(&[0.0f64, f64::NEG_INFINITY], 1e-4).unwrap();
        assert_eq!(d.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn ranking_breaks_ties_by_id() {
        let d = Distribution::new(vec![0.25f32, 0.25, 0.5]).unwrap();
        let top = d.top(3);
        assert_eq!(top.iter().map(|e| e.0 .0).collect::<Vec<_>>(), [2, 0, 1]);
        assert_eq!(d.top(1).len(), 1);
    }
}

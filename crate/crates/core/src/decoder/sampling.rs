use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::TokenId;
use crate::lm::{rank_cmp, Distribution};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid strategy {input:?}: {reason}")]
pub struct StrategyError {
    pub input: String,
    pub reason: String,
}

/// Token selection rule, applied to an already masked distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Greedy,
    Temperature(f64),
    TopK(usize),
    TopP(f64),
}

impl Strategy {
    pub fn validate(self) -> Result<Self, StrategyError> {
        let fail = |reason: &str| Err(StrategyError { input: self.to_string(), reason: reason.into() });
        match self {
            Strategy::Temperature(t) if !(t > 0.0 && t.is_finite()) => fail("temperature must be positive"),
            Strategy::TopK(0) => fail("k must be at least 1"),
            Strategy::TopP(p) if !(p > 0.0 && p <= 1.0) => fail("p must be in (0, 1]"),
            _ => Ok(self),
        }
    }

    /// The tokens this strategy may pick and their sampling probabilities,
    /// in rank order. Greedy yields the single top token.
    pub fn candidates<T: Scalar>(self, dist: &Distribution<T>) -> Vec<(TokenId, T)> {
        let support = || dist.top(dist.len());
        match self {
            Strategy::Greedy => dist.top(1).into_iter().map(|(id, _)| (id, T::one())).collect(),
            Strategy::Temperature(t) => {
                let ranked = support();
                let Some(&(_, pmax)) = ranked.first() else { return ranked };
                let inv_t = T::of(1.0 / t);
                let lmax = pmax.ln();
                let weights: Vec<T> = ranked.iter().map(|&(_, p)| ((p.ln() - lmax) * inv_t).exp()).collect();
                normalize(ranked.iter().map(|e| e.0).zip(weights).collect())
            }
            Strategy::TopK(k) => normalize(dist.top(k)),
            Strategy::TopP(p) => {
                let ranked = support();
                let target = T::of(p);
                let mut cum = T::zero();
                let mut keep = 0;
                for &(_, q) in &ranked {
                    keep += 1;
                    cum = cum + q;
                    if cum >= target {
                        break;
                    }
                }
                normalize(ranked.into_iter().take(keep.max(1)).collect())
            }
        }
    }

    /// Picks one token using `rng`. Greedy consumes no randomness.
    pub fn pick<T: Scalar, R: Rng + ?Sized>(self, dist: &Distribution<T>, rng: &mut R) -> Option<TokenId> {
        if let Strategy::Greedy = self {
            return dist.top(1).first().map(|e| e.0);
        }
        let candidates = self.candidates(dist);
        let u = T::of(rng.gen::<f64>());
        let mut cum = T::zero();
        for &(id, q) in &candidates {
            cum = cum + q;
            if u < cum {
                return Some(id);
            }
        }
        // Rounding left the cumulative sum just under u.
        candidates.iter().rev().find(|e| e.1 > T::zero()).map(|e| e.0)
    }
}

fn normalize<T: Scalar>(mut entries: Vec<(TokenId, T)>) -> Vec<(TokenId, T)> {
    let sum: T = entries.iter().map(|e| e.1).sum();
    if sum > T::zero() {
        for e in &mut entries {
            e.1 = e.1 / sum;
        }
    }
    entries.sort_by(rank_cmp);
    entries
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Greedy => f.write_str("greedy"),
            Strategy::Temperature(t) => write!(f, "temp:{t}"),
            Strategy::TopK(k) => write!(f, "topk:{k}"),
            Strategy::TopP(p) => write!(f, "topp:{p}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = StrategyError;

    /// `greedy`, `temp:T`, `topk:K` or `topp:P`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| StrategyError { input: s.to_string(), reason: reason.into() };
        let s = s.trim();
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let strategy = match name {
            "greedy" if arg.is_empty() => Strategy::Greedy,
            "temp" => Strategy::Temperature(arg.parse().map_err(|_| err("expected temp:T"))?),
            "topk" => Strategy::TopK(arg.parse().map_err(|_| err("expected topk:K"))?),
            "topp" => Strategy::TopP(arg.parse().map_err(|_| err("expected topp:P"))?),
            _ => return Err(err("expected greedy, temp:T, topk:K or topp:P")),
        };
        strategy.validate().map_err(|e| StrategyError { input: s.to_string(), reason: e.reason })
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Sampling configuration for a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub strategy: Strategy,
    /// Ranked alternatives reported with each step.
    pub alternatives: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams { strategy: Strategy::Greedy, alternatives: 10 }
    }
}

impl SamplingParams {
    pub fn new(strategy: Strategy) -> Self {
        SamplingParams { strategy, ..Default::default() }
    }
}

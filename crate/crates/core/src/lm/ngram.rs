use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{check_context, Distribution, LanguageModel, LmError};
use crate::catalog::TokenId;
use crate::scalar::Scalar;

/// Successor counts for one context.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Successors {
    total: u64,
    counts: BTreeMap<u32, u64>,
}

/// Word-level n-gram model with add-k smoothing. An unseen context backs
/// off to its longest seen suffix; the empty context is always seen.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    k: f64,
    vocab_size: usize,
    checksum: String,
    contexts: BTreeMap<Vec<u32>, Successors>,
}

/// Counts every window of every length `1..=order`: each corpus position
/// contributes one successor count to each of its contexts of length
/// `0..order`.
pub fn train_ngram(
    corpus: &[TokenId],
    order: usize,
    k: f64,
    vocab_size: usize,
    checksum: impl Into<String>,
) -> Result<NGramModel, LmError> {
    if order == 0 {
        return Err(LmError::InvalidOrder);
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(LmError::InvalidSmoothing(k));
    }
    if corpus.len() < order || corpus.is_empty() {
        return Err(LmError::CorpusTooShort { len: corpus.len(), order });
    }
    check_context(corpus, vocab_size)?;
    let mut contexts: BTreeMap<Vec<u32>, Successors> = BTreeMap::new();
    for i in 0..corpus.len() {
        let next = corpus[i].0;
        for len in 0..order.min(i + 1) {
            let ctx: Vec<u32> = corpus[i - len..i].iter().map(|t| t.0).collect();
            let entry = contexts.entry(ctx).or_default();
            entry.total += 1;
            *entry.counts.entry(next).or_default() += 1;
        }
    }
    Ok(NGramModel { order, k, vocab_size, checksum: checksum.into(), contexts })
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Checksum of the catalog the model was trained against.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// Longest suffix of `context` (at most `order - 1` tokens) that was
    /// observed in training.
    fn lookup(&self, context: &[TokenId]) -> &Successors {
        let max = (self.order - 1).min(context.len());
        for len in (0..=max).rev() {
            let key: Vec<u32> = context[context.len() - len..].iter().map(|t| t.0).collect();
            if let Some(s) = self.contexts.get(&key) {
                return s;
            }
        }
        unreachable!("the empty context is always present after training")
    }

    /// Length of the suffix actually used for `context`.
    pub fn backoff_len(&self, context: &[TokenId]) -> usize {
        let max = (self.order - 1).min(context.len());
        (0..=max)
            .rev()
            .find(|&len| {
                let key: Vec<u32> = context[context.len() - len..].iter().map(|t| t.0).collect();
                self.contexts.contains_key(&key)
            })
            .unwrap_or(0)
    }

    pub fn to_json(&self, tokens: &[String], specials: &[String]) -> Result<String, LmError> {
        let file = ModelFile { tokens: tokens.to_vec(), specials: specials.to_vec(), model: self.clone() };
        serde_json::to_string(&file).map_err(|e| LmError::Format(e.to_string()))
    }
}

impl<T: Scalar> LanguageModel<T> for NGramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution<T>, LmError> {
        check_context(context, self.vocab_size)?;
        let s = self.lookup(context);
        let denom = s.total as f64 + self.k * self.vocab_size as f64;
        let base = T::of(self.k / denom);
        let mut probs = vec![base; self.vocab_size];
        for (&id, &c) in &s.counts {
            probs[id as usize] = T::of((c as f64 + self.k) / denom);
        }
        Ok(Distribution::new(probs)?)
    }

    fn describe(&self) -> String {
        format!("{}-gram add-{} over {} tokens", self.order, self.k, self.vocab_size)
    }
}

/// Serialized model together with the vocabulary it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub tokens: Vec<String>,
    pub specials: Vec<String>,
    pub model: NGramModel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Repr {
    format: String,
    order: usize,
    k: f64,
    checksum: String,
    tokens: Vec<String>,
    specials: Vec<String>,
    contexts: Vec<ContextRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextRepr {
    context: Vec<u32>,
    successors: Vec<(u32, u64)>,
}

const FORMAT: &str = "ctgs-ngram-v1";

impl Serialize for ModelFile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        Repr {
            format: FORMAT.into(),
            order: self.model.order,
            k: self.model.k,
            checksum: self.model.checksum.clone(),
            tokens: self.tokens.clone(),
            specials: self.specials.clone(),
            contexts: self
                .model
                .contexts
                .iter()
                .map(|(ctx, s)| ContextRepr {
                    context: ctx.clone(),
                    successors: s.counts.iter().map(|(&a, &b)| (a, b)).collect(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ModelFile {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = Repr::deserialize(deserializer)?;
        if r.format != FORMAT {
            return Err(D::Error::custom(format!("unsupported model format {:?}", r.format)));
        }
        if r.order == 0 || !(r.k > 0.0 && r.k.is_finite()) {
            return Err(D::Error::custom("invalid order or smoothing constant"));
        }
        let vocab_size = r.tokens.len();
        let mut contexts = BTreeMap::new();
        for c in r.contexts {
            if c.context.len() >= r.order || c.context.iter().any(|&t| t as usize >= vocab_size) {
                return Err(D::Error::custom("context outside model order or vocabulary"));
            }
            let mut s = Successors::default();
            for (id, n) in c.successors {
                if id as usize >= vocab_size {
                    return Err(D::Error::custom(format!("successor id {id} outside vocabulary")));
                }
                s.total += n;
                s.counts.insert(id, n);
            }
            contexts.insert(c.context, s);
        }
        if !contexts.contains_key(&Vec::new()) {
            return Err(D::Error::custom("model has no unigram counts"));
        }
        Ok(ModelFile {
            tokens: r.tokens,
            specials: r.specials,
            model: NGramModel { order: r.order, k: r.k, vocab_size, checksum: r.checksum, contexts },
        })
    }
}

impl ModelFile {
    pub fn read<R: Read>(reader: R) -> Result<Self, LmError> {
        serde_json::from_reader(reader).map_err(|e| LmError::Format(e.to_string()))
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), LmError> {
        serde_json::to_writer(writer, self).map_err(|e| LmError::Format(e.to_string()))
    }
}

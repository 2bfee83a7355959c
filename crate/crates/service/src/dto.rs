//! Request and response bodies.

use ctgs_core::{TokenCatalog, TokenId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// Registered model label; the registry default when absent.
    pub model: Option<String>,
    #[serde(default)]
    pub filters: Vec<String>,
    pub preset: Option<String>,
    /// `greedy`, `temp:T`, `topk:K` or `topp:P`.
    pub strategy: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub alternatives: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    /// By id or by surface form; exactly one must be given.
    Accept {
        token_id: Option<TokenId>,
        token: Option<String>,
        #[serde(default)]
        forced: bool,
    },
    Generate {
        n: usize,
        #[serde(default)]
        backtrack: usize,
    },
    Undo {
        #[serde(default = "one")]
        steps: usize,
    },
    SetFilters {
        filters: Vec<String>,
        preset: Option<String>,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationsQuery {
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextToken {
    pub id: TokenId,
    pub token: String,
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionDescriptor {
    pub id: String,
    pub model: String,
    pub filters: Vec<String>,
    pub strategy: String,
    pub seed: u64,
    pub text: String,
    pub context: Vec<ContextToken>,
    pub allowed_count: usize,
    pub history_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Continuation {
    pub token_id: TokenId,
    pub token: String,
    pub probability: f64,
    pub syllables: Option<u32>,
    pub stress_pattern: Option<String>,
    pub rhyme_key: Option<String>,
    pub metaphone: Option<String>,
}

impl Continuation {
    pub fn new(catalog: &TokenCatalog, id: TokenId, probability: f64) -> Self {
        let f = catalog.features(id);
        Continuation {
            token_id: id,
            token: f.surface.clone(),
            probability,
            syllables: f.syllables,
            stress_pattern: f.stress_pattern.clone(),
            rhyme_key: f.rhyme_key.as_ref().map(|k| k.to_string()),
            metaphone: f.metaphone.as_ref().map(|m| format!("{}/{}", m.primary, m.alternate)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationList {
    pub allowed_count: usize,
    pub entries: Vec<Continuation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionOutcome {
    pub session: SessionDescriptor,
    /// Tokens added by a `generate` action.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated: Option<Vec<ContextToken>>,
}

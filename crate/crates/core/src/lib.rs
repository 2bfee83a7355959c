//! Constrained text generation: a vocabulary catalog with precomputed
//! lexical, phonetic and semantic features, composable token filters, and
//! a decoder that masks a language model's next-token distribution before
//! each token is chosen.
//!
//! Probability-carrying types are generic over [`Scalar`] (`f32` or `f64`);
//! the `*64` aliases below fix `f64`.

pub mod catalog;
pub mod corpus;
pub mod decoder;
pub mod embeddings;
pub mod eval;
pub mod filter;
pub mod letters;
pub mod lm;
pub mod phonetics;
pub mod scalar;

pub use catalog::{CatalogBuilder, CatalogError, TokenCatalog, TokenFeatures, TokenId, TokenizationScheme, WordBoundaryClass};
pub use decoder::{DecodeError, SamplingParams, Strategy};
pub use filter::{AllowedSet, CompositeFilter, FilterError, FilterSpec, GenerationContext};
pub use lm::{LanguageModel, LmError, NGramModel, UniformModel};
pub use scalar::Scalar;

pub type Distribution64 = lm::Distribution<f64>;
pub type Distribution32 = lm::Distribution<f32>;
pub type Session64 = decoder::Session<f64>;
pub type Session32 = decoder::Session<f32>;
pub type StepResult64 = decoder::StepResult<f64>;
pub type Continuations64 = decoder::Continuations<f64>;
pub type SharedModel64 = std::sync::Arc<dyn LanguageModel<f64>>;

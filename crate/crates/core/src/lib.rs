//! Lossless vocabulary reduction for autoregressive token models.
//!
//! A model over a vocabulary `V` can be re-expressed over any complete
//! sub-vocabulary `V_sub ⊆ V` without changing the distribution of texts it
//! generates. This crate provides the tokenizers, desk-scale models, the
//! reduction engine, maximal common vocabularies for BPE tokenizers, ensembles
//! of reduced models and a brute-force oracle to check all of it.

pub mod bench;
pub mod ensemble;
pub mod error;
pub mod fixtures;
pub mod mcv;
pub mod model;
pub mod oracle;
pub mod reduction;
pub mod tokenization;

pub use error::{Error, Result};
pub use model::{LanguageModel, NextTokenDistribution};
pub use reduction::{Decoding, ReductionSession, SubTokenDistribution, TopK};
pub use tokenization::{Alphabet, DeterministicTokenizer, NestedTokenizer, TokenId, Tokenizer, Vocabulary};

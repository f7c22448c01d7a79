use std::sync::Arc;

use super::io::escape_surface;
use super::vocab::{TokenId, Vocabulary};
use super::{DeterministicTokenizer, Tokenizer};
use crate::error::{Error, Result};

/// An outer tokenizer over `V` composed with an inner tokenizer over `V_sub ⊆ V`.
///
/// Each outer token is re-tokenized in isolation by the inner tokenizer and the
/// pieces are concatenated. The per-token re-tokenizations are computed once at
/// construction.
#[derive(Clone, Debug)]
pub struct NestedTokenizer {
    outer: Arc<Tokenizer>,
    inner: Arc<Tokenizer>,
    per_token: Vec<Vec<TokenId>>,
    inner_to_outer: Vec<TokenId>,
}

impl NestedTokenizer {
    pub fn new(outer: Arc<Tokenizer>, inner: Arc<Tokenizer>) -> Result<Self> {
        let (ov, iv) = (outer.vocab(), inner.vocab());
        if ov.alphabet() != iv.alphabet() {
            return Err(Error::VocabularyMismatch(
                "outer and inner tokenizers use different alphabets".into(),
            ));
        }
        iv.require_complete()?;
        let inner_to_outer = iv
            .iter()
            .map(|(_, s)| {
                ov.id_of(s).ok_or_else(|| {
                    Error::VocabularyMismatch(format!(
                        "sub-vocabulary token {:?} is not in the outer vocabulary",
                        escape_surface(s)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let per_token = ov
            .iter()
            .map(|(_, s)| inner.encode(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(NestedTokenizer {
            outer,
            inner,
            per_token,
            inner_to_outer,
        })
    }

    pub fn outer(&self) -> &Arc<Tokenizer> {
        &self.outer
    }

    pub fn inner(&self) -> &Arc<Tokenizer> {
        &self.inner
    }

    pub fn outer_vocab(&self) -> &Vocabulary {
        self.outer.vocab()
    }

    pub fn inner_vocab(&self) -> &Vocabulary {
        self.inner.vocab()
    }

    /// Inner re-tokenization of a single outer token.
    pub fn nested_token(&self, x: TokenId) -> Result<&[TokenId]> {
        self.per_token
            .get(x.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownToken(x))
    }

    pub fn nested_encode(&self, tokens: &[TokenId]) -> Result<Vec<TokenId>> {
        let mut out = Vec::with_capacity(tokens.len());
        for &x in tokens {
            out.extend_from_slice(self.nested_token(x)?);
        }
        Ok(out)
    }

    pub fn nested_encode_text(&self, text: &[u8]) -> Result<Vec<TokenId>> {
        self.nested_encode(&self.outer.encode(text)?)
    }

    /// The outer token with the same surface as inner token `y`.
    pub fn to_outer(&self, y: TokenId) -> Result<TokenId> {
        self.inner_to_outer
            .get(y.index())
            .copied()
            .ok_or(Error::UnknownToken(y))
    }

    /// Outer re-tokenization of the text spelled by sub-tokens `y`.
    pub fn canonical(&self, y: &[TokenId]) -> Result<Vec<TokenId>> {
        self.outer.encode(&self.inner.decode(y)?)
    }

    /// Whether `y` is a fixed point of the nested tokenization.
    pub fn is_nested_valid(&self, y: &[TokenId]) -> Result<bool> {
        Ok(self.nested_encode(&self.canonical(y)?)? == y)
    }
}

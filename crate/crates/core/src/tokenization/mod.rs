//! Byte-level texts, vocabularies and deterministic tokenizers.
//!
//! Every tokenizer here satisfies `decode(encode(t)) == t` and decodes by
//! concatenating token surfaces. A token sequence is *valid* when it is a
//! fixed point of `encode ∘ decode`, i.e. when the encoder can produce it.

mod bpe;
mod greedy;
pub mod io;
mod nested;
mod vocab;

use std::path::Path;

pub use bpe::BpeTokenizer;
pub use greedy::GreedyTokenizer;
pub use nested::NestedTokenizer;
pub use vocab::{Alphabet, TokenId, Vocabulary};

use crate::error::Result;

pub trait DeterministicTokenizer {
    fn vocab(&self) -> &Vocabulary;

    fn encode(&self, text: &[u8]) -> Result<Vec<TokenId>>;

    fn decode(&self, tokens: &[TokenId]) -> Result<Vec<u8>> {
        self.vocab().decode(tokens)
    }

    /// Whether re-encoding the decoded text reproduces `tokens` exactly.
    /// Sequences with unknown ids are never valid.
    fn is_valid(&self, tokens: &[TokenId]) -> bool {
        match self.decode(tokens) {
            Ok(text) => self.encode(&text).is_ok_and(|enc| enc == tokens),
            Err(_) => false,
        }
    }

    /// `out[x]` is `is_valid(prefix ++ [x])` for every token `x`.
    fn valid_continuations(&self, prefix: &[TokenId]) -> Result<Vec<bool>> {
        let vocab = self.vocab();
        let base = self.decode(prefix)?;
        if self.encode(&base)? != prefix {
            return Ok(vec![false; vocab.len()]);
        }
        let n = prefix.len();
        let mut text = base;
        let mut out = Vec::with_capacity(vocab.len());
        for (id, surface) in vocab.iter() {
            text.extend_from_slice(surface);
            let enc = self.encode(&text)?;
            out.push(enc.len() == n + 1 && enc[..n] == *prefix && enc[n] == id);
            text.truncate(text.len() - surface.len());
        }
        Ok(out)
    }
}

/// Either of the two concrete tokenizer kinds.
#[derive(Clone, Debug)]
pub enum Tokenizer {
    Greedy(GreedyTokenizer),
    Bpe(BpeTokenizer),
}

impl Tokenizer {
    pub fn greedy(vocab: Vocabulary) -> Result<Self> {
        GreedyTokenizer::new(vocab).map(Tokenizer::Greedy)
    }

    pub fn bpe(vocab: Vocabulary, merges: &[io::SurfaceMerge]) -> Result<Self> {
        BpeTokenizer::from_surface_merges(vocab, merges).map(Tokenizer::Bpe)
    }

    /// Greedy when `merges` is `None`, BPE otherwise.
    pub fn load(vocab: &Path, merges: Option<&Path>, alphabet: &Alphabet) -> Result<Self> {
        let vocab = io::load_vocab(vocab, alphabet)?;
        match merges {
            Some(m) => Self::bpe(vocab, &io::load_merges(m)?),
            None => Self::greedy(vocab),
        }
    }

    pub fn as_bpe(&self) -> Option<&BpeTokenizer> {
        match self {
            Tokenizer::Bpe(b) => Some(b),
            Tokenizer::Greedy(_) => None,
        }
    }
}

impl DeterministicTokenizer for Tokenizer {
    fn vocab(&self) -> &Vocabulary {
        match self {
            Tokenizer::Greedy(t) => t.vocab(),
            Tokenizer::Bpe(t) => t.vocab(),
        }
    }

    fn encode(&self, text: &[u8]) -> Result<Vec<TokenId>> {
        match self {
            Tokenizer::Greedy(t) => t.encode(text),
            Tokenizer::Bpe(t) => t.encode(text),
        }
    }

    fn valid_continuations(&self, prefix: &[TokenId]) -> Result<Vec<bool>> {
        match self {
            Tokenizer::Greedy(t) => t.valid_continuations(prefix),
            Tokenizer::Bpe(t) => t.valid_continuations(prefix),
        }
    }
}

impl From<GreedyTokenizer> for Tokenizer {
    fn from(t: GreedyTokenizer) -> Self {
        Tokenizer::Greedy(t)
    }
}

impl From<BpeTokenizer> for Tokenizer {
    fn from(t: BpeTokenizer) -> Self {
        Tokenizer::Bpe(t)
    }
}

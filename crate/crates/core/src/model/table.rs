use std::collections::HashMap;
use std::sync::Arc;

use super::{check_len, check_probs, check_prefix, mask_invalid, LanguageModel, NextTokenDistribution};
use crate::error::Result;
use crate::tokenization::{DeterministicTokenizer, TokenId, Tokenizer};

/// Hand-written conditionals keyed by exact prefix, with a fallback for
/// every prefix not listed. All lookups are validity-masked.
#[derive(Clone, Debug)]
pub struct TableModel {
    tokenizer: Arc<Tokenizer>,
    entries: HashMap<Vec<TokenId>, Vec<f64>>,
    default: Vec<f64>,
    renormalize: bool,
}

impl TableModel {
    pub fn new(tokenizer: Arc<Tokenizer>, default: Vec<f64>) -> Result<Self> {
        check_len(&default, tokenizer.vocab())?;
        check_probs(&default)?;
        Ok(TableModel {
            tokenizer,
            entries: HashMap::new(),
            default,
            renormalize: true,
        })
    }

    /// Uniform fallback over the whole vocabulary.
    pub fn uniform(tokenizer: Arc<Tokenizer>) -> Self {
        let n = tokenizer.vocab().len();
        let default = vec![1.0 / n as f64; n];
        TableModel {
            tokenizer,
            entries: HashMap::new(),
            default,
            renormalize: true,
        }
    }

    pub fn insert(&mut self, prefix: Vec<TokenId>, probs: Vec<f64>) -> Result<()> {
        check_len(&probs, self.tokenizer.vocab())?;
        check_probs(&probs)?;
        self.entries.insert(prefix, probs);
        Ok(())
    }

    pub fn with_entry(mut self, prefix: Vec<TokenId>, probs: Vec<f64>) -> Result<Self> {
        self.insert(prefix, probs)?;
        Ok(self)
    }

    /// With renormalization off, masked tables must already sum to one.
    pub fn set_renormalize(&mut self, on: bool) {
        self.renormalize = on;
    }

    pub fn renormalize(&self) -> bool {
        self.renormalize
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[TokenId], &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    pub fn default_probs(&self) -> &[f64] {
        &self.default
    }
}

impl LanguageModel for TableModel {
    fn tokenizer(&self) -> &Arc<Tokenizer> {
        &self.tokenizer
    }

    fn next_token_dist(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution> {
        check_prefix(&self.tokenizer, prefix)?;
        let raw = self.entries.get(prefix).unwrap_or(&self.default);
        mask_invalid(&self.tokenizer, prefix, raw, self.renormalize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::tokenization::{Alphabet, Vocabulary};

    fn abc() -> Arc<Tokenizer> {
        let a = Alphabet::from_symbols(*b"ab").with_eos(b'$');
        let v = Vocabulary::new(a, vec![b"a".to_vec(), b"b".to_vec(), b"$".to_vec(), b"ab".to_vec()])
            .unwrap();
        Arc::new(Tokenizer::greedy(v).unwrap())
    }

    #[test]
    fn uniform_default_is_uniform_over_valid() {
        let m = TableModel::uniform(abc());
        let d = m.next_token_dist(&[]).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 0.25).abs() < 1e-12));
        // after "a", appending "b" would re-encode as "ab"
        let d = m.next_token_dist(&[TokenId(0)]).unwrap();
        assert_eq!(d[TokenId(1)], 0.0);
        for id in [0, 2, 3] {
            assert!((d[TokenId(id)] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prefix_after_eos_is_rejected() {
        let m = TableModel::uniform(abc());
        assert!(matches!(m.next_token_dist(&[TokenId(2)]), Err(Error::AfterEos)));
        assert_eq!(m.marginal(&[TokenId(2), TokenId(0)]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_malformed_rows() {
        let m = TableModel::uniform(abc());
        assert!(m.clone().with_entry(vec![], vec![1.0]).is_err());
        assert!(m.with_entry(vec![], vec![0.5, 0.5, 0.5, 0.0]).is_err());
    }
}

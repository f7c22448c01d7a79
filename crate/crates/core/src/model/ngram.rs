use std::collections::HashMap;
use std::sync::Arc;

use super::{check_prefix, mask_invalid, LanguageModel, NextTokenDistribution};
use crate::error::{Error, Result};
use crate::tokenization::{DeterministicTokenizer, TokenId, Tokenizer};

/// Additively smoothed n-gram model over tokenized documents.
///
/// `order` is the context length: order 1 conditions on the previous token.
/// Contexts shorter than `order` occur at the start of a document and are
/// counted separately, so the start of a sequence is modelled.
#[derive(Clone, Debug)]
pub struct NgramModel {
    tokenizer: Arc<Tokenizer>,
    order: usize,
    alpha: f64,
    counts: HashMap<Vec<TokenId>, (Vec<u64>, u64)>,
}

impl NgramModel {
    pub fn train<D: AsRef<[u8]>>(
        tokenizer: Arc<Tokenizer>,
        corpus: &[D],
        order: usize,
        alpha: f64,
    ) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if order == 0 {
            return Err(Error::InvalidParameter("n-gram order must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("smoothing alpha must be > 0, got {alpha}")));
        }
        let vocab = tokenizer.vocab();
        let eos = vocab.eos().ok_or(Error::MissingEos)?;
        let n = vocab.len();

        let mut counts: HashMap<Vec<TokenId>, (Vec<u64>, u64)> = HashMap::new();
        for doc in corpus {
            let mut ids = tokenizer.encode(doc.as_ref())?;
            if ids.contains(&eos) {
                return Err(Error::InvalidParameter(
                    "corpus document contains the EOS symbol".into(),
                ));
            }
            ids.push(eos);
            for i in 0..ids.len() {
                let ctx = ids[i.saturating_sub(order)..i].to_vec();
                let row = counts.entry(ctx).or_insert_with(|| (vec![0; n], 0));
                row.0[ids[i].index()] += 1;
                row.1 += 1;
            }
        }
        Ok(NgramModel {
            tokenizer,
            order,
            alpha,
            counts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn smoothed(&self, prefix: &[TokenId]) -> Vec<f64> {
        let n = self.vocab().len();
        let ctx = &prefix[prefix.len().saturating_sub(self.order)..];
        let denom_extra = self.alpha * n as f64;
        match self.counts.get(ctx) {
            Some((row, total)) => {
                let denom = *total as f64 + denom_extra;
                row.iter().map(|&c| (c as f64 + self.alpha) / denom).collect()
            }
            None => vec![1.0 / n as f64; n],
        }
    }
}

impl LanguageModel for NgramModel {
    fn tokenizer(&self) -> &Arc<Tokenizer> {
        &self.tokenizer
    }

    fn next_token_dist(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution> {
        check_prefix(&self.tokenizer, prefix)?;
        mask_invalid(&self.tokenizer, prefix, &self.smoothed(prefix), true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenization::{Alphabet, Vocabulary};

    fn bytes_ab() -> Arc<Tokenizer> {
        let a = Alphabet::from_symbols(*b"ab").with_eos(b'$');
        Arc::new(Tokenizer::greedy(Vocabulary::single_symbols(&a)).unwrap())
    }

    fn id(t: &Tokenizer, s: &str) -> TokenId {
        t.vocab().id_of(s.as_bytes()).unwrap()
    }

    #[test]
    fn bigram_counts_follow_corpus() {
        let t = bytes_ab();
        let m = NgramModel::train(t.clone(), &["ab", "ab"], 1, 0.1).unwrap();
        let d = m.next_token_dist(&[id(&t, "a")]).unwrap();
        assert!(d[id(&t, "b")] > d[id(&t, "a")]);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eos_follows_single_document() {
        let t = bytes_ab();
        let m = NgramModel::train(t.clone(), &["a"], 1, 0.5).unwrap();
        let d = m.next_token_dist(&[id(&t, "a")]).unwrap();
        let eos = t.vocab().eos().unwrap();
        assert!(t.vocab().ids().filter(|&x| x != eos).all(|x| d[eos] > d[x]));
    }

    #[test]
    fn large_alpha_is_nearly_uniform() {
        let t = bytes_ab();
        let m = NgramModel::train(t.clone(), &["aaaa", "ab"], 1, 1e9).unwrap();
        let d = m.next_token_dist(&[id(&t, "a")]).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-6));
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = bytes_ab();
        let empty: [&str; 0] = [];
        assert!(matches!(NgramModel::train(t.clone(), &empty, 1, 0.1), Err(Error::EmptyCorpus)));
        assert!(NgramModel::train(t.clone(), &["a"], 0, 0.1).is_err());
        assert!(NgramModel::train(t.clone(), &["a"], 1, 0.0).is_err());
        assert!(NgramModel::train(t, &["a$b"], 1, 0.1).is_err());
    }
}

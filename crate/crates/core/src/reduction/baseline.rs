use std::sync::Arc;

use super::SubTokenDistribution;
use crate::error::{Error, Result};
use crate::model::LanguageModel;
use crate::tokenization::{DeterministicTokenizer, NestedTokenizer, TokenId};

/// Lossy baseline: retokenize the prefix text in `V`, keep only the
/// probabilities of tokens that are also in `V_sub`, renormalize.
pub fn naive_restriction_dist(
    model: &dyn LanguageModel,
    nt: &NestedTokenizer,
    prefix: &[TokenId],
) -> Result<SubTokenDistribution> {
    let text = nt.inner().decode(prefix)?;
    let x = model.tokenizer().encode(&text)?;
    let dist = model.next_token_dist(&x)?;
    let weights = nt
        .inner_vocab()
        .ids()
        .map(|y| Ok(dist[nt.to_outer(y)?]))
        .collect::<Result<Vec<f64>>>()?;
    let n = weights.len();
    SubTokenDistribution::from_marginals(weights, 0.0, vec![0; n])
}

/// Prefix-carrying wrapper around [`naive_restriction_dist`].
#[derive(Clone)]
pub struct NaiveRestriction {
    model: Arc<dyn LanguageModel>,
    nt: Arc<NestedTokenizer>,
    prefix: Vec<TokenId>,
}

impl NaiveRestriction {
    pub fn new(model: Arc<dyn LanguageModel>, nt: Arc<NestedTokenizer>) -> Result<Self> {
        if !model.vocab().same_surfaces(nt.outer_vocab()) {
            return Err(Error::VocabularyMismatch(
                "nested tokenizer's outer vocabulary differs from the model's".into(),
            ));
        }
        Ok(NaiveRestriction {
            model,
            nt,
            prefix: Vec::new(),
        })
    }

    pub fn prefix(&self) -> &[TokenId] {
        &self.prefix
    }

    pub fn nested(&self) -> &Arc<NestedTokenizer> {
        &self.nt
    }

    pub fn next_dist(&self) -> Result<SubTokenDistribution> {
        naive_restriction_dist(self.model.as_ref(), &self.nt, &self.prefix)
    }

    pub fn step(&mut self, y: TokenId) -> Result<()> {
        if !self.nt.inner_vocab().contains_id(y) {
            return Err(Error::UnknownToken(y));
        }
        self.prefix.push(y);
        Ok(())
    }
}

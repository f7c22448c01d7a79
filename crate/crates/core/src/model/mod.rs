//! Next-token distribution sources over a tokenizer's vocabulary.
//!
//! Every model honours the validity condition: a continuation `x` after a
//! prefix gets probability zero whenever `prefix ++ [x]` is not a valid token
//! sequence. Prefix probabilities `p(x_1..x_t *)` are the running product of
//! the conditionals.

pub mod io;
mod ngram;
mod table;

use std::ops::Index;
use std::sync::Arc;

pub use ngram::NgramModel;
pub use table::TableModel;

use crate::error::{Error, Result};
use crate::tokenization::{DeterministicTokenizer, TokenId, Tokenizer, Vocabulary};

/// Allowed deviation of a distribution's total mass from 1.
pub const NORMALIZATION_EPS: f64 = 1e-9;

/// Probabilities indexed by token id over one vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct NextTokenDistribution(Vec<f64>);

impl NextTokenDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs)?;
        Ok(NextTokenDistribution(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: TokenId) -> f64 {
        self.0.get(id.index()).copied().unwrap_or(0.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Index<TokenId> for NextTokenDistribution {
    type Output = f64;

    fn index(&self, id: TokenId) -> &f64 {
        &self.0[id.index()]
    }
}

pub(crate) fn check_probs(probs: &[f64]) -> Result<()> {
    if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::BadProbability(i));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_EPS {
        return Err(Error::NotNormalized(total));
    }
    Ok(())
}

pub(crate) fn check_len(probs: &[f64], vocab: &Vocabulary) -> Result<()> {
    if probs.len() != vocab.len() {
        return Err(Error::DistributionLength {
            expected: vocab.len(),
            got: probs.len(),
        });
    }
    Ok(())
}

pub trait LanguageModel: Send + Sync {
    fn tokenizer(&self) -> &Arc<Tokenizer>;

    fn vocab(&self) -> &Vocabulary {
        self.tokenizer().vocab()
    }

    /// Full conditional distribution over the vocabulary after `prefix`.
    fn next_token_dist(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution>;

    /// `p(tokens *)`, the probability that a sampled sequence starts with `tokens`.
    fn marginal(&self, tokens: &[TokenId]) -> Result<f64> {
        if !self.tokenizer().is_valid(tokens) {
            return Err(Error::InvalidPrefix);
        }
        let eos = self.vocab().eos();
        let mut p = 1.0;
        for s in 0..tokens.len() {
            // nothing follows a terminated sequence
            if s > 0 && Some(tokens[s - 1]) == eos {
                return Ok(0.0);
            }
            p *= self.next_token_dist(&tokens[..s])?[tokens[s]];
            if p == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(p)
    }
}

/// Reject prefixes that are invalid or already terminated.
pub fn check_prefix(tokenizer: &Tokenizer, prefix: &[TokenId]) -> Result<()> {
    if let Some(eos) = tokenizer.vocab().eos() {
        if prefix.contains(&eos) {
            return Err(Error::AfterEos);
        }
    }
    if !tokenizer.is_valid(prefix) {
        return Err(Error::InvalidPrefix);
    }
    Ok(())
}

/// Zero every continuation that would make `prefix ++ [x]` invalid.
///
/// When mass was removed and `renormalize` is set, the survivors are rescaled
/// proportionally. Without `renormalize` the masked vector must still sum to 1.
pub fn mask_invalid(
    tokenizer: &Tokenizer,
    prefix: &[TokenId],
    raw: &[f64],
    renormalize: bool,
) -> Result<NextTokenDistribution> {
    check_len(raw, tokenizer.vocab())?;
    let valid = tokenizer.valid_continuations(prefix)?;
    let mut probs = raw.to_vec();
    let mut removed = 0.0;
    for (p, ok) in probs.iter_mut().zip(&valid) {
        if !ok && *p != 0.0 {
            removed += *p;
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    if removed > 0.0 && renormalize {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    NextTokenDistribution::new(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worked_example;

    #[test]
    fn distribution_validation() {
        assert!(NextTokenDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            NextTokenDistribution::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(
            NextTokenDistribution::new(vec![1.5, -0.5]),
            Err(Error::BadProbability(1))
        ));
    }

    #[test]
    fn masking_removes_invalid_pair() {
        let ex = worked_example();
        let tok = ex.model.tokenizer();
        let x00 = TokenId(2);
        let raw = [0.25, 0.25, 0.25, 0.25];
        let d = mask_invalid(tok, &[x00], &raw, true).unwrap();
        assert_eq!(d[TokenId(1)], 0.0);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d[TokenId(0)] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn masking_keeps_valid_singletons_and_is_idempotent() {
        let ex = worked_example();
        let tok = ex.model.tokenizer();
        let raw = [0.1, 0.1, 0.5, 0.3];
        let d = mask_invalid(tok, &[], &raw, true).unwrap();
        assert_eq!(d.probs(), &raw);
        let again = mask_invalid(tok, &[], d.probs(), true).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn masking_everything_is_an_error() {
        let ex = worked_example();
        let tok = ex.model.tokenizer();
        let raw = [0.0, 1.0, 0.0, 0.0];
        assert!(matches!(
            mask_invalid(tok, &[TokenId(2)], &raw, true),
            Err(Error::ZeroMass)
        ));
    }

    #[test]
    fn no_renormalize_requires_normalized_remainder() {
        let ex = worked_example();
        let tok = ex.model.tokenizer();
        assert!(mask_invalid(tok, &[TokenId(2)], &[0.6, 0.0, 0.3, 0.1], false).is_ok());
        assert!(mask_invalid(tok, &[TokenId(2)], &[0.5, 0.1, 0.3, 0.1], false).is_err());
    }

    #[test]
    fn worked_example_conditionals() {
        let ex = worked_example();
        let d = ex.model.next_token_dist(&[]).unwrap();
        assert_eq!(d.probs(), &[0.1, 0.1, 0.5, 0.3]);
        let d = ex.model.next_token_dist(&[TokenId(2)]).unwrap();
        assert_eq!(d.probs(), &[0.6, 0.0, 0.3, 0.1]);
    }

    #[test]
    fn worked_example_marginals() {
        let ex = worked_example();
        let m = &ex.model;
        assert_eq!(m.marginal(&[]).unwrap(), 1.0);
        assert!((m.marginal(&[TokenId(2), TokenId(0)]).unwrap() - 0.30).abs() < 1e-12);
        assert!((m.marginal(&[TokenId(2), TokenId(3)]).unwrap() - 0.05).abs() < 1e-12);
        assert!(matches!(
            m.marginal(&[TokenId(2), TokenId(1)]),
            Err(Error::InvalidPrefix)
        ));
        assert!(matches!(
            m.next_token_dist(&[TokenId(2), TokenId(1)]),
            Err(Error::InvalidPrefix)
        ));
    }
}

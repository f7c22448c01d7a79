//! Maximal common vocabulary of several BPE tokenizers.
//!
//! `V∩` is the surface intersection of all vocabularies, in the first
//! vocabulary's order. Its merge list is the first tokenizer's merges
//! restricted to pairs whose operands and product all lie in `V∩`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tokenization::io::{escape_surface, SurfaceMerge};
use crate::tokenization::{BpeTokenizer, DeterministicTokenizer, Vocabulary};

#[derive(Clone, Debug)]
pub struct McvResult {
    pub vocab: Vocabulary,
    pub merges: Vec<SurfaceMerge>,
    /// Index of the tokenizer whose merges were restricted.
    pub source: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct McvReport {
    pub input_vocab_sizes: Vec<usize>,
    pub input_merge_counts: Vec<usize>,
    pub vocab_size: usize,
    pub merge_count: usize,
    pub source: usize,
}

pub fn intersect_vocabs(vocabs: &[&Vocabulary]) -> Result<Vocabulary> {
    let (first, rest) = match vocabs {
        [first, rest @ ..] if !rest.is_empty() => (first, rest),
        _ => return Err(Error::TooFewInputs(2)),
    };
    if rest.iter().any(|v| v.alphabet() != first.alphabet()) {
        return Err(Error::VocabularyMismatch("vocabularies use different alphabets".into()));
    }
    let surfaces = first
        .surfaces()
        .iter()
        .filter(|s| rest.iter().all(|v| v.id_of(s).is_some()))
        .cloned()
        .collect();
    let v = Vocabulary::new(first.alphabet().clone(), surfaces)?;
    v.require_complete()?;
    Ok(v)
}

/// Order-preserving filter of `merges`: keep `(l, r)` when `l`, `r` and
/// `lr` are all in `v_cap`.
pub fn restrict_merges(merges: &[SurfaceMerge], v_cap: &Vocabulary) -> Vec<SurfaceMerge> {
    merges
        .iter()
        .filter(|(l, r)| {
            let product = [l.as_slice(), r.as_slice()].concat();
            v_cap.id_of(l).is_some() && v_cap.id_of(r).is_some() && v_cap.id_of(&product).is_some()
        })
        .cloned()
        .collect()
}

pub fn build_mcv(tokenizers: &[&BpeTokenizer]) -> Result<(McvResult, BpeTokenizer)> {
    let vocabs: Vec<&Vocabulary> = tokenizers.iter().map(|t| t.vocab()).collect();
    let vocab = intersect_vocabs(&vocabs)?;
    let merges = restrict_merges(&tokenizers[0].surface_merges(), &vocab);
    let tokenizer = BpeTokenizer::from_surface_merges(vocab.clone(), &merges)?;
    Ok((
        McvResult {
            vocab,
            merges,
            source: 0,
        },
        tokenizer,
    ))
}

impl McvResult {
    pub fn report(&self, inputs: &[&BpeTokenizer]) -> McvReport {
        McvReport {
            input_vocab_sizes: inputs.iter().map(|t| t.vocab().len()).collect(),
            input_merge_counts: inputs.iter().map(|t| t.merges().len()).collect(),
            vocab_size: self.vocab.len(),
            merge_count: self.merges.len(),
            source: self.source,
        }
    }

    /// Multi-symbol surfaces of `V∩`, escaped.
    pub fn multi_symbol_tokens(&self) -> Vec<String> {
        self.vocab
            .surfaces()
            .iter()
            .filter(|s| s.len() > 1)
            .map(|s| escape_surface(s))
            .collect()
    }
}

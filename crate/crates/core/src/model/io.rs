//! Model description files.
//!
//! ```json
//! { "kind": "table", "vocab": "vocab.json", "merges": "merges.txt",
//!   "entries": [ { "prefix": [2], "probs": [0.6, 0.0, 0.3, 0.1] } ],
//!   "default": [0.25, 0.25, 0.25, 0.25], "renormalize": true }
//! { "kind": "ngram", "vocab": "vocab.json", "corpus": "corpus.txt", "order": 2, "alpha": 0.1 }
//! ```
//!
//! `kind` defaults to `table`. Paths are resolved relative to the model file.
//! Without `merges` the tokenizer is greedy longest-match. A table without
//! `default` falls back to uniform. An n-gram corpus holds one document per
//! line.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{LanguageModel, NextTokenDistribution, NgramModel, TableModel};
use crate::error::{Error, Result};
use crate::tokenization::{Alphabet, TokenId, Tokenizer};

#[derive(Debug, Serialize, Deserialize)]
pub struct TableEntry {
    pub prefix: Vec<TokenId>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Table {
        vocab: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        merges: Option<PathBuf>,
        #[serde(default)]
        entries: Vec<TableEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<Vec<f64>>,
        #[serde(default = "yes")]
        renormalize: bool,
    },
    Ngram {
        vocab: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        merges: Option<PathBuf>,
        corpus: PathBuf,
        order: usize,
        alpha: f64,
    },
}

fn yes() -> bool {
    true
}

/// A model loaded from a description file.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Table(TableModel),
    Ngram(NgramModel),
}

impl LanguageModel for AnyModel {
    fn tokenizer(&self) -> &Arc<Tokenizer> {
        match self {
            AnyModel::Table(m) => m.tokenizer(),
            AnyModel::Ngram(m) => m.tokenizer(),
        }
    }

    fn next_token_dist(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution> {
        match self {
            AnyModel::Table(m) => m.next_token_dist(prefix),
            AnyModel::Ngram(m) => m.next_token_dist(prefix),
        }
    }
}

impl ModelSpec {
    pub fn vocab_path(&self) -> &Path {
        match self {
            ModelSpec::Table { vocab, .. } | ModelSpec::Ngram { vocab, .. } => vocab,
        }
    }

    pub fn merges_path(&self) -> Option<&Path> {
        match self {
            ModelSpec::Table { merges, .. } | ModelSpec::Ngram { merges, .. } => merges.as_deref(),
        }
    }
}

/// Parse the description only, without loading referenced files.
pub fn read_spec(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(obj) = value.as_object_mut() {
        obj.entry("kind").or_insert_with(|| "table".into());
    }
    Ok(serde_json::from_value(value)?)
}

pub fn load_model(path: &Path, alphabet: &Alphabet) -> Result<AnyModel> {
    let spec = read_spec(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    build(spec, base, alphabet)
}

pub fn build(spec: ModelSpec, base: &Path, alphabet: &Alphabet) -> Result<AnyModel> {
    let tokenizer = Arc::new(Tokenizer::load(
        &base.join(spec.vocab_path()),
        spec.merges_path().map(|m| base.join(m)).as_deref(),
        alphabet,
    )?);
    match spec {
        ModelSpec::Table {
            entries,
            default,
            renormalize,
            ..
        } => {
            let mut model = match default {
                Some(d) => TableModel::new(tokenizer, d)?,
                None => TableModel::uniform(tokenizer),
            };
            model.set_renormalize(renormalize);
            for e in entries {
                model.insert(e.prefix, e.probs)?;
            }
            Ok(AnyModel::Table(model))
        }
        ModelSpec::Ngram {
            corpus,
            order,
            alpha,
            ..
        } => {
            let text = fs::read(base.join(corpus))?;
            let docs: Vec<&[u8]> = text
                .split(|&b| b == b'\n')
                .map(|l| l.strip_suffix(b"\r").unwrap_or(l))
                .filter(|l| !l.is_empty())
                .collect();
            if docs.is_empty() {
                return Err(Error::EmptyCorpus);
            }
            Ok(AnyModel::Ngram(NgramModel::train(tokenizer, &docs, order, alpha)?))
        }
    }
}

/// Serialize a table model's entries next to already-written vocab/merges files.
pub fn table_spec(model: &TableModel, vocab: PathBuf, merges: Option<PathBuf>) -> ModelSpec {
    let mut entries: Vec<TableEntry> = model
        .entries()
        .map(|(p, q)| TableEntry {
            prefix: p.to_vec(),
            probs: q.to_vec(),
        })
        .collect();
    entries.sort_by(|a, b| a.prefix.cmp(&b.prefix));
    ModelSpec::Table {
        vocab,
        merges,
        entries,
        default: Some(model.default_probs().to_vec()),
        renormalize: model.renormalize(),
    }
}

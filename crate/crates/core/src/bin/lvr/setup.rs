use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use lvr_core::mcv::build_mcv;
use lvr_core::model::io::load_model;
use lvr_core::oracle::DEFAULT_BUDGET;
use lvr_core::tokenization::io::{parse_alphabet, unescape_surface};
use lvr_core::{Alphabet, DeterministicTokenizer, LanguageModel, Tokenizer, Vocabulary};

pub const BUDGET_VAR: &str = "LVR_ENUM_BUDGET";

#[derive(Args, Debug)]
pub struct AlphabetArgs {
    /// `bytes`, `binary`, or the literal symbols (`\xNN` escapes allowed).
    #[arg(long, default_value = "bytes")]
    alphabet: String,
    /// End-of-sequence symbol, added to the alphabet if missing.
    #[arg(long)]
    eos: Option<String>,
}

impl AlphabetArgs {
    pub fn build(&self) -> Result<Alphabet> {
        let eos = match &self.eos {
            None => None,
            Some(e) => match unescape_surface(e)?.as_slice() {
                [b] => Some(*b),
                _ => bail!("--eos must be a single symbol, got {e:?}"),
            },
        };
        Ok(parse_alphabet(&self.alphabet, eos)?)
    }
}

#[derive(Args, Debug)]
pub struct SubVocabArgs {
    /// Sub-vocabulary: `bytes`, `mcv`, or a vocabulary file.
    #[arg(long, default_value = "bytes")]
    subvocab: String,
    /// Merges for a sub-vocabulary file; greedy when absent.
    #[arg(long)]
    sub_merges: Option<PathBuf>,
    /// Extra model files whose tokenizers join the MCV.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    partner: Vec<PathBuf>,
}

impl SubVocabArgs {
    /// Sub-tokenizer for models tokenized by `toks`.
    pub fn resolve(&self, toks: &[Arc<Tokenizer>], alphabet: &Alphabet) -> Result<Arc<Tokenizer>> {
        let alphabet = toks.first().map(|t| t.vocab().alphabet()).unwrap_or(alphabet);
        match self.subvocab.as_str() {
            "bytes" => byte_tokenizer(alphabet),
            "mcv" => {
                let mut all: Vec<Arc<Tokenizer>> = toks.to_vec();
                for p in &self.partner {
                    all.push(Loaded::model(p, alphabet)?.tokenizer);
                }
                if all.len() < 2 {
                    bail!("--subvocab mcv needs at least two tokenizers; add --partner <model>");
                }
                let bpes = all
                    .iter()
                    .map(|t| t.as_bpe().ok_or_else(|| anyhow!("--subvocab mcv needs BPE tokenizers (merges)")))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Arc::new(Tokenizer::Bpe(build_mcv(&bpes)?.1)))
            }
            path => {
                let t = Tokenizer::load(Path::new(path), self.sub_merges.as_deref(), alphabet)
                    .with_context(|| format!("loading {path}"))?;
                Ok(Arc::new(t))
            }
        }
    }
}

pub fn byte_tokenizer(alphabet: &Alphabet) -> Result<Arc<Tokenizer>> {
    Ok(Arc::new(Tokenizer::greedy(Vocabulary::single_symbols(alphabet))?))
}

pub struct Loaded {
    pub model: Arc<dyn LanguageModel>,
    pub tokenizer: Arc<Tokenizer>,
}

impl Loaded {
    pub fn model(path: &Path, alphabet: &Alphabet) -> Result<Self> {
        let m = load_model(path, alphabet).with_context(|| format!("loading model {}", path.display()))?;
        let tokenizer = m.tokenizer().clone();
        Ok(Loaded {
            model: Arc::new(m),
            tokenizer,
        })
    }
}

pub fn enum_budget() -> Result<u64> {
    match std::env::var(BUDGET_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{BUDGET_VAR} must be a non-negative integer, got {v:?}")),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

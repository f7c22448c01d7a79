//! Throughput comparison between sub-vocabularies of the same model(s).

use std::time::Instant;

use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::reduction::{Decoding, ReductionSession};
use crate::tokenization::{DeterministicTokenizer, TokenId, Tokenizer};

/// Anything that emits sub-tokens one at a time and can be restarted by cloning.
pub trait Generator: Clone {
    fn probs(&mut self) -> Result<Vec<f64>>;
    fn advance(&mut self, y: TokenId) -> Result<()>;
    fn is_terminated(&self) -> bool;
    fn sub_tokenizer(&self) -> &Tokenizer;
}

impl Generator for ReductionSession {
    fn probs(&mut self) -> Result<Vec<f64>> {
        Ok(self.next_dist()?.probs)
    }

    fn advance(&mut self, y: TokenId) -> Result<()> {
        self.step(y)
    }

    fn is_terminated(&self) -> bool {
        ReductionSession::is_terminated(self)
    }

    fn sub_tokenizer(&self) -> &Tokenizer {
        self.inner()
    }
}

impl Generator for Ensemble {
    fn probs(&mut self) -> Result<Vec<f64>> {
        Ok(self.next_dist()?.probs)
    }

    fn advance(&mut self, y: TokenId) -> Result<()> {
        self.step(y)
    }

    fn is_terminated(&self) -> bool {
        Ensemble::is_terminated(self)
    }

    fn sub_tokenizer(&self) -> &Tokenizer {
        self.members()[0].inner()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRun {
    pub label: String,
    pub sub_vocab_size: usize,
    pub steps: usize,
    pub bytes: usize,
    pub documents: usize,
    pub seconds: f64,
    pub bytes_per_step: f64,
    pub steps_per_sec: f64,
    pub bytes_per_sec: f64,
    /// Mean surface length of the sub-tokenizer's own encoding of the
    /// generated documents.
    pub retokenized_mean_len: f64,
    #[serde(skip)]
    pub texts: Vec<Vec<u8>>,
}

/// Generate from fresh clones of `template` until at least `target_bytes`
/// bytes are out, starting a new document after each EOS. One picker drives
/// the whole run.
pub fn run<G: Generator>(label: &str, template: &G, target_bytes: usize, decoding: Decoding) -> Result<BenchRun> {
    if target_bytes == 0 {
        return Err(Error::InvalidParameter("target_bytes must be positive".into()));
    }
    let tok = template.sub_tokenizer();
    let vocab = tok.vocab();
    let mut picker = decoding.picker();
    let (mut steps, mut bytes) = (0usize, 0usize);
    let mut texts = Vec::new();
    let mut current = Vec::new();
    let mut g = template.clone();

    let start = Instant::now();
    while bytes < target_bytes {
        if g.is_terminated() {
            texts.push(std::mem::take(&mut current));
            g = template.clone();
        }
        let probs = g.probs()?;
        let y = picker.pick(&probs)?;
        g.advance(y)?;
        let s = vocab.surface(y)?;
        current.extend_from_slice(s);
        bytes += s.len();
        steps += 1;
    }
    let seconds = start.elapsed().as_secs_f64();
    if !current.is_empty() {
        texts.push(current);
    }

    let mut retok = 0usize;
    for t in &texts {
        retok += tok.encode(t)?.len();
    }
    Ok(BenchRun {
        label: label.to_string(),
        sub_vocab_size: vocab.len(),
        steps,
        bytes,
        documents: texts.len(),
        seconds,
        bytes_per_step: bytes as f64 / steps as f64,
        steps_per_sec: steps as f64 / seconds.max(f64::MIN_POSITIVE),
        bytes_per_sec: bytes as f64 / seconds.max(f64::MIN_POSITIVE),
        retokenized_mean_len: bytes as f64 / retok.max(1) as f64,
        texts,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub target_bytes: usize,
    pub byte_level: BenchRun,
    pub reduced: BenchRun,
    /// `reduced.bytes_per_step / byte_level.bytes_per_step`.
    pub bytes_per_step_ratio: f64,
    pub steps_ratio: f64,
}

pub fn compare<A: Generator, B: Generator>(
    byte_level: &A,
    reduced: &B,
    target_bytes: usize,
    decoding: Decoding,
) -> Result<BenchReport> {
    let byte_level = run("bytes", byte_level, target_bytes, decoding)?;
    let reduced = run("reduced", reduced, target_bytes, decoding)?;
    Ok(BenchReport {
        target_bytes,
        bytes_per_step_ratio: reduced.bytes_per_step / byte_level.bytes_per_step,
        steps_ratio: reduced.steps as f64 / byte_level.steps as f64,
        byte_level,
        reduced,
    })
}

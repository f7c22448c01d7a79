//! Ensembles of reduced models over one shared sub-vocabulary.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::LanguageModel;
use crate::reduction::{Decoding, ReductionSession, SubTokenDistribution};
use crate::tokenization::io::escape_surface;
use crate::tokenization::{DeterministicTokenizer, TokenId, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Normalized elementwise product.
    Poe,
    /// Elementwise mean.
    Moe,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poe" => Ok(Mode::Poe),
            "moe" => Ok(Mode::Moe),
            _ => Err(Error::Parse(format!("mode must be poe or moe, got {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Poe => "poe",
            Mode::Moe => "moe",
        })
    }
}

fn check_shapes(dists: &[&[f64]]) -> Result<usize> {
    let n = dists.first().ok_or(Error::EmptyEnsemble)?.len();
    if let Some(d) = dists.iter().find(|d| d.len() != n) {
        return Err(Error::DistributionLength {
            expected: n,
            got: d.len(),
        });
    }
    Ok(n)
}

fn support(d: &[f64]) -> Vec<TokenId> {
    d.iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, _)| TokenId::from_index(i))
        .collect()
}

pub fn poe_combine(dists: &[&[f64]]) -> Result<Vec<f64>> {
    let n = check_shapes(dists)?;
    let mut out = vec![1.0; n];
    for d in dists {
        out.iter_mut().zip(d.iter()).for_each(|(o, p)| *o *= p);
    }
    let total: f64 = out.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::ZeroProduct {
            supports: dists.iter().map(|d| support(d)).collect(),
        });
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(out)
}

pub fn moe_combine(dists: &[&[f64]]) -> Result<Vec<f64>> {
    let n = check_shapes(dists)?;
    let mut out = vec![0.0; n];
    for d in dists {
        out.iter_mut().zip(d.iter()).for_each(|(o, p)| *o += p);
    }
    let k = dists.len() as f64;
    out.iter_mut().for_each(|o| *o /= k);
    Ok(out)
}

pub fn combine(mode: Mode, dists: &[&[f64]]) -> Result<Vec<f64>> {
    match mode {
        Mode::Poe => poe_combine(dists),
        Mode::Moe => moe_combine(dists),
    }
}

/// Output of one ensemble step.
#[derive(Clone, Debug)]
pub struct EnsembleDist {
    pub probs: Vec<f64>,
    pub members: Vec<SubTokenDistribution>,
}

/// Reduction sessions advanced in lock-step on a shared sub-vocabulary.
#[derive(Clone, Debug)]
pub struct Ensemble {
    members: Vec<ReductionSession>,
    mode: Mode,
}

fn member_err(member: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Member {
        member,
        source: Box::new(e),
    }
}

impl Ensemble {
    pub fn new(members: Vec<ReductionSession>, mode: Mode) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        let v0 = first.inner().vocab();
        for (i, m) in members.iter().enumerate().skip(1) {
            let v = m.inner().vocab();
            if v.alphabet() != v0.alphabet() || !v.same_surfaces(v0) {
                return Err(Error::VocabularyMismatch(format!(
                    "member {i} uses a different sub-vocabulary than member 0"
                )));
            }
        }
        Ok(Ensemble { members, mode })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn members(&self) -> &[ReductionSession] {
        &self.members
    }

    pub fn prefix(&self) -> &[TokenId] {
        self.members[0].prefix()
    }

    pub fn text(&self) -> Result<Vec<u8>> {
        self.members[0].text()
    }

    pub fn is_terminated(&self) -> bool {
        self.members[0].is_terminated()
    }

    pub fn next_dist(&mut self) -> Result<EnsembleDist> {
        let members = self
            .members
            .iter_mut()
            .enumerate()
            .map(|(i, s)| s.next_dist().map_err(member_err(i)))
            .collect::<Result<Vec<_>>>()?;
        let views: Vec<&[f64]> = members.iter().map(|d| d.probs.as_slice()).collect();
        let probs = combine(self.mode, &views)?;
        Ok(EnsembleDist { probs, members })
    }

    pub fn step(&mut self, y: TokenId) -> Result<()> {
        for (i, s) in self.members.iter_mut().enumerate() {
            s.step(y).map_err(member_err(i))?;
        }
        Ok(())
    }

    pub fn generate(&mut self, decoding: Decoding, max_steps: usize) -> Result<Vec<TokenId>> {
        self.generate_with(decoding, max_steps, |_, _, _| Ok(()))
    }

    pub fn generate_with<F>(&mut self, decoding: Decoding, max_steps: usize, mut on_step: F) -> Result<Vec<TokenId>>
    where
        F: FnMut(usize, TokenId, &EnsembleDist) -> Result<()>,
    {
        let mut picker = decoding.picker();
        let mut out = Vec::new();
        for step in 0..max_steps {
            if self.is_terminated() {
                break;
            }
            let dist = self.next_dist()?;
            let y = picker.pick(&dist.probs)?;
            on_step(step, y, &dist)?;
            self.step(y)?;
            out.push(y);
        }
        Ok(out)
    }
}

/// Union of surfaces: the first vocabulary's order, then unseen surfaces of
/// later vocabularies in their order.
pub fn union_vocab(vocabs: &[&Vocabulary]) -> Result<Vocabulary> {
    let first = vocabs.first().ok_or(Error::EmptyEnsemble)?;
    let mut surfaces: Vec<Vec<u8>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in vocabs {
        if v.alphabet() != first.alphabet() {
            return Err(Error::VocabularyMismatch("vocabularies use different alphabets".into()));
        }
        for s in v.surfaces() {
            if seen.insert(s.clone()) {
                surfaces.push(s.clone());
            }
        }
    }
    Vocabulary::new(first.alphabet().clone(), surfaces)
}

/// Baseline ensemble over `V∪`: every member retokenizes `text` in its own
/// vocabulary, its next-token distribution is zero-extended to `union`, and
/// the extended distributions are combined.
pub fn union_baseline_dist(models: &[&dyn LanguageModel], union: &Vocabulary, text: &[u8], mode: Mode) -> Result<Vec<f64>> {
    let mut extended = Vec::with_capacity(models.len());
    for (i, m) in models.iter().enumerate() {
        let x = m.tokenizer().encode(text).map_err(member_err(i))?;
        let d = m.next_token_dist(&x).map_err(member_err(i))?;
        let mut e = vec![0.0; union.len()];
        for (id, s) in m.vocab().iter() {
            let u = union.id_of(s).ok_or_else(|| {
                Error::VocabularyMismatch(format!("token {:?} of member {i} is not in the union", escape_surface(s)))
            })?;
            e[u.index()] = d[id];
        }
        extended.push(e);
    }
    let views: Vec<&[f64]> = extended.iter().map(Vec::as_slice).collect();
    combine(mode, &views)
}

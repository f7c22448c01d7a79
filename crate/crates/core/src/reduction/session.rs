use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::{CoverEntry, Decoding, SubTokenDistribution, TopK};
use crate::error::{Error, Result};
use crate::model::LanguageModel;
use crate::tokenization::{DeterministicTokenizer, NestedTokenizer, TokenId, Tokenizer};

type Cover = Arc<Vec<CoverEntry>>;

struct Expansion {
    marginals: Vec<f64>,
    dropped: f64,
    sizes: Vec<usize>,
}

/// Stateful reduced model: the sampled sub-token prefix plus cover and
/// probability caches.
///
/// Cloning is cheap; covers are shared until modified.
#[derive(Clone)]
pub struct ReductionSession {
    model: Arc<dyn LanguageModel>,
    nt: Arc<NestedTokenizer>,
    topk: TopK,
    prefix: Vec<TokenId>,
    covers: HashMap<Vec<TokenId>, Cover>,
    // extension marginals p(x_{1:t} x *) keyed by x_{1:t}
    extensions: HashMap<Vec<TokenId>, Arc<Vec<f64>>>,
    last: Option<SubTokenDistribution>,
}

impl ReductionSession {
    pub fn new(model: Arc<dyn LanguageModel>, nt: Arc<NestedTokenizer>, topk: TopK) -> Result<Self> {
        if topk == TopK::Limit(0) {
            return Err(Error::InvalidTopK);
        }
        let (mv, ov) = (model.vocab(), nt.outer_vocab());
        if mv.alphabet() != ov.alphabet() || !mv.same_surfaces(ov) {
            return Err(Error::VocabularyMismatch(
                "nested tokenizer's outer vocabulary differs from the model's".into(),
            ));
        }
        let root = CoverEntry {
            seq: Vec::new(),
            marginal: 1.0,
            nested: Vec::new(),
        };
        Ok(ReductionSession {
            model,
            nt,
            topk,
            prefix: Vec::new(),
            covers: HashMap::from([(Vec::new(), Arc::new(vec![root]))]),
            extensions: HashMap::new(),
            last: None,
        })
    }

    /// Build the nested tokenizer from the model's own tokenizer and `inner`.
    pub fn with_inner(model: Arc<dyn LanguageModel>, inner: Arc<Tokenizer>, topk: TopK) -> Result<Self> {
        let nt = NestedTokenizer::new(model.tokenizer().clone(), inner)?;
        Self::new(model, Arc::new(nt), topk)
    }

    pub fn model(&self) -> &Arc<dyn LanguageModel> {
        &self.model
    }

    pub fn nested(&self) -> &Arc<NestedTokenizer> {
        &self.nt
    }

    pub fn inner(&self) -> &Tokenizer {
        self.nt.inner()
    }

    pub fn topk(&self) -> TopK {
        self.topk
    }

    /// Takes effect from the next expansion; cached covers are kept.
    pub fn set_topk(&mut self, topk: TopK) -> Result<()> {
        if topk == TopK::Limit(0) {
            return Err(Error::InvalidTopK);
        }
        self.topk = topk;
        Ok(())
    }

    pub fn prefix(&self) -> &[TokenId] {
        &self.prefix
    }

    pub fn text(&self) -> Result<Vec<u8>> {
        self.inner().decode(&self.prefix)
    }

    pub fn is_terminated(&self) -> bool {
        let eos = self.inner().vocab().eos();
        eos.is_some() && self.prefix.last().copied() == eos
    }

    /// Number of cached covers (for diagnostics).
    pub fn cached_covers(&self) -> usize {
        self.covers.len()
    }

    /// Distribution over `V_sub` after the current prefix, built with
    /// bucketed cover expansion and top-K pruning.
    pub fn next_dist(&mut self) -> Result<SubTokenDistribution> {
        self.compute(false)
    }

    /// Reference computation: one pass over the cover and over all of `V`
    /// per candidate sub-token, always exact.
    pub fn next_dist_naive(&mut self) -> Result<SubTokenDistribution> {
        self.compute(true)
    }

    fn compute(&mut self, naive: bool) -> Result<SubTokenDistribution> {
        if self.is_terminated() {
            return Err(Error::AfterEos);
        }
        let key = self.prefix.clone();
        let ex = self.expand(&key, naive)?;
        let dist = SubTokenDistribution::from_marginals(ex.marginals, ex.dropped, ex.sizes)?;
        self.last = Some(dist.clone());
        Ok(dist)
    }

    /// Append `y` to the prefix. Covers off the new path and all cached
    /// extension marginals are discarded.
    pub fn step(&mut self, y: TokenId) -> Result<()> {
        if self.is_terminated() {
            return Err(Error::AfterEos);
        }
        if !self.inner().vocab().contains_id(y) {
            return Err(Error::UnknownToken(y));
        }
        if self.last.is_none() {
            self.next_dist()?;
        }
        let mass = self.last.as_ref().map_or(0.0, |d| d.marginals[y.index()]);
        if mass.is_nan() || mass <= 0.0 {
            return Err(Error::ZeroProbabilityToken(y));
        }
        self.prefix.push(y);
        let prefix = &self.prefix;
        self.covers.retain(|k, _| prefix.starts_with(k));
        self.extensions.clear();
        self.last = None;
        Ok(())
    }

    /// Cover of `y`, expanding its cached parent if needed.
    pub fn relative_cover(&mut self, y: &[TokenId]) -> Result<Cover> {
        if let Some(c) = self.covers.get(y) {
            return Ok(c.clone());
        }
        let parent = match y.split_last() {
            Some((_, parent)) if self.covers.contains_key(parent) => parent,
            _ => return Err(Error::MissingCover(y.to_vec())),
        };
        self.expand(parent, false)?;
        self.covers
            .get(y)
            .cloned()
            .ok_or(Error::UnknownToken(y[y.len() - 1]))
    }

    pub fn generate(&mut self, decoding: Decoding, max_steps: usize) -> Result<Vec<TokenId>> {
        self.generate_with(decoding, max_steps, |_, _, _| Ok(()))
    }

    /// Generate up to `max_steps` sub-tokens, stopping after EOS. `on_step`
    /// sees the step index, the chosen token and the distribution it came from.
    pub fn generate_with<F>(&mut self, decoding: Decoding, max_steps: usize, mut on_step: F) -> Result<Vec<TokenId>>
    where
        F: FnMut(usize, TokenId, &SubTokenDistribution) -> Result<()>,
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

    fn expand(&mut self, key: &[TokenId], naive: bool) -> Result<Expansion> {
        let parent = self
            .covers
            .get(key)
            .cloned()
            .ok_or_else(|| Error::MissingCover(key.to_vec()))?;
        if let Some(eos) = self.inner().vocab().eos() {
            if key.contains(&eos) {
                return Err(Error::AfterEos);
            }
        }
        let (children, dropped) = if naive {
            (self.children_naive(key, &parent)?, 0.0)
        } else {
            self.children_bucketed(key, &parent)?
        };
        let marginals = children
            .iter()
            .map(|c| c.iter().map(|e| e.marginal).sum())
            .collect();
        let sizes = children.iter().map(Vec::len).collect();
        let mut child_key = key.to_vec();
        for (y, cover) in children.into_iter().enumerate() {
            child_key.push(TokenId::from_index(y));
            self.covers.insert(child_key.clone(), Arc::new(cover));
            child_key.pop();
        }
        Ok(Expansion {
            marginals,
            dropped,
            sizes,
        })
    }

    /// One pass over the parent cover, bucketing by the next sub-token, then
    /// one pass over the kept extensions of the exact-match entry.
    fn children_bucketed(&mut self, key: &[TokenId], parent: &[CoverEntry]) -> Result<(Vec<Vec<CoverEntry>>, f64)> {
        let k = key.len();
        let mut buckets = vec![Vec::new(); self.nt.inner_vocab().len()];
        let mut exact = None;
        for e in parent {
            match e.nested.get(k) {
                Some(y) => buckets[y.index()].push(e.clone()),
                None => exact = Some(e),
            }
        }
        let mut dropped = 0.0;
        if let Some(eq) = exact {
            self.check_canonical(key, eq)?;
            let ext = self.extension_marginals(eq)?;
            let mut kept: Vec<usize> = (0..ext.len()).filter(|&x| ext[x] > 0.0).collect();
            if let TopK::Limit(n) = self.topk {
                if kept.len() > n {
                    kept.select_nth_unstable_by(n - 1, |&a, &b| ext[b].total_cmp(&ext[a]).then(a.cmp(&b)));
                    let mut cut = kept.split_off(n);
                    cut.sort_unstable();
                    dropped = cut.iter().map(|&x| ext[x]).sum();
                    kept.sort_unstable();
                }
            }
            for x in kept {
                let x = TokenId::from_index(x);
                let sub = self.nt.nested_token(x)?;
                buckets[sub[0].index()].push(extend(eq, x, sub, ext[x.index()]));
            }
        }
        Ok((buckets, dropped))
    }

    fn children_naive(&mut self, key: &[TokenId], parent: &[CoverEntry]) -> Result<Vec<Vec<CoverEntry>>> {
        let k = key.len();
        let nt = self.nt.clone();
        let outer = nt.outer();
        let mut children = Vec::new();
        for y in nt.inner_vocab().ids() {
            let mut child = Vec::new();
            for e in parent {
                if e.nested.len() > k && e.nested[k] == y {
                    child.push(e.clone());
                }
            }
            for eq in parent.iter().filter(|e| e.nested.len() == k) {
                self.check_canonical(key, eq)?;
                let ext = self.extension_marginals(eq)?;
                let mut seq = eq.seq.clone();
                for x in outer.vocab().ids() {
                    let sub = nt.nested_token(x)?;
                    if ext[x.index()] <= 0.0 || sub[0] != y {
                        continue;
                    }
                    seq.push(x);
                    if outer.is_valid(&seq) {
                        child.push(extend(eq, x, sub, ext[x.index()]));
                    }
                    seq.pop();
                }
            }
            children.push(child);
        }
        Ok(children)
    }

    fn check_canonical(&self, key: &[TokenId], eq: &CoverEntry) -> Result<()> {
        let canonical = self.nt.canonical(key)?;
        if canonical != eq.seq {
            return Err(Error::InconsistentCover {
                canonical,
                entry: eq.seq.clone(),
            });
        }
        Ok(())
    }

    fn extension_marginals(&mut self, eq: &CoverEntry) -> Result<Arc<Vec<f64>>> {
        if let Some(ext) = self.extensions.get(&eq.seq) {
            return Ok(ext.clone());
        }
        let dist = self.model.next_token_dist(&eq.seq)?;
        let ext: Arc<Vec<f64>> = Arc::new(dist.probs().iter().map(|p| eq.marginal * p).collect());
        self.extensions.insert(eq.seq.clone(), ext.clone());
        Ok(ext)
    }
}

fn extend(eq: &CoverEntry, x: TokenId, sub: &[TokenId], marginal: f64) -> CoverEntry {
    let mut seq = Vec::with_capacity(eq.seq.len() + 1);
    seq.extend_from_slice(&eq.seq);
    seq.push(x);
    let mut nested = Vec::with_capacity(eq.nested.len() + sub.len());
    nested.extend_from_slice(&eq.nested);
    nested.extend_from_slice(sub);
    CoverEntry { seq, marginal, nested }
}

impl fmt::Debug for ReductionSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReductionSession")
            .field("topk", &self.topk)
            .field("prefix", &self.prefix)
            .field("cached_covers", &self.covers.len())
            .finish_non_exhaustive()
    }
}

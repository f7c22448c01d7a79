//! Brute-force text-level probabilities for small instances.
//!
//! Three independent routes to `p(a_{1:N} *)`, the probability that a
//! generated text starts with `a_{1:N}`:
//!
//! * cover: enumerate every token sequence minimally covering the text, keep
//!   the valid ones and sum their marginals;
//! * enumeration: walk the token tree of any next-token source, pruning zero
//!   mass, and credit each node to the texts it just reaches past;
//! * the same walk over a reduced model's sub-tokens.

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LanguageModel;
use crate::reduction::{NaiveRestriction, ReductionSession, TopK};
use crate::tokenization::io::escape_surface;
use crate::tokenization::{DeterministicTokenizer, NestedTokenizer, TokenId, Tokenizer, Vocabulary};

pub const DEFAULT_BUDGET: u64 = 2_000_000;

/// Anything that produces next-token distributions along a growing prefix.
pub trait SubTokenCursor: Clone {
    fn vocab(&self) -> &Vocabulary;
    fn dist(&mut self) -> Result<Vec<f64>>;
    fn advance(&mut self, y: TokenId) -> Result<()>;
}

impl SubTokenCursor for ReductionSession {
    fn vocab(&self) -> &Vocabulary {
        self.inner().vocab()
    }

    fn dist(&mut self) -> Result<Vec<f64>> {
        Ok(self.next_dist()?.probs)
    }

    fn advance(&mut self, y: TokenId) -> Result<()> {
        self.step(y)
    }
}

impl SubTokenCursor for NaiveRestriction {
    fn vocab(&self) -> &Vocabulary {
        self.nested().inner_vocab()
    }

    fn dist(&mut self) -> Result<Vec<f64>> {
        Ok(self.next_dist()?.probs)
    }

    fn advance(&mut self, y: TokenId) -> Result<()> {
        self.step(y)
    }
}

/// The unreduced model as a cursor.
#[derive(Clone)]
pub struct ModelCursor {
    model: Arc<dyn LanguageModel>,
    prefix: Vec<TokenId>,
}

impl ModelCursor {
    pub fn new(model: Arc<dyn LanguageModel>) -> Self {
        ModelCursor {
            model,
            prefix: Vec::new(),
        }
    }
}

impl SubTokenCursor for ModelCursor {
    fn vocab(&self) -> &Vocabulary {
        self.model.vocab()
    }

    fn dist(&mut self) -> Result<Vec<f64>> {
        Ok(self.model.next_token_dist(&self.prefix)?.into_vec())
    }

    fn advance(&mut self, y: TokenId) -> Result<()> {
        self.prefix.push(y);
        Ok(())
    }
}

struct Counter {
    limit: u64,
    used: u64,
}

impl Counter {
    fn new(limit: u64) -> Self {
        Counter { limit, used: 0 }
    }

    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.limit {
            return Err(Error::BudgetExceeded(self.limit));
        }
        Ok(())
    }
}

/// Valid token sequences whose decoding reaches `text` and whose proper
/// prefixes do not.
pub fn minimal_cover(tokenizer: &Tokenizer, text: &[u8], budget: u64) -> Result<Vec<Vec<TokenId>>> {
    if text.is_empty() {
        return Ok(vec![Vec::new()]);
    }
    fn walk(
        tok: &Tokenizer,
        text: &[u8],
        pos: usize,
        seq: &mut Vec<TokenId>,
        out: &mut Vec<Vec<TokenId>>,
        counter: &mut Counter,
    ) -> Result<()> {
        let rest = &text[pos..];
        for (x, s) in tok.vocab().iter() {
            let n = s.len().min(rest.len());
            if s[..n] != rest[..n] {
                continue;
            }
            counter.tick()?;
            seq.push(x);
            if s.len() >= rest.len() {
                out.push(seq.clone());
            } else {
                walk(tok, text, pos + s.len(), seq, out, counter)?;
            }
            seq.pop();
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(tokenizer, text, 0, &mut Vec::new(), &mut out, &mut Counter::new(budget))?;
    out.retain(|x| tokenizer.is_valid(x));
    Ok(out)
}

/// Prefix probabilities through minimal covers, memoizing token marginals
/// across queries.
pub struct CoverOracle {
    model: Arc<dyn LanguageModel>,
    budget: u64,
    conditionals: HashMap<Vec<TokenId>, Arc<Vec<f64>>>,
    marginals: HashMap<Vec<TokenId>, f64>,
}

impl CoverOracle {
    pub fn new(model: Arc<dyn LanguageModel>, budget: u64) -> Self {
        CoverOracle {
            model,
            budget,
            conditionals: HashMap::new(),
            marginals: HashMap::new(),
        }
    }

    pub fn prefix_prob(&mut self, text: &[u8]) -> Result<f64> {
        let cover = minimal_cover(self.model.tokenizer(), text, self.budget)?;
        let mut total = 0.0;
        for x in &cover {
            total += self.marginal(x)?;
        }
        Ok(total)
    }

    /// `p(x *)` for a valid `x`, as a product of conditionals.
    pub fn marginal(&mut self, x: &[TokenId]) -> Result<f64> {
        if x.is_empty() {
            return Ok(1.0);
        }
        if let Some(&m) = self.marginals.get(x) {
            return Ok(m);
        }
        let (last, head) = x.split_last().expect("nonempty");
        let eos = self.model.vocab().eos();
        let m = if head.last().is_some() && head.last().copied() == eos {
            0.0
        } else {
            let parent = self.marginal(head)?;
            if parent == 0.0 {
                0.0
            } else {
                parent * self.conditional(head)?[last.index()]
            }
        };
        self.marginals.insert(x.to_vec(), m);
        Ok(m)
    }

    fn conditional(&mut self, prefix: &[TokenId]) -> Result<Arc<Vec<f64>>> {
        if let Some(c) = self.conditionals.get(prefix) {
            return Ok(c.clone());
        }
        let c = Arc::new(self.model.next_token_dist(prefix)?.into_vec());
        self.conditionals.insert(prefix.to_vec(), c.clone());
        Ok(c)
    }
}

/// Sum of `model.marginal` over the minimal cover of `text`.
pub fn text_prefix_prob(model: &dyn LanguageModel, text: &[u8], budget: u64) -> Result<f64> {
    let mut total = 0.0;
    for x in minimal_cover(model.tokenizer(), text, budget)? {
        total += model.marginal(&x)?;
    }
    Ok(total)
}

/// Prefix probability of `text` under the source behind `cursor`, summing
/// over its token sequences that minimally cover the text. The cursor's
/// own distributions decide which sequences carry mass; nothing is filtered
/// for validity.
pub fn cursor_text_prefix_prob<C: SubTokenCursor>(cursor: &C, text: &[u8], budget: u64) -> Result<f64> {
    fn walk<C: SubTokenCursor>(
        cur: &C,
        text: &[u8],
        pos: usize,
        mass: f64,
        counter: &mut Counter,
    ) -> Result<f64> {
        let mut cur = cur.clone();
        let dist = cur.dist()?;
        let eos = cur.vocab().eos();
        let rest = &text[pos..];
        let mut total = 0.0;
        for (y, s) in cur.vocab().iter() {
            let p = dist[y.index()];
            let n = s.len().min(rest.len());
            if p == 0.0 || s[..n] != rest[..n] {
                continue;
            }
            counter.tick()?;
            let m = mass * p;
            if s.len() >= rest.len() {
                total += m;
            } else if Some(y) != eos {
                let mut child = cur.clone();
                child.advance(y)?;
                total += walk(&child, text, pos + s.len(), m, counter)?;
            }
        }
        Ok(total)
    }
    if text.is_empty() {
        return Ok(1.0);
    }
    walk(cursor, text, 0, 1.0, &mut Counter::new(budget))
}

/// `p(t *)` for every text `t` of length at most `max_len`, from one walk
/// over the cursor's token tree. Unreached texts are absent (probability 0).
pub fn prefix_table<C: SubTokenCursor>(cursor: &C, max_len: usize, budget: u64) -> Result<HashMap<Vec<u8>, f64>> {
    fn walk<C: SubTokenCursor>(
        cur: &mut C,
        decoded: &mut Vec<u8>,
        mass: f64,
        max_len: usize,
        table: &mut HashMap<Vec<u8>, f64>,
        counter: &mut Counter,
    ) -> Result<()> {
        let dist = cur.dist()?;
        let eos = cur.vocab().eos();
        let base = decoded.len();
        for y in cur.vocab().ids() {
            let p = dist[y.index()];
            if p == 0.0 {
                continue;
            }
            counter.tick()?;
            let m = mass * p;
            decoded.extend_from_slice(cur.vocab().surface(y)?);
            for end in base + 1..=decoded.len().min(max_len) {
                *table.entry(decoded[..end].to_vec()).or_insert(0.0) += m;
            }
            if decoded.len() < max_len && Some(y) != eos {
                let mut child = cur.clone();
                child.advance(y)?;
                walk(&mut child, decoded, m, max_len, table, counter)?;
            }
            decoded.truncate(base);
        }
        Ok(())
    }
    let mut table = HashMap::from([(Vec::new(), 1.0)]);
    if max_len > 0 {
        let mut root = cursor.clone();
        walk(&mut root, &mut Vec::new(), 1.0, max_len, &mut table, &mut Counter::new(budget))?;
    }
    Ok(table)
}

/// Every text over `symbols` of length at most `max_len`, shortest first.
pub fn all_texts(symbols: &[u8], max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * symbols.len());
        for t in &layer {
            for &a in symbols {
                let mut u: Vec<u8> = t.clone();
                u.push(a);
                next.push(u);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PrefixProbRow {
    pub text: String,
    /// Minimal-cover formula on the original model.
    pub cover: f64,
    /// Token-tree enumeration on the original model.
    pub enumerated: f64,
    /// Token-tree enumeration on the reduced model.
    pub reduced: f64,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PrefixProbReport {
    pub instance: String,
    pub max_len: usize,
    pub tol: f64,
    pub texts: usize,
    /// Largest `|reduced - original|` over both original routes.
    pub max_discrepancy: f64,
    /// Largest disagreement between the two original routes.
    pub oracle_discrepancy: f64,
    pub worst_text: String,
    pub pass: bool,
    pub rows: Vec<PrefixProbRow>,
}

#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    pub max_len: usize,
    pub tol: f64,
    pub budget: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            max_len: 5,
            tol: 1e-9,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Compare prefix probabilities of `model` and `reduced` on every text up to
/// `opts.max_len` over the model's alphabet.
pub fn lossless_check_with<C: SubTokenCursor>(
    model: Arc<dyn LanguageModel>,
    reduced: &C,
    opts: &CheckOptions,
    instance: String,
) -> Result<PrefixProbReport> {
    let symbols = model.vocab().alphabet().symbols().to_vec();
    let n_texts: u64 = (0..=opts.max_len as u32)
        .map(|i| (symbols.len() as u64).saturating_pow(i))
        .fold(0u64, u64::saturating_add);
    if n_texts > opts.budget {
        return Err(Error::BudgetExceeded(opts.budget));
    }
    let original = prefix_table(&ModelCursor::new(model.clone()), opts.max_len, opts.budget)?;
    let reduced_table = prefix_table(reduced, opts.max_len, opts.budget)?;
    let mut covers = CoverOracle::new(model, opts.budget);

    let mut rows = Vec::with_capacity(n_texts as usize);
    let (mut max_d, mut oracle_d, mut worst) = (0.0f64, 0.0f64, String::new());
    for text in all_texts(&symbols, opts.max_len) {
        let cover = covers.prefix_prob(&text)?;
        let enumerated = original.get(&text).copied().unwrap_or(0.0);
        let red = reduced_table.get(&text).copied().unwrap_or(0.0);
        let d = (red - cover).abs().max((red - enumerated).abs());
        let shown = escape_surface(&text);
        if d > max_d {
            max_d = d;
            worst = shown.clone();
        }
        oracle_d = oracle_d.max((cover - enumerated).abs());
        rows.push(PrefixProbRow {
            text: shown,
            cover,
            enumerated,
            reduced: red,
            discrepancy: d,
        });
    }
    Ok(PrefixProbReport {
        instance,
        max_len: opts.max_len,
        tol: opts.tol,
        texts: rows.len(),
        max_discrepancy: max_d,
        oracle_discrepancy: oracle_d,
        worst_text: worst,
        pass: max_d <= opts.tol && oracle_d <= opts.tol,
        rows,
    })
}

/// [`lossless_check_with`] for an exact reduction session.
pub fn lossless_check(
    model: Arc<dyn LanguageModel>,
    nt: Arc<NestedTokenizer>,
    opts: &CheckOptions,
) -> Result<PrefixProbReport> {
    let session = ReductionSession::new(model.clone(), nt.clone(), TopK::Exact)?;
    let desc = describe(&nt);
    lossless_check_with(model, &session, opts, desc)
}

fn describe(nt: &NestedTokenizer) -> String {
    let list = |v: &Vocabulary| {
        v.surfaces()
            .iter()
            .map(|s| escape_surface(s))
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!("|V|={} |V_sub|={} V_sub=[{}]", nt.outer_vocab().len(), nt.inner_vocab().len(), list(nt.inner_vocab()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worked_example;

    #[test]
    fn worked_example_covers() {
        let ex = worked_example();
        let cover = |t: &str| minimal_cover(&ex.outer, t.as_bytes(), DEFAULT_BUDGET).unwrap();
        assert_eq!(cover("00"), [vec![TokenId(2)], vec![TokenId(3)]]);
        assert_eq!(cover(""), [Vec::<TokenId>::new()]);
        assert_eq!(cover("1"), [vec![TokenId(1)]]);
    }

    #[test]
    fn worked_example_prefix_probs() {
        let ex = worked_example();
        let session = ex.session(TopK::Exact);
        assert!((text_prefix_prob(&ex.model, b"000", DEFAULT_BUDGET).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(text_prefix_prob(&ex.model, b"", DEFAULT_BUDGET).unwrap(), 1.0);
        assert!((cursor_text_prefix_prob(&session, b"000", DEFAULT_BUDGET).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(cursor_text_prefix_prob(&session, b"", DEFAULT_BUDGET).unwrap(), 1.0);
        assert!((cursor_text_prefix_prob(&session, b"1", DEFAULT_BUDGET).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn routes_agree_on_001() {
        let ex = worked_example();
        let cover = text_prefix_prob(&ex.model, b"001", DEFAULT_BUDGET).unwrap();
        let tree = cursor_text_prefix_prob(&ModelCursor::new(ex.model_arc()), b"001", DEFAULT_BUDGET).unwrap();
        // ⟨00⟩⟨1⟩ and ⟨0⟩⟨0⟩⟨1⟩ are invalid, leaving ⟨001⟩
        assert!((cover - 0.3).abs() < 1e-12);
        assert!((tree - cover).abs() < 1e-12);
    }

    #[test]
    fn worked_example_is_lossless_and_naive_is_not() {
        let ex = worked_example();
        let opts = CheckOptions {
            max_len: 3,
            ..CheckOptions::default()
        };
        let report = lossless_check(ex.model_arc(), ex.nested.clone(), &opts).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.texts, 15);

        let naive = NaiveRestriction::new(ex.model_arc(), ex.nested.clone()).unwrap();
        let report = lossless_check_with(ex.model_arc(), &naive, &opts, "naive".into()).unwrap();
        assert!(!report.pass);
        assert!(report.max_discrepancy > 1e-3);
    }

    #[test]
    fn identity_reduction_passes() {
        let ex = worked_example();
        let id = Arc::new(NestedTokenizer::new(ex.outer.clone(), ex.outer.clone()).unwrap());
        let opts = CheckOptions {
            max_len: 4,
            ..CheckOptions::default()
        };
        assert!(lossless_check(ex.model_arc(), id, &opts).unwrap().pass);
    }

    #[test]
    fn budget_is_enforced() {
        let ex = worked_example();
        let opts = CheckOptions {
            max_len: 4,
            budget: 10,
            ..CheckOptions::default()
        };
        assert!(matches!(
            lossless_check(ex.model_arc(), ex.nested.clone(), &opts),
            Err(Error::BudgetExceeded(10))
        ));
        assert!(matches!(
            minimal_cover(&ex.outer, b"0000000", 3),
            Err(Error::BudgetExceeded(3))
        ));
    }

    #[test]
    fn all_texts_counts() {
        assert_eq!(all_texts(b"01", 3).len(), 15);
        assert_eq!(all_texts(b"abc", 0), [Vec::<u8>::new()]);
    }
}

//! Small hand-built and randomized instances for tests, benchmarks and demos.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::model::{LanguageModel, TableModel};
use crate::reduction::{ReductionSession, TopK};
use crate::tokenization::io::SurfaceMerge;
use crate::tokenization::{
    Alphabet, BpeTokenizer, DeterministicTokenizer, NestedTokenizer, TokenId, Tokenizer, Vocabulary,
};

pub const EOS: u8 = b'$';

/// Binary alphabet, `V = {0, 1, 00, 001}` and `V_sub = {0, 1, 00}`, both
/// greedy, with a two-row table model and a uniform fallback.
pub struct WorkedExample {
    pub outer: Arc<Tokenizer>,
    pub inner: Arc<Tokenizer>,
    pub nested: Arc<NestedTokenizer>,
    pub model: TableModel,
}

impl WorkedExample {
    pub fn model_arc(&self) -> Arc<dyn LanguageModel> {
        Arc::new(self.model.clone())
    }

    pub fn session(&self, topk: TopK) -> ReductionSession {
        ReductionSession::new(self.model_arc(), self.nested.clone(), topk).expect("fixture is consistent")
    }
}

pub fn worked_example() -> WorkedExample {
    let greedy = |surfaces: &[&str]| {
        let v = Vocabulary::new(Alphabet::binary(), surfaces.iter().map(|s| s.as_bytes().to_vec()).collect())
            .expect("fixture vocabulary");
        Arc::new(Tokenizer::greedy(v).expect("complete"))
    };
    let outer = greedy(&["0", "1", "00", "001"]);
    let inner = greedy(&["0", "1", "00"]);
    let nested = Arc::new(NestedTokenizer::new(outer.clone(), inner.clone()).expect("nested"));
    let model = TableModel::uniform(outer.clone())
        .with_entry(vec![], vec![0.1, 0.1, 0.5, 0.3])
        .and_then(|m| m.with_entry(vec![TokenId(2)], vec![0.6, 0.0, 0.3, 0.1]))
        .expect("fixture rows");
    WorkedExample {
        outer,
        inner,
        nested,
        model,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenizerKind {
    Greedy,
    Bpe,
}

#[derive(Clone, Debug)]
pub struct InstanceConfig {
    /// Content symbols, excluding EOS.
    pub symbols: usize,
    /// Upper bound on `|V|`, counting EOS and single symbols.
    pub max_vocab: usize,
    pub max_token_len: usize,
    pub kind: TokenizerKind,
    /// Prefixes with at most this many tokens get their own table row.
    pub table_depth: usize,
    /// Chance that a raw table probability is zero.
    pub zero_prob: f64,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            symbols: 2,
            max_vocab: 8,
            max_token_len: 3,
            kind: TokenizerKind::Greedy,
            table_depth: 2,
            zero_prob: 0.2,
        }
    }
}

/// A random model over `V` with a random complete sub-vocabulary.
#[derive(Clone)]
pub struct Instance {
    pub alphabet: Alphabet,
    pub outer: Arc<Tokenizer>,
    pub inner: Arc<Tokenizer>,
    pub nested: Arc<NestedTokenizer>,
    pub model: Arc<TableModel>,
}

impl std::fmt::Debug for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.describe())
    }
}

impl Instance {
    pub fn model_arc(&self) -> Arc<dyn LanguageModel> {
        self.model.clone()
    }

    pub fn session(&self, topk: TopK) -> ReductionSession {
        ReductionSession::new(self.model_arc(), self.nested.clone(), topk).expect("instance is consistent")
    }

    /// Same model, with `V_sub` the single symbols.
    pub fn byte_level(&self) -> Instance {
        let inner = Arc::new(Tokenizer::greedy(Vocabulary::single_symbols(&self.alphabet)).expect("complete"));
        let nested = Arc::new(NestedTokenizer::new(self.outer.clone(), inner.clone()).expect("nested"));
        Instance {
            inner,
            nested,
            ..self.clone()
        }
    }

    pub fn describe(&self) -> String {
        let show = |t: &Tokenizer| {
            t.vocab()
                .surfaces()
                .iter()
                .map(|s| String::from_utf8_lossy(s).into_owned())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "{} V=[{}] V_sub=[{}]",
            match &*self.outer {
                Tokenizer::Greedy(_) => "greedy",
                Tokenizer::Bpe(_) => "bpe",
            },
            show(&self.outer),
            show(&self.inner)
        )
    }
}

pub fn alphabet_of(symbols: usize) -> Alphabet {
    let content: &[u8] = match symbols {
        0..=2 => b"01",
        _ => &b"abcdefgh"[..symbols.min(8)],
    };
    Alphabet::from_symbols(content.iter().copied()).with_eos(EOS)
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, cfg: &InstanceConfig) -> Instance {
    let alphabet = alphabet_of(cfg.symbols);
    let content: Vec<u8> = alphabet.symbols().iter().copied().filter(|&b| b != EOS).collect();
    let singles = alphabet.len();
    let extra = rng.random_range(1..=cfg.max_vocab.saturating_sub(singles).max(1));

    let (outer, inner) = match cfg.kind {
        TokenizerKind::Greedy => {
            let mut multi: Vec<Vec<u8>> = Vec::new();
            let mut tries = 0;
            while multi.len() < extra && tries < 100 {
                tries += 1;
                let len = rng.random_range(2..=cfg.max_token_len.max(2));
                let s: Vec<u8> = (0..len).map(|_| content[rng.random_range(0..content.len())]).collect();
                if !multi.contains(&s) {
                    multi.push(s);
                }
            }
            let sub: Vec<Vec<u8>> = multi.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
            let vocab = |extra: &[Vec<u8>]| {
                let mut surfaces = Vocabulary::single_symbols(&alphabet).surfaces().to_vec();
                surfaces.extend_from_slice(extra);
                Vocabulary::new(alphabet.clone(), surfaces).expect("distinct surfaces")
            };
            (
                Tokenizer::greedy(vocab(&multi)).expect("complete"),
                Tokenizer::greedy(vocab(&sub)).expect("complete"),
            )
        }
        TokenizerKind::Bpe => {
            let merges = random_merges(rng, &content, extra, cfg.max_token_len.max(2) + 1);
            let keep: Vec<bool> = merges.iter().map(|_| rng.random_bool(0.5)).collect();
            let outer = bpe_from_merges(&alphabet, &merges);
            let mut sub_surfaces: Vec<Vec<u8>> = Vocabulary::single_symbols(&alphabet).surfaces().to_vec();
            for ((l, r), k) in merges.iter().zip(&keep) {
                if *k {
                    sub_surfaces.push([l.as_slice(), r.as_slice()].concat());
                }
            }
            let sub_merges: Vec<SurfaceMerge> = merges
                .iter()
                .filter(|(l, r)| {
                    let p = [l.as_slice(), r.as_slice()].concat();
                    [l, r, &p].iter().all(|s| sub_surfaces.contains(s))
                })
                .cloned()
                .collect();
            let inner_vocab = Vocabulary::new(alphabet.clone(), sub_surfaces).expect("distinct surfaces");
            (outer, Tokenizer::bpe(inner_vocab, &sub_merges).expect("well-formed merges"))
        }
    };
    let outer = Arc::new(outer);
    let inner = Arc::new(inner);
    let nested = Arc::new(NestedTokenizer::new(outer.clone(), inner.clone()).expect("V_sub ⊆ V"));
    let model = Arc::new(random_table(rng, outer.clone(), cfg.table_depth, cfg.zero_prob));
    Instance {
        alphabet,
        outer,
        inner,
        nested,
        model,
    }
}

/// Random merge list: each merge joins two existing non-EOS tokens into a new one.
pub fn random_merges<R: Rng + ?Sized>(rng: &mut R, content: &[u8], count: usize, max_len: usize) -> Vec<SurfaceMerge> {
    let mut tokens: Vec<Vec<u8>> = content.iter().map(|&b| vec![b]).collect();
    let mut merges = Vec::new();
    let mut tries = 0;
    while merges.len() < count && tries < 200 {
        tries += 1;
        let l = tokens[rng.random_range(0..tokens.len())].clone();
        let r = tokens[rng.random_range(0..tokens.len())].clone();
        let p = [l.as_slice(), r.as_slice()].concat();
        if p.len() > max_len || tokens.contains(&p) {
            continue;
        }
        tokens.push(p);
        merges.push((l, r));
    }
    merges
}

/// BPE tokenizer whose vocabulary is the single symbols plus every merge product.
pub fn bpe_from_merges(alphabet: &Alphabet, merges: &[SurfaceMerge]) -> Tokenizer {
    let mut surfaces = Vocabulary::single_symbols(alphabet).surfaces().to_vec();
    for (l, r) in merges {
        let p = [l.as_slice(), r.as_slice()].concat();
        if !surfaces.contains(&p) {
            surfaces.push(p);
        }
    }
    let vocab = Vocabulary::new(alphabet.clone(), surfaces).expect("distinct surfaces");
    Tokenizer::Bpe(BpeTokenizer::from_surface_merges(vocab, merges).expect("well-formed merges"))
}

/// Table model with a random row for every valid prefix of at most `depth`
/// tokens and a random fallback row. EOS always keeps positive mass, so no
/// masked row is ever empty.
pub fn random_table<R: Rng + ?Sized>(rng: &mut R, tokenizer: Arc<Tokenizer>, depth: usize, zero_prob: f64) -> TableModel {
    let n = tokenizer.vocab().len();
    let eos = tokenizer.vocab().eos();
    let row = |rng: &mut R| {
        let mut p: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(zero_prob) { 0.0 } else { rng.random::<f64>() })
            .collect();
        if let Some(e) = eos {
            p[e.index()] = p[e.index()].max(0.05);
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    };
    let default = row(rng);
    let mut model = TableModel::new(tokenizer.clone(), default).expect("normalized row");
    let mut stack = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        model.insert(prefix.clone(), row(rng)).expect("normalized row");
        if prefix.len() == depth {
            continue;
        }
        let valid = tokenizer.valid_continuations(&prefix).expect("valid prefix");
        for x in tokenizer.vocab().ids() {
            if valid[x.index()] && Some(x) != eos {
                let mut next = prefix.clone();
                next.push(x);
                stack.push(next);
            }
        }
    }
    model
}

/// Fixed English-like corpus over [`toy_alphabet`], one document per entry.
pub fn toy_corpus() -> Vec<&'static str> {
    vec![
        "the cat sat on the mat",
        "the dog sat on the log",
        "the cat and the dog sat in the sun",
        "a cat sat on a hat",
        "the dog ran to the cat",
        "on the mat the cat sat and sat",
        "the log and the mat sat in the sun",
        "that hat is on the dog",
        "then the cat ran on the log",
        "the sun sat on the hat of the cat",
    ]
}

/// Symbols of [`toy_corpus`] plus the EOS symbol.
pub fn toy_alphabet() -> Alphabet {
    Alphabet::from_symbols(b"abcdefghijklmnopqrstuvwxyz ".iter().copied()).with_eos(EOS)
}

fn surface_merges(pairs: &[(&str, &str)]) -> Vec<SurfaceMerge> {
    pairs
        .iter()
        .map(|(l, r)| (l.as_bytes().to_vec(), r.as_bytes().to_vec()))
        .collect()
}

/// Two hand-built BPE tokenizers with ten merges each over `alphabet`, which
/// must contain the letters and the space.
pub fn toy_bpe_pair(alphabet: &Alphabet) -> (Tokenizer, Tokenizer) {
    let a = surface_merges(&[
        ("t", "h"),
        ("th", "e"),
        ("a", "t"),
        ("o", "n"),
        ("s", "at"),
        ("c", "at"),
        ("the", " "),
        ("o", "g"),
        ("m", "at"),
        ("e", "d"),
    ]);
    let b = surface_merges(&[
        ("t", "h"),
        ("a", "t"),
        ("th", "e"),
        ("o", "g"),
        ("d", "og"),
        ("l", "og"),
        ("o", "n"),
        (" ", "the"),
        ("s", "at"),
        ("i", "n"),
    ]);
    (bpe_from_merges(alphabet, &a), bpe_from_merges(alphabet, &b))
}

/// Random text over the content symbols of `alphabet` (EOS excluded).
pub fn random_text<R: Rng + ?Sized>(rng: &mut R, alphabet: &Alphabet, max_len: usize) -> Vec<u8> {
    let content: Vec<u8> = alphabet
        .symbols()
        .iter()
        .copied()
        .filter(|&b| Some(b) != alphabet.eos())
        .collect();
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| *content.choose(rng).expect("nonempty alphabet")).collect()
}

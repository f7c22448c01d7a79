//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::{BTreeSet, HashSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lvr_core::bench;
use lvr_core::ensemble::{poe_combine, union_baseline_dist, union_vocab, Ensemble, Mode};
use lvr_core::fixtures::{
    random_instance, random_text, toy_alphabet, toy_bpe_pair, toy_corpus, worked_example, Instance, InstanceConfig,
    TokenizerKind,
};
use lvr_core::mcv::build_mcv;
use lvr_core::model::{NgramModel, TableModel};
use lvr_core::oracle::{
    cursor_text_prefix_prob, lossless_check, lossless_check_with, text_prefix_prob, CheckOptions, CoverOracle,
    ModelCursor, DEFAULT_BUDGET,
};
use lvr_core::reduction::NaiveRestriction;
use lvr_core::{
    Alphabet, Decoding, DeterministicTokenizer, Error, LanguageModel, ReductionSession, TokenId, Tokenizer, TopK,
    Vocabulary,
};

type Outcome = Result<String, String>;
type Model = Arc<dyn LanguageModel>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn t(ids: &[u32]) -> Vec<TokenId> {
    ids.iter().map(|&i| TokenId(i)).collect()
}

fn cover_set(s: &mut ReductionSession, y: &[TokenId]) -> Result<BTreeSet<Vec<TokenId>>, String> {
    Ok(s.relative_cover(y).map_err(e)?.iter().map(|c| c.seq.clone()).collect())
}

fn instance(rng: &mut ChaCha8Rng, symbols: usize, kind: TokenizerKind) -> Instance {
    let cfg = InstanceConfig {
        symbols,
        kind,
        ..InstanceConfig::default()
    };
    random_instance(rng, &cfg)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let ex = worked_example();
    let mut s = ex.session(TopK::Exact);
    // V_sub ids: 0 = "0", 1 = "1", 2 = "00"; V ids: 2 = "00", 3 = "001"
    let d0 = s.next_dist().map_err(e)?;
    ensure(close(&d0.probs, &[0.1, 0.1, 0.8], 1e-12), || format!("p̃(y_0) = {:?}", d0.probs))?;

    let want = |seqs: &[&[u32]]| seqs.iter().map(|q| t(q)).collect::<BTreeSet<_>>();
    let c = cover_set(&mut s, &t(&[2]))?;
    ensure(c == want(&[&[2], &[3]]), || format!("C(<00>) = {c:?}"))?;

    s.step(TokenId(2)).map_err(e)?;
    let d1 = s.next_dist().map_err(e)?;
    ensure(close(&d1.marginals, &[0.3, 0.3, 0.2], 1e-12), || format!("unnormalized {:?}", d1.marginals))?;
    ensure(close(&d1.probs, &[0.375, 0.375, 0.25], 1e-12), || format!("normalized {:?}", d1.probs))?;
    let c = cover_set(&mut s, &t(&[2, 1]))?;
    ensure(c == want(&[&[3]]), || format!("C(<00><1>) = {c:?}"))?;
    let c = cover_set(&mut s, &t(&[2, 2]))?;
    ensure(c == want(&[&[2, 2], &[2, 3]]), || format!("C(<00><00>) = {c:?}"))?;

    let original = text_prefix_prob(&ex.model, b"000", DEFAULT_BUDGET).map_err(e)?;
    let reduced = cursor_text_prefix_prob(&ex.session(TopK::Exact), b"000", DEFAULT_BUDGET).map_err(e)?;
    ensure((original - 0.5).abs() <= 1e-12 && (reduced - 0.5).abs() <= 1e-12, || {
        format!("p(000*) original {original}, reduced {reduced}")
    })?;

    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 1.0, || format!("took {secs:.3}s"))?;
    Ok(format!("all values within 1e-12, p(000*) = 0.5 both ways, {:.1} ms", secs * 1e3))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let opts = CheckOptions {
        max_len: 5,
        tol: 1e-9,
        budget: DEFAULT_BUDGET,
    };
    let (mut worst, mut texts) = (0.0f64, 0usize);
    for i in 0..100 {
        let symbols = if i % 2 == 0 { 2 } else { 4 };
        let kind = if i % 4 < 2 { TokenizerKind::Greedy } else { TokenizerKind::Bpe };
        let inst = instance(&mut rng, symbols, kind);
        ensure(inst.outer.vocab().len() <= 8, || format!("instance {i} has |V| = {}", inst.outer.vocab().len()))?;
        let r = lossless_check(inst.model_arc(), inst.nested.clone(), &opts).map_err(e)?;
        ensure(r.pass, || {
            format!("instance {i} ({}): discrepancy {:.3e} at {:?}", inst.describe(), r.max_discrepancy, r.worst_text)
        })?;
        worst = worst.max(r.max_discrepancy).max(r.oracle_discrepancy);
        texts += r.texts;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("100 instances, {texts} texts, max discrepancy {worst:.2e}, {secs:.1}s"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut steps = 0;
    for g in 0..50 {
        let kind = if g % 2 == 0 { TokenizerKind::Greedy } else { TokenizerKind::Bpe };
        let inst = instance(&mut rng, if g % 3 == 0 { 4 } else { 2 }, kind);
        let full = TopK::Limit(inst.outer.vocab().len());
        let mut fast = inst.session(full);
        let mut slow = inst.session(TopK::Exact);
        let mut picker = Decoding::Sample { seed: g }.picker();
        for _ in 0..8 {
            if fast.is_terminated() {
                break;
            }
            let a = fast.next_dist().map_err(e)?;
            let b = slow.next_dist_naive().map_err(e)?;
            ensure(close(&a.probs, &b.probs, 1e-12), || format!("generation {g}: {:?} vs {:?}", a.probs, b.probs))?;
            ensure(a.cover_sizes == b.cover_sizes, || format!("generation {g}: cover sizes differ"))?;
            for y in inst.inner.vocab().ids().filter(|y| a.marginals[y.index()] > 0.0) {
                let mut key = fast.prefix().to_vec();
                key.push(y);
                let (cf, cs) = (fast.relative_cover(&key).map_err(e)?, slow.relative_cover(&key).map_err(e)?);
                let same = cf.len() == cs.len()
                    && cf.iter().zip(cs.iter()).all(|(p, q)| p.seq == q.seq && (p.marginal - q.marginal).abs() <= 1e-12);
                ensure(same, || format!("generation {g}: covers of {key:?} differ"))?;
            }
            let y = picker.pick(&a.probs).map_err(e)?;
            fast.step(y).map_err(e)?;
            slow.step(y).map_err(e)?;
            steps += 1;
        }
    }
    Ok(format!("50 generations, {steps} steps, identical covers and p̃ within 1e-12"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0usize;
    for i in 0..20 {
        let kind = if i % 2 == 0 { TokenizerKind::Greedy } else { TokenizerKind::Bpe };
        let inst = instance(&mut rng, if i % 4 < 2 { 2 } else { 4 }, kind).byte_level();
        let mut oracle = CoverOracle::new(inst.model_arc(), DEFAULT_BUDGET);
        let symbols = inst.alphabet.symbols().to_vec();
        let eos = inst.alphabet.eos();
        // depth-first over texts with positive mass
        let mut stack = vec![(Vec::<u8>::new(), inst.session(TopK::Exact))];
        while let Some((text, mut s)) = stack.pop() {
            if text.len() == 5 || s.is_terminated() {
                continue;
            }
            let denom = oracle.prefix_prob(&text).map_err(e)?;
            let d = s.next_dist().map_err(e)?;
            for &a in &symbols {
                let y = inst.inner.vocab().id_of(&[a]).expect("single-symbol token");
                let mut next = text.clone();
                next.push(a);
                let ratio = oracle.prefix_prob(&next).map_err(e)? / denom;
                let got = d.probs[y.index()];
                ensure((got - ratio).abs() <= 1e-9, || {
                    format!("instance {i}: p({:?} | {:?}) = {got} vs ratio {ratio}", a as char, String::from_utf8_lossy(&text))
                })?;
                checked += 1;
                if got > 0.0 && Some(a) != eos {
                    let mut child = s.clone();
                    child.step(y).map_err(e)?;
                    stack.push((next, child));
                }
            }
        }
    }
    Ok(format!("20 instances, {checked} conditionals match prefix-probability ratios within 1e-9"))
}

fn criterion_5() -> Outcome {
    let ex = worked_example();
    let naive = NaiveRestriction::new(ex.model_arc(), ex.nested.clone()).map_err(e)?;
    let opts = CheckOptions::default();
    let r = lossless_check_with(ex.model_arc(), &naive, &opts, "restriction".into()).map_err(e)?;
    ensure(!r.pass && r.max_discrepancy > 1e-3, || format!("restriction discrepancy only {:.3e}", r.max_discrepancy))?;
    let exact = lossless_check(ex.model_arc(), ex.nested.clone(), &opts).map_err(e)?;
    ensure(exact.pass, || format!("exact reduction discrepancy {:.3e}", exact.max_discrepancy))?;
    Ok(format!(
        "restriction FAILS with discrepancy {:.3} at {:?}; exact reduction {:.1e}",
        r.max_discrepancy, r.worst_text, exact.max_discrepancy
    ))
}

fn criterion_6() -> Outcome {
    let alphabet = toy_alphabet();
    let (a, b) = toy_bpe_pair(&alphabet);
    let (ba, bb) = (a.as_bpe().expect("bpe"), b.as_bpe().expect("bpe"));
    ensure(a.vocab().is_complete() && b.vocab().is_complete(), || "inputs are not complete".into())?;
    let (mcv, tok) = build_mcv(&[ba, bb]).map_err(e)?;

    let sa: HashSet<&[u8]> = a.vocab().surfaces().iter().map(Vec::as_slice).collect();
    let sb: HashSet<&[u8]> = b.vocab().surfaces().iter().map(Vec::as_slice).collect();
    let want: HashSet<&[u8]> = sa.intersection(&sb).copied().collect();
    let got: HashSet<&[u8]> = mcv.vocab.surfaces().iter().map(Vec::as_slice).collect();
    ensure(got == want, || "V∩ differs from the surface intersection".into())?;

    let m1 = ba.surface_merges();
    let mut rest = m1.iter();
    ensure(mcv.merges.iter().all(|m| rest.any(|x| x == m)), || "M∩ is not a subsequence of M_1".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let mut text = random_text(&mut rng, &alphabet, 40);
        if rng.random_bool(0.2) {
            text.push(b'$');
        }
        let enc = tok.encode(&text).map_err(e)?;
        ensure(tok.decode(&enc).map_err(e)? == text, || format!("round trip failed on {:?}", String::from_utf8_lossy(&text)))?;
        ensure(enc.iter().all(|&y| mcv.vocab.contains_id(y)), || "token outside V∩".into())?;
    }
    Ok(format!(
        "|V_1|={} |V_2|={} |V∩|={} |M∩|={}, 1000 round trips",
        a.vocab().len(),
        b.vocab().len(),
        mcv.vocab.len(),
        mcv.merges.len()
    ))
}

/// Bigram models over the two toy BPE tokenizers, plus their MCV tokenizer.
fn toy_models() -> Result<(Model, Model, Arc<Tokenizer>), String> {
    let (a, b) = toy_bpe_pair(&toy_alphabet());
    let (mcv_tok, a, b) = {
        let (_, t) = build_mcv(&[a.as_bpe().expect("bpe"), b.as_bpe().expect("bpe")]).map_err(e)?;
        (Arc::new(Tokenizer::Bpe(t)), Arc::new(a), Arc::new(b))
    };
    let corpus = toy_corpus();
    let ma = NgramModel::train(a, &corpus, 2, 0.05).map_err(e)?;
    let mb = NgramModel::train(b, &corpus, 2, 0.05).map_err(e)?;
    Ok((Arc::new(ma), Arc::new(mb), mcv_tok))
}

fn criterion_7() -> Outcome {
    let (ma, _, mcv) = toy_models()?;
    let bytes = Arc::new(Tokenizer::greedy(Vocabulary::single_symbols(&toy_alphabet())).map_err(e)?);

    let corpus_bytes: usize = toy_corpus().iter().map(|d| d.len()).sum();
    let corpus_tokens: usize = toy_corpus().iter().map(|d| mcv.encode(d.as_bytes()).map(|x| x.len())).sum::<Result<_, _>>().map_err(e)?;
    let corpus_mean = corpus_bytes as f64 / corpus_tokens as f64;
    ensure(corpus_mean > 1.0, || format!("toy MCV mean surface length {corpus_mean}"))?;

    let byte_session = ReductionSession::with_inner(ma.clone(), bytes, TopK::default()).map_err(e)?;
    let mcv_session = ReductionSession::with_inner(ma, mcv, TopK::default()).map_err(e)?;
    let r = bench::compare(&byte_session, &mcv_session, 500, Decoding::Sample { seed: 7 }).map_err(e)?;

    let factor = r.reduced.retokenized_mean_len / r.byte_level.retokenized_mean_len;
    let rel = (r.bytes_per_step_ratio / factor - 1.0).abs();
    ensure(r.bytes_per_step_ratio > 1.0, || format!("bytes/step ratio {:.3}", r.bytes_per_step_ratio))?;
    ensure(rel <= 0.10, || format!("bytes/step ratio {:.3} vs mean surface length {factor:.3}", r.bytes_per_step_ratio))?;
    ensure(r.reduced.steps < r.byte_level.steps, || "MCV needed as many steps".into())?;
    let steps_rel = (r.steps_ratio * factor - 1.0).abs();
    ensure(steps_rel <= 0.10, || format!("steps ratio {:.3} vs 1/{factor:.3}", r.steps_ratio))?;
    Ok(format!(
        "bytes/step {:.3} vs 1.000, measured mean surface length {factor:.3} (corpus {corpus_mean:.3}), steps to 500 bytes {} vs {}",
        r.reduced.bytes_per_step, r.reduced.steps, r.byte_level.steps
    ))
}

fn argmax_set(v: &[f64]) -> Vec<usize> {
    let top = v.iter().cloned().fold(f64::MIN, f64::max);
    (0..v.len()).filter(|&i| v[i] == top).collect()
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() })
            .collect();
        let s: f64 = raw.iter().sum();
        if s > 0.0 {
            return raw.iter().map(|p| p / s).collect();
        }
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1000 {
        let n = rng.random_range(2..10);
        let d = random_dist(&mut rng, n);
        let sq = poe_combine(&[&d, &d]).map_err(e)?;
        ensure(argmax_set(&sq) == argmax_set(&d), || format!("draw {i}: argmax changed"))?;

        let q = random_dist(&mut rng, n);
        let both: Vec<bool> = d.iter().zip(&q).map(|(a, b)| *a > 0.0 && *b > 0.0).collect();
        match poe_combine(&[&d, &q]) {
            Ok(p) => ensure(p.iter().zip(&both).all(|(x, &b)| (*x > 0.0) == b), || format!("draw {i}: support"))?,
            Err(Error::ZeroProduct { .. }) => ensure(!both.contains(&true), || format!("draw {i}: spurious zero product"))?,
            Err(other) => return Err(other.to_string()),
        }
    }

    let (ma, mb, mcv) = toy_models()?;
    let mut texts = 0;
    for seed in 0..6 {
        let members = vec![
            ReductionSession::with_inner(ma.clone(), mcv.clone(), TopK::Exact).map_err(e)?,
            ReductionSession::with_inner(mb.clone(), mcv.clone(), TopK::Exact).map_err(e)?,
        ];
        let mut ens = Ensemble::new(members, Mode::Poe).map_err(e)?;
        ens.generate(Decoding::Sample { seed }, 12).map_err(e)?;
        let text = ens.text().map_err(e)?;
        for (name, m) in [("A", &ma), ("B", &mb)] {
            let tree = cursor_text_prefix_prob(&ModelCursor::new(m.clone()), &text, DEFAULT_BUDGET).map_err(e)?;
            let cover = text_prefix_prob(m.as_ref(), &text, DEFAULT_BUDGET).map_err(e)?;
            let shown = String::from_utf8_lossy(&text);
            ensure(tree > 0.0, || format!("{shown:?} has zero probability under {name}"))?;
            ensure((tree - cover).abs() <= 1e-12 * cover.max(1e-300) + 1e-15, || {
                format!("{shown:?}: oracle routes disagree ({tree} vs {cover})")
            })?;
        }
        texts += 1;
    }

    // same text "ab…", tokenized differently by the two members
    let ab = Alphabet::from_symbols(*b"ab").with_eos(b'$');
    let greedy = |s: &[&str]| {
        let v = Vocabulary::new(ab.clone(), s.iter().map(|x| x.as_bytes().to_vec()).collect()).map_err(e)?;
        Tokenizer::greedy(v).map(Arc::new).map_err(e)
    };
    let t1 = greedy(&["$", "a", "b", "ab"])?;
    let t2 = greedy(&["$", "a", "b"])?;
    let m1 = TableModel::uniform(t1.clone()).with_entry(vec![], vec![0.0, 0.0, 0.0, 1.0]).map_err(e)?;
    let m2 = TableModel::uniform(t2.clone()).with_entry(vec![], vec![0.0, 1.0, 0.0]).map_err(e)?;
    let union = union_vocab(&[t1.vocab(), t2.vocab()]).map_err(e)?;
    let baseline = union_baseline_dist(&[&m1, &m2], &union, b"", Mode::Poe);
    ensure(matches!(baseline, Err(Error::ZeroProduct { .. })), || format!("union baseline gave {baseline:?}"))?;
    let members = vec![
        ReductionSession::with_inner(Arc::new(m1), t2.clone(), TopK::Exact).map_err(e)?,
        ReductionSession::with_inner(Arc::new(m2), t2, TopK::Exact).map_err(e)?,
    ];
    let reduced = Ensemble::new(members, Mode::Poe).and_then(|mut en| en.next_dist()).map_err(e)?;
    ensure(close(&reduced.probs, &[0.0, 1.0, 0.0], 1e-12), || format!("reduced PoE {:?}", reduced.probs))?;

    Ok(format!(
        "1000 draws: argmax and support hold; {texts} lock-step texts positive under both members; union baseline raises ZeroProduct"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; _] = [
        ("worked example", criterion_1),
        ("lossless on 100 random instances", criterion_2),
        ("efficient = naive expansion", criterion_3),
        ("byte-level conditionals", criterion_4),
        ("restriction baseline is lossy", criterion_5),
        ("maximal common vocabulary", criterion_6),
        ("MCV bytes per step", criterion_7),
        ("ensemble properties", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

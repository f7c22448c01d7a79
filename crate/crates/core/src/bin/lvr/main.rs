mod setup;

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use lvr_core::bench;
use lvr_core::ensemble::{Ensemble, Mode};
use lvr_core::mcv::build_mcv;
use lvr_core::oracle::{self, CheckOptions};
use lvr_core::reduction::{NaiveRestriction, SubTokenDistribution};
use lvr_core::tokenization::io::{escape_surface, hex_surface, merges_to_text, vocab_to_json};
use lvr_core::{Decoding, DeterministicTokenizer, ReductionSession, TokenId, Tokenizer, TopK};

use setup::{AlphabetArgs, Loaded, SubVocabArgs};

#[derive(Parser, Debug)]
#[command(name = "lvr", version, about = "Lossless vocabulary reduction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print `id<TAB>hex surface` for each token of the input.
    Tokenize(TokenizeArgs),
    /// Generate from one model re-expressed over a sub-vocabulary.
    ReduceGenerate(GenerateArgs),
    /// Build the maximal common vocabulary of several BPE tokenizers.
    BuildMcv(BuildMcvArgs),
    /// Generate from several models in lock-step over a shared sub-vocabulary.
    EnsembleGenerate(EnsembleArgs),
    /// Compare prefix probabilities of a model and its reduction on all short texts.
    VerifyLossless(VerifyArgs),
    /// Compare bytes per step of byte-level and reduced generation.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct TokenizeArgs {
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    merges: Option<PathBuf>,
    /// Text to tokenize; stdin (minus one trailing newline) when absent.
    #[arg(long)]
    text: Option<String>,
    #[command(flatten)]
    alphabet: AlphabetArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DecodingKind {
    Greedy,
    Sample,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Cover budget per step: a positive integer or `exact`.
    #[arg(long, default_value = "300")]
    k: TopK,
    #[arg(long, value_enum, default_value = "greedy")]
    decoding: DecodingKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    max_steps: usize,
    /// Text to condition on before generating.
    #[arg(long)]
    prompt: Option<String>,
    /// JSON-lines trace, one record per step.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Generated text destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl DecodeArgs {
    fn decoding(&self) -> Decoding {
        match self.decoding {
            DecodingKind::Greedy => Decoding::Greedy,
            DecodingKind::Sample => Decoding::Sample { seed: self.seed },
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    sub: SubVocabArgs,
    #[command(flatten)]
    decode: DecodeArgs,
    /// Use the reference cover expansion instead of the bucketed one.
    #[arg(long)]
    naive: bool,
    #[command(flatten)]
    alphabet: AlphabetArgs,
}

#[derive(Args, Debug)]
struct BuildMcvArgs {
    /// Vocabulary files, one per tokenizer.
    #[arg(long, required = true, num_args = 1..)]
    vocab: Vec<PathBuf>,
    /// Merge files, in the same order as `--vocab`.
    #[arg(long, required = true, num_args = 1..)]
    merges: Vec<PathBuf>,
    /// Directory for vocab.json, merges.txt and report.json.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    alphabet: AlphabetArgs,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    /// Member model files.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    members: Vec<PathBuf>,
    #[arg(long, default_value = "poe")]
    mode: Mode,
    #[command(flatten)]
    sub: SubVocabArgs,
    #[command(flatten)]
    decode: DecodeArgs,
    #[command(flatten)]
    alphabet: AlphabetArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    sub: SubVocabArgs,
    #[arg(long, default_value_t = 5)]
    max_len: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Check the lossy restriction baseline instead of the exact reduction.
    #[arg(long)]
    restriction: bool,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    alphabet: AlphabetArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Member model files; more than one benchmarks an ensemble.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    model: Vec<PathBuf>,
    #[arg(long, default_value = "poe")]
    mode: Mode,
    #[command(flatten)]
    sub: SubVocabArgs,
    #[arg(long, default_value_t = 500)]
    target_bytes: usize,
    #[arg(long, default_value = "300")]
    k: TopK,
    #[arg(long, value_enum, default_value = "sample")]
    decoding: DecodingKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    alphabet: AlphabetArgs,
}

enum Outcome {
    Done,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tokenize(a) => cmd_tokenize(a),
        Command::ReduceGenerate(a) => cmd_reduce_generate(a),
        Command::BuildMcv(a) => cmd_build_mcv(a),
        Command::EnsembleGenerate(a) => cmd_ensemble_generate(a),
        Command::VerifyLossless(a) => cmd_verify_lossless(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_tokenize(args: TokenizeArgs) -> Result<Outcome> {
    let alphabet = args.alphabet.build()?;
    let tok = Tokenizer::load(&args.vocab, args.merges.as_deref(), &alphabet)
        .with_context(|| format!("loading {}", args.vocab.display()))?;
    let text = match args.text {
        Some(t) => t.into_bytes(),
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf)?;
            if buf.ends_with(b"\n") {
                buf.pop();
                if buf.ends_with(b"\r") {
                    buf.pop();
                }
            }
            buf
        }
    };
    let ids = tok.encode(&text)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for id in ids {
        writeln!(out, "{id}\t{}", hex_surface(tok.vocab().surface(id)?))?;
    }
    out.flush()?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    step: usize,
    chosen: u32,
    chosen_surface: String,
    probs: &'a [f64],
    marginals: &'a [f64],
    normalizer: f64,
    dropped_mass: f64,
    cover_sizes: &'a [usize],
}

fn trace_record<'a>(step: usize, y: TokenId, surface: &[u8], d: &'a SubTokenDistribution) -> TraceRecord<'a> {
    TraceRecord {
        step,
        chosen: y.0,
        chosen_surface: escape_surface(surface),
        probs: &d.probs,
        marginals: &d.marginals,
        normalizer: d.normalizer,
        dropped_mass: d.dropped_mass,
        cover_sizes: &d.cover_sizes,
    }
}

fn open_trace(path: Option<&Path>) -> Result<Option<BufWriter<File>>> {
    path.map(|p| {
        File::create(p)
            .map(BufWriter::new)
            .with_context(|| format!("creating {}", p.display()))
    })
    .transpose()
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.write_all(b"\n")?;
            Ok(out.flush()?)
        }
    }
}

fn prompt_ids(session: &ReductionSession, prompt: Option<&str>) -> Result<Vec<TokenId>> {
    match prompt {
        Some(p) => Ok(session.nested().nested_encode_text(p.as_bytes())?),
        None => Ok(Vec::new()),
    }
}

fn cmd_reduce_generate(args: GenerateArgs) -> Result<Outcome> {
    let alphabet = args.alphabet.build()?;
    let model = Loaded::model(&args.model, &alphabet)?;
    let inner = args.sub.resolve(std::slice::from_ref(&model.tokenizer), &alphabet)?;
    let mut session = ReductionSession::with_inner(model.model.clone(), inner, args.decode.k)?;
    for y in prompt_ids(&session, args.decode.prompt.as_deref())? {
        session.step(y).context("prompt has zero probability under the model")?;
    }

    let mut trace = open_trace(args.decode.trace.as_deref())?;
    let mut picker = args.decode.decoding().picker();
    for step in 0..args.decode.max_steps {
        if session.is_terminated() {
            break;
        }
        let dist = if args.naive {
            session.next_dist_naive()?
        } else {
            session.next_dist()?
        };
        let y = picker.pick(&dist.probs)?;
        if let Some(w) = trace.as_mut() {
            let surface = session.inner().vocab().surface(y)?;
            serde_json::to_writer(&mut *w, &trace_record(step, y, surface, &dist))?;
            w.write_all(b"\n")?;
        }
        session.step(y)?;
    }
    if let Some(mut w) = trace {
        w.flush()?;
    }
    write_output(args.decode.out.as_deref(), &session.text()?)?;
    Ok(Outcome::Done)
}

fn cmd_build_mcv(args: BuildMcvArgs) -> Result<Outcome> {
    if args.vocab.len() != args.merges.len() {
        bail!("got {} vocab files but {} merge files", args.vocab.len(), args.merges.len());
    }
    let alphabet = args.alphabet.build()?;
    let toks = args
        .vocab
        .iter()
        .zip(&args.merges)
        .map(|(v, m)| {
            Tokenizer::load(v, Some(m), &alphabet).with_context(|| format!("loading {}", v.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let bpes: Vec<_> = toks.iter().filter_map(Tokenizer::as_bpe).collect();
    let (mcv, _) = build_mcv(&bpes)?;
    let report = mcv.report(&bpes);

    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("vocab.json"), vocab_to_json(&mcv.vocab))?;
    fs::write(args.out.join("merges.txt"), merges_to_text(&mcv.merges))?;
    let report = serde_json::to_string_pretty(&report)?;
    fs::write(args.out.join("report.json"), &report)?;
    println!("{report}");
    Ok(Outcome::Done)
}

fn cmd_ensemble_generate(args: EnsembleArgs) -> Result<Outcome> {
    let alphabet = args.alphabet.build()?;
    let members = args
        .members
        .iter()
        .map(|p| Loaded::model(p, &alphabet))
        .collect::<Result<Vec<_>>>()?;
    let toks: Vec<Arc<Tokenizer>> = members.iter().map(|m| m.tokenizer.clone()).collect();
    let inner = args.sub.resolve(&toks, &alphabet)?;
    let sessions = members
        .iter()
        .map(|m| ReductionSession::with_inner(m.model.clone(), inner.clone(), args.decode.k))
        .collect::<lvr_core::Result<Vec<_>>>()?;
    let prompt = prompt_ids(&sessions[0], args.decode.prompt.as_deref())?;
    let mut ensemble = Ensemble::new(sessions, args.mode)?;
    for y in prompt {
        ensemble.step(y).context("prompt has zero probability under a member")?;
    }

    let mut trace = open_trace(args.decode.trace.as_deref())?;
    ensemble.generate_with(args.decode.decoding(), args.decode.max_steps, |step, y, dist| {
        if let Some(w) = trace.as_mut() {
            let surface = inner.vocab().surface(y)?;
            let members: Vec<_> = dist
                .members
                .iter()
                .map(|d| json!({"probs": d.probs, "normalizer": d.normalizer, "dropped_mass": d.dropped_mass}))
                .collect();
            let rec = json!({
                "step": step,
                "chosen": y.0,
                "chosen_surface": escape_surface(surface),
                "probs": dist.probs,
                "members": members,
            });
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    if let Some(mut w) = trace {
        w.flush()?;
    }
    write_output(args.decode.out.as_deref(), &ensemble.text()?)?;
    Ok(Outcome::Done)
}

fn cmd_verify_lossless(args: VerifyArgs) -> Result<Outcome> {
    let alphabet = args.alphabet.build()?;
    let model = Loaded::model(&args.model, &alphabet)?;
    let inner = args.sub.resolve(std::slice::from_ref(&model.tokenizer), &alphabet)?;
    let opts = CheckOptions {
        max_len: args.max_len,
        tol: args.tol,
        budget: setup::enum_budget()?,
    };
    let session = ReductionSession::with_inner(model.model.clone(), inner, TopK::Exact)?;
    let report = if args.restriction {
        let naive = NaiveRestriction::new(model.model.clone(), session.nested().clone())?;
        oracle::lossless_check_with(model.model.clone(), &naive, &opts, "restriction baseline".into())?
    } else {
        oracle::lossless_check(model.model.clone(), session.nested().clone(), &opts)?
    };

    let json = serde_json::to_string_pretty(&report)?;
    write_output(args.out.as_deref(), json.as_bytes())?;
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    eprintln!(
        "{verdict}: {} texts up to length {}, max discrepancy {:.3e} (tol {:.1e}), worst text {:?}",
        report.texts, report.max_len, report.max_discrepancy, report.tol, report.worst_text
    );
    Ok(if report.pass { Outcome::Done } else { Outcome::Failed })
}

fn cmd_bench(args: BenchArgs) -> Result<Outcome> {
    let alphabet = args.alphabet.build()?;
    let members = args
        .model
        .iter()
        .map(|p| Loaded::model(p, &alphabet))
        .collect::<Result<Vec<_>>>()?;
    let toks: Vec<Arc<Tokenizer>> = members.iter().map(|m| m.tokenizer.clone()).collect();
    let inner = args.sub.resolve(&toks, &alphabet)?;
    let bytes = setup::byte_tokenizer(&alphabet)?;
    let decoding = match args.decoding {
        DecodingKind::Greedy => Decoding::Greedy,
        DecodingKind::Sample => Decoding::Sample { seed: args.seed },
    };
    let sessions = |sub: &Arc<Tokenizer>| {
        members
            .iter()
            .map(|m| ReductionSession::with_inner(m.model.clone(), sub.clone(), args.k))
            .collect::<lvr_core::Result<Vec<_>>>()
    };

    let report = if members.len() == 1 {
        let b = sessions(&bytes)?.remove(0);
        let r = sessions(&inner)?.remove(0);
        bench::compare(&b, &r, args.target_bytes, decoding)?
    } else {
        let b = Ensemble::new(sessions(&bytes)?, args.mode)?;
        let r = Ensemble::new(sessions(&inner)?, args.mode)?;
        bench::compare(&b, &r, args.target_bytes, decoding)?
    };

    let json = serde_json::to_string_pretty(&report)?;
    write_output(args.out.as_deref(), json.as_bytes())?;
    for run in [&report.byte_level, &report.reduced] {
        eprintln!(
            "{:>8}: |V_sub|={:<5} steps={:<6} bytes/step={:.3} steps/s={:.1} bytes/s={:.1}",
            run.label, run.sub_vocab_size, run.steps, run.bytes_per_step, run.steps_per_sec, run.bytes_per_sec
        );
    }
    eprintln!(
        "bytes/step ratio {:.3}, reduced retokenized mean length {:.3}",
        report.bytes_per_step_ratio, report.reduced.retokenized_mean_len
    );
    Ok(Outcome::Done)
}

//! C interface to `lvr-core`.
//!
//! Objects are opaque heap handles released with their `*_free` function.
//! Every fallible call returns an [`LvrStatus`]; after a failure the message
//! is available from [`lvr_last_error`] on the same thread. Output buffers follow
//! one convention: the required length is always written to `out_len`, and
//! `LVR_STATUS_BUFFER_TOO_SMALL` is returned if `cap` is short.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use lvr_core::model::io::load_model;
use lvr_core::oracle::{self, CheckOptions};
use lvr_core::tokenization::io::parse_alphabet;
use lvr_core::{
    Alphabet, Decoding, DeterministicTokenizer, Error, LanguageModel, NestedTokenizer, ReductionSession, TokenId,
    Tokenizer, TopK,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LvrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidArgument = 5,
    VocabularyMismatch = 6,
    InvalidSequence = 7,
    ZeroMass = 8,
    BudgetExceeded = 9,
    BufferTooSmall = 10,
    Internal = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LvrDecoding {
    Greedy = 0,
    Sample = 1,
}

pub struct LvrTokenizer(Arc<Tokenizer>);

pub struct LvrModel(Arc<dyn LanguageModel>);

pub struct LvrSession(ReductionSession);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LvrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(Failure::from_ref(&e), e.to_string())
    }
}

impl Failure {
    fn from_ref(e: &Error) -> LvrStatus {
        use LvrStatus as S;
        match e {
            Error::Io(_) => S::Io,
            Error::Json(_) | Error::Parse(_) => S::Parse,
            Error::EmptySurface(_)
            | Error::DuplicateSurface(_)
            | Error::IncompleteVocabulary(_)
            | Error::EosInsideToken { .. }
            | Error::InvalidMerge { .. }
            | Error::DistributionLength { .. }
            | Error::NotNormalized(_)
            | Error::BadProbability(_)
            | Error::InvalidTopK
            | Error::EmptyEnsemble
            | Error::TooFewInputs(_)
            | Error::EmptyCorpus
            | Error::MissingEos
            | Error::InvalidParameter(_) => S::InvalidArgument,
            Error::VocabularyMismatch(_) => S::VocabularyMismatch,
            Error::SymbolOutsideAlphabet(_)
            | Error::UnknownToken(_)
            | Error::UnknownSurface(_)
            | Error::InvalidPrefix
            | Error::AfterEos => S::InvalidSequence,
            Error::ZeroMass | Error::ZeroProbabilityToken(_) | Error::ZeroProduct { .. } => S::ZeroMass,
            Error::BudgetExceeded(_) => S::BudgetExceeded,
            Error::MissingCover(_) | Error::InconsistentCover { .. } => S::Internal,
            Error::Member { source, .. } => Failure::from_ref(source),
        }
    }

    fn new(status: LvrStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F>(f: F) -> LvrStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            LvrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside lvr".into());
            LvrStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(LvrStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(LvrStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(LvrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(LvrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn alphabet_arg(spec: *const c_char, eos: i32) -> Result<Alphabet, Failure> {
    let spec = str_arg(spec, "alphabet")?;
    let eos = match eos {
        -1 => None,
        0..=255 => Some(eos as u8),
        _ => return Err(Failure::new(LvrStatus::InvalidArgument, "eos must be -1 or a byte value")),
    };
    Ok(parse_alphabet(spec, eos)?)
}

/// Copy `src` into `(buf, cap)`, always reporting the needed length.
unsafe fn fill<T: Copy>(src: &[T], buf: *mut T, cap: usize, out_len: *mut usize) -> Result<(), Failure> {
    *handle_mut(out_len, "out_len")? = src.len();
    if src.len() > cap {
        return Err(Failure::new(
            LvrStatus::BufferTooSmall,
            format!("buffer holds {cap} entries, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(Failure::new(LvrStatus::NullPointer, "output buffer is null"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Message of the most recent call on this thread if it failed, else null.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn lvr_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn lvr_status_name(status: LvrStatus) -> *const c_char {
    let s: &'static CStr = match status {
        LvrStatus::Ok => c"ok",
        LvrStatus::NullPointer => c"null pointer",
        LvrStatus::InvalidUtf8 => c"invalid utf-8",
        LvrStatus::Io => c"i/o error",
        LvrStatus::Parse => c"parse error",
        LvrStatus::InvalidArgument => c"invalid argument",
        LvrStatus::VocabularyMismatch => c"vocabulary mismatch",
        LvrStatus::InvalidSequence => c"invalid token sequence",
        LvrStatus::ZeroMass => c"zero probability mass",
        LvrStatus::BudgetExceeded => c"enumeration budget exceeded",
        LvrStatus::BufferTooSmall => c"buffer too small",
        LvrStatus::Internal => c"internal error",
    };
    s.as_ptr()
}

/// Load a tokenizer from a vocabulary JSON file and an optional merges file
/// (null for greedy). `eos` is a byte value or -1.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvr_tokenizer_load(
    vocab_path: *const c_char,
    merges_path: *const c_char,
    alphabet: *const c_char,
    eos: i32,
    out: *mut *mut LvrTokenizer,
) -> LvrStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        let vocab = str_arg(vocab_path, "vocab_path")?;
        let merges = if merges_path.is_null() {
            None
        } else {
            Some(str_arg(merges_path, "merges_path")?)
        };
        let alphabet = alphabet_arg(alphabet, eos)?;
        let tok = Tokenizer::load(Path::new(vocab), merges.map(Path::new), &alphabet)?;
        *out = Box::into_raw(Box::new(LvrTokenizer(Arc::new(tok))));
        Ok(())
    })
}

/// # Safety
/// `tok` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lvr_tokenizer_free(tok: *mut LvrTokenizer) {
    if !tok.is_null() {
        drop(Box::from_raw(tok));
    }
}

/// # Safety
/// `tok` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lvr_tokenizer_vocab_size(tok: *const LvrTokenizer) -> usize {
    tok.as_ref().map_or(0, |t| t.0.vocab().len())
}

/// Encode `len` bytes of `text` into `ids`.
///
/// # Safety
/// `text` must point to `len` readable bytes and `ids` to `cap` writable ids.
#[no_mangle]
pub unsafe extern "C" fn lvr_tokenizer_encode(
    tok: *const LvrTokenizer,
    text: *const u8,
    len: usize,
    ids: *mut u32,
    cap: usize,
    out_len: *mut usize,
) -> LvrStatus {
    guard(|| {
        let tok = handle(tok, "tokenizer")?;
        let text = bytes_arg(text, len)?;
        let enc: Vec<u32> = tok.0.encode(text)?.into_iter().map(|t| t.0).collect();
        fill(&enc, ids, cap, out_len)
    })
}

/// Concatenate the surfaces of `n` token ids into `buf`.
///
/// # Safety
/// `ids` must point to `n` ids and `buf` to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lvr_tokenizer_decode(
    tok: *const LvrTokenizer,
    ids: *const u32,
    n: usize,
    buf: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> LvrStatus {
    guard(|| {
        let tok = handle(tok, "tokenizer")?;
        let ids: Vec<TokenId> = slice_arg(ids, n)?.iter().map(|&i| TokenId(i)).collect();
        fill(&tok.0.decode(&ids)?, buf, cap, out_len)
    })
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(LvrStatus::NullPointer, "input buffer is null"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn bytes_arg<'a>(p: *const u8, n: usize) -> Result<&'a [u8], Failure> {
    slice_arg(p, n)
}

/// Load a model description file (table or n-gram JSON).
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvr_model_load(
    path: *const c_char,
    alphabet: *const c_char,
    eos: i32,
    out: *mut *mut LvrModel,
) -> LvrStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        let path = str_arg(path, "path")?;
        let alphabet = alphabet_arg(alphabet, eos)?;
        let model = load_model(Path::new(path), &alphabet)?;
        *out = Box::into_raw(Box::new(LvrModel(Arc::new(model))));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lvr_model_free(model: *mut LvrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// New handle to the model's own tokenizer.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvr_model_tokenizer(model: *const LvrModel, out: *mut *mut LvrTokenizer) -> LvrStatus {
    guard(|| {
        let model = handle(model, "model")?;
        *handle_mut(out, "out")? = Box::into_raw(Box::new(LvrTokenizer(model.0.tokenizer().clone())));
        Ok(())
    })
}

/// Reduce `model` onto the vocabulary of `sub`. `top_k` = 0 means exact.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvr_session_new(
    model: *const LvrModel,
    sub: *const LvrTokenizer,
    top_k: usize,
    out: *mut *mut LvrSession,
) -> LvrStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let sub = handle(sub, "sub tokenizer")?;
        let out = handle_mut(out, "out")?;
        let topk = if top_k == 0 { TopK::Exact } else { TopK::Limit(top_k) };
        let session = ReductionSession::with_inner(model.0.clone(), sub.0.clone(), topk)?;
        *out = Box::into_raw(Box::new(LvrSession(session)));
        Ok(())
    })
}

/// # Safety
/// `session` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lvr_session_free(session: *mut LvrSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Sub-vocabulary size, i.e. the length of every distribution.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lvr_session_vocab_size(session: *const LvrSession) -> usize {
    session.as_ref().map_or(0, |s| s.0.inner().vocab().len())
}

/// Next sub-token distribution. `dropped_mass` may be null.
///
/// # Safety
/// `probs` must hold `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lvr_session_next_dist(
    session: *mut LvrSession,
    probs: *mut f64,
    cap: usize,
    out_len: *mut usize,
    dropped_mass: *mut f64,
) -> LvrStatus {
    guard(|| {
        let s = handle_mut(session, "session")?;
        let d = s.0.next_dist()?;
        if let Some(m) = dropped_mass.as_mut() {
            *m = d.dropped_mass;
        }
        fill(&d.probs, probs, cap, out_len)
    })
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lvr_session_step(session: *mut LvrSession, id: u32) -> LvrStatus {
    guard(|| {
        handle_mut(session, "session")?.0.step(TokenId(id))?;
        Ok(())
    })
}

/// Generate up to `max_steps` sub-tokens (stopping after EOS) and write
/// the ids produced by this call.
///
/// # Safety
/// `ids` must hold `cap` writable ids.
#[no_mangle]
pub unsafe extern "C" fn lvr_session_generate(
    session: *mut LvrSession,
    decoding: LvrDecoding,
    seed: u64,
    max_steps: usize,
    ids: *mut u32,
    cap: usize,
    out_len: *mut usize,
) -> LvrStatus {
    guard(|| {
        let s = handle_mut(session, "session")?;
        let decoding = match decoding {
            LvrDecoding::Greedy => Decoding::Greedy,
            LvrDecoding::Sample => Decoding::Sample { seed },
        };
        let out: Vec<u32> = s.0.generate(decoding, max_steps)?.into_iter().map(|t| t.0).collect();
        fill(&out, ids, cap, out_len)
    })
}

/// Decoded text of the session's prefix.
///
/// # Safety
/// `buf` must hold `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lvr_session_text(
    session: *const LvrSession,
    buf: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> LvrStatus {
    guard(|| {
        let s = handle(session, "session")?;
        fill(&s.0.text()?, buf, cap, out_len)
    })
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lvr_session_is_terminated(session: *const LvrSession) -> bool {
    session.as_ref().is_some_and(|s| s.0.is_terminated())
}

/// Exhaustively compare prefix probabilities of `model` and its exact
/// reduction onto `sub` on every text up to `max_len` symbols.
///
/// # Safety
/// Handles must be live; `max_discrepancy` and `pass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lvr_verify_lossless(
    model: *const LvrModel,
    sub: *const LvrTokenizer,
    max_len: usize,
    tol: f64,
    max_discrepancy: *mut f64,
    pass: *mut bool,
) -> LvrStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let sub = handle(sub, "sub tokenizer")?;
        let max_d = handle_mut(max_discrepancy, "max_discrepancy")?;
        let pass = handle_mut(pass, "pass")?;
        let nt = NestedTokenizer::new(model.0.tokenizer().clone(), sub.0.clone())?;
        let opts = CheckOptions {
            max_len,
            tol,
            ..CheckOptions::default()
        };
        let report = oracle::lossless_check(model.0.clone(), Arc::new(nt), &opts)?;
        *max_d = report.max_discrepancy;
        *pass = report.pass;
        Ok(())
    })
}

//! Vocabulary and merge-list file formats.
//!
//! A vocabulary file is a JSON array of strings where array index is the token
//! id. Bytes that are not printable UTF-8 (invalid sequences, control bytes)
//! and the backslash itself are written as `\xNN`. A merges file holds one
//! merge per line as `LEFT<TAB>RIGHT` using the same escaping; rank is the
//! line number.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::vocab::{Alphabet, Vocabulary};
use crate::error::{Error, Result};

pub fn escape_surface(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for chunk in bytes.utf8_chunks() {
        for c in chunk.valid().chars() {
            if c == '\\' || c.is_control() {
                let mut buf = [0u8; 4];
                for b in c.encode_utf8(&mut buf).bytes() {
                    let _ = write!(out, "\\x{b:02x}");
                }
            } else {
                out.push(c);
            }
        }
        for b in chunk.invalid() {
            let _ = write!(out, "\\x{b:02x}");
        }
    }
    out
}

pub fn unescape_surface(s: &str) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(s.len());
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            let hex = bytes
                .get(i + 1..i + 4)
                .filter(|h| h[0] == b'x')
                .and_then(|h| std::str::from_utf8(&h[1..]).ok())
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| Error::Parse(format!("bad escape in {s:?}")))?;
            out.push(hex);
            i += 4;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    Ok(out)
}

/// `bytes`, `binary`, or literal symbols with `\xNN` escapes; `eos` is
/// added on top.
pub fn parse_alphabet(spec: &str, eos: Option<u8>) -> Result<Alphabet> {
    let base = match spec {
        "bytes" => Alphabet::bytes(),
        "binary" => Alphabet::binary(),
        s => {
            let symbols = unescape_surface(s)?;
            if symbols.is_empty() {
                return Err(Error::Parse("empty alphabet".into()));
            }
            Alphabet::from_symbols(symbols)
        }
    };
    Ok(match eos {
        Some(e) => base.with_eos(e),
        None => base,
    })
}

pub fn hex_surface(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn parse_vocab_json(json: &str) -> Result<Vec<Vec<u8>>> {
    let raw: Vec<String> = serde_json::from_str(json)?;
    raw.iter().map(|s| unescape_surface(s)).collect()
}

pub fn vocab_to_json(vocab: &Vocabulary) -> String {
    let escaped: Vec<String> = vocab.surfaces().iter().map(|s| escape_surface(s)).collect();
    serde_json::to_string_pretty(&escaped).expect("strings serialize")
}

pub fn load_vocab(path: &Path, alphabet: &Alphabet) -> Result<Vocabulary> {
    let text = fs::read_to_string(path)?;
    Vocabulary::new(alphabet.clone(), parse_vocab_json(&text)?)
}

pub type SurfaceMerge = (Vec<u8>, Vec<u8>);

pub fn parse_merges(text: &str) -> Result<Vec<SurfaceMerge>> {
    let mut merges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let (left, right) = line.split_once('\t').ok_or_else(|| {
            Error::Parse(format!("merges line {}: expected LEFT<TAB>RIGHT", lineno + 1))
        })?;
        merges.push((unescape_surface(left)?, unescape_surface(right)?));
    }
    Ok(merges)
}

pub fn merges_to_text(merges: &[SurfaceMerge]) -> String {
    let mut out = String::new();
    for (l, r) in merges {
        let _ = writeln!(out, "{}\t{}", escape_surface(l), escape_surface(r));
    }
    out
}

pub fn load_merges(path: &Path) -> Result<Vec<SurfaceMerge>> {
    parse_merges(&fs::read_to_string(path)?)
}

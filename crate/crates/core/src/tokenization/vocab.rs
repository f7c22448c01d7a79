use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::io::escape_surface;
use crate::error::{Error, Result};

/// Dense index of a token inside one [`Vocabulary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        TokenId(index as u32)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The symbol set texts are drawn from, with an optional reserved EOS symbol.
#[derive(Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<u8>,
    member: [bool; 256],
    eos: Option<u8>,
}

impl Alphabet {
    /// All 256 byte values.
    pub fn bytes() -> Self {
        Self::from_symbols(0..=255u8)
    }

    /// The two-symbol alphabet `{'0', '1'}`.
    pub fn binary() -> Self {
        Self::from_symbols(*b"01")
    }

    pub fn from_symbols(symbols: impl IntoIterator<Item = u8>) -> Self {
        let mut member = [false; 256];
        for s in symbols {
            member[s as usize] = true;
        }
        let symbols = (0..=255u8).filter(|&b| member[b as usize]).collect();
        Alphabet {
            symbols,
            member,
            eos: None,
        }
    }

    /// Reserve `eos` as the terminator symbol, adding it to the alphabet if needed.
    pub fn with_eos(mut self, eos: u8) -> Self {
        if !self.member[eos as usize] {
            self.member[eos as usize] = true;
            self.symbols.push(eos);
            self.symbols.sort_unstable();
        }
        self.eos = Some(eos);
        self
    }

    #[inline]
    pub fn contains(&self, symbol: u8) -> bool {
        self.member[symbol as usize]
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn eos(&self) -> Option<u8> {
        self.eos
    }

    pub fn check_text(&self, text: &[u8]) -> Result<()> {
        match text.iter().find(|&&b| !self.contains(b)) {
            Some(&b) => Err(Error::SymbolOutsideAlphabet(b)),
            None => Ok(()),
        }
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Self::bytes()
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Alphabet")
            .field("symbols", &escape_surface(&self.symbols))
            .field("eos", &self.eos)
            .finish()
    }
}

/// An ordered set of nonempty, pairwise distinct token surfaces.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    alphabet: Alphabet,
    surfaces: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, TokenId>,
    complete: bool,
    max_len: usize,
    eos: Option<TokenId>,
}

impl Vocabulary {
    pub fn new(alphabet: Alphabet, surfaces: Vec<Vec<u8>>) -> Result<Self> {
        let mut index = HashMap::with_capacity(surfaces.len());
        let mut max_len = 0;
        for (i, s) in surfaces.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::EmptySurface(i));
            }
            alphabet.check_text(s)?;
            if let Some(eos) = alphabet.eos() {
                if s.len() > 1 && s.contains(&eos) {
                    return Err(Error::EosInsideToken {
                        surface: escape_surface(s),
                    });
                }
            }
            if index.insert(s.clone(), TokenId::from_index(i)).is_some() {
                return Err(Error::DuplicateSurface(escape_surface(s)));
            }
            max_len = max_len.max(s.len());
        }
        let complete = alphabet
            .symbols()
            .iter()
            .all(|&b| index.contains_key(std::slice::from_ref(&b)));
        let eos = alphabet
            .eos()
            .and_then(|b| index.get(std::slice::from_ref(&b)).copied());
        Ok(Vocabulary {
            alphabet,
            surfaces,
            index,
            complete,
            max_len,
            eos,
        })
    }

    /// One token per alphabet symbol, in symbol order.
    pub fn single_symbols(alphabet: &Alphabet) -> Self {
        let surfaces = alphabet.symbols().iter().map(|&b| vec![b]).collect();
        Vocabulary::new(alphabet.clone(), surfaces).expect("single symbols form a vocabulary")
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn require_complete(&self) -> Result<()> {
        for &b in self.alphabet.symbols() {
            if !self.index.contains_key(std::slice::from_ref(&b)) {
                return Err(Error::IncompleteVocabulary(b));
            }
        }
        Ok(())
    }

    pub fn eos(&self) -> Option<TokenId> {
        self.eos
    }

    pub fn max_surface_len(&self) -> usize {
        self.max_len
    }

    pub fn surface(&self, id: TokenId) -> Result<&[u8]> {
        self.surfaces
            .get(id.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownToken(id))
    }

    pub fn id_of(&self, surface: &[u8]) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    pub fn contains_id(&self, id: TokenId) -> bool {
        id.index() < self.surfaces.len()
    }

    pub fn surfaces(&self) -> &[Vec<u8>] {
        &self.surfaces
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.surfaces.len()).map(TokenId::from_index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &[u8])> + '_ {
        self.surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (TokenId::from_index(i), s.as_slice()))
    }

    /// Concatenate the surfaces of `tokens`.
    pub fn decode(&self, tokens: &[TokenId]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for &t in tokens {
            out.extend_from_slice(self.surface(t)?);
        }
        Ok(out)
    }

    /// True when both vocabularies list the same surfaces in the same order.
    pub fn same_surfaces(&self, other: &Vocabulary) -> bool {
        self.surfaces == other.surfaces
    }
}

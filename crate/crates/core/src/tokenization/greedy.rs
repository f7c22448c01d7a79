use super::vocab::{TokenId, Vocabulary};
use super::DeterministicTokenizer;
use crate::error::Result;

/// Left-to-right longest-match tokenizer.
#[derive(Clone, Debug)]
pub struct GreedyTokenizer {
    vocab: Vocabulary,
}

impl GreedyTokenizer {
    pub fn new(vocab: Vocabulary) -> Result<Self> {
        vocab.require_complete()?;
        Ok(GreedyTokenizer { vocab })
    }

    /// Longest vocabulary surface starting at `pos`. Completeness guarantees a match.
    fn longest_match(&self, text: &[u8], pos: usize) -> (TokenId, usize) {
        let max = self.vocab.max_surface_len().min(text.len() - pos);
        for len in (1..=max).rev() {
            if let Some(id) = self.vocab.id_of(&text[pos..pos + len]) {
                return (id, len);
            }
        }
        unreachable!("complete vocabulary always matches a single symbol")
    }

    fn encode_from(&self, text: &[u8], mut pos: usize, out: &mut Vec<TokenId>) {
        while pos < text.len() {
            let (id, len) = self.longest_match(text, pos);
            out.push(id);
            pos += len;
        }
    }
}

impl DeterministicTokenizer for GreedyTokenizer {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn encode(&self, text: &[u8]) -> Result<Vec<TokenId>> {
        self.vocab.alphabet().check_text(text)?;
        let mut out = Vec::with_capacity(text.len());
        self.encode_from(text, 0, &mut out);
        Ok(out)
    }

    // A greedy decision at byte p only looks at text[p..p + max_len], so
    // appending a token can only change decisions that start within
    // max_len - 1 bytes of the old end. Everything before is re-used.
    fn valid_continuations(&self, prefix: &[TokenId]) -> Result<Vec<bool>> {
        if !self.is_valid(prefix) {
            return Ok(vec![false; self.vocab.len()]);
        }
        let mut text = self.vocab.decode(prefix)?;
        let old_len = text.len();
        let window = self.vocab.max_surface_len();

        let mut start_tok = prefix.len();
        let mut start_byte = old_len;
        while start_tok > 0 {
            let len = self.vocab.surface(prefix[start_tok - 1])?.len();
            if start_byte - len + window <= old_len {
                break;
            }
            start_tok -= 1;
            start_byte -= len;
        }

        let mut scratch = Vec::new();
        let mut out = Vec::with_capacity(self.vocab.len());
        for (id, surface) in self.vocab.iter() {
            text.truncate(old_len);
            text.extend_from_slice(surface);
            scratch.clear();
            self.encode_from(&text, start_byte, &mut scratch);
            let ok = scratch.len() == prefix.len() - start_tok + 1
                && scratch[..scratch.len() - 1] == prefix[start_tok..]
                && scratch[scratch.len() - 1] == id;
            out.push(ok);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenization::Alphabet;
    use proptest::prelude::*;

    fn worked_vocab() -> GreedyTokenizer {
        let v = Vocabulary::new(
            Alphabet::binary(),
            ["0", "1", "00", "001"].iter().map(|s| s.as_bytes().to_vec()).collect(),
        )
        .unwrap();
        GreedyTokenizer::new(v).unwrap()
    }

    fn sub_vocab() -> GreedyTokenizer {
        let v = Vocabulary::new(
            Alphabet::binary(),
            ["0", "1", "00"].iter().map(|s| s.as_bytes().to_vec()).collect(),
        )
        .unwrap();
        GreedyTokenizer::new(v).unwrap()
    }

    #[test]
    fn longest_match_examples() {
        let t = worked_vocab();
        assert_eq!(t.encode(b"001").unwrap(), vec![TokenId(3)]);
        assert_eq!(t.encode(b"").unwrap(), vec![]);
        let s = sub_vocab();
        assert_eq!(s.encode(b"000").unwrap(), vec![TokenId(2), TokenId(0)]);
    }

    #[test]
    fn validity_examples() {
        let t = worked_vocab();
        assert!(!t.is_valid(&[TokenId(2), TokenId(1)]));
        assert!(t.is_valid(&[TokenId(3)]));
        assert!(t.is_valid(&[]));
    }

    #[test]
    fn rejects_incomplete_and_foreign_symbols() {
        let v = Vocabulary::new(Alphabet::binary(), vec![b"0".to_vec()]).unwrap();
        assert!(GreedyTokenizer::new(v).is_err());
        assert!(worked_vocab().encode(b"012").is_err());
    }

    fn small_vocab() -> impl Strategy<Value = GreedyTokenizer> {
        proptest::collection::vec(proptest::collection::vec(b'a'..=b'c', 2..5), 0..6).prop_map(
            |extra| {
                let mut surfaces: Vec<Vec<u8>> = vec![b"a".to_vec(), b"b".to_vec(), b"c".to_vec()];
                for e in extra {
                    if !surfaces.contains(&e) {
                        surfaces.push(e);
                    }
                }
                let v = Vocabulary::new(Alphabet::from_symbols(*b"abc"), surfaces).unwrap();
                GreedyTokenizer::new(v).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn roundtrip_and_canonical(tok in small_vocab(), text in proptest::collection::vec(b'a'..=b'c', 0..20)) {
            let ids = tok.encode(&text).unwrap();
            prop_assert_eq!(tok.decode(&ids).unwrap(), text);
            prop_assert!(tok.is_valid(&ids));
        }

        #[test]
        fn windowed_continuations_match_full_reencode(
            tok in small_vocab(),
            text in proptest::collection::vec(b'a'..=b'c', 0..12),
        ) {
            let prefix = tok.encode(&text).unwrap();
            let fast = tok.valid_continuations(&prefix).unwrap();
            for (id, _) in tok.vocab().iter() {
                let mut seq = prefix.clone();
                seq.push(id);
                prop_assert_eq!(fast[id.index()], tok.is_valid(&seq));
            }
        }
    }
}

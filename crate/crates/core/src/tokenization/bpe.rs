use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::io::{escape_surface, SurfaceMerge};
use super::vocab::{TokenId, Vocabulary};
use super::DeterministicTokenizer;
use crate::error::{Error, Result};

/// Rank-ordered merge-list BPE.
///
/// Encoding starts from single-symbol tokens and repeatedly applies the
/// lowest-rank merge present among adjacent pairs, leftmost occurrence first,
/// until no merge applies.
#[derive(Clone, Debug)]
pub struct BpeTokenizer {
    vocab: Vocabulary,
    merges: Vec<(TokenId, TokenId)>,
    table: HashMap<(TokenId, TokenId), (u32, TokenId)>,
}

impl BpeTokenizer {
    pub fn new(vocab: Vocabulary, merges: Vec<(TokenId, TokenId)>) -> Result<Self> {
        vocab.require_complete()?;
        let mut table = HashMap::with_capacity(merges.len());
        for (rank, &(l, r)) in merges.iter().enumerate() {
            let mut joined = vocab.surface(l)?.to_vec();
            joined.extend_from_slice(vocab.surface(r)?);
            let merged = vocab.id_of(&joined).ok_or_else(|| Error::InvalidMerge {
                rank,
                reason: format!("{:?} is not in the vocabulary", escape_surface(&joined)),
            })?;
            if table.insert((l, r), (rank as u32, merged)).is_some() {
                return Err(Error::InvalidMerge {
                    rank,
                    reason: "duplicate pair".into(),
                });
            }
        }
        Ok(BpeTokenizer {
            vocab,
            merges,
            table,
        })
    }

    pub fn from_surface_merges(vocab: Vocabulary, merges: &[SurfaceMerge]) -> Result<Self> {
        let ids = merges
            .iter()
            .enumerate()
            .map(|(rank, (l, r))| {
                let lookup = |s: &[u8]| {
                    vocab.id_of(s).ok_or_else(|| Error::InvalidMerge {
                        rank,
                        reason: format!("operand {:?} is not in the vocabulary", escape_surface(s)),
                    })
                };
                Ok((lookup(l)?, lookup(r)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vocab, ids)
    }

    pub fn merges(&self) -> &[(TokenId, TokenId)] {
        &self.merges
    }

    pub fn surface_merges(&self) -> Vec<SurfaceMerge> {
        self.merges
            .iter()
            .map(|&(l, r)| {
                (
                    self.vocab.surface(l).expect("checked").to_vec(),
                    self.vocab.surface(r).expect("checked").to_vec(),
                )
            })
            .collect()
    }

    /// Rank and product of merging `(left, right)`, if that pair is a merge.
    pub fn merge_of(&self, left: TokenId, right: TokenId) -> Option<(u32, TokenId)> {
        self.table.get(&(left, right)).copied()
    }

    fn symbol_tokens(&self, text: &[u8]) -> Vec<TokenId> {
        text.iter()
            .map(|b| {
                self.vocab
                    .id_of(std::slice::from_ref(b))
                    .expect("complete vocabulary")
            })
            .collect()
    }
}

impl DeterministicTokenizer for BpeTokenizer {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn encode(&self, text: &[u8]) -> Result<Vec<TokenId>> {
        self.vocab.alphabet().check_text(text)?;
        let mut ids = self.symbol_tokens(text);
        let n = ids.len();
        if n < 2 || self.table.is_empty() {
            return Ok(ids);
        }

        // Doubly linked list over original positions; heap keyed by (rank, position).
        const NONE: usize = usize::MAX;
        let mut next: Vec<usize> = (1..=n).map(|i| if i == n { NONE } else { i }).collect();
        let mut prev: Vec<usize> = (0..n).map(|i| if i == 0 { NONE } else { i - 1 }).collect();
        let mut alive = vec![true; n];
        let mut heap = BinaryHeap::new();
        for i in 0..n - 1 {
            if let Some((rank, _)) = self.merge_of(ids[i], ids[i + 1]) {
                heap.push(Reverse((rank, i, ids[i], ids[i + 1])));
            }
        }

        while let Some(Reverse((_, pos, left, right))) = heap.pop() {
            let nxt = next[pos];
            if !alive[pos] || nxt == NONE || ids[pos] != left || ids[nxt] != right {
                continue;
            }
            let (_, merged) = self.merge_of(left, right).expect("heap holds merges");
            ids[pos] = merged;
            alive[nxt] = false;
            next[pos] = next[nxt];
            if next[pos] != NONE {
                prev[next[pos]] = pos;
            }
            let p = prev[pos];
            if p != NONE {
                if let Some((r, _)) = self.merge_of(ids[p], merged) {
                    heap.push(Reverse((r, p, ids[p], merged)));
                }
            }
            let q = next[pos];
            if q != NONE {
                if let Some((r, _)) = self.merge_of(merged, ids[q]) {
                    heap.push(Reverse((r, pos, merged, ids[q])));
                }
            }
        }

        Ok((0..n).filter(|&i| alive[i]).map(|i| ids[i]).collect())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::tokenization::Alphabet;
    use proptest::prelude::*;

    /// Textbook quadratic merge loop used as an independent reference.
    pub(crate) fn reference_encode(tok: &BpeTokenizer, text: &[u8]) -> Vec<TokenId> {
        let mut ids = tok.symbol_tokens(text);
        loop {
            let best = ids
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| tok.merge_of(w[0], w[1]).map(|(r, m)| (r, i, m)))
                .min_by_key(|&(r, i, _)| (r, i));
            match best {
                Some((_, i, m)) => {
                    ids[i] = m;
                    ids.remove(i + 1);
                }
                None => return ids,
            }
        }
    }

    fn tok(surfaces: &[&str], merges: &[(&str, &str)]) -> BpeTokenizer {
        let v = Vocabulary::new(
            Alphabet::from_symbols(*b"abc"),
            surfaces.iter().map(|s| s.as_bytes().to_vec()).collect(),
        )
        .unwrap();
        let m: Vec<SurfaceMerge> = merges
            .iter()
            .map(|(l, r)| (l.as_bytes().to_vec(), r.as_bytes().to_vec()))
            .collect();
        BpeTokenizer::from_surface_merges(v, &m).unwrap()
    }

    fn surfaces(t: &BpeTokenizer, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&i| String::from_utf8(t.vocab().surface(i).unwrap().to_vec()).unwrap())
            .collect()
    }

    #[test]
    fn merge_examples() {
        let t = tok(&["a", "b", "c", "ab"], &[("a", "b")]);
        assert_eq!(surfaces(&t, &t.encode(b"ab").unwrap()), ["ab"]);
        assert_eq!(surfaces(&t, &t.encode(b"aab").unwrap()), ["a", "ab"]);
        let t = tok(&["a", "b", "c", "ab"], &[]);
        assert_eq!(surfaces(&t, &t.encode(b"ab").unwrap()), ["a", "b"]);
    }

    #[test]
    fn rank_order_beats_position() {
        let t = tok(&["a", "b", "c", "ab", "bc"], &[("b", "c"), ("a", "b")]);
        assert_eq!(surfaces(&t, &t.encode(b"abc").unwrap()), ["a", "bc"]);
        assert!(!t.is_valid(&t.encode(b"ab").unwrap().into_iter().chain([TokenId(2)]).collect::<Vec<_>>()));
    }

    #[test]
    fn rejects_bad_merges() {
        let v = Vocabulary::new(
            Alphabet::from_symbols(*b"abc"),
            vec![b"a".to_vec(), b"b".to_vec(), b"c".to_vec()],
        )
        .unwrap();
        assert!(BpeTokenizer::from_surface_merges(v.clone(), &[(b"a".to_vec(), b"b".to_vec())]).is_err());
        assert!(BpeTokenizer::from_surface_merges(v, &[(b"x".to_vec(), b"b".to_vec())]).is_err());
    }

    fn random_bpe() -> impl Strategy<Value = BpeTokenizer> {
        proptest::collection::vec((0usize..64, 0usize..64), 0..10).prop_map(|picks| {
            let mut surfaces: Vec<Vec<u8>> = vec![b"a".to_vec(), b"b".to_vec(), b"c".to_vec()];
            let mut merges = Vec::new();
            for (l, r) in picks {
                let l = l % surfaces.len();
                let r = r % surfaces.len();
                let mut joined = surfaces[l].clone();
                joined.extend_from_slice(&surfaces[r]);
                if joined.len() > 6 || surfaces.contains(&joined) {
                    continue;
                }
                merges.push((TokenId::from_index(l), TokenId::from_index(r)));
                surfaces.push(joined);
            }
            let v = Vocabulary::new(Alphabet::from_symbols(*b"abc"), surfaces).unwrap();
            BpeTokenizer::new(v, merges).unwrap()
        })
    }

    proptest! {
        #[test]
        fn heap_encoder_matches_reference(t in random_bpe(), text in proptest::collection::vec(b'a'..=b'c', 0..40)) {
            let ids = t.encode(&text).unwrap();
            prop_assert_eq!(&ids, &reference_encode(&t, &text));
            prop_assert_eq!(t.decode(&ids).unwrap(), text);
            prop_assert!(t.is_valid(&ids));
        }
    }
}

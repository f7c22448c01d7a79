use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tokenization::TokenId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decoding {
    /// Most probable token, lowest id on ties.
    Greedy,
    Sample { seed: u64 },
}

impl Decoding {
    pub fn picker(&self) -> Picker {
        Picker {
            rng: match *self {
                Decoding::Greedy => None,
                Decoding::Sample { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            },
        }
    }
}

/// Stateful token chooser; sampling draws from a seeded ChaCha8 stream.
#[derive(Clone, Debug)]
pub struct Picker {
    rng: Option<ChaCha8Rng>,
}

impl Picker {
    pub fn pick(&mut self, probs: &[f64]) -> Result<TokenId> {
        match &mut self.rng {
            None => argmax(probs).ok_or(Error::ZeroMass),
            Some(rng) => {
                let dist = WeightedIndex::new(probs).map_err(|_| Error::ZeroMass)?;
                Ok(TokenId::from_index(dist.sample(rng)))
            }
        }
    }
}

/// First index of the maximum positive entry.
pub fn argmax(probs: &[f64]) -> Option<TokenId> {
    let mut best: Option<usize> = None;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 && best.is_none_or(|b| p > probs[b]) {
            best = Some(i);
        }
    }
    best.map(TokenId::from_index)
}

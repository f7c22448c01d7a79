//! Lossless vocabulary reduction.
//!
//! A [`ReductionSession`] turns a model over `V` into a next-token source over
//! a sub-vocabulary `V_sub` whose induced text distribution is unchanged. The
//! probability of a sub-token prefix `y` is the total marginal of its relative
//! cover: the valid `V` sequences whose nested encoding first reaches past `y`.
//! Covers are grown one sub-token at a time from the parent cover, so each
//! step costs one model call.

mod baseline;
mod decoding;
mod session;

use std::fmt;
use std::str::FromStr;

pub use baseline::{naive_restriction_dist, NaiveRestriction};
pub use decoding::{Decoding, Picker};
pub use session::ReductionSession;

use crate::error::{Error, Result};
use crate::tokenization::TokenId;

pub const DEFAULT_TOP_K: usize = 300;

/// How many single-token extensions of the canonical prefix are kept per step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopK {
    Exact,
    Limit(usize),
}

impl TopK {
    pub fn limit(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidTopK);
        }
        Ok(TopK::Limit(k))
    }
}

impl Default for TopK {
    fn default() -> Self {
        TopK::Limit(DEFAULT_TOP_K)
    }
}

impl fmt::Display for TopK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopK::Exact => f.write_str("exact"),
            TopK::Limit(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for TopK {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("exact") {
            return Ok(TopK::Exact);
        }
        let k = s
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("top-k must be an integer or \"exact\", got {s:?}")))?;
        TopK::limit(k)
    }
}

/// One member of a relative cover.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverEntry {
    /// Token sequence over `V`.
    pub seq: Vec<TokenId>,
    /// `p_V(seq *)`.
    pub marginal: f64,
    /// Nested encoding of `seq` over `V_sub`.
    pub nested: Vec<TokenId>,
}

/// Next-sub-token distribution plus the quantities it was derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct SubTokenDistribution {
    pub probs: Vec<f64>,
    /// Unnormalized `p(y_{1:k} y *)` for every sub-token `y`.
    pub marginals: Vec<f64>,
    /// Sum of `marginals`.
    pub normalizer: f64,
    /// Mass of extensions excluded by top-K.
    pub dropped_mass: f64,
    /// Size of the relative cover built for each sub-token.
    pub cover_sizes: Vec<usize>,
}

impl SubTokenDistribution {
    pub(crate) fn from_marginals(
        marginals: Vec<f64>,
        dropped_mass: f64,
        cover_sizes: Vec<usize>,
    ) -> Result<Self> {
        let normalizer: f64 = marginals.iter().sum();
        if normalizer.is_nan() || normalizer <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let probs = marginals.iter().map(|m| m / normalizer).collect();
        Ok(SubTokenDistribution {
            probs,
            marginals,
            normalizer,
            dropped_mass,
            cover_sizes,
        })
    }

    pub fn prob(&self, y: TokenId) -> f64 {
        self.probs.get(y.index()).copied().unwrap_or(0.0)
    }
}

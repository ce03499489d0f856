//! Simulated negotiation domains.
//!
//! Bids are addressed by `u64` ids local to a domain; each domain maps ids to
//! bid vectors, bid contexts, our benefit, our utility and the counterpart's
//! ground-truth answer.

mod allocation;
mod multiissue;
mod trading;

pub use allocation::{allocation_benefit, enumerate_allocation, AllocationConfig, AllocationDomain};
pub use multiissue::{enumerate_multiissue, MultiIssueConfig, MultiIssueDomain};
pub use trading::{enumerate_trading, trading_accepts, trading_bound, TradingConfig, TradingDomain};

use crate::baselines::rule_agent_select;
use crate::context::BidVector;
use crate::error::{Error, Result};
use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use rand::{Rng, RngCore};

/// Largest bid space enumerated in full.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// A batch of valid bids offered to one counterpart.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    pub ids: Vec<u64>,
    /// Bid contexts as seen by the learners.
    pub contexts: Vec<Vec<f64>>,
    pub benefits: Vec<bool>,
    /// Our own utility of each bid.
    pub utilities: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn context_refs(&self) -> Vec<&[f64]> {
        self.contexts.iter().map(Vec::as_slice).collect()
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|&i| i == id)
    }
}

/// The counterpart's answer to a proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub accept: bool,
    /// Real-valued acceptance score, for domains that have one.
    pub score: Option<f64>,
}

/// A negotiation domain against `pair_count()` counterparts.
pub trait Environment {
    fn pair_count(&self) -> usize;

    /// Pair context as seen by the learners.
    fn pair_context(&self, pair: usize) -> Result<&[f64]>;

    /// Number of valid bids towards `pair`.
    fn valid_count(&self, pair: usize) -> Result<u64>;

    /// All valid bid ids towards `pair` (capped at [`ENUMERATION_CAP`]).
    fn valid_ids(&self, pair: usize) -> Result<Vec<u64>>;

    /// A uniform sample of `count` distinct valid bid ids (all of them when
    /// `count` is at least the valid count).
    fn sample_ids(&self, pair: usize, count: usize, rng: &mut dyn RngCore) -> Result<Vec<u64>>;

    fn is_valid(&self, pair: usize, id: u64) -> bool;

    fn bid(&self, id: u64) -> Result<BidVector>;

    /// Bid context as seen by the learners.
    fn bid_context(&self, id: u64) -> Result<alloc::vec::Vec<f64>>;

    /// Whether the bid is beneficial to us.
    fn benefit(&self, id: u64) -> Result<bool>;

    /// Our utility, used by the rule agent's ranking.
    fn own_utility(&self, id: u64) -> Result<f64>;

    /// The counterpart's utility, used for its counter-proposals.
    fn counterpart_utility(&self, pair: usize, id: u64) -> Result<f64>;

    /// Ground-truth answer of `pair` to the bid.
    fn respond(&self, pair: usize, id: u64) -> Result<Response>;

    /// `max r(b) f(b)` over the valid set, when it can be computed exactly.
    fn best_value(&self, pair: usize) -> Option<f64>;

    /// Candidate set towards `pair`: the whole valid set, or a uniform sample
    /// of `subsample` bids.
    fn candidates(&self, pair: usize, subsample: Option<usize>, rng: &mut dyn RngCore) -> Result<CandidateSet> {
        let ids = match subsample {
            Some(s) if (s as u64) < self.valid_count(pair)? => self.sample_ids(pair, s, rng)?,
            _ => self.valid_ids(pair)?,
        };
        let mut set = CandidateSet::default();
        for id in ids {
            set.contexts.push(self.bid_context(id)?);
            set.benefits.push(self.benefit(id)?);
            set.utilities.push(self.own_utility(id)?);
            set.ids.push(id);
        }
        Ok(set)
    }

    /// The counterpart's own proposal: a rule-agent pick over its utility.
    fn counter_proposal(
        &self,
        pair: usize,
        top_fraction: f64,
        subsample: Option<usize>,
        rng: &mut dyn RngCore,
    ) -> Result<Option<u64>> {
        let ids = match subsample {
            Some(s) if (s as u64) < self.valid_count(pair)? => self.sample_ids(pair, s, rng)?,
            _ => self.valid_ids(pair)?,
        };
        if ids.is_empty() {
            return Ok(None);
        }
        let utilities = ids.iter().map(|&id| self.counterpart_utility(pair, id)).collect::<Result<Vec<_>>>()?;
        Ok(Some(ids[rule_agent_select(&utilities, top_fraction, rng)?]))
    }
}

/// Draws `count` distinct ids with `draw`, stopping early when `total` ids
/// exist. Falls back to a partial shuffle of `all()` when the request is a
/// large share of the space.
pub(crate) fn distinct_sample(
    count: usize,
    total: u64,
    rng: &mut dyn RngCore,
    mut draw: impl FnMut(&mut dyn RngCore) -> u64,
    all: impl FnOnce() -> Result<Vec<u64>>,
) -> Result<Vec<u64>> {
    if count as u64 * 2 >= total {
        let mut ids = all()?;
        let keep = count.min(ids.len());
        for i in 0..keep {
            let j = rng.random_range(i..ids.len());
            ids.swap(i, j);
        }
        ids.truncate(keep);
        return Ok(ids);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let id = draw(rng);
        if seen.insert(id) {
            out.push(id);
        }
    }
    Ok(out)
}

/// Product of `factors`, or a capacity error above `cap`.
pub(crate) fn capped_product(factors: impl IntoIterator<Item = u64>, cap: u64) -> Result<u64> {
    let mut total: u64 = 1;
    for f in factors {
        total = total.saturating_mul(f);
        if total > cap {
            return Err(Error::Capacity { limit: cap as usize, requested: total.min(usize::MAX as u64) as usize });
        }
    }
    Ok(total)
}

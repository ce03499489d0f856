//! Multi-issue negotiation with additive utilities: we pick one value per
//! issue, and the counterpart accepts when its utility clears a quantile of
//! its utility over the whole outcome space.

use super::{capped_product, distinct_sample, Environment, Response, ENUMERATION_CAP};
use crate::context::{normalize, BidVector, Encoding};
use crate::error::{check_index, Error, Result};
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every one-hot-per-issue bid, the first issue varying slowest.
pub fn enumerate_multiissue(sizes: &[usize]) -> Result<Vec<BidVector>> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Argument("issue sizes must be nonempty and positive".into()));
    }
    let total = capped_product(sizes.iter().map(|&s| s as u64), ENUMERATION_CAP)?;
    Ok((0..total).map(|id| one_hot(sizes, &choices(sizes, id))).collect())
}

fn choices(sizes: &[usize], mut id: u64) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (i, &s) in sizes.iter().enumerate().rev() {
        out[i] = (id % s as u64) as usize;
        id /= s as u64;
    }
    out
}

fn one_hot(sizes: &[usize], choice: &[usize]) -> BidVector {
    let mut entries = vec![0; sizes.iter().sum()];
    let mut offset = 0;
    for (&s, &c) in sizes.iter().zip(choice) {
        entries[offset + c] = 1;
        offset += s;
    }
    BidVector::new(entries, Encoding::MultiIssue)
}

/// Construction parameters of a [`MultiIssueDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIssueConfig {
    pub issue_sizes: Vec<usize>,
    /// Weight of `1 - own` in the counterpart's value utilities; the rest is
    /// independent noise.
    pub opposition: f64,
    pub threshold_quantile: f64,
    pub seed: u64,
}

impl Default for MultiIssueConfig {
    fn default() -> Self {
        Self { issue_sizes: vec![6, 12, 5, 26], opposition: 0.5, threshold_quantile: 0.5, seed: 0 }
    }
}

/// A single-counterpart multi-issue domain. The pair context is the constant
/// `[1]` and the item context matrix is the identity, so the bid context is
/// the (normalized) bid vector itself.
#[derive(Debug, Clone)]
pub struct MultiIssueDomain {
    sizes: Vec<usize>,
    total: u64,
    own: Vec<Vec<f64>>,
    theirs: Vec<Vec<f64>>,
    own_mean: f64,
    threshold: f64,
    best: f64,
    pair_context: Vec<f64>,
}

fn utility(table: &[Vec<f64>], choice: &[usize]) -> f64 {
    table.iter().zip(choice).map(|(t, &c)| t[c]).sum()
}

impl MultiIssueDomain {
    pub fn generate(config: &MultiIssueConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.opposition) {
            return Err(Error::Config("opposition must lie in [0, 1]".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let own: Vec<Vec<f64>> =
            config.issue_sizes.iter().map(|&s| (0..s).map(|_| rng.random_range(0.0..=1.0)).collect()).collect();
        let theirs = own
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&o| config.opposition * (1.0 - o) + (1.0 - config.opposition) * rng.random_range(0.0..=1.0))
                    .collect()
            })
            .collect();
        Self::from_tables(config.issue_sizes.clone(), own, theirs, config.threshold_quantile)
    }

    /// Builds a domain from explicit per-value utility tables.
    pub fn from_tables(sizes: Vec<usize>, own: Vec<Vec<f64>>, theirs: Vec<Vec<f64>>, quantile: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&quantile) {
            return Err(Error::Config("threshold quantile must lie in [0, 1]".into()));
        }
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Argument("issue sizes must be nonempty and positive".into()));
        }
        for ((s, o), t) in sizes.iter().zip(&own).zip(&theirs) {
            crate::error::check_len(*s, o.len())?;
            crate::error::check_len(*s, t.len())?;
        }
        crate::error::check_len(sizes.len(), own.len())?;
        crate::error::check_len(sizes.len(), theirs.len())?;
        let total = capped_product(sizes.iter().map(|&s| s as u64), ENUMERATION_CAP)?;
        let own_mean = own.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).sum();

        let mut counter: Vec<f64> = Vec::with_capacity(total as usize);
        let mut mine: Vec<f64> = Vec::with_capacity(total as usize);
        for id in 0..total {
            let c = choices(&sizes, id);
            counter.push(utility(&theirs, &c));
            mine.push(utility(&own, &c));
        }
        let mut sorted = counter.clone();
        sorted.sort_by(f64::total_cmp);
        let q = libm::floor(quantile * total as f64) as usize;
        let threshold = sorted[q.min(total as usize - 1)];
        let best = counter
            .iter()
            .zip(&mine)
            .any(|(&t, &m)| t >= threshold && m > own_mean)
            .then_some(1.0)
            .unwrap_or(0.0);
        Ok(Self { sizes, total, own, theirs, own_mean, threshold, best, pair_context: vec![1.0] })
    }

    pub fn issue_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Mean of our utility over every bid.
    pub fn own_mean(&self) -> f64 {
        self.own_mean
    }

    fn choice(&self, id: u64) -> Result<Vec<usize>> {
        if id >= self.total {
            return Err(Error::Index { index: id as usize, len: self.total as usize });
        }
        Ok(choices(&self.sizes, id))
    }

    /// The counterpart's accept/reject decision.
    pub fn accepts(&self, id: u64) -> Result<bool> {
        Ok(utility(&self.theirs, &self.choice(id)?) >= self.threshold)
    }
}

impl Environment for MultiIssueDomain {
    fn pair_count(&self) -> usize {
        1
    }

    fn pair_context(&self, pair: usize) -> Result<&[f64]> {
        check_index(pair, 1)?;
        Ok(&self.pair_context)
    }

    fn valid_count(&self, pair: usize) -> Result<u64> {
        check_index(pair, 1)?;
        Ok(self.total)
    }

    fn valid_ids(&self, pair: usize) -> Result<Vec<u64>> {
        check_index(pair, 1)?;
        Ok((0..self.total).collect())
    }

    fn sample_ids(&self, pair: usize, count: usize, rng: &mut dyn RngCore) -> Result<Vec<u64>> {
        check_index(pair, 1)?;
        let total = self.total;
        distinct_sample(count, total, rng, |r| r.random_range(0..total), || self.valid_ids(pair))
    }

    fn is_valid(&self, pair: usize, id: u64) -> bool {
        pair == 0 && id < self.total
    }

    fn bid(&self, id: u64) -> Result<BidVector> {
        Ok(one_hot(&self.sizes, &self.choice(id)?))
    }

    fn bid_context(&self, id: u64) -> Result<Vec<f64>> {
        let mut v: Vec<f64> = self.bid(id)?.entries().iter().map(|&e| f64::from(e)).collect();
        normalize(&mut v);
        Ok(v)
    }

    fn benefit(&self, id: u64) -> Result<bool> {
        Ok(self.own_utility(id)? > self.own_mean)
    }

    fn own_utility(&self, id: u64) -> Result<f64> {
        Ok(utility(&self.own, &self.choice(id)?))
    }

    fn counterpart_utility(&self, pair: usize, id: u64) -> Result<f64> {
        check_index(pair, 1)?;
        Ok(utility(&self.theirs, &self.choice(id)?))
    }

    fn respond(&self, pair: usize, id: u64) -> Result<Response> {
        check_index(pair, 1)?;
        Ok(Response { accept: self.accepts(id)?, score: None })
    }

    fn best_value(&self, pair: usize) -> Option<f64> {
        (pair == 0).then_some(self.best)
    }
}

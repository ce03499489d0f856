//! Technology trading: each bid gives some of our technologies and seeks some
//! of the counterpart's, involving at most `gamma` technologies.
//!
//! A bid id packs the sorted slots of the bid in base `2n + 1`: slot `i < n`
//! gives technology `i`, slot `n + i` seeks it, and digit `0` is empty.

use super::{distinct_sample, Environment, Response, ENUMERATION_CAP};
use crate::context::{BidVector, ContextSet, Encoding};
use crate::error::{check_index, Error, Result};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::OnceCell;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `C(n, k)` as `u128`; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    c
}

/// `sum_{j=1}^{gamma} C(n, j)`: the number of technology subsets a bid of
/// cardinality at most `gamma` can involve.
pub fn trading_bound(n: u64, gamma: u64) -> u128 {
    (1..=gamma).map(|j| binomial(n, j)).sum()
}

/// Counterpart decision: accept iff what it receives minus what it gives up,
/// plus its hidden bonus, is positive.
pub fn trading_accepts(received_cost: f64, given_cost: f64, hidden_bonus: f64) -> bool {
    received_cost - given_cost + hidden_bonus > 0.0
}

/// Number of valid bids with `a` givable and `b` seekable technologies.
fn valid_count(a: u64, b: u64, gamma: u64) -> u128 {
    let mut total = 0;
    for j in 2..=gamma {
        for g in 1..j {
            total += binomial(a, g) * binomial(b, j - g);
        }
    }
    total
}

fn pack(slots: &[usize], base: u64) -> u64 {
    slots.iter().rev().fold(0, |acc, &s| acc * base + s as u64 + 1)
}

fn unpack(mut id: u64, base: u64) -> Vec<usize> {
    let mut slots = Vec::new();
    while id > 0 {
        slots.push((id % base) as usize - 1);
        id /= base;
    }
    slots
}

/// Calls `f` on every `k`-subset of `items`, in lexicographic order of positions.
fn for_each_subset(items: &[usize], k: usize, f: &mut dyn FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    let mut chosen = vec![0; k];
    if k > items.len() {
        return;
    }
    loop {
        for (c, &i) in chosen.iter_mut().zip(&idx) {
            *c = items[i];
        }
        f(&chosen);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + items.len() - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + items.len() - k {
            return;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Every valid bid over `n` technologies: gives drawn from `ours`, seeks from
/// `theirs`, at least one of each, at most `gamma` in total. Bids give
/// with `+1` in the first half and seek with `-1` in the second half.
pub fn enumerate_trading(n: usize, ours: &[usize], theirs: &[usize], gamma: usize) -> Result<Vec<BidVector>> {
    let total = valid_count(ours.len() as u64, theirs.len() as u64, gamma as u64);
    if total > u128::from(ENUMERATION_CAP) {
        return Err(Error::Capacity { limit: ENUMERATION_CAP as usize, requested: total.min(usize::MAX as u128) as usize });
    }
    let mut out = Vec::new();
    enumerate_slots(n, ours, theirs, gamma, &mut |slots| out.push(slots_to_bid(n, slots)));
    Ok(out)
}

fn enumerate_slots(n: usize, ours: &[usize], theirs: &[usize], gamma: usize, f: &mut dyn FnMut(&[usize])) {
    let seek: Vec<usize> = theirs.iter().map(|&i| n + i).collect();
    for j in 2..=gamma {
        for g in 1..j {
            for_each_subset(ours, g, &mut |gives| {
                for_each_subset(&seek, j - g, &mut |takes| {
                    let mut slots = gives.to_vec();
                    slots.extend_from_slice(takes);
                    f(&slots);
                });
            });
        }
    }
}

fn slots_to_bid(n: usize, slots: &[usize]) -> BidVector {
    let mut entries = vec![0; 2 * n];
    for &s in slots {
        entries[s] = if s < n { 1 } else { -1 };
    }
    BidVector::new(entries, Encoding::Trading)
}

/// Construction parameters of a [`TradingDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct TradingConfig {
    pub items: usize,
    pub pairs: usize,
    pub gamma: usize,
    /// Probability that a negotiator holds any given technology.
    pub hold_probability: f64,
    pub min_cost: f64,
    pub max_cost: f64,
    /// Scale of the counterparts' hidden per-technology bonus, relative to cost.
    pub hidden_scale: f64,
    pub seed: u64,
}

impl Default for TradingConfig {
    fn default() -> Self {
        Self {
            items: 87,
            pairs: 6,
            gamma: 4,
            hold_probability: 0.5,
            min_cost: 50.0,
            max_cost: 300.0,
            hidden_scale: 0.2,
            seed: 0,
        }
    }
}

/// Trading domain against several counterparts with fixed holdings.
#[derive(Debug, Clone)]
pub struct TradingDomain {
    n: usize,
    gamma: usize,
    base: u64,
    costs: Vec<f64>,
    contexts: ContextSet,
    /// Technologies we can give / seek, per counterpart.
    gives: Vec<Vec<usize>>,
    seeks: Vec<Vec<usize>>,
    /// Hidden bonus per counterpart and technology received.
    bonus: Vec<Vec<f64>>,
    /// Lazily enumerated `max r f` per counterpart.
    best: Vec<OnceCell<Option<f64>>>,
}

impl TradingDomain {
    pub fn generate(config: &TradingConfig) -> Result<Self> {
        let c = config;
        if c.items == 0 || c.pairs == 0 || c.gamma == 0 || !(c.min_cost > 0.0 && c.max_cost >= c.min_cost) {
            return Err(Error::Config("trading needs items, pairs, gamma >= 1 and positive costs".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let costs: Vec<f64> = (0..c.items).map(|_| rng.random_range(c.min_cost..=c.max_cost)).collect();
        let ours: Vec<bool> = (0..c.items).map(|_| rng.random_bool(c.hold_probability)).collect();
        let mut holdings = Vec::new();
        let mut bonus = Vec::new();
        let mut pairs = Vec::new();
        for _ in 0..c.pairs {
            holdings.push((0..c.items).map(|_| rng.random_bool(c.hold_probability)).collect::<Vec<bool>>());
            bonus.push(costs.iter().map(|&k| c.hidden_scale * rng.random_range(0.0..=1.0) * k).collect());
            pairs.push(vec![rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)]);
        }
        let items: Vec<Vec<f64>> = costs.iter().map(|&k| vec![k / c.max_cost, rng.random_range(0.0..=1.0)]).collect();
        Self::from_parts(c.gamma, costs, items, &ours, &holdings, bonus, pairs)
    }

    /// Builds a domain from explicit holdings. A technology is givable to a
    /// counterpart when only we hold it and seekable when only they do.
    pub fn from_parts(
        gamma: usize,
        costs: Vec<f64>,
        items: Vec<Vec<f64>>,
        ours: &[bool],
        holdings: &[Vec<bool>],
        bonus: Vec<Vec<f64>>,
        pairs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = costs.len();
        crate::error::check_len(n, items.len())?;
        crate::error::check_len(n, ours.len())?;
        crate::error::check_len(holdings.len(), pairs.len())?;
        crate::error::check_len(holdings.len(), bonus.len())?;
        let base = 2 * n as u64 + 1;
        if (gamma as f64) * libm::log2(base as f64) >= 63.0 {
            return Err(Error::Config("bid ids do not fit in 64 bits for this item count and gamma".into()));
        }
        let mut gives = Vec::new();
        let mut seeks = Vec::new();
        for (h, b) in holdings.iter().zip(&bonus) {
            crate::error::check_len(n, h.len())?;
            crate::error::check_len(n, b.len())?;
            gives.push((0..n).filter(|&i| ours[i] && !h[i]).collect());
            seeks.push((0..n).filter(|&i| h[i] && !ours[i]).collect());
        }
        let mut y = items.clone();
        y.extend(items);
        let contexts = ContextSet::new(y, pairs, true)?;
        let best = vec![OnceCell::new(); gives.len()];
        Ok(Self { n, gamma, base, costs, contexts, gives, seeks, bonus, best })
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn givable(&self, pair: usize) -> &[usize] {
        &self.gives[pair]
    }

    pub fn seekable(&self, pair: usize) -> &[usize] {
        &self.seeks[pair]
    }

    fn slots(&self, id: u64) -> Result<Vec<usize>> {
        let slots = unpack(id, self.base);
        if slots.is_empty() || slots.len() > self.gamma || slots.iter().any(|&s| s >= 2 * self.n) {
            return Err(Error::Argument(alloc::format!("{id} is not a trading bid id")));
        }
        Ok(slots)
    }

    fn split(&self, id: u64) -> Result<(f64, f64)> {
        let mut given = 0.0;
        let mut sought = 0.0;
        for s in self.slots(id)? {
            if s < self.n {
                given += self.costs[s];
            } else {
                sought += self.costs[s - self.n];
            }
        }
        Ok((given, sought))
    }

    /// Id of the bid giving `gives` and seeking `seeks`.
    pub fn bid_id(&self, gives: &[usize], seeks: &[usize]) -> u64 {
        let mut slots: Vec<usize> = gives.to_vec();
        slots.extend(seeks.iter().map(|&i| self.n + i));
        slots.sort_unstable();
        pack(&slots, self.base)
    }

    /// Counterpart's net value of a bid: received cost, minus given-up cost,
    /// plus hidden bonus on what it receives.
    pub fn counterpart_net(&self, pair: usize, id: u64) -> Result<f64> {
        check_index(pair, self.gives.len())?;
        let mut net = 0.0;
        for s in self.slots(id)? {
            if s < self.n {
                net += self.costs[s] + self.bonus[pair][s];
            } else {
                net -= self.costs[s - self.n];
            }
        }
        Ok(net)
    }
}

impl Environment for TradingDomain {
    fn pair_count(&self) -> usize {
        self.gives.len()
    }

    fn pair_context(&self, pair: usize) -> Result<&[f64]> {
        self.contexts.pair_context(pair)
    }

    fn valid_count(&self, pair: usize) -> Result<u64> {
        check_index(pair, self.pair_count())?;
        let c = valid_count(self.gives[pair].len() as u64, self.seeks[pair].len() as u64, self.gamma as u64);
        Ok(c.min(u128::from(u64::MAX)) as u64)
    }

    fn valid_ids(&self, pair: usize) -> Result<Vec<u64>> {
        let total = self.valid_count(pair)?;
        if total > ENUMERATION_CAP {
            return Err(Error::Capacity { limit: ENUMERATION_CAP as usize, requested: total as usize });
        }
        let mut out = Vec::with_capacity(total as usize);
        let base = self.base;
        enumerate_slots(self.n, &self.gives[pair], &self.seeks[pair], self.gamma, &mut |slots| {
            let mut s = slots.to_vec();
            s.sort_unstable();
            out.push(pack(&s, base));
        });
        Ok(out)
    }

    /// Uniform over the valid set: the (gives, seeks) shape is drawn with
    /// probability proportional to its bid count, then each side uniformly.
    fn sample_ids(&self, pair: usize, count: usize, rng: &mut dyn RngCore) -> Result<Vec<u64>> {
        let total = self.valid_count(pair)?;
        if total == 0 {
            return Ok(Vec::new());
        }
        let (a, b) = (self.gives[pair].len(), self.seeks[pair].len());
        let mut shapes = Vec::new();
        for j in 2..=self.gamma {
            for g in 1..j {
                let w = binomial(a as u64, g as u64) * binomial(b as u64, (j - g) as u64);
                if w > 0 {
                    shapes.push((g, j - g, w as f64));
                }
            }
        }
        let weight: f64 = shapes.iter().map(|s| s.2).sum();
        let gives = &self.gives[pair];
        let seeks = &self.seeks[pair];
        let draw = |r: &mut dyn RngCore| {
            let mut u = r.random_range(0.0..weight);
            let mut shape = shapes[shapes.len() - 1];
            for &s in &shapes {
                if u < s.2 {
                    shape = s;
                    break;
                }
                u -= s.2;
            }
            let mut slots: Vec<usize> = rand::seq::index::sample(r, gives.len(), shape.0).iter().map(|i| gives[i]).collect();
            slots.extend(rand::seq::index::sample(r, seeks.len(), shape.1).iter().map(|i| self.n + seeks[i]));
            slots.sort_unstable();
            pack(&slots, self.base)
        };
        distinct_sample(count, total, rng, draw, || self.valid_ids(pair))
    }

    fn is_valid(&self, pair: usize, id: u64) -> bool {
        let Ok(slots) = self.slots(id) else { return false };
        if pair >= self.pair_count() {
            return false;
        }
        let g = slots.iter().filter(|&&s| s < self.n).count();
        g >= 1
            && g < slots.len()
            && slots.iter().all(|&s| {
                if s < self.n {
                    self.gives[pair].binary_search(&s).is_ok()
                } else {
                    self.seeks[pair].binary_search(&(s - self.n)).is_ok()
                }
            })
    }

    fn bid(&self, id: u64) -> Result<BidVector> {
        Ok(slots_to_bid(self.n, &self.slots(id)?))
    }

    fn bid_context(&self, id: u64) -> Result<Vec<f64>> {
        self.contexts.bid_context(&self.bid(id)?)
    }

    fn benefit(&self, id: u64) -> Result<bool> {
        let (given, sought) = self.split(id)?;
        Ok(given <= sought)
    }

    /// What we gain: sought cost minus given cost.
    fn own_utility(&self, id: u64) -> Result<f64> {
        let (given, sought) = self.split(id)?;
        Ok(sought - given)
    }

    fn counterpart_utility(&self, pair: usize, id: u64) -> Result<f64> {
        self.counterpart_net(pair, id)
    }

    fn respond(&self, pair: usize, id: u64) -> Result<Response> {
        Ok(Response { accept: self.counterpart_net(pair, id)? > 0.0, score: None })
    }

    fn best_value(&self, pair: usize) -> Option<f64> {
        *self.best.get(pair)?.get_or_init(|| {
            let ids = self.valid_ids(pair).ok()?;
            let hit = ids.iter().any(|&id| self.benefit(id).unwrap_or(false) && self.respond(pair, id).is_ok_and(|r| r.accept));
            Some(if hit { 1.0 } else { 0.0 })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn case_study_arithmetic() {
        assert!(!trading_accepts(270.0, 185.0 + 112.0, 0.0));
        assert!(trading_accepts(270.0, 185.0 + 112.0, 30.0));
        assert!(!trading_accepts(0.0, 0.0, 0.0));
    }

    fn tiny() -> TradingDomain {
        // Items 1, 2 are ours, item 3 is theirs (0-based 0, 1, 2).
        TradingDomain::from_parts(
            3,
            vec![112.0, 185.0, 270.0],
            vec![vec![0.1, 0.2], vec![0.3, 0.4], vec![0.5, 0.6]],
            &[true, true, false],
            &[vec![false, false, true]],
            vec![vec![0.0; 3]],
            vec![vec![1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn enumeration_includes_the_worked_bid() {
        let bids = enumerate_trading(3, &[0, 1], &[2], 3).unwrap();
        assert!(bids.iter().any(|b| b.entries() == [1, 1, 0, 0, 0, -1]));
        assert_eq!(bids.len(), 3);
        assert!(enumerate_trading(3, &[0, 1], &[2], 1).unwrap().is_empty());
        let d = tiny();
        let ids = d.valid_ids(0).unwrap();
        assert_eq!(ids.len(), 3);
        let id = d.bid_id(&[0, 1], &[2]);
        assert!(ids.contains(&id));
        assert_eq!(d.bid(id).unwrap().entries(), [1, 1, 0, 0, 0, -1]);
    }

    #[test]
    fn benefit_uses_costs() {
        // Giving the 270 technology for the 185 and 112 ones is beneficial for the giver.
        let d = TradingDomain::from_parts(
            4,
            vec![270.0, 185.0, 112.0],
            vec![vec![0.1, 0.2]; 3],
            &[true, false, false],
            &[vec![false, true, true]],
            vec![vec![0.0; 3]],
            vec![vec![1.0, 0.0]],
        )
        .unwrap();
        let id = d.bid_id(&[0], &[1, 2]);
        assert!(d.benefit(id).unwrap());
        assert!((d.counterpart_net(0, id).unwrap() + 27.0).abs() < 1e-12);
        assert!(!d.respond(0, id).unwrap().accept);
    }

    #[test]
    fn bound_for_full_technology_tree() {
        let bound = trading_bound(87, 4);
        assert_eq!(bound, 87 + 3741 + 105_995 + 2_225_895);
        let d = TradingDomain::generate(&TradingConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for pair in 0..d.pair_count() {
            assert!(u128::from(d.valid_count(pair).unwrap()) <= bound);
            let ids = d.sample_ids(pair, 500, &mut rng).unwrap();
            assert_eq!(ids.len(), 500);
            assert!(ids.iter().all(|&id| d.is_valid(pair, id) && d.bid(id).unwrap().is_valid_trading(4)));
        }
    }

    #[test]
    fn unpacking_round_trips() {
        let d = TradingDomain::generate(&TradingConfig { items: 10, ..Default::default() }).unwrap();
        for id in d.valid_ids(0).unwrap() {
            let b = d.bid(id).unwrap();
            let gives: Vec<usize> = (0..10).filter(|&i| b.entries()[i] == 1).collect();
            let seeks: Vec<usize> = (0..10).filter(|&i| b.entries()[10 + i] == -1).collect();
            assert_eq!(d.bid_id(&gives, &seeks), id);
        }
    }

    proptest! {
        #[test]
        fn enumeration_matches_closed_form(items in 2usize..9, gamma in 1usize..5, seed in 0u64..100) {
            let d = TradingDomain::generate(&TradingConfig { items, gamma, pairs: 1, seed, ..Default::default() }).unwrap();
            let ids = d.valid_ids(0).unwrap();
            prop_assert_eq!(ids.len() as u64, d.valid_count(0).unwrap());
            prop_assert!(ids.len() as u128 <= trading_bound(items as u64, gamma as u64));
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), ids.len());
            for &id in &ids {
                prop_assert!(d.is_valid(0, id));
                let b = d.bid(id).unwrap();
                prop_assert!(b.is_valid_trading(gamma));
                prop_assert!(b.support() >= 2);
            }
        }
    }
}

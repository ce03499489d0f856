//! Splitting a pool of categorized items with counterparts whose acceptance
//! is a degree-2 polynomial score of the pair context, the bid context and a
//! hidden state.

use super::{capped_product, CandidateSet, Environment, Response, ENUMERATION_CAP};
use crate::context::{BidVector, ContextSet, Encoding};
use crate::error::{check_index, Error, Result};
use crate::kernel::feature_map_poly2;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// All splits of `counts`: the first half holds what we take, the second half
/// minus what the counterpart keeps. The first category varies slowest.
pub fn enumerate_allocation(counts: &[usize]) -> Result<Vec<BidVector>> {
    capped_product(counts.iter().map(|&c| c as u64 + 1), ENUMERATION_CAP)?;
    let c = counts.len();
    let mut out = Vec::new();
    let mut take = vec![0usize; c];
    loop {
        let mut entries = vec![0i32; 2 * c];
        for i in 0..c {
            entries[i] = take[i] as i32;
            entries[c + i] = -((counts[i] - take[i]) as i32);
        }
        out.push(BidVector::new(entries, Encoding::Allocation));
        let mut i = c;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if take[i] < counts[i] {
                take[i] += 1;
                break;
            }
            take[i] = 0;
        }
    }
}

/// Construction parameters of an [`AllocationDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationConfig {
    pub categories: usize,
    /// Upper bound on items per category; counts are drawn from `1..=max`.
    pub max_count: usize,
    /// Fixed counts, overriding the draw.
    pub category_counts: Option<Vec<usize>>,
    pub pairs: usize,
    pub seed: u64,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self { categories: 3, max_count: 5, category_counts: None, pairs: 30, seed: 0 }
    }
}

/// Resource-allocation domain. Every counterpart faces the same item pool.
#[derive(Debug, Clone)]
pub struct AllocationDomain {
    counts: Vec<usize>,
    bids: Vec<BidVector>,
    contexts: ContextSet,
    bid_contexts: Vec<Vec<f64>>,
    benefits: Vec<bool>,
    /// Row-major 6x6, rows indexed by pair features, columns by bid features.
    theta: Vec<f64>,
    hidden: Vec<[f64; 2]>,
    scores: Vec<Vec<f64>>,
    best: Vec<f64>,
}

fn unit_square(rng: &mut ChaCha8Rng) -> Vec<f64> {
    vec![rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)]
}

impl AllocationDomain {
    pub fn generate(config: &AllocationConfig) -> Result<Self> {
        if config.pairs == 0 || config.categories == 0 || config.max_count == 0 {
            return Err(Error::Config("allocation needs pairs, categories and a positive max count".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let counts = match &config.category_counts {
            Some(c) => {
                if c.len() != config.categories || c.iter().any(|&n| n > config.max_count) {
                    return Err(Error::Config("category counts disagree with categories or max count".into()));
                }
                c.clone()
            }
            None => (0..config.categories).map(|_| rng.random_range(1..=config.max_count)).collect(),
        };
        let items: Vec<Vec<f64>> = (0..config.categories).map(|_| unit_square(&mut rng)).collect();
        let pairs: Vec<Vec<f64>> = (0..config.pairs).map(|_| unit_square(&mut rng)).collect();
        let hidden: Vec<[f64; 2]> = (0..config.pairs)
            .map(|_| [rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)])
            .collect();
        let theta: Vec<f64> = (0..36).map(|_| rng.sample(StandardNormal)).collect();
        Self::from_parts(counts, items, pairs, theta, hidden)
    }

    /// Builds a domain from explicit ground truth. `items` holds one context
    /// per category; `theta` is row-major 6x6.
    pub fn from_parts(
        counts: Vec<usize>,
        items: Vec<Vec<f64>>,
        pairs: Vec<Vec<f64>>,
        theta: Vec<f64>,
        hidden: Vec<[f64; 2]>,
    ) -> Result<Self> {
        crate::error::check_len(counts.len(), items.len())?;
        crate::error::check_len(36, theta.len())?;
        crate::error::check_len(pairs.len(), hidden.len())?;
        let mut y = items.clone();
        y.extend(items);
        let contexts = ContextSet::new(y, pairs, true)?;
        let bids = enumerate_allocation(&counts)?;
        let bid_contexts = bids.iter().map(|b| contexts.bid_context(b)).collect::<Result<Vec<_>>>()?;
        let benefits = bids.iter().map(allocation_benefit).collect();
        let mut dom = Self {
            counts,
            bids,
            contexts,
            bid_contexts,
            benefits,
            theta,
            hidden,
            scores: Vec::new(),
            best: Vec::new(),
        };
        for p in 0..dom.pair_count() {
            let row = (0..dom.bids.len())
                .map(|b| dom.simulate_score(dom.contexts.pair_context(p)?, &dom.bid_contexts[b], p))
                .collect::<Result<Vec<_>>>()?;
            let best = row
                .iter()
                .zip(&dom.benefits)
                .map(|(&s, &f)| if s > 0.0 && f { 1.0 } else { 0.0 })
                .fold(0.0, f64::max);
            dom.scores.push(row);
            dom.best.push(best);
        }
        Ok(dom)
    }

    /// `phi(x) Theta phi(bY)^T + u bY^T` on the normalized contexts. The
    /// hidden state sits on the linear coordinates of `phi(bY)`, so the score
    /// stays inside the degree-2 model.
    fn simulate_score(&self, x: &[f64], bid_context: &[f64], pair: usize) -> Result<f64> {
        let px = feature_map_poly2(x)?;
        let pb = feature_map_poly2(bid_context)?;
        let u = self.hidden[pair];
        let pu = [0.0, u[0], u[1], 0.0, 0.0, 0.0];
        let mut s = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                s += px[i] * self.theta[i * 6 + j] * pb[j];
            }
        }
        Ok(s + pu.iter().zip(&pb).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn hidden(&self) -> &[[f64; 2]] {
        &self.hidden
    }

    pub fn contexts(&self) -> &ContextSet {
        &self.contexts
    }

    pub fn bids(&self) -> &[BidVector] {
        &self.bids
    }

    /// Real-valued score and acceptance of bid `id` by `pair`.
    pub fn simulate(&self, pair: usize, id: u64) -> Result<(f64, bool)> {
        check_index(pair, self.scores.len())?;
        let i = self.index(id)?;
        let s = self.scores[pair][i];
        Ok((s, s > 0.0))
    }

    fn index(&self, id: u64) -> Result<usize> {
        let i = id as usize;
        check_index(i, self.bids.len())?;
        Ok(i)
    }

    /// The full candidate set, shared by every counterpart.
    pub fn all_candidates(&self) -> CandidateSet {
        CandidateSet {
            ids: (0..self.bids.len() as u64).collect(),
            contexts: self.bid_contexts.clone(),
            benefits: self.benefits.clone(),
            utilities: self.bids.iter().map(|b| own_items(b) as f64).collect(),
        }
    }
}

fn own_items(b: &BidVector) -> i64 {
    let c = b.len() / 2;
    b.entries()[..c].iter().map(|&e| i64::from(e)).sum()
}

/// Beneficial iff we end up with more items than the counterpart.
pub fn allocation_benefit(b: &BidVector) -> bool {
    let c = b.len() / 2;
    let theirs: i64 = b.entries()[c..].iter().map(|&e| -i64::from(e)).sum();
    own_items(b) > theirs
}

impl Environment for AllocationDomain {
    fn pair_count(&self) -> usize {
        self.contexts.pair_count()
    }

    fn pair_context(&self, pair: usize) -> Result<&[f64]> {
        self.contexts.pair_context(pair)
    }

    fn valid_count(&self, pair: usize) -> Result<u64> {
        check_index(pair, self.pair_count())?;
        Ok(self.bids.len() as u64)
    }

    fn valid_ids(&self, pair: usize) -> Result<Vec<u64>> {
        check_index(pair, self.pair_count())?;
        Ok((0..self.bids.len() as u64).collect())
    }

    fn sample_ids(&self, pair: usize, count: usize, rng: &mut dyn RngCore) -> Result<Vec<u64>> {
        let total = self.valid_count(pair)?;
        super::distinct_sample(count, total, rng, |r| r.random_range(0..total), || self.valid_ids(pair))
    }

    fn is_valid(&self, pair: usize, id: u64) -> bool {
        pair < self.pair_count() && (id as usize) < self.bids.len()
    }

    fn bid(&self, id: u64) -> Result<BidVector> {
        Ok(self.bids[self.index(id)?].clone())
    }

    fn bid_context(&self, id: u64) -> Result<Vec<f64>> {
        Ok(self.bid_contexts[self.index(id)?].clone())
    }

    fn benefit(&self, id: u64) -> Result<bool> {
        Ok(self.benefits[self.index(id)?])
    }

    fn own_utility(&self, id: u64) -> Result<f64> {
        Ok(own_items(&self.bids[self.index(id)?]) as f64)
    }

    fn counterpart_utility(&self, pair: usize, id: u64) -> Result<f64> {
        Ok(self.simulate(pair, id)?.0)
    }

    fn respond(&self, pair: usize, id: u64) -> Result<Response> {
        let (score, accept) = self.simulate(pair, id)?;
        Ok(Response { accept, score: Some(score) })
    }

    fn best_value(&self, pair: usize) -> Option<f64> {
        self.best.get(pair).copied()
    }

    fn candidates(&self, pair: usize, subsample: Option<usize>, rng: &mut dyn RngCore) -> Result<CandidateSet> {
        match subsample {
            Some(s) if s < self.bids.len() => {
                let ids = self.sample_ids(pair, s, rng)?;
                let mut set = CandidateSet::default();
                for id in ids {
                    let i = id as usize;
                    set.ids.push(id);
                    set.contexts.push(self.bid_contexts[i].clone());
                    set.benefits.push(self.benefits[i]);
                    set.utilities.push(own_items(&self.bids[i]) as f64);
                }
                Ok(set)
            }
            _ => {
                check_index(pair, self.pair_count())?;
                Ok(self.all_candidates())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::PairQuery;
    use crate::primal::{FeatureMap, PrimalConfig, PrimalOnline};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn enumeration_counts_and_example() {
        let bids = enumerate_allocation(&[4, 2, 5]).unwrap();
        assert_eq!(bids.len(), 90);
        assert!(bids.iter().any(|b| b.entries() == [1, 1, 2, -3, -1, -3]));
        assert_eq!(enumerate_allocation(&[5, 5, 5]).unwrap().len(), 216);
        let zero = enumerate_allocation(&[0]).unwrap();
        assert_eq!(zero.len(), 1);
        assert_eq!(zero[0].entries(), [0, 0]);
        assert!(matches!(enumerate_allocation(&[999, 999, 999]), Err(Error::Capacity { .. })));
    }

    #[test]
    fn benefit_examples() {
        let b = BidVector::new(vec![1, 1, 2, -3, -1, -3], Encoding::Allocation);
        assert!(!allocation_benefit(&b));
        let all = BidVector::new(vec![4, 2, 5, 0, 0, 0], Encoding::Allocation);
        assert!(allocation_benefit(&all));
    }

    fn zero_domain() -> AllocationDomain {
        AllocationDomain::from_parts(
            vec![2, 1, 3],
            vec![vec![0.2, 0.4], vec![0.9, 0.1], vec![0.5, 0.5]],
            vec![vec![0.3, 0.7]],
            vec![0.0; 36],
            vec![[0.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn zero_parameters_reject_everything() {
        let d = zero_domain();
        for id in d.valid_ids(0).unwrap() {
            let r = d.respond(0, id).unwrap();
            assert_eq!(r.score, Some(0.0));
            assert!(!r.accept);
        }
        assert_eq!(d.best_value(0), Some(0.0));
    }

    #[test]
    fn zero_bid_scores_the_constant_feature() {
        // Counts of zero give the single zero bid, so psi = 0 and phi(psi) = (1/sqrt2, 0, ...).
        let mut theta = vec![0.0; 36];
        for (i, t) in theta.iter_mut().enumerate() {
            *t = i as f64 * 0.1 - 1.0;
        }
        let d = AllocationDomain::from_parts(vec![0], vec![vec![0.5, 0.5]], vec![vec![0.6, 0.8]], theta.clone(), vec![[0.3, 0.9]])
            .unwrap();
        let (score, _) = d.simulate(0, 0).unwrap();
        let px = feature_map_poly2(&[0.6, 0.8]).unwrap();
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let expected: f64 = (0..6).map(|i| px[i] * theta[i * 6] * r).sum::<f64>();
        assert!((score - expected).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let c = AllocationConfig { seed: 42, ..Default::default() };
        let (a, b) = (AllocationDomain::generate(&c).unwrap(), AllocationDomain::generate(&c).unwrap());
        assert_eq!(a.theta(), b.theta());
        assert_eq!(a.counts(), b.counts());
        assert!(a.counts().iter().all(|&n| (1..=5).contains(&n)));
        for p in 0..30 {
            for id in 0..a.bids().len() as u64 {
                assert_eq!(a.respond(p, id).unwrap(), b.respond(p, id).unwrap());
            }
        }
    }

    #[test]
    fn simulator_is_realizable_by_the_primal_model() {
        let d = AllocationDomain::generate(&AllocationConfig { seed: 7, pairs: 5, ..Default::default() }).unwrap();
        let mut p = PrimalOnline::new(PrimalConfig {
            feature_map: FeatureMap::Poly2,
            lambda_context: 1e-3,
            lambda_hidden: 1e-3,
            alpha_context: 0.0,
            alpha_hidden: 0.0,
            pairs: 5,
            pair_dim: 2,
            bid_dim: 2,
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = d.bids().len() as u64;
        for _ in 0..500 {
            for pair in 0..5 {
                let id = rng.random_range(0..n);
                let (score, _) = d.simulate(pair, id).unwrap();
                let x = d.pair_context(pair).unwrap();
                p.update_value(PairQuery::new(pair, x), &d.bid_context(id).unwrap(), score).unwrap();
            }
        }
        let (mut agree, mut total) = (0, 0);
        for pair in 0..5 {
            let x = d.pair_context(pair).unwrap();
            for id in 0..n {
                let (score, _) = d.simulate(pair, id).unwrap();
                let pred = p.predict(PairQuery::new(pair, x), &d.bid_context(id).unwrap()).unwrap();
                agree += usize::from((pred > 0.0) == (score > 0.0));
                total += 1;
            }
        }
        assert!(agree as f64 >= 0.95 * total as f64, "{agree}/{total}");
    }

    proptest! {
        #[test]
        fn enumerated_bids_are_valid(counts in proptest::collection::vec(0usize..5, 1..4)) {
            let bids = enumerate_allocation(&counts).unwrap();
            let expected: usize = counts.iter().map(|c| c + 1).product();
            prop_assert_eq!(bids.len(), expected);
            for b in &bids {
                prop_assert!(b.is_valid_allocation(&counts));
            }
        }

        #[test]
        fn benefit_is_pure(seed in 0u64..1000) {
            let d = AllocationDomain::generate(&AllocationConfig { seed, pairs: 2, ..Default::default() }).unwrap();
            for id in 0..d.bids().len() as u64 {
                prop_assert_eq!(d.benefit(id).unwrap(), allocation_benefit(&d.bid(id).unwrap()));
                prop_assert_eq!(d.benefit(id).unwrap(), d.benefit(id).unwrap());
            }
        }
    }
}

//! Agents and the negotiation loop: single-proposal streams (allocation) and
//! multi-round episodes, either propose-only or with counter-proposals.

use crate::baselines::rule_agent_select;
use crate::env::{CandidateSet, Environment};
use crate::error::{Error, Result};
use crate::learner::{decide_incoming, select_bid, Learner, PairQuery};
use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, RngCore};

/// Default round cap of an episode.
pub const DEFAULT_MAX_ROUNDS: usize = 50;

/// A proposal: position in the candidate set and the estimated acceptance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub index: usize,
    pub r_hat: Option<f64>,
    pub no_beneficial: bool,
}

/// Anything that can propose bids, learn from answers and judge incoming bids.
pub trait Negotiator {
    fn name(&self) -> String;

    fn propose(&mut self, pair: PairQuery<'_>, candidates: &CandidateSet, rng: &mut dyn RngCore) -> Result<Proposal>;

    fn observe(&mut self, pair: PairQuery<'_>, context: &[f64], accepted: bool) -> Result<()>;

    /// Whether to accept an incoming bid with the given validity and benefit.
    fn answer(&self, pair: PairQuery<'_>, valid: bool, benefit: bool, candidates: &CandidateSet) -> Result<bool>;
}

/// Wraps a [`Learner`] with the UCB selection rule. The very first bid of a
/// run is drawn uniformly from the candidates.
#[derive(Debug, Clone)]
pub struct BanditAgent<L> {
    pub learner: L,
    name: String,
    started: bool,
}

impl<L: Learner> BanditAgent<L> {
    pub fn new(name: impl Into<String>, learner: L) -> Self {
        Self { learner, name: name.into(), started: false }
    }
}

impl<L: Learner> Negotiator for BanditAgent<L> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn propose(&mut self, pair: PairQuery<'_>, candidates: &CandidateSet, rng: &mut dyn RngCore) -> Result<Proposal> {
        if candidates.is_empty() {
            return Err(Error::Argument("candidate list is empty".into()));
        }
        if !self.started {
            self.started = true;
            let index = rng.random_range(0..candidates.len());
            let e = self.learner.estimate(pair, &[&candidates.contexts[index]], false)?[0];
            return Ok(Proposal { index, r_hat: Some(e.mean), no_beneficial: false });
        }
        let sel = select_bid(&self.learner, pair, &candidates.context_refs(), &candidates.benefits, rng)?;
        Ok(Proposal { index: sel.index, r_hat: Some(sel.estimate.mean), no_beneficial: sel.no_beneficial })
    }

    fn observe(&mut self, pair: PairQuery<'_>, context: &[f64], accepted: bool) -> Result<()> {
        self.started = true;
        self.learner.observe(pair, context, accepted)
    }

    fn answer(&self, pair: PairQuery<'_>, valid: bool, benefit: bool, candidates: &CandidateSet) -> Result<bool> {
        decide_incoming(&self.learner, pair, valid, benefit, &candidates.context_refs(), &candidates.benefits)
    }
}

/// Proposes uniformly among its top-utility bids and accepts any valid
/// beneficial incoming bid. It does not learn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleAgent {
    pub top_fraction: f64,
}

impl Negotiator for RuleAgent {
    fn name(&self) -> String {
        "rule".into()
    }

    fn propose(&mut self, _pair: PairQuery<'_>, candidates: &CandidateSet, rng: &mut dyn RngCore) -> Result<Proposal> {
        let index = rule_agent_select(&candidates.utilities, self.top_fraction, rng)?;
        Ok(Proposal { index, r_hat: None, no_beneficial: !candidates.benefits[index] })
    }

    fn observe(&mut self, _pair: PairQuery<'_>, _context: &[f64], _accepted: bool) -> Result<()> {
        Ok(())
    }

    fn answer(&self, _pair: PairQuery<'_>, valid: bool, benefit: bool, _candidates: &CandidateSet) -> Result<bool> {
        Ok(valid && benefit)
    }
}

/// Whether the counterpart may counter-propose after a rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    ProposeOnly,
    Alternating,
}

/// A counter-proposal and our answer to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRecord {
    pub bid_id: u64,
    pub accepted: bool,
}

/// One proposal of ours and everything known about it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub pair: usize,
    pub bid_id: u64,
    pub accept: bool,
    pub benefit: bool,
    pub r_hat: Option<f64>,
    pub score: Option<f64>,
    /// `max r f` over the valid set, when known.
    pub best_value: Option<f64>,
    pub no_beneficial: bool,
    pub counter: Option<CounterRecord>,
}

impl StepRecord {
    /// `r(b) f(b)` of the proposed bid.
    pub fn value(&self) -> f64 {
        if self.accept && self.benefit {
            1.0
        } else {
            0.0
        }
    }
}

/// Proposals of a stream or an episode, plus the round of the deal if any.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub steps: Vec<StepRecord>,
    pub deal_round: Option<usize>,
}

/// Knobs shared by streams and episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopOptions {
    /// Uniform candidate subsample size; `None` scores the full valid set.
    pub subsample: Option<usize>,
    /// Top fraction the counterpart's rule-based counter-proposals draw from.
    pub counter_top_fraction: f64,
}

impl Default for LoopOptions {
    fn default() -> Self {
        Self { subsample: None, counter_top_fraction: 0.1 }
    }
}

fn propose_once<E: Environment + ?Sized, N: Negotiator + ?Sized>(
    agent: &mut N,
    env: &E,
    pair: usize,
    step: usize,
    opts: &LoopOptions,
    rng: &mut dyn RngCore,
) -> Result<(StepRecord, CandidateSet)> {
    let x = env.pair_context(pair)?.to_vec();
    let q = PairQuery::new(pair, &x);
    let cands = env.candidates(pair, opts.subsample, rng)?;
    if cands.is_empty() {
        return Err(Error::Argument(alloc::format!("no valid bid towards counterpart {pair}")));
    }
    let prop = agent.propose(q, &cands, rng)?;
    let id = cands.ids[prop.index];
    let resp = env.respond(pair, id)?;
    agent.observe(q, &cands.contexts[prop.index], resp.accept)?;
    let record = StepRecord {
        step,
        pair,
        bid_id: id,
        accept: resp.accept,
        benefit: cands.benefits[prop.index],
        r_hat: prop.r_hat,
        score: resp.score,
        best_value: env.best_value(pair),
        no_beneficial: prop.no_beneficial,
        counter: None,
    };
    Ok((record, cands))
}

/// `steps` single proposals, each to a uniformly drawn counterpart.
pub fn run_stream<E: Environment + ?Sized, N: Negotiator + ?Sized>(
    agent: &mut N,
    env: &E,
    steps: usize,
    opts: &LoopOptions,
    rng: &mut dyn RngCore,
) -> Result<Transcript> {
    let mut t = Transcript::default();
    for step in 1..=steps {
        let pair = rng.random_range(0..env.pair_count());
        let (rec, _) = propose_once(agent, env, pair, step, opts, rng)?;
        t.steps.push(rec);
    }
    Ok(t)
}

/// One negotiation with `pair`, ending on a deal or after `max_rounds`.
pub fn run_episode<E: Environment + ?Sized, N: Negotiator + ?Sized>(
    agent: &mut N,
    env: &E,
    pair: usize,
    protocol: Protocol,
    max_rounds: usize,
    opts: &LoopOptions,
    rng: &mut dyn RngCore,
) -> Result<Transcript> {
    let mut t = Transcript::default();
    let x = env.pair_context(pair)?.to_vec();
    for round in 1..=max_rounds {
        let (mut rec, cands) = propose_once(agent, env, pair, round, opts, rng)?;
        if rec.accept {
            t.steps.push(rec);
            t.deal_round = Some(round);
            break;
        }
        if protocol == Protocol::Alternating {
            if let Some(id) = env.counter_proposal(pair, opts.counter_top_fraction, opts.subsample, rng)? {
                let q = PairQuery::new(pair, &x);
                let ok = agent.answer(q, env.is_valid(pair, id), env.benefit(id)?, &cands)?;
                // The counterpart offered it, so it would accept it.
                agent.observe(q, &env.bid_context(id)?, true)?;
                rec.counter = Some(CounterRecord { bid_id: id, accepted: ok });
                if ok {
                    t.steps.push(rec);
                    t.deal_round = Some(round);
                    break;
                }
            }
        }
        t.steps.push(rec);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{MultiIssueConfig, MultiIssueDomain};
    use crate::kernel::KernelSpec;
    use crate::negucb::{NegUcb, NegUcbConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn domain(q: f64) -> MultiIssueDomain {
        MultiIssueDomain::generate(&MultiIssueConfig { issue_sizes: vec![4, 3, 5], threshold_quantile: q, seed: 1, ..Default::default() })
            .unwrap()
    }

    fn agent() -> BanditAgent<NegUcb> {
        let cfg = NegUcbConfig { context_kernel: KernelSpec::linear(), hidden_kernel: KernelSpec::linear(), ..Default::default() };
        BanditAgent::new("negucb", NegUcb::new(cfg).unwrap())
    }

    #[test]
    fn accept_all_deals_in_round_one() {
        let d = domain(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = run_episode(&mut agent(), &d, 0, Protocol::ProposeOnly, 50, &LoopOptions::default(), &mut rng).unwrap();
        assert_eq!(t.deal_round, Some(1));
        assert_eq!(t.steps.len(), 1);
    }

    #[test]
    fn reject_all_runs_to_the_cap() {
        // Fully opposed utilities: the rule agent only proposes our best bid,
        // which is the counterpart's worst.
        let own = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let theirs = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        let d = MultiIssueDomain::from_tables(vec![2, 2], own, theirs, 1.0).unwrap();
        let mut rule = RuleAgent { top_fraction: 0.25 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = run_episode(&mut rule, &d, 0, Protocol::ProposeOnly, 50, &LoopOptions::default(), &mut rng).unwrap();
        assert_eq!(t.deal_round, None);
        assert_eq!(t.steps.len(), 50);
    }

    #[test]
    fn episodes_are_deterministic() {
        let d = domain(0.7);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = agent();
            run_episode(&mut a, &d, 0, Protocol::Alternating, 50, &LoopOptions::default(), &mut rng).unwrap()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn first_bid_is_random_then_learned() {
        let d = domain(0.5);
        let mut firsts = alloc::collections::BTreeSet::new();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = run_stream(&mut agent(), &d, 3, &LoopOptions::default(), &mut rng).unwrap();
            firsts.insert(t.steps[0].bid_id);
            assert_eq!(t.steps.len(), 3);
        }
        assert!(firsts.len() > 5);
    }
}

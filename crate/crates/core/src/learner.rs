//! The estimate/observe interface shared by every bandit learner, and the
//! benefit-gated UCB selection rule built on it.

use crate::error::{check_len, Error, Result};
use alloc::vec::Vec;
use rand::Rng;

/// The negotiator pair a query or observation refers to.
#[derive(Debug, Clone, Copy)]
pub struct PairQuery<'a> {
    /// Counterpart index in `0..m`.
    pub index: usize,
    /// Pair context (already normalized by the caller when required).
    pub context: &'a [f64],
}

impl<'a> PairQuery<'a> {
    pub fn new(index: usize, context: &'a [f64]) -> Self {
        Self { index, context }
    }
}

/// Estimated acceptance of a bid plus its exploration bonus.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub bonus: f64,
}

impl Estimate {
    pub fn upper(&self) -> f64 {
        self.mean + self.bonus
    }
}

/// An online acceptance estimator with full-bandit binary feedback.
pub trait Learner {
    /// Number of observations absorbed so far.
    fn observations(&self) -> usize;

    /// Estimates for each bid context against `pair`. When `with_bonus` is
    /// false the bonus may be left at zero.
    fn estimate(&self, pair: PairQuery<'_>, contexts: &[&[f64]], with_bonus: bool) -> Result<Vec<Estimate>>;

    /// Absorbs the counterpart's answer to a bid with context `context`.
    fn observe(&mut self, pair: PairQuery<'_>, context: &[f64], accepted: bool) -> Result<()>;
}

impl<L: Learner + ?Sized> Learner for alloc::boxed::Box<L> {
    fn observations(&self) -> usize {
        (**self).observations()
    }

    fn estimate(&self, pair: PairQuery<'_>, contexts: &[&[f64]], with_bonus: bool) -> Result<Vec<Estimate>> {
        (**self).estimate(pair, contexts, with_bonus)
    }

    fn observe(&mut self, pair: PairQuery<'_>, context: &[f64], accepted: bool) -> Result<()> {
        (**self).observe(pair, context, accepted)
    }
}

/// Outcome of a selection: which candidate, its estimate, and whether no
/// beneficial candidate had a positive score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub estimate: Estimate,
    pub no_beneficial: bool,
}

fn uniform_among<R: Rng + ?Sized>(ties: &[usize], rng: &mut R) -> usize {
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Picks `argmax (mean + bonus) * benefit` over the candidates, breaking
/// exact ties uniformly at random. Only beneficial candidates are scored;
/// every non-beneficial candidate has value zero.
pub fn select_bid<L: Learner + ?Sized, R: Rng + ?Sized>(
    learner: &L,
    pair: PairQuery<'_>,
    contexts: &[&[f64]],
    benefits: &[bool],
    rng: &mut R,
) -> Result<Selection> {
    if contexts.is_empty() {
        return Err(Error::Argument("candidate list is empty".into()));
    }
    check_len(contexts.len(), benefits.len())?;
    let beneficial: Vec<usize> = (0..contexts.len()).filter(|&i| benefits[i]).collect();
    let ben_ctx: Vec<&[f64]> = beneficial.iter().map(|&i| contexts[i]).collect();
    let estimates = if ben_ctx.is_empty() {
        Vec::new()
    } else {
        learner.estimate(pair, &ben_ctx, true)?
    };
    let best = estimates.iter().map(Estimate::upper).fold(f64::NEG_INFINITY, f64::max);

    if best > 0.0 {
        let ties: Vec<usize> = (0..beneficial.len()).filter(|&k| estimates[k].upper() == best).collect();
        let k = uniform_among(&ties, rng);
        return Ok(Selection { index: beneficial[k], estimate: estimates[k], no_beneficial: false });
    }

    // Nothing beneficial scores above zero: the maximum value is zero, held by
    // every non-beneficial candidate and any beneficial one scoring exactly 0.
    let mut zero: Vec<usize> = (0..contexts.len()).filter(|&i| !benefits[i]).collect();
    zero.extend((0..beneficial.len()).filter(|&k| estimates[k].upper() == 0.0).map(|k| beneficial[k]));
    zero.sort_unstable();
    let index = if zero.is_empty() {
        let ties: Vec<usize> = (0..beneficial.len()).filter(|&k| estimates[k].upper() == best).collect();
        beneficial[uniform_among(&ties, rng)]
    } else {
        uniform_among(&zero, rng)
    };
    let estimate = match beneficial.binary_search(&index) {
        Ok(k) => estimates[k],
        Err(_) => learner.estimate(pair, &[contexts[index]], true)?[0],
    };
    Ok(Selection { index, estimate, no_beneficial: true })
}

/// Accept an incoming bid iff it is valid and, taken as certainly accepted,
/// its benefit is at least the best `(mean + bonus) * benefit` among our own
/// candidates.
pub fn decide_incoming<L: Learner + ?Sized>(
    learner: &L,
    pair: PairQuery<'_>,
    incoming_valid: bool,
    incoming_benefit: bool,
    contexts: &[&[f64]],
    benefits: &[bool],
) -> Result<bool> {
    if !incoming_valid {
        return Ok(false);
    }
    check_len(contexts.len(), benefits.len())?;
    let ben_ctx: Vec<&[f64]> = contexts.iter().zip(benefits).filter(|(_, &b)| b).map(|(c, _)| *c).collect();
    let mut best: f64 = if ben_ctx.len() < contexts.len() { 0.0 } else { f64::NEG_INFINITY };
    if !ben_ctx.is_empty() {
        for e in learner.estimate(pair, &ben_ctx, true)? {
            best = best.max(e.upper());
        }
    }
    let own = if incoming_benefit { 1.0 } else { 0.0 };
    Ok(own >= best)
}

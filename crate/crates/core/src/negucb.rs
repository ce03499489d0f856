//! NegUCB: online kernelized estimation of context-based and hidden-state
//! based partial acceptances with upper-confidence exploration.
//!
//! Each observation runs one pass of the alternating update:
//!
//! 1. `a = r - z (Z + l2 I)^-1 d`, the residual left after the hidden-state
//!    term fitted so far (only the current counterpart's samples enter `z`);
//! 2. `K` gains a row and `d = r - k (K + l1 I)^-1 a` is the residual left
//!    after the context term, computed against the extended `K`.
//!
//! The acceptance estimate of a query is `k (K + l1 I)^-1 a + z (Z + l2 I)^-1 d`
//! and its bonus is the sum of the two posterior standard deviations, scaled by
//! `alpha / sqrt(lambda)`.
//!
//! `Z` is block diagonal by counterpart, so its regularized inverse is kept
//! per counterpart; the full `Z` is also kept for inspection.

use crate::error::{check_index, check_len, Error, Result};
use crate::gram::{GramMatrix, KernelRidge, DEFAULT_CAPACITY};
use crate::grouped::{ContextRegistry, GroupAggregate};
use crate::kernel::KernelSpec;
use crate::learner::{Estimate, Learner, PairQuery};
use crate::linalg::symmetric_eigenvalues;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Discriminants of the bonus in `[-BONUS_CLAMP, 0)` are rounding noise and
/// clamp to zero; anything lower is a numerical failure.
pub const BONUS_CLAMP: f64 = 1e-6;

/// Hyper-parameters of a [`NegUcb`] learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegUcbConfig {
    /// Kernel for pair and bid contexts in the context term.
    pub context_kernel: KernelSpec,
    /// Kernel for bid contexts in the hidden-state term.
    pub hidden_kernel: KernelSpec,
    pub lambda_context: f64,
    pub lambda_hidden: f64,
    pub alpha_context: f64,
    pub alpha_hidden: f64,
    /// Number of counterparts `m`.
    pub pairs: usize,
    /// Hard cap on the history length.
    pub capacity: usize,
}

impl Default for NegUcbConfig {
    fn default() -> Self {
        Self {
            context_kernel: KernelSpec::poly2(),
            hidden_kernel: KernelSpec::poly2(),
            lambda_context: 1.0,
            lambda_hidden: 1.0,
            alpha_context: 0.1,
            alpha_hidden: 0.1,
            pairs: 1,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

impl NegUcbConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, l) in [("lambda1", self.lambda_context), ("lambda2", self.lambda_hidden)] {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Argument(format!("{name} must be positive, got {l}")));
            }
        }
        for (name, a) in [("alpha_theta", self.alpha_context), ("alpha_u", self.alpha_hidden)] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Argument(format!("{name} must be non-negative, got {a}")));
            }
        }
        if self.pairs == 0 {
            return Err(Error::Argument("at least one counterpart is required".into()));
        }
        Ok(())
    }
}

/// `K` entry between two samples: `k1(x_t, x_j) * k1(bY_t, bY_j)`.
pub fn k_entry(kernel: &KernelSpec, x_t: &[f64], bid_t: &[f64], x_j: &[f64], bid_j: &[f64]) -> Result<f64> {
    Ok(kernel.eval(x_t, x_j)? * kernel.eval(bid_t, bid_j)?)
}

/// `Z` entry between two samples: `k2(bY_t, bY_j)` for the same counterpart,
/// exactly zero otherwise.
pub fn z_entry(
    kernel: &KernelSpec,
    bid_t: &[f64],
    pair_t: usize,
    bid_j: &[f64],
    pair_j: usize,
    pairs: usize,
) -> Result<f64> {
    check_index(pair_t, pairs)?;
    check_index(pair_j, pairs)?;
    if pair_t == pair_j {
        kernel.eval(bid_t, bid_j)
    } else {
        check_len(bid_t.len(), bid_j.len())?;
        Ok(0.0)
    }
}

/// One history record: counterpart plus interned pair and bid contexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRecord {
    pub pair: usize,
    pub pair_context: usize,
    pub bid_context: usize,
}

/// The hidden-state model of one counterpart.
#[derive(Debug, Clone)]
struct HiddenBlock {
    ridge: KernelRidge,
    members: Vec<usize>,
    local_group: Vec<usize>,
    group_of: BTreeMap<usize, usize>,
    group_contexts: Vec<usize>,
}

impl HiddenBlock {
    fn new(lambda: f64, capacity: usize) -> Result<Self> {
        Ok(Self {
            ridge: KernelRidge::new(lambda, capacity)?,
            members: Vec::new(),
            local_group: Vec::new(),
            group_of: BTreeMap::new(),
            group_contexts: Vec::new(),
        })
    }
}

/// Learner state: `K`, `Z`, the residual vectors `a` and `d`, the binary
/// rewards and the sample history.
#[derive(Debug, Clone)]
pub struct NegUcb {
    config: NegUcbConfig,
    context: KernelRidge,
    z_gram: GramMatrix,
    blocks: Vec<HiddenBlock>,
    d_vec: Vec<f64>,
    rewards: Vec<u8>,
    history: Vec<SampleRecord>,
    pair_contexts: ContextRegistry,
    bid_contexts: ContextRegistry,
    hidden_enabled: bool,
}

fn clamp_variance(v: f64, pivot: usize) -> Result<f64> {
    if v < -BONUS_CLAMP || v.is_nan() {
        Err(Error::Numerical { pivot, value: v })
    } else {
        Ok(v.max(0.0))
    }
}

impl NegUcb {
    pub fn new(config: NegUcbConfig) -> Result<Self> {
        config.validate()?;
        let blocks = (0..config.pairs)
            .map(|_| HiddenBlock::new(config.lambda_hidden, config.capacity))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            context: KernelRidge::new(config.lambda_context, config.capacity)?,
            z_gram: GramMatrix::with_capacity_limit(config.lambda_hidden, config.capacity)?,
            blocks,
            d_vec: Vec::new(),
            rewards: Vec::new(),
            history: Vec::new(),
            pair_contexts: ContextRegistry::default(),
            bid_contexts: ContextRegistry::default(),
            hidden_enabled: true,
            config,
        })
    }

    /// A learner whose hidden-state term is switched off: `d` stays at zero,
    /// so `a = r` and only the context term is fitted.
    pub fn without_hidden_term(config: NegUcbConfig) -> Result<Self> {
        let mut s = Self::new(NegUcbConfig { alpha_hidden: 0.0, ..config })?;
        s.hidden_enabled = false;
        Ok(s)
    }

    pub fn hidden_enabled(&self) -> bool {
        self.hidden_enabled
    }

    pub fn config(&self) -> &NegUcbConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn k_gram(&self) -> &GramMatrix {
        self.context.gram()
    }

    pub fn z_gram(&self) -> &GramMatrix {
        &self.z_gram
    }

    /// Context-term residuals `a`.
    pub fn a_vec(&self) -> &[f64] {
        self.context.targets()
    }

    /// Hidden-term residuals `d`.
    pub fn d_vec(&self) -> &[f64] {
        &self.d_vec
    }

    pub fn rewards(&self) -> &[u8] {
        &self.rewards
    }

    pub fn history(&self) -> &[SampleRecord] {
        &self.history
    }

    pub fn pair_context_of(&self, record: &SampleRecord) -> &[f64] {
        self.pair_contexts.get(record.pair_context)
    }

    pub fn bid_context_of(&self, record: &SampleRecord) -> &[f64] {
        self.bid_contexts.get(record.bid_context)
    }

    fn check_query(&self, pair: &PairQuery<'_>, bid: &[f64]) -> Result<()> {
        check_index(pair.index, self.config.pairs)?;
        if let Some(first) = self.history.first() {
            check_len(self.pair_contexts.get(first.pair_context).len(), pair.context.len())?;
            check_len(self.bid_contexts.get(first.bid_context).len(), bid.len())?;
        }
        Ok(())
    }

    /// `k` row of a query against the whole history.
    fn context_cross(&self, x: &[f64], bid: &[f64]) -> Vec<f64> {
        let kern = &self.config.context_kernel;
        let wx: Vec<f64> = (0..self.pair_contexts.len())
            .map(|i| kern.eval_unchecked(x, self.pair_contexts.get(i)))
            .collect();
        let gb: Vec<f64> = (0..self.bid_contexts.len())
            .map(|i| kern.eval_unchecked(bid, self.bid_contexts.get(i)))
            .collect();
        self.history.iter().map(|s| wx[s.pair_context] * gb[s.bid_context]).collect()
    }

    /// `z` row of a query against its counterpart's block.
    fn hidden_cross(&self, pair: usize, bid: &[f64]) -> Vec<f64> {
        let kern = &self.config.hidden_kernel;
        let block = &self.blocks[pair];
        let g: Vec<f64> = block
            .group_contexts
            .iter()
            .map(|&c| kern.eval_unchecked(bid, self.bid_contexts.get(c)))
            .collect();
        block.local_group.iter().map(|&l| g[l]).collect()
    }

    /// One loop body of the online alternating update.
    pub fn update(&mut self, pair: PairQuery<'_>, bid: &[f64], accepted: bool) -> Result<()> {
        self.check_query(&pair, bid)?;
        let tau = self.len();
        if tau + 1 > self.config.capacity {
            return Err(Error::Capacity { limit: self.config.capacity, requested: tau + 1 });
        }
        let r = if accepted { 1.0 } else { 0.0 };
        let k1 = self.config.context_kernel;
        let k2 = self.config.hidden_kernel;

        let z_row = self.hidden_cross(pair.index, bid);
        let z_self = k2.eval_unchecked(bid, bid);
        let block = &self.blocks[pair.index];
        let a = if block.ridge.is_empty() { r } else { r - block.ridge.predict(&z_row)? };

        let k_row = self.context_cross(pair.context, bid);
        let k_self = k1.eval_unchecked(pair.context, pair.context) * z_self_or(&k1, &k2, bid, z_self);
        let k_border = self.context.prepare(&k_row, k_self)?;
        let z_border = block.ridge.prepare(&z_row, z_self)?;

        self.context.commit(&k_border, &k_row, k_self, a);
        let coef = self.context.coef();
        let fitted: f64 = k_row.iter().zip(coef).map(|(k, c)| k * c).sum::<f64>() + k_self * coef[tau];
        let d = if self.hidden_enabled { r - fitted } else { 0.0 };

        let pair_ctx = self.pair_contexts.intern(pair.context);
        let bid_ctx = self.bid_contexts.intern(bid);
        let block = &mut self.blocks[pair.index];
        block.ridge.commit(&z_border, &z_row, z_self, d);
        let next = block.group_contexts.len();
        let local = *block.group_of.entry(bid_ctx).or_insert(next);
        if local == next {
            block.group_contexts.push(bid_ctx);
        }
        block.local_group.push(local);

        let mut z_full = vec![0.0; tau];
        for (&m, &z) in block.members.iter().zip(&z_row) {
            z_full[m] = z;
        }
        block.members.push(tau);
        self.z_gram.extend(&z_full, z_self)?;

        self.d_vec.push(d);
        self.rewards.push(accepted as u8);
        self.history.push(SampleRecord { pair: pair.index, pair_context: pair_ctx, bid_context: bid_ctx });
        Ok(())
    }

    /// Context term and hidden-state term of the acceptance estimate.
    pub fn predict_terms(&self, pair: PairQuery<'_>, bid: &[f64]) -> Result<(f64, f64)> {
        self.check_query(&pair, bid)?;
        if self.is_empty() {
            return Ok((0.0, 0.0));
        }
        let context = self.context.predict(&self.context_cross(pair.context, bid))?;
        let block = &self.blocks[pair.index];
        let hidden = if block.ridge.is_empty() {
            0.0
        } else {
            block.ridge.predict(&self.hidden_cross(pair.index, bid))?
        };
        Ok((context, hidden))
    }

    /// Estimated acceptance of a bid context offered to `pair`.
    pub fn predict_acceptance(&self, pair: PairQuery<'_>, bid: &[f64]) -> Result<f64> {
        let (c, h) = self.predict_terms(pair, bid)?;
        Ok(c + h)
    }

    /// The two posterior variances (context, hidden), clamped at zero.
    pub fn posterior_variances(&self, pair: PairQuery<'_>, bid: &[f64]) -> Result<(f64, f64)> {
        self.check_query(&pair, bid)?;
        let z_self = self.config.hidden_kernel.eval_unchecked(bid, bid);
        let k_self = self.config.context_kernel.eval_unchecked(pair.context, pair.context)
            * z_self_or(&self.config.context_kernel, &self.config.hidden_kernel, bid, z_self);
        let tau = self.len();
        let vk = if tau == 0 {
            k_self
        } else {
            self.context.residual_variance(&self.context_cross(pair.context, bid), k_self)?
        };
        let block = &self.blocks[pair.index];
        let vz = if block.ridge.is_empty() {
            z_self
        } else {
            block.ridge.residual_variance(&self.hidden_cross(pair.index, bid), z_self)?
        };
        Ok((clamp_variance(vk, tau)?, clamp_variance(vz, tau)?))
    }

    /// Upper-confidence bonus of a bid context offered to `pair`.
    pub fn exploration_bonus(&self, pair: PairQuery<'_>, bid: &[f64]) -> Result<f64> {
        let c = &self.config;
        if c.alpha_context == 0.0 && c.alpha_hidden == 0.0 {
            self.check_query(&pair, bid)?;
            return Ok(0.0);
        }
        let (vk, vz) = self.posterior_variances(pair, bid)?;
        Ok(c.alpha_context / libm::sqrt(c.lambda_context) * libm::sqrt(vk)
            + c.alpha_hidden / libm::sqrt(c.lambda_hidden) * libm::sqrt(vz))
    }

    /// Effective dimensions of `K` and `Z`: eigenvalues at or above the
    /// respective regularizer.
    pub fn effective_dimensions(&self) -> Result<(usize, usize)> {
        let count = |g: &GramMatrix| -> Result<usize> {
            let ev = symmetric_eigenvalues(&g.to_dense(), g.dim())?;
            Ok(ev.iter().filter(|&&e| e >= g.lambda()).count())
        };
        Ok((count(self.k_gram())?, count(&self.z_gram)?))
    }
}

// k1(bY, bY) reuses the already computed k2(bY, bY) when both kernels agree.
#[inline]
fn z_self_or(k1: &KernelSpec, k2: &KernelSpec, bid: &[f64], z_self: f64) -> f64 {
    if k1 == k2 {
        z_self
    } else {
        k1.eval_unchecked(bid, bid)
    }
}

impl Learner for NegUcb {
    fn observations(&self) -> usize {
        self.len()
    }

    fn estimate(&self, pair: PairQuery<'_>, contexts: &[&[f64]], with_bonus: bool) -> Result<Vec<Estimate>> {
        for c in contexts {
            self.check_query(&pair, c)?;
        }
        let cfg = &self.config;
        let k1 = &cfg.context_kernel;
        let k2 = &cfg.hidden_kernel;
        let want_k = with_bonus && cfg.alpha_context > 0.0;
        let want_z = with_bonus && cfg.alpha_hidden > 0.0;
        let x = pair.context;
        let tau = self.len();

        // Context term: w_t = k1(x, x_t), grouped by bid context.
        let wx: Vec<f64> = (0..self.pair_contexts.len())
            .map(|i| k1.eval_unchecked(x, self.pair_contexts.get(i)))
            .collect();
        let weights: Vec<f64> = self.history.iter().map(|s| wx[s.pair_context]).collect();
        let groups: Vec<usize> = self.history.iter().map(|s| s.bid_context).collect();
        let n_groups = self.bid_contexts.len();
        let agg_k = GroupAggregate::new(&self.context, &weights, &groups, n_groups, want_k && tau > 0);

        let block = &self.blocks[pair.index];
        let ones = vec![1.0; block.ridge.len()];
        let agg_z = GroupAggregate::new(
            &block.ridge,
            &ones,
            &block.local_group,
            block.group_contexts.len(),
            want_z && !block.ridge.is_empty(),
        );

        let k_xx = k1.eval_unchecked(x, x);
        let mut g = vec![0.0; n_groups];
        let mut gz = vec![0.0; block.group_contexts.len()];
        let mut out = Vec::with_capacity(contexts.len());
        for bid in contexts {
            for (j, gj) in g.iter_mut().enumerate() {
                *gj = k1.eval_unchecked(bid, self.bid_contexts.get(j));
            }
            for (l, gl) in gz.iter_mut().enumerate() {
                let c = block.group_contexts[l];
                *gl = if k1 == k2 { g[c] } else { k2.eval_unchecked(bid, self.bid_contexts.get(c)) };
            }
            let mean = agg_k.mean(&g) + agg_z.mean(&gz);
            let mut bonus = 0.0;
            if want_k {
                let k_self = k_xx * k1.eval_unchecked(bid, bid);
                let v = if tau == 0 { k_self } else { k_self - agg_k.quad_form(&g) };
                bonus += cfg.alpha_context / libm::sqrt(cfg.lambda_context) * libm::sqrt(clamp_variance(v, tau)?);
            }
            if want_z {
                let z_self = k2.eval_unchecked(bid, bid);
                let v = if block.ridge.is_empty() { z_self } else { z_self - agg_z.quad_form(&gz) };
                bonus += cfg.alpha_hidden / libm::sqrt(cfg.lambda_hidden) * libm::sqrt(clamp_variance(v, tau)?);
            }
            out.push(Estimate { mean, bonus });
        }
        Ok(out)
    }

    fn observe(&mut self, pair: PairQuery<'_>, context: &[f64], accepted: bool) -> Result<()> {
        self.update(pair, context, accepted)
    }
}

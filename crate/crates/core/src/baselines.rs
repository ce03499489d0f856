//! Comparison agents: LinUCB and KernelUCB on concatenated or product
//! contexts, FactorUCB with per-counterpart hidden vectors, and the
//! rule-based top-utility proposer.

use crate::error::{check_index, check_len, Error, Result};
use crate::gram::{KernelRidge, DEFAULT_CAPACITY};
use crate::grouped::{ContextRegistry, GroupAggregate};
use crate::kernel::KernelSpec;
use crate::learner::{Estimate, Learner, PairQuery};
use crate::linalg::Cholesky;
use crate::primal::{FeatureMap, PrimalConfig, PrimalOnline};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

fn check_rates(lambda: f64, alpha: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Argument(format!("lambda must be positive, got {lambda}")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Argument(format!("alpha must be non-negative, got {alpha}")));
    }
    Ok(())
}

fn concat(x: &[f64], bid: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(x.len() + bid.len());
    s.extend_from_slice(x);
    s.extend_from_slice(bid);
    s
}

/// Ridge-regression UCB on `[x; bY]` features.
#[derive(Debug, Clone)]
pub struct LinUcb {
    lambda: f64,
    alpha: f64,
    dim: usize,
    gram: Vec<f64>,
    moment: Vec<f64>,
    chol: Cholesky,
    theta: Vec<f64>,
    seen: usize,
}

impl LinUcb {
    /// `dim` is the length of the concatenated feature.
    pub fn new(dim: usize, lambda: f64, alpha: f64) -> Result<Self> {
        check_rates(lambda, alpha)?;
        let mut gram = vec![0.0; dim * dim];
        for i in 0..dim {
            gram[i * dim + i] = lambda;
        }
        let chol = Cholesky::factor(&gram, dim, 0.0)?;
        Ok(Self { lambda, alpha, dim, gram, moment: vec![0.0; dim], chol, theta: vec![0.0; dim], seen: 0 })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Ridge Gram matrix `lambda I + sum s s^T`, row-major.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }
}

impl Learner for LinUcb {
    fn observations(&self) -> usize {
        self.seen
    }

    fn estimate(&self, pair: PairQuery<'_>, contexts: &[&[f64]], with_bonus: bool) -> Result<Vec<Estimate>> {
        contexts
            .iter()
            .map(|bid| {
                let s = concat(pair.context, bid);
                check_len(self.dim, s.len())?;
                let mean = s.iter().zip(&self.theta).map(|(a, b)| a * b).sum();
                let bonus = if with_bonus && self.alpha > 0.0 {
                    self.alpha * libm::sqrt(self.chol.quad_form(&s)?.max(0.0))
                } else {
                    0.0
                };
                Ok(Estimate { mean, bonus })
            })
            .collect()
    }

    fn observe(&mut self, pair: PairQuery<'_>, context: &[f64], accepted: bool) -> Result<()> {
        let s = concat(pair.context, context);
        check_len(self.dim, s.len())?;
        let n = self.dim;
        let mut gram = self.gram.clone();
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] += s[i] * s[j];
            }
        }
        let chol = Cholesky::factor(&gram, n, 0.0)?;
        if accepted {
            self.moment.iter_mut().zip(&s).for_each(|(m, v)| *m += v);
        }
        self.theta = chol.solve(&self.moment)?;
        self.gram = gram;
        self.chol = chol;
        self.seen += 1;
        Ok(())
    }
}

/// How KernelUCB combines the pair and bid contexts into one kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKernel {
    /// `k(x, x') k(bY, bY')`, the same joint kernel as NegUCB's context term.
    Product,
    /// `k([x; bY], [x'; bY'])`.
    Concat,
}

/// Kernel ridge UCB without a hidden-state term.
#[derive(Debug, Clone)]
pub struct KernelUcb {
    kernel: KernelSpec,
    joint: JointKernel,
    lambda: f64,
    alpha: f64,
    ridge: KernelRidge,
    pair_ctx: ContextRegistry,
    bid_ctx: ContextRegistry,
    history: Vec<(usize, usize)>,
}

impl KernelUcb {
    pub fn new(kernel: KernelSpec, joint: JointKernel, lambda: f64, alpha: f64) -> Result<Self> {
        Self::with_capacity(kernel, joint, lambda, alpha, DEFAULT_CAPACITY)
    }

    pub fn with_capacity(kernel: KernelSpec, joint: JointKernel, lambda: f64, alpha: f64, capacity: usize) -> Result<Self> {
        check_rates(lambda, alpha)?;
        Ok(Self {
            kernel,
            joint,
            lambda,
            alpha,
            ridge: KernelRidge::new(lambda, capacity)?,
            pair_ctx: ContextRegistry::default(),
            bid_ctx: ContextRegistry::default(),
            history: Vec::new(),
        })
    }

    pub fn ridge(&self) -> &KernelRidge {
        &self.ridge
    }

    fn joint_eval(&self, x: &[f64], b: &[f64], x2: &[f64], b2: &[f64]) -> f64 {
        match self.joint {
            JointKernel::Product => self.kernel.eval_unchecked(x, x2) * self.kernel.eval_unchecked(b, b2),
            JointKernel::Concat => self.kernel.eval_unchecked(&concat(x, b), &concat(x2, b2)),
        }
    }

    fn cross(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        self.history
            .iter()
            .map(|&(p, c)| self.joint_eval(x, b, self.pair_ctx.get(p), self.bid_ctx.get(c)))
            .collect()
    }

    fn check_dims(&self, x: &[f64], b: &[f64]) -> Result<()> {
        if let Some(&(p, c)) = self.history.first() {
            check_len(self.pair_ctx.get(p).len(), x.len())?;
            check_len(self.bid_ctx.get(c).len(), b.len())?;
        }
        Ok(())
    }

    fn bonus_of(&self, variance: f64) -> Result<f64> {
        if variance < -crate::negucb::BONUS_CLAMP {
            return Err(Error::Numerical { pivot: self.history.len(), value: variance });
        }
        Ok(self.alpha / libm::sqrt(self.lambda) * libm::sqrt(variance.max(0.0)))
    }
}

impl Learner for KernelUcb {
    fn observations(&self) -> usize {
        self.history.len()
    }

    fn estimate(&self, pair: PairQuery<'_>, contexts: &[&[f64]], with_bonus: bool) -> Result<Vec<Estimate>> {
        for b in contexts {
            self.check_dims(pair.context, b)?;
        }
        let explore = with_bonus && self.alpha > 0.0;
        let x = pair.context;
        if self.joint == JointKernel::Concat {
            return contexts
                .iter()
                .map(|b| {
                    let k_self = self.joint_eval(x, b, x, b);
                    if self.history.is_empty() {
                        let bonus = if explore { self.bonus_of(k_self)? } else { 0.0 };
                        return Ok(Estimate { mean: 0.0, bonus });
                    }
                    let cross = self.cross(x, b);
                    let mean = self.ridge.predict(&cross)?;
                    let bonus = if explore { self.bonus_of(self.ridge.residual_variance(&cross, k_self)?)? } else { 0.0 };
                    Ok(Estimate { mean, bonus })
                })
                .collect();
        }
        let wx: Vec<f64> = (0..self.pair_ctx.len()).map(|i| self.kernel.eval_unchecked(x, self.pair_ctx.get(i))).collect();
        let weights: Vec<f64> = self.history.iter().map(|&(p, _)| wx[p]).collect();
        let groups: Vec<usize> = self.history.iter().map(|&(_, c)| c).collect();
        let agg = GroupAggregate::new(&self.ridge, &weights, &groups, self.bid_ctx.len(), explore && !self.history.is_empty());
        let k_xx = self.kernel.eval_unchecked(x, x);
        let mut g = vec![0.0; self.bid_ctx.len()];
        contexts
            .iter()
            .map(|b| {
                for (j, gj) in g.iter_mut().enumerate() {
                    *gj = self.kernel.eval_unchecked(b, self.bid_ctx.get(j));
                }
                let mean = agg.mean(&g);
                let bonus = if explore {
                    let k_self = k_xx * self.kernel.eval_unchecked(b, b);
                    let v = if self.history.is_empty() { k_self } else { k_self - agg.quad_form(&g) };
                    self.bonus_of(v)?
                } else {
                    0.0
                };
                Ok(Estimate { mean, bonus })
            })
            .collect()
    }

    fn observe(&mut self, pair: PairQuery<'_>, context: &[f64], accepted: bool) -> Result<()> {
        self.check_dims(pair.context, context)?;
        let row = self.cross(pair.context, context);
        let diag = self.joint_eval(pair.context, context, pair.context, context);
        self.ridge.push(&row, diag, if accepted { 1.0 } else { 0.0 })?;
        let p = self.pair_ctx.intern(pair.context);
        let c = self.bid_ctx.intern(context);
        self.history.push((p, c));
        Ok(())
    }
}

/// FactorUCB: linear context model plus a per-counterpart hidden vector, both
/// fitted by the online alternating update in explicit feature space.
#[derive(Debug, Clone)]
pub struct FactorUcb {
    inner: PrimalOnline,
}

/// Hyper-parameters of [`FactorUcb`]. The hidden vector of each counterpart
/// has the bid-context dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorUcbConfig {
    pub lambda_context: f64,
    pub lambda_hidden: f64,
    pub alpha_context: f64,
    pub alpha_hidden: f64,
    pub pairs: usize,
    pub pair_dim: usize,
    pub bid_dim: usize,
}

impl FactorUcb {
    pub fn new(config: FactorUcbConfig) -> Result<Self> {
        Self::with_feature_map(config, FeatureMap::Identity)
    }

    /// Same estimator with a different explicit feature map.
    pub fn with_feature_map(config: FactorUcbConfig, feature_map: FeatureMap) -> Result<Self> {
        let c = config;
        Ok(Self {
            inner: PrimalOnline::new(PrimalConfig {
                feature_map,
                lambda_context: c.lambda_context,
                lambda_hidden: c.lambda_hidden,
                alpha_context: c.alpha_context,
                alpha_hidden: c.alpha_hidden,
                pairs: c.pairs,
                pair_dim: c.pair_dim,
                bid_dim: c.bid_dim,
            })?,
        })
    }

    pub fn primal(&self) -> &PrimalOnline {
        &self.inner
    }

    pub fn hidden_dim(&self) -> usize {
        self.inner.state().hidden_dim()
    }
}

impl Learner for FactorUcb {
    fn observations(&self) -> usize {
        self.inner.len()
    }

    fn estimate(&self, pair: PairQuery<'_>, contexts: &[&[f64]], with_bonus: bool) -> Result<Vec<Estimate>> {
        self.inner.estimate(pair, contexts, with_bonus)
    }

    fn observe(&mut self, pair: PairQuery<'_>, context: &[f64], accepted: bool) -> Result<()> {
        self.inner.update(pair, context, accepted)
    }
}

/// Uniform choice among the top `ceil(top_fraction * n)` bids by own utility.
/// Ties at the cut-off are resolved by the stable order of `utilities`.
pub fn rule_agent_select<R: Rng + ?Sized>(utilities: &[f64], top_fraction: f64, rng: &mut R) -> Result<usize> {
    if utilities.is_empty() {
        return Err(Error::Argument("valid bid set is empty".into()));
    }
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::Argument(format!("top fraction must lie in (0, 1], got {top_fraction}")));
    }
    let n = utilities.len();
    let keep = (libm::ceil(top_fraction * n as f64) as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| utilities[b].total_cmp(&utilities[a]));
    Ok(order[rng.random_range(0..keep)])
}

/// Checks a counterpart index against `pairs`, for callers that bypass the
/// learners' own validation.
pub fn check_pair(pair: usize, pairs: usize) -> Result<()> {
    check_index(pair, pairs)
}

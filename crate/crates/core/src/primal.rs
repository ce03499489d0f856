//! Explicit-feature counterpart of the kernelized estimator.
//!
//! Samples map to `mu = phi(bY) (x) phi(x)` for the context term and
//! `v = phi(bY) (x) p` for the hidden term, where `p` is the counterpart's
//! one-hot indicator. `vec(Theta)` is column-major over a `h_x x h_b` matrix,
//! which lines up with the Kronecker ordering above, and the prediction is
//! `mu . vec(Theta) + phi(bY) . U_p`.
//!
//! [`PrimalOnline`] mirrors the single-pass kernel update step by step;
//! [`primal_reference_fit`] runs full alternating least squares sweeps.

use crate::error::{check_index, check_len, Error, Result};
use crate::kernel::feature_map_poly2;
use crate::learner::{Estimate, Learner, PairQuery};
use crate::linalg::Cholesky;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Explicit feature map `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMap {
    /// `phi(v) = v`; pairs with the linear kernel.
    Identity,
    /// The six-term map of the scale-1/2 degree-2 polynomial kernel on 2-vectors.
    Poly2,
}

impl FeatureMap {
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureMap::Identity => Ok(v.to_vec()),
            FeatureMap::Poly2 => Ok(feature_map_poly2(v)?.to_vec()),
        }
    }

    /// Output dimension for an input of dimension `input`.
    pub fn dim(&self, input: usize) -> usize {
        match self {
            FeatureMap::Identity => input,
            FeatureMap::Poly2 => 6,
        }
    }
}

/// `a (x) b` with `a`'s index varying slowest.
pub fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &ai in a {
        out.extend(b.iter().map(|bj| ai * bj));
    }
    out
}

/// One observed sample in explicit form.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSample {
    pub pair: usize,
    pub pair_context: Vec<f64>,
    pub bid_context: Vec<f64>,
}

/// Parameters and Gram matrices of the explicit estimator.
#[derive(Debug, Clone)]
pub struct PrimalState {
    pub feature_map: FeatureMap,
    pub pairs: usize,
    pub lambda_context: f64,
    pub lambda_hidden: f64,
    /// Context-term feature rows `mu_t`.
    pub design_a: Vec<Vec<f64>>,
    /// Hidden-term rows in compact form: counterpart and `phi(bY_t)`.
    pub design_d: Vec<(usize, Vec<f64>)>,
    /// `vec(Theta)`.
    pub theta: Vec<f64>,
    /// `U`, one row per counterpart.
    pub hidden: Vec<Vec<f64>>,
    /// `A^T A + lambda1 I`, row-major.
    pub gram_a: Vec<f64>,
    /// Diagonal blocks of `D^T D + lambda2 I`, one per counterpart.
    pub gram_d: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl PrimalState {
    fn empty(feature_map: FeatureMap, pairs: usize, lambda_context: f64, lambda_hidden: f64, hx: usize, hb: usize) -> Self {
        let ha = hx * hb;
        let mut gram_a = vec![0.0; ha * ha];
        for i in 0..ha {
            gram_a[i * ha + i] = lambda_context;
        }
        let mut block = vec![0.0; hb * hb];
        for i in 0..hb {
            block[i * hb + i] = lambda_hidden;
        }
        Self {
            feature_map,
            pairs,
            lambda_context,
            lambda_hidden,
            design_a: Vec::new(),
            design_d: Vec::new(),
            theta: vec![0.0; ha],
            hidden: vec![vec![0.0; hb]; pairs],
            gram_a,
            gram_d: vec![block; pairs],
            rewards: Vec::new(),
        }
    }

    /// Context-feature dimension `h_x` (rows of `Theta`).
    pub fn context_dim(&self) -> usize {
        self.theta.len().checked_div(self.hidden_dim()).unwrap_or(0)
    }

    /// Hidden-feature dimension `h_b` (columns of `Theta`, length of `U_p`).
    pub fn hidden_dim(&self) -> usize {
        self.hidden.first().map_or(0, Vec::len)
    }

    /// `Theta[i][j]` for `i < h_x`, `j < h_b`.
    pub fn theta_entry(&self, i: usize, j: usize) -> f64 {
        self.theta[j * self.context_dim() + i]
    }

    /// Full `D` row of sample `t`: `phi(bY_t) (x) p_t`.
    pub fn design_d_row(&self, t: usize) -> Vec<f64> {
        let (pair, phi) = &self.design_d[t];
        let mut p = vec![0.0; self.pairs];
        p[*pair] = 1.0;
        kron(phi, &p)
    }

    /// `mu` and `phi(bY)` of a query.
    pub fn features(&self, pair_context: &[f64], bid_context: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let px = self.feature_map.apply(pair_context)?;
        let pb = self.feature_map.apply(bid_context)?;
        check_len(self.hidden_dim(), pb.len())?;
        check_len(self.theta.len(), px.len() * pb.len())?;
        Ok((kron(&pb, &px), pb))
    }

    /// Context term and hidden term of the explicit prediction.
    pub fn predict_terms(&self, pair: usize, pair_context: &[f64], bid_context: &[f64]) -> Result<(f64, f64)> {
        check_index(pair, self.pairs)?;
        let (mu, pb) = self.features(pair_context, bid_context)?;
        Ok((dot(&mu, &self.theta), dot(&pb, &self.hidden[pair])))
    }

    pub fn predict(&self, pair: usize, pair_context: &[f64], bid_context: &[f64]) -> Result<f64> {
        let (c, h) = self.predict_terms(pair, pair_context, bid_context)?;
        Ok(c + h)
    }

    /// `mu A^-1 mu^T` and `v D^-1 v^T` of a query; `D` is block diagonal so
    /// only the counterpart's block enters.
    pub fn mahalanobis(&self, pair: usize, pair_context: &[f64], bid_context: &[f64]) -> Result<(f64, f64)> {
        check_index(pair, self.pairs)?;
        let (mu, pb) = self.features(pair_context, bid_context)?;
        let ca = Cholesky::factor(&self.gram_a, mu.len(), 0.0)?;
        let cd = Cholesky::factor(&self.gram_d[pair], pb.len(), 0.0)?;
        Ok((ca.quad_form(&mu)?, cd.quad_form(&pb)?))
    }

    /// The least-squares objective: squared residuals plus both ridge penalties.
    pub fn objective(&self) -> f64 {
        let mut loss = 0.0;
        for (t, r) in self.rewards.iter().enumerate() {
            let (pair, phi) = &self.design_d[t];
            let e = r - dot(&self.design_a[t], &self.theta) - dot(phi, &self.hidden[*pair]);
            loss += e * e;
        }
        let u2: f64 = self.hidden.iter().map(|u| dot(u, u)).sum();
        loss + self.lambda_context * dot(&self.theta, &self.theta) + self.lambda_hidden * u2
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rank_one(m: &mut [f64], v: &[f64]) {
    let n = v.len();
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] += v[i] * v[j];
        }
    }
}

/// `alpha_theta sqrt(mu A^-1 mu^T) + alpha_u sqrt(v D^-1 v^T)` from precomputed
/// Mahalanobis terms.
pub fn primal_bonus(mahalanobis: (f64, f64), alpha_context: f64, alpha_hidden: f64) -> f64 {
    alpha_context * libm::sqrt(mahalanobis.0.max(0.0)) + alpha_hidden * libm::sqrt(mahalanobis.1.max(0.0))
}

fn check_lambdas(l1: f64, l2: f64) -> Result<()> {
    if !(l1 > 0.0 && l1.is_finite() && l2 > 0.0 && l2.is_finite()) {
        return Err(Error::Argument(format!("regularizers must be positive, got {l1} and {l2}")));
    }
    Ok(())
}

/// Largest sample count accepted by [`primal_reference_fit`].
pub const REFERENCE_FIT_LIMIT: usize = 200;

/// Alternating least squares from `U = 0`: each sweep solves for `vec(Theta)`
/// with `U` fixed, then for `U` with `Theta` fixed. Returns the state after
/// each sweep's objective in `objectives`.
pub fn primal_reference_fit(
    samples: &[PrimalSample],
    rewards: &[bool],
    lambda_context: f64,
    lambda_hidden: f64,
    feature_map: FeatureMap,
    pairs: usize,
    sweeps: usize,
) -> Result<(PrimalState, Vec<f64>)> {
    check_lambdas(lambda_context, lambda_hidden)?;
    check_len(samples.len(), rewards.len())?;
    if samples.is_empty() {
        return Err(Error::Argument("no samples".into()));
    }
    if samples.len() > REFERENCE_FIT_LIMIT {
        return Err(Error::Capacity { limit: REFERENCE_FIT_LIMIT, requested: samples.len() });
    }
    let hx = feature_map.dim(samples[0].pair_context.len());
    let hb = feature_map.dim(samples[0].bid_context.len());
    let mut st = PrimalState::empty(feature_map, pairs, lambda_context, lambda_hidden, hx, hb);
    for (s, &r) in samples.iter().zip(rewards) {
        check_index(s.pair, pairs)?;
        let px = feature_map.apply(&s.pair_context)?;
        let pb = feature_map.apply(&s.bid_context)?;
        check_len(hx, px.len())?;
        check_len(hb, pb.len())?;
        let mu = kron(&pb, &px);
        rank_one(&mut st.gram_a, &mu);
        rank_one(&mut st.gram_d[s.pair], &pb);
        st.design_a.push(mu);
        st.design_d.push((s.pair, pb));
        st.rewards.push(if r { 1.0 } else { 0.0 });
    }
    let ca = Cholesky::factor(&st.gram_a, hx * hb, 0.0)?;
    let cds = st.gram_d.iter().map(|g| Cholesky::factor(g, hb, 0.0)).collect::<Result<Vec<_>>>()?;

    let mut objectives = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        let mut rhs = vec![0.0; hx * hb];
        for (t, mu) in st.design_a.iter().enumerate() {
            let (pair, phi) = &st.design_d[t];
            let a = st.rewards[t] - dot(phi, &st.hidden[*pair]);
            rhs.iter_mut().zip(mu).for_each(|(s, m)| *s += m * a);
        }
        st.theta = ca.solve(&rhs)?;

        let mut rhs = vec![vec![0.0; hb]; pairs];
        for (t, mu) in st.design_a.iter().enumerate() {
            let (pair, phi) = &st.design_d[t];
            let d = st.rewards[t] - dot(mu, &st.theta);
            rhs[*pair].iter_mut().zip(phi).for_each(|(s, p)| *s += p * d);
        }
        for (p, cd) in cds.iter().enumerate() {
            st.hidden[p] = cd.solve(&rhs[p])?;
        }
        objectives.push(st.objective());
    }
    Ok((st, objectives))
}

/// Hyper-parameters of [`PrimalOnline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalConfig {
    pub feature_map: FeatureMap,
    pub lambda_context: f64,
    pub lambda_hidden: f64,
    pub alpha_context: f64,
    pub alpha_hidden: f64,
    pub pairs: usize,
    /// Input dimensions of the pair and bid contexts.
    pub pair_dim: usize,
    pub bid_dim: usize,
}

/// Single-pass online alternation in explicit feature space. Each observation:
/// `a = r - phi(bY) U_p`; `A` gains `mu` and `Theta` is re-solved;
/// `d = r - mu Theta`; `D_p` gains `phi(bY)` and `U_p` is re-solved.
#[derive(Debug, Clone)]
pub struct PrimalOnline {
    config: PrimalConfig,
    state: PrimalState,
    moment_a: Vec<f64>,
    moment_d: Vec<Vec<f64>>,
    chol_a: Cholesky,
    chol_d: Vec<Cholesky>,
}

impl PrimalOnline {
    pub fn new(config: PrimalConfig) -> Result<Self> {
        check_lambdas(config.lambda_context, config.lambda_hidden)?;
        if !(config.alpha_context >= 0.0 && config.alpha_hidden >= 0.0) {
            return Err(Error::Argument("exploration rates must be non-negative".into()));
        }
        if config.pairs == 0 {
            return Err(Error::Argument("at least one counterpart is required".into()));
        }
        let fm = config.feature_map;
        let (hx, hb) = (fm.dim(config.pair_dim), fm.dim(config.bid_dim));
        if fm == FeatureMap::Poly2 && (config.pair_dim != 2 || config.bid_dim != 2) {
            return Err(Error::Dimension { expected: 2, actual: config.pair_dim.max(config.bid_dim) });
        }
        let state = PrimalState::empty(fm, config.pairs, config.lambda_context, config.lambda_hidden, hx, hb);
        let chol_a = Cholesky::factor(&state.gram_a, hx * hb, 0.0)?;
        let chol_d = vec![Cholesky::factor(&state.gram_d[0], hb, 0.0)?; config.pairs];
        Ok(Self {
            config,
            moment_a: vec![0.0; hx * hb],
            moment_d: vec![vec![0.0; hb]; config.pairs],
            state,
            chol_a,
            chol_d,
        })
    }

    pub fn config(&self) -> &PrimalConfig {
        &self.config
    }

    pub fn state(&self) -> &PrimalState {
        &self.state
    }

    pub fn len(&self) -> usize {
        self.state.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.rewards.is_empty()
    }

    pub fn update(&mut self, pair: PairQuery<'_>, bid: &[f64], accepted: bool) -> Result<()> {
        self.update_value(pair, bid, if accepted { 1.0 } else { 0.0 })
    }

    /// The same update with a real-valued target.
    pub fn update_value(&mut self, pair: PairQuery<'_>, bid: &[f64], r: f64) -> Result<()> {
        check_index(pair.index, self.config.pairs)?;
        let (mu, pb) = self.state.features(pair.context, bid)?;
        let p = pair.index;
        let a = r - dot(&pb, &self.state.hidden[p]);

        let mut gram_a = self.state.gram_a.clone();
        rank_one(&mut gram_a, &mu);
        let chol_a = Cholesky::factor(&gram_a, mu.len(), 0.0)?;
        let mut gram_d = self.state.gram_d[p].clone();
        rank_one(&mut gram_d, &pb);
        let chol_d = Cholesky::factor(&gram_d, pb.len(), 0.0)?;

        self.moment_a.iter_mut().zip(&mu).for_each(|(s, m)| *s += m * a);
        let theta = chol_a.solve(&self.moment_a)?;
        let d = r - dot(&mu, &theta);
        self.moment_d[p].iter_mut().zip(&pb).for_each(|(s, f)| *s += f * d);
        let u = chol_d.solve(&self.moment_d[p])?;

        let st = &mut self.state;
        st.gram_a = gram_a;
        st.gram_d[p] = gram_d;
        st.theta = theta;
        st.hidden[p] = u;
        st.design_a.push(mu);
        st.design_d.push((p, pb));
        st.rewards.push(r);
        self.chol_a = chol_a;
        self.chol_d[p] = chol_d;
        Ok(())
    }

    pub fn predict(&self, pair: PairQuery<'_>, bid: &[f64]) -> Result<f64> {
        self.state.predict(pair.index, pair.context, bid)
    }

    pub fn bonus(&self, pair: PairQuery<'_>, bid: &[f64]) -> Result<f64> {
        check_index(pair.index, self.config.pairs)?;
        let (mu, pb) = self.state.features(pair.context, bid)?;
        let m = (self.chol_a.quad_form(&mu)?, self.chol_d[pair.index].quad_form(&pb)?);
        Ok(primal_bonus(m, self.config.alpha_context, self.config.alpha_hidden))
    }
}

impl Learner for PrimalOnline {
    fn observations(&self) -> usize {
        self.len()
    }

    fn estimate(&self, pair: PairQuery<'_>, contexts: &[&[f64]], with_bonus: bool) -> Result<Vec<Estimate>> {
        check_index(pair.index, self.config.pairs)?;
        let px = self.config.feature_map.apply(pair.context)?;
        let hx = self.config.feature_map.dim(self.config.pair_dim);
        check_len(hx, px.len())?;
        let st = &self.state;
        // Theta^T phi(x) turns the context term into a dot product with phi(bY).
        let hb = st.hidden_dim();
        let theta_x: Vec<f64> = (0..hb).map(|j| dot(&st.theta[j * hx..(j + 1) * hx], &px)).collect();
        let explore = with_bonus && (self.config.alpha_context > 0.0 || self.config.alpha_hidden > 0.0);
        contexts
            .iter()
            .map(|bid| {
                let pb = self.config.feature_map.apply(bid)?;
                check_len(hb, pb.len())?;
                let mean = dot(&pb, &theta_x) + dot(&pb, &st.hidden[pair.index]);
                let bonus = if explore {
                    let mu = kron(&pb, &px);
                    let m = (self.chol_a.quad_form(&mu)?, self.chol_d[pair.index].quad_form(&pb)?);
                    primal_bonus(m, self.config.alpha_context, self.config.alpha_hidden)
                } else {
                    0.0
                };
                Ok(Estimate { mean, bonus })
            })
            .collect()
    }

    fn observe(&mut self, pair: PairQuery<'_>, context: &[f64], accepted: bool) -> Result<()> {
        self.update(pair, context, accepted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(seed: u64, n: usize, pairs: usize) -> (Vec<PrimalSample>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)].to_vec();
        let mut samples = Vec::new();
        for _ in 0..n {
            let x = v();
            let b = v();
            samples.push(PrimalSample { pair: 0, pair_context: x, bid_context: b });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for s in &mut samples {
            s.pair = rng.random_range(0..pairs);
        }
        let rewards = (0..n).map(|_| rng.random_bool(0.5)).collect();
        (samples, rewards)
    }

    #[test]
    fn kron_ordering_matches_column_major_theta() {
        let (samples, rewards) = random_samples(1, 20, 2);
        let (st, _) = primal_reference_fit(&samples, &rewards, 1.0, 1.0, FeatureMap::Poly2, 2, 3).unwrap();
        let s = &samples[0];
        let px = feature_map_poly2(&s.pair_context).unwrap();
        let pb = feature_map_poly2(&s.bid_context).unwrap();
        let mut bilinear = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                bilinear += px[i] * st.theta_entry(i, j) * pb[j];
            }
        }
        let (c, _) = st.predict_terms(s.pair, &s.pair_context, &s.bid_context).unwrap();
        assert!((c - bilinear).abs() < 1e-12);
        assert_eq!(st.context_dim(), 6);
        assert_eq!(st.design_d_row(0).len(), 12);
    }

    #[test]
    fn zero_rewards_give_zero_parameters() {
        let (samples, _) = random_samples(2, 15, 3);
        let rewards = vec![false; 15];
        let (st, _) = primal_reference_fit(&samples, &rewards, 1.0, 1.0, FeatureMap::Poly2, 3, 4).unwrap();
        assert!(st.theta.iter().all(|&t| t == 0.0));
        assert!(st.hidden.iter().flatten().all(|&u| u == 0.0));
    }

    #[test]
    fn single_sample_ridge_identity() {
        let s = PrimalSample { pair: 0, pair_context: vec![0.3, -0.4], bid_context: vec![0.5, 0.2] };
        let (st, _) = primal_reference_fit(std::slice::from_ref(&s), &[true], 1.0, 1.0, FeatureMap::Poly2, 1, 1).unwrap();
        // (s s^T + I)^-1 s r = s / (1 + |s|^2) by Sherman-Morrison.
        let mu = kron(&feature_map_poly2(&s.bid_context).unwrap(), &feature_map_poly2(&s.pair_context).unwrap());
        let n2 = dot(&mu, &mu);
        for (t, m) in st.theta.iter().zip(&mu) {
            assert!((t - m / (1.0 + n2)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_history_mahalanobis() {
        let cfg = PrimalConfig {
            feature_map: FeatureMap::Poly2,
            lambda_context: 2.0,
            lambda_hidden: 1.0,
            alpha_context: 0.0,
            alpha_hidden: 0.0,
            pairs: 1,
            pair_dim: 2,
            bid_dim: 2,
        };
        let p = PrimalOnline::new(cfg).unwrap();
        let (x, b) = ([0.6, 0.8], [1.0, 0.0]);
        let (mu, _) = p.state().features(&x, &b).unwrap();
        let (ma, _) = p.state().mahalanobis(0, &x, &b).unwrap();
        assert!((ma - dot(&mu, &mu) / 2.0).abs() < 1e-12);
        assert_eq!(p.bonus(PairQuery::new(0, &x), &b).unwrap(), 0.0);
    }

    #[test]
    fn limits() {
        let (samples, rewards) = random_samples(3, 201, 1);
        assert!(matches!(
            primal_reference_fit(&samples, &rewards, 1.0, 1.0, FeatureMap::Poly2, 1, 1),
            Err(Error::Capacity { .. })
        ));
        assert!(primal_reference_fit(&samples[..3], &rewards[..3], 0.0, 1.0, FeatureMap::Poly2, 1, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn alternating_objective_is_non_increasing(seed in 0u64..100_000) {
            let (samples, rewards) = random_samples(seed, 40, 3);
            let (_, obj) = primal_reference_fit(&samples, &rewards, 1.0, 0.5, FeatureMap::Poly2, 3, 10).unwrap();
            for w in obj.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            }
        }

        #[test]
        fn converged_sweeps_are_fixed_points(seed in 0u64..100_000) {
            let (samples, rewards) = random_samples(seed, 30, 2);
            let (st, _) = primal_reference_fit(&samples, &rewards, 1.0, 1.0, FeatureMap::Poly2, 2, 400).unwrap();
            // Substituting back into both normal equations leaves small residuals.
            let ca = Cholesky::factor(&st.gram_a, 36, 0.0).unwrap();
            let mut rhs = vec![0.0; 36];
            for (t, mu) in st.design_a.iter().enumerate() {
                let (p, phi) = &st.design_d[t];
                let a = st.rewards[t] - dot(phi, &st.hidden[*p]);
                rhs.iter_mut().zip(mu).for_each(|(s, m)| *s += m * a);
            }
            let theta = ca.solve(&rhs).unwrap();
            for (x, y) in theta.iter().zip(&st.theta) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }
    }
}

//! Kernel-versus-primal equivalence check: NegUCB with poly-2 kernels is
//! mirrored step by step against the explicit-feature online estimator, and
//! the worst prediction and bonus deviations are reported.

use crate::error::Result;
use crate::kernel::KernelSpec;
use crate::learner::PairQuery;
use crate::negucb::{NegUcb, NegUcbConfig};
use crate::primal::{FeatureMap, PrimalConfig, PrimalOnline};
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ORACLE_TOLERANCE: f64 = 1e-8;
pub const ORACLE_PAIRS: usize = 3;
pub const ORACLE_STEPS: usize = 30;
/// Fresh queries compared per step, on top of the bid being observed.
const PROBES: usize = 4;

/// Where a worst deviation happened.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Deviation {
    pub value: f64,
    pub seed: u64,
    /// History length when the deviation was measured (0 = empty history).
    pub step: usize,
}

impl Deviation {
    fn absorb(&mut self, value: f64, seed: u64, step: usize) {
        // NaN counts as a breach.
        if !(value <= self.value) {
            *self = Deviation { value, seed, step };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub prediction: Deviation,
    pub bonus: Deviation,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.prediction.value <= ORACLE_TOLERANCE && self.bonus.value <= ORACLE_TOLERANCE
    }
}

fn unit2(rng: &mut ChaCha8Rng) -> [f64; 2] {
    loop {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = libm::sqrt(v[0] * v[0] + v[1] * v[1]);
        if n > 1e-3 {
            return [v[0] / n, v[1] / n];
        }
    }
}

/// Runs the mirror for every seed. `lambda_perturbation` scales the primal
/// side's regularizers by `1 + lambda_perturbation` (fault injection; 0 for
/// the genuine check).
pub fn oracle_check(seeds: &[u64], lambda_perturbation: f64) -> Result<OracleReport> {
    let (l1, l2, a_theta, a_u) = (1.0, 0.5, 0.7, 0.3);
    let mut report = OracleReport {
        seeds: seeds.to_vec(),
        steps: ORACLE_STEPS,
        prediction: Deviation::default(),
        bonus: Deviation::default(),
    };
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dual = NegUcb::new(NegUcbConfig {
            context_kernel: KernelSpec::poly2(),
            hidden_kernel: KernelSpec::poly2(),
            lambda_context: l1,
            lambda_hidden: l2,
            alpha_context: a_theta,
            alpha_hidden: a_u,
            pairs: ORACLE_PAIRS,
            ..NegUcbConfig::default()
        })?;
        let mut primal = PrimalOnline::new(PrimalConfig {
            feature_map: FeatureMap::Poly2,
            lambda_context: l1 * (1.0 + lambda_perturbation),
            lambda_hidden: l2 * (1.0 + lambda_perturbation),
            alpha_context: a_theta,
            alpha_hidden: a_u,
            pairs: ORACLE_PAIRS,
            pair_dim: 2,
            bid_dim: 2,
        })?;
        let xs: Vec<[f64; 2]> = (0..ORACLE_PAIRS).map(|_| unit2(&mut rng)).collect();
        for step in 0..=ORACLE_STEPS {
            let observed = (rng.random_range(0..ORACLE_PAIRS), unit2(&mut rng));
            let mut probes = Vec::with_capacity(PROBES + 1);
            probes.push(observed);
            probes.extend((0..PROBES).map(|_| (rng.random_range(0..ORACLE_PAIRS), unit2(&mut rng))));
            for (p, b) in &probes {
                let q = PairQuery::new(*p, &xs[*p]);
                let dp = dual.predict_acceptance(q, b)? - primal.predict(q, b)?;
                let db = dual.exploration_bonus(q, b)? - primal.bonus(q, b)?;
                report.prediction.absorb(libm::fabs(dp), seed, step);
                report.bonus.absorb(libm::fabs(db), seed, step);
            }
            if step == ORACLE_STEPS {
                break;
            }
            let accepted = rng.random_bool(0.5);
            let (p, b) = observed;
            let q = PairQuery::new(p, &xs[p]);
            dual.update(q, &b, accepted)?;
            primal.update(q, &b, accepted)?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genuine_check_passes() {
        let r = oracle_check(&[0, 1, 2], 0.0).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn perturbed_lambda_is_detected() {
        let r = oracle_check(&[0], 0.1).unwrap();
        assert!(!r.passed());
        assert!(r.prediction.step > 0);
    }

    #[test]
    fn report_is_deterministic() {
        assert_eq!(oracle_check(&[5, 9], 0.0).unwrap(), oracle_check(&[5, 9], 0.0).unwrap());
    }
}

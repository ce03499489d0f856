//! Kernel functions over real context vectors.

use crate::error::{check_len, Error, Result};
use alloc::format;

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Family of a [`KernelSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `scale * (<u, v> + 1)^2`.
    Poly2,
    /// `exp(-|u - v|^2 / (2 sigma^2))`.
    SquaredExponential,
    /// `<u, v>`.
    Linear,
}

/// A validated kernel: its family plus bandwidth / prefactor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    sigma: f64,
    scale: f64,
}

impl KernelSpec {
    /// Degree-2 polynomial kernel with the default prefactor of one half.
    pub fn poly2() -> Self {
        Self { kind: KernelKind::Poly2, sigma: 1.0, scale: 0.5 }
    }

    pub fn poly2_scaled(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Argument(format!("polynomial scale must be positive, got {scale}")));
        }
        Ok(Self { kind: KernelKind::Poly2, sigma: 1.0, scale })
    }

    pub fn squared_exponential(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Argument(format!("SE bandwidth must be positive, got {sigma}")));
        }
        Ok(Self { kind: KernelKind::SquaredExponential, sigma, scale: 1.0 })
    }

    pub fn linear() -> Self {
        Self { kind: KernelKind::Linear, sigma: 1.0, scale: 1.0 }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Evaluates the kernel on two equal-length vectors.
    pub fn eval(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        check_len(u.len(), v.len())?;
        Ok(self.eval_unchecked(u, v))
    }

    /// Same as [`KernelSpec::eval`] without the length check; callers guarantee
    /// equal lengths (extra entries of the longer slice are ignored).
    #[inline]
    pub fn eval_unchecked(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Poly2 => {
                let s = dot(u, v) + 1.0;
                self.scale * s * s
            }
            KernelKind::SquaredExponential => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                libm::exp(-d2 / (2.0 * self.sigma * self.sigma))
            }
            KernelKind::Linear => dot(u, v),
        }
    }
}

impl core::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self.kind {
            KernelKind::Poly2 if self.scale == 0.5 => write!(f, "poly2"),
            KernelKind::Poly2 => write!(f, "poly2:{}", self.scale),
            KernelKind::SquaredExponential => write!(f, "se:{}", self.sigma),
            KernelKind::Linear => write!(f, "linear"),
        }
    }
}

impl core::str::FromStr for KernelSpec {
    type Err = Error;

    /// Parses `poly2`, `poly2:<scale>`, `se:<sigma>` or `linear`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let parse_arg = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::Argument(format!("bad kernel parameter `{a}`")))
        };
        match (name, arg) {
            ("poly2", None) => Ok(Self::poly2()),
            ("poly2", Some(a)) => Self::poly2_scaled(parse_arg(a)?),
            ("se", Some(a)) => Self::squared_exponential(parse_arg(a)?),
            ("se", None) => Self::squared_exponential(1.0),
            ("linear", None) => Ok(Self::linear()),
            _ => Err(Error::Argument(format!("unknown kernel `{s}`"))),
        }
    }
}

#[inline]
pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Explicit feature map of the degree-2 polynomial kernel (scale one half)
/// on two-dimensional inputs.
pub fn feature_map_poly2(x: &[f64]) -> Result<[f64; 6]> {
    check_len(2, x.len())?;
    let (a, b) = (x[0], x[1]);
    Ok([FRAC_1_SQRT_2, a, b, FRAC_1_SQRT_2 * a * a, a * b, FRAC_1_SQRT_2 * b * b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn se_self_is_one() {
        let k = KernelSpec::squared_exponential(1.0).unwrap();
        assert_eq!(k.eval(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
    }

    #[test]
    fn poly2_matches_hand_values() {
        let k = KernelSpec::poly2();
        assert!((k.eval(&[1.0, 0.0], &[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((k.eval(&[0.0, 0.0], &[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let err = KernelSpec::linear().eval(&[1.0], &[1.0, 2.0]).unwrap_err();
        assert_eq!(err, Error::Dimension { expected: 1, actual: 2 });
        assert!(feature_map_poly2(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(KernelSpec::squared_exponential(0.0).is_err());
        assert!(KernelSpec::poly2_scaled(-1.0).is_err());
        assert!("rbf".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["poly2", "poly2:0.25", "se:2", "linear"] {
            let k: KernelSpec = s.parse().unwrap();
            let again: KernelSpec = alloc::string::ToString::to_string(&k).parse().unwrap();
            assert_eq!(k, again);
        }
    }

    #[test]
    fn feature_map_examples() {
        let r = FRAC_1_SQRT_2;
        assert_eq!(feature_map_poly2(&[0.0, 0.0]).unwrap(), [r, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(feature_map_poly2(&[1.0, 0.0]).unwrap(), [r, 1.0, 0.0, r, 0.0, 0.0]);
        let f = feature_map_poly2(&[1.0, 1.0]).unwrap();
        assert_eq!(f, [r, 1.0, 1.0, r, 1.0, r]);
        let self_dot: f64 = f.iter().map(|v| v * v).sum();
        assert!((self_dot - 4.5).abs() < 1e-12);
    }

    fn kernels() -> Vec<KernelSpec> {
        alloc::vec![
            KernelSpec::poly2(),
            KernelSpec::squared_exponential(0.7).unwrap(),
            KernelSpec::linear(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn symmetric(u in prop::collection::vec(-3.0f64..3.0, 3), v in prop::collection::vec(-3.0f64..3.0, 3)) {
            for k in kernels() {
                let a = k.eval(&u, &v).unwrap();
                let b = k.eval(&v, &u).unwrap();
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn poly2_matches_feature_inner_product(u in prop::array::uniform2(-2.0f64..2.0), v in prop::array::uniform2(-2.0f64..2.0)) {
            let fu = feature_map_poly2(&u).unwrap();
            let fv = feature_map_poly2(&v).unwrap();
            let ip: f64 = fu.iter().zip(&fv).map(|(a, b)| a * b).sum();
            let k = KernelSpec::poly2().eval(&u, &v).unwrap();
            prop_assert!((k - ip).abs() <= 1e-10);
        }

        #[test]
        fn se_in_unit_interval(u in prop::collection::vec(-3.0f64..3.0, 2), v in prop::collection::vec(-3.0f64..3.0, 2)) {
            let k = KernelSpec::squared_exponential(1.0).unwrap().eval(&u, &v).unwrap();
            prop_assert!(k > 0.0 && k <= 1.0);
        }
    }
}

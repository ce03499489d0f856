//! Diagnostic confidence-width bounds for the two estimation terms.

use crate::error::{Error, Result};
use alloc::format;

/// Inputs of [`error_bounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticBoundParams {
    /// Norm bound on the true context parameters.
    pub beta_theta: f64,
    /// Norm bound on the true hidden states.
    pub beta_u: f64,
    /// Failure probability, in `(0, 1)`.
    pub delta: f64,
    /// Local convergence constants, in `(0, 1)`.
    pub p: f64,
    pub q: f64,
    /// Effective dimensions of the context and hidden Gram matrices.
    pub h_star: usize,
    pub m_star: usize,
}

impl Default for DiagnosticBoundParams {
    fn default() -> Self {
        Self { beta_theta: 1.0, beta_u: 1.0, delta: 0.05, p: 0.5, q: 0.5, h_star: 1, m_star: 1 }
    }
}

impl DiagnosticBoundParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.beta_theta > 0.0 && self.beta_u >= 0.0) {
            return Err(Error::Argument(format!(
                "norm bounds must be positive, got {} and {}",
                self.beta_theta, self.beta_u
            )));
        }
        if !open_unit(self.delta) || !open_unit(self.p) || !open_unit(self.q) {
            return Err(Error::Argument(format!(
                "delta, p and q must lie in (0, 1), got {}, {}, {}",
                self.delta, self.p, self.q
            )));
        }
        if self.h_star == 0 || self.m_star == 0 {
            return Err(Error::Argument("effective dimensions must be positive".into()));
        }
        Ok(())
    }
}

fn width(lambda: f64, beta_own: f64, beta_other: f64, dim: usize, tau: usize, delta: f64, rate: f64) -> Result<f64> {
    let dim = dim as f64;
    let inner = 1.0 + tau as f64 / (lambda * dim);
    let radicand = dim * libm::log(inner) - libm::log(delta);
    if !(inner > 0.0) || !(radicand > 0.0) {
        return Err(Error::Argument(format!("log argument out of range ({inner}, {radicand})")));
    }
    Ok(lambda * beta_own + libm::sqrt(radicand) + 2.0 * beta_other / (libm::sqrt(lambda) * rate))
}

/// Upper bounds on the confidence widths `(alpha_theta, alpha_u)` after `tau`
/// observations. Diagnostic only: the learner's exploration rates are set by
/// configuration.
pub fn error_bounds(params: &DiagnosticBoundParams, tau: usize, lambda_context: f64, lambda_hidden: f64) -> Result<(f64, f64)> {
    params.validate()?;
    if tau == 0 {
        return Err(Error::Argument("at least one observation is required".into()));
    }
    if !(lambda_context > 0.0 && lambda_hidden > 0.0) {
        return Err(Error::Argument("regularizers must be positive".into()));
    }
    let p = params;
    Ok((
        width(lambda_context, p.beta_theta, p.beta_u, p.h_star, tau, p.delta, p.q)?,
        width(lambda_hidden, p.beta_u, p.beta_theta, p.m_star, tau, p.delta, p.p)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_evaluated_case() {
        let p = DiagnosticBoundParams { h_star: 10, ..Default::default() };
        let (a, _) = error_bounds(&p, 100, 1.0, 1.0).unwrap();
        let expected = 1.0 + (10.0 * 11f64.ln() - 0.05f64.ln()).sqrt() + 4.0;
        assert!((a - expected).abs() < 1e-12);
    }

    #[test]
    fn limit_is_lambda_beta() {
        let p = DiagnosticBoundParams { beta_u: 0.0, delta: 1.0 - 1e-15, ..Default::default() };
        let (a, _) = error_bounds(&p, 1, 1e6, 1.0).unwrap();
        // lambda1 * beta_theta dominates; the remaining terms are tiny.
        assert!((a - 1e6).abs() < 1e-2);
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = DiagnosticBoundParams { delta: 1.0, ..Default::default() };
        assert!(error_bounds(&bad, 10, 1.0, 1.0).is_err());
        let bad = DiagnosticBoundParams { q: 0.0, ..Default::default() };
        assert!(error_bounds(&bad, 10, 1.0, 1.0).is_err());
        assert!(error_bounds(&DiagnosticBoundParams::default(), 0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_tau(tau in 1usize..100_000, h in 1usize..50, m in 1usize..50) {
            let p = DiagnosticBoundParams { h_star: h, m_star: m, ..Default::default() };
            let (a1, u1) = error_bounds(&p, tau, 1.0, 0.5).unwrap();
            let (a2, u2) = error_bounds(&p, 2 * tau, 1.0, 0.5).unwrap();
            prop_assert!(a2 >= a1 && u2 >= u1);
        }
    }
}

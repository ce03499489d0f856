//! Per-step regret and acceptance series derived from a transcript.

use crate::error::{HarnessError, Result};
use negucb_core::Transcript;

/// One row of the per-seed series. Columns that the run cannot supply (no
/// simulator score, no estimate from a rule agent, unknown optimum) are `None`
/// on every row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub step: usize,
    pub bid_id: u64,
    pub accept: bool,
    pub r_hat: Option<f64>,
    pub score: Option<f64>,
    pub cum_theoretical_regret: Option<f64>,
    pub cum_acceptance_regret: Option<f64>,
    pub cum_oracle_regret: Option<f64>,
    pub acceptance_rate: f64,
}

/// Cumulative series over the proposals of `transcript`. With
/// `require_scores`, a step without a simulator score is an error.
pub fn compute_metrics(transcript: &Transcript, require_scores: bool) -> Result<Vec<MetricsRecord>> {
    let steps = &transcript.steps;
    if require_scores {
        if let Some(s) = steps.iter().find(|s| s.score.is_none()) {
            return Err(HarnessError::Config(format!(
                "theoretical regret needs a simulator score, missing at step {}",
                s.step
            )));
        }
    }
    let has_scores = steps.iter().all(|s| s.score.is_some() && s.r_hat.is_some());
    let has_estimates = steps.iter().all(|s| s.r_hat.is_some());
    let has_optimum = steps.iter().all(|s| s.best_value.is_some());

    let (mut theo, mut acc_reg, mut oracle) = (0.0, 0.0, 0.0);
    let mut accepted = 0usize;
    let mut out = Vec::with_capacity(steps.len());
    for (i, s) in steps.iter().enumerate() {
        let r = if s.accept { 1.0 } else { 0.0 };
        accepted += s.accept as usize;
        if has_scores {
            theo += (s.r_hat.unwrap_or_default() - s.score.unwrap_or_default()).abs();
        }
        if has_estimates {
            acc_reg += (s.r_hat.unwrap_or_default() - r).abs();
        }
        if has_optimum {
            oracle += s.best_value.unwrap_or_default() - s.value();
        }
        out.push(MetricsRecord {
            step: s.step,
            bid_id: s.bid_id,
            accept: s.accept,
            r_hat: s.r_hat,
            score: s.score,
            cum_theoretical_regret: has_scores.then_some(theo),
            cum_acceptance_regret: has_estimates.then_some(acc_reg),
            cum_oracle_regret: has_optimum.then_some(oracle),
            acceptance_rate: accepted as f64 / (i + 1) as f64,
        });
    }
    Ok(out)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use negucb_core::StepRecord;
    use proptest::prelude::*;

    fn step(step: usize, accept: bool, r_hat: Option<f64>, score: Option<f64>, best: Option<f64>) -> StepRecord {
        StepRecord {
            step,
            pair: 0,
            bid_id: step as u64,
            accept,
            benefit: true,
            r_hat,
            score,
            best_value: best,
            no_beneficial: false,
            counter: None,
        }
    }

    #[test]
    fn one_step_acceptance_regret() {
        let t = Transcript { steps: vec![step(1, true, Some(5.0 / 6.0), None, Some(1.0))], deal_round: Some(1) };
        let m = compute_metrics(&t, false).unwrap();
        assert!((m[0].cum_acceptance_regret.unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m[0].cum_theoretical_regret, None);
        assert_eq!(m[0].cum_oracle_regret, Some(0.0));
        assert_eq!(m[0].acceptance_rate, 1.0);
        assert!(compute_metrics(&t, true).is_err());
    }

    #[test]
    fn perfect_predictor_has_no_theoretical_regret() {
        let t = Transcript {
            steps: vec![step(1, true, Some(0.7), Some(0.7), Some(1.0)), step(2, false, Some(-0.2), Some(-0.2), Some(1.0))],
            deal_round: None,
        };
        let m = compute_metrics(&t, true).unwrap();
        assert_eq!(m[1].cum_theoretical_regret, Some(0.0));
        assert_eq!(m[1].cum_oracle_regret, Some(1.0));
        assert_eq!(m[1].acceptance_rate, 0.5);
    }

    #[test]
    fn rule_agent_has_no_estimates() {
        let t = Transcript { steps: vec![step(1, false, None, None, None)], deal_round: None };
        let m = compute_metrics(&t, false).unwrap();
        assert_eq!((m[0].cum_acceptance_regret, m[0].cum_oracle_regret), (None, None));
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    proptest! {
        #[test]
        fn cumulative_series_are_monotone(
            raw in prop::collection::vec((any::<bool>(), any::<bool>(), -2.0f64..2.0, -3.0f64..3.0), 1..60)
        ) {
            // Best value 1 is attainable only by accepted beneficial bids, so
            // value <= best always holds here.
            let steps = raw.iter().enumerate().map(|(i, &(a, f, r, s))| {
                let mut st = step(i + 1, a, Some(r), Some(s), Some(1.0));
                st.benefit = f;
                st
            }).collect();
            let m = compute_metrics(&Transcript { steps, deal_round: None }, true).unwrap();
            for w in m.windows(2) {
                prop_assert!(w[1].cum_theoretical_regret >= w[0].cum_theoretical_regret);
                prop_assert!(w[1].cum_acceptance_regret >= w[0].cum_acceptance_regret);
                prop_assert!(w[1].cum_oracle_regret >= w[0].cum_oracle_regret);
            }
            for r in &m {
                prop_assert!((0.0..=1.0).contains(&r.acceptance_rate));
                prop_assert!(r.cum_oracle_regret.unwrap() >= 0.0);
            }
        }
    }
}

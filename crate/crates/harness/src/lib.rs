//! Experiment runner for the negotiation bandit toolkit: flat-text configs,
//! seeded replications, regret metrics and CSV output.

pub mod config;
pub mod error;
pub mod metrics;
pub mod output;
pub mod runner;

pub use config::{AgentKind, Cell, ExperimentConfig, Mode, Task};
pub use error::{HarnessError, Result};
pub use metrics::{compute_metrics, MetricsRecord};
pub use runner::{run_grid, run_replication, write_run, write_sweep, Replication, RunOptions, RunOutput};

use negucb_core::env::trading_bound;
use negucb_core::oracle::{OracleReport, ORACLE_TOLERANCE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write;

/// Bid-space sizes per counterpart and a few sample bids of the first
/// replication's domain.
pub fn enumerate_report(cfg: &ExperimentConfig, samples: usize) -> Result<String> {
    let seed = cfg.domain_seed.unwrap_or(cfg.seeds[0]);
    let env = runner::build_environment(cfg, seed)?;
    let mut s = String::new();
    let _ = writeln!(s, "task {} (domain seed {seed}), {} counterpart(s)", cfg.task, env.pair_count());
    if cfg.task == Task::MultiIssue {
        let _ = writeln!(s, "issue sizes {:?}", runner::issue_sizes_for(&cfg.issue_sizes, seed));
    }
    if cfg.task == Task::Trading {
        let _ = writeln!(s, "bound sum_(j=1..{}) C({}, j) = {}", cfg.gamma, cfg.items, trading_bound(cfg.items as u64, cfg.gamma as u64));
    }
    for pair in 0..env.pair_count() {
        let _ = writeln!(s, "counterpart {pair}: {} valid bids", env.valid_count(pair)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for id in env.sample_ids(0, samples, &mut rng)? {
        let bid = env.bid(id)?;
        let _ = writeln!(
            s,
            "  bid {id}: {:?} benefit={} utility={}",
            bid.entries(),
            u8::from(env.benefit(id)?),
            env.own_utility(id)?
        );
    }
    Ok(s)
}

pub fn oracle_report_text(r: &OracleReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seeds {}, {} steps each, tolerance {ORACLE_TOLERANCE:e}", r.seeds.len(), r.steps);
    for (name, d) in [("prediction", r.prediction), ("bonus", r.bonus)] {
        let _ = writeln!(s, "max |{name} deviation| = {:e} (seed {}, step {})", d.value, d.seed, d.step);
    }
    let _ = writeln!(s, "{}", if r.passed() { "ok" } else { "FAILED" });
    s
}

//! Seeded replications: domain and agent construction, the negotiation loop,
//! metric series and summaries, and the on-disk layout of a run.

use crate::config::{AgentKind, Cell, ExperimentConfig, IssueSizes, Mode, Task};
use crate::error::{CoreContext, HarnessError, Result};
use crate::metrics::{compute_metrics, mean_std, median, MetricsRecord};
use crate::output::{create_file, write_series, write_table};
use negucb_core::baselines::{FactorUcb, FactorUcbConfig, KernelUcb, LinUcb};
use negucb_core::env::{
    AllocationConfig, AllocationDomain, Environment, MultiIssueConfig, MultiIssueDomain, TradingConfig, TradingDomain,
};
use negucb_core::episode::{run_episode, run_stream, BanditAgent, LoopOptions, Negotiator, Protocol, RuleAgent};
use negucb_core::{NegUcb, NegUcbConfig, Transcript};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Largest issue size of randomly drawn multi-issue domains.
pub const RANDOM_ISSUE_MAX_VALUES: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOutcome {
    pub pair: usize,
    /// Our proposals in the episode.
    pub rounds: usize,
    pub deal_round: Option<usize>,
}

/// Everything one seed produced for one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub seed: u64,
    pub rows: Vec<MetricsRecord>,
    /// Empty for the allocation stream.
    pub episodes: Vec<EpisodeOutcome>,
}

impl Replication {
    pub fn deal_rate(&self) -> Option<f64> {
        (!self.episodes.is_empty())
            .then(|| self.episodes.iter().filter(|e| e.deal_round.is_some()).count() as f64 / self.episodes.len() as f64)
    }

    /// Rounds to a deal per episode; failed episodes count as `max_rounds`.
    pub fn steps_to_deal(&self, max_rounds: usize) -> Vec<f64> {
        self.episodes.iter().map(|e| e.deal_round.unwrap_or(max_rounds) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub cell: Cell,
    pub replications: Vec<Replication>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub cells: Vec<CellOutput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed_offset: u64,
    /// Worker threads for independent replications; 0 lets rayon decide.
    pub parallel: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed_offset: 0, parallel: 1 }
    }
}

/// Issue sizes for a domain seed: fixed, or 2..=max issues of 2..=26 values.
pub fn issue_sizes_for(sizes: &IssueSizes, domain_seed: u64) -> Vec<usize> {
    match sizes {
        IssueSizes::Fixed(s) => s.clone(),
        IssueSizes::Random { max_issues } => {
            let mut rng = ChaCha8Rng::seed_from_u64(domain_seed);
            rng.set_stream(2);
            let n = rng.random_range(2..=*max_issues);
            (0..n).map(|_| rng.random_range(2..=RANDOM_ISSUE_MAX_VALUES)).collect()
        }
    }
}

/// The domain a replication with `seed` negotiates in.
pub fn build_environment(cfg: &ExperimentConfig, seed: u64) -> Result<Box<dyn Environment>> {
    let domain_seed = cfg.domain_seed.unwrap_or(seed);
    let ctx = || format!("building the {} domain for seed {domain_seed}", cfg.task);
    Ok(match cfg.task {
        Task::Allocation => Box::new(
            AllocationDomain::generate(&AllocationConfig {
                categories: cfg.categories,
                max_count: cfg.max_count,
                category_counts: cfg.category_counts.clone(),
                pairs: cfg.pairs,
                seed: domain_seed,
            })
            .context(ctx)?,
        ),
        Task::MultiIssue => Box::new(
            MultiIssueDomain::generate(&MultiIssueConfig {
                issue_sizes: issue_sizes_for(&cfg.issue_sizes, domain_seed),
                opposition: cfg.opposition,
                threshold_quantile: cfg.threshold_quantile,
                seed: domain_seed,
            })
            .context(ctx)?,
        ),
        Task::Trading => Box::new(
            TradingDomain::generate(&TradingConfig {
                items: cfg.items,
                pairs: cfg.trading_pairs,
                gamma: cfg.gamma,
                hold_probability: cfg.hold_probability,
                min_cost: cfg.min_cost,
                max_cost: cfg.max_cost,
                hidden_scale: cfg.hidden_scale,
                seed: domain_seed,
            })
            .context(ctx)?,
        ),
    })
}

/// Upper bound on the observations one replication feeds its learner.
fn observation_budget(cfg: &ExperimentConfig) -> usize {
    match cfg.task {
        Task::Allocation => cfg.steps,
        _ => cfg.episodes * cfg.max_rounds * if cfg.mode == Mode::Alternating { 2 } else { 1 },
    }
    .max(1)
}

pub fn build_agent(cfg: &ExperimentConfig, cell: &Cell, env: &dyn Environment) -> Result<Box<dyn Negotiator>> {
    let pairs = env.pair_count();
    let pair_dim = env.pair_context(0)?.len();
    let probe = env.sample_ids(0, 1, &mut ChaCha8Rng::seed_from_u64(0))?;
    let first = *probe.first().ok_or_else(|| HarnessError::Config("counterpart 0 has no valid bid".into()))?;
    let bid_dim = env.bid_context(first)?.len();
    let capacity = observation_budget(cfg);
    let name = cfg.agent.to_string();
    let ctx = || format!("building agent {name}");
    Ok(match cfg.agent {
        AgentKind::NegUcb => Box::new(BanditAgent::new(
            name.clone(),
            NegUcb::new(NegUcbConfig {
                context_kernel: cell.context_kernel,
                hidden_kernel: cell.hidden_kernel,
                lambda_context: cfg.lambda_context,
                lambda_hidden: cfg.lambda_hidden,
                alpha_context: cell.alpha_context,
                alpha_hidden: cell.alpha_hidden,
                pairs,
                capacity,
            })
            .context(ctx)?,
        )),
        AgentKind::KernelUcb => Box::new(BanditAgent::new(
            name.clone(),
            KernelUcb::with_capacity(cell.context_kernel, cfg.joint_kernel, cfg.lambda_context, cell.alpha_context, capacity)
                .context(ctx)?,
        )),
        AgentKind::LinUcb => Box::new(BanditAgent::new(
            name.clone(),
            LinUcb::new(pair_dim + bid_dim, cfg.lambda_context, cell.alpha_context).context(ctx)?,
        )),
        AgentKind::FactorUcb => Box::new(BanditAgent::new(
            name.clone(),
            FactorUcb::new(FactorUcbConfig {
                lambda_context: cfg.lambda_context,
                lambda_hidden: cfg.lambda_hidden,
                alpha_context: cell.alpha_context,
                alpha_hidden: cell.alpha_hidden,
                pairs,
                pair_dim,
                bid_dim,
            })
            .context(ctx)?,
        )),
        AgentKind::Rule => Box::new(RuleAgent { top_fraction: cfg.rule_top_fraction }),
    })
}

/// Runs one seed of one cell. The domain comes from the domain seed, the
/// agent's and the loop's randomness from an independent stream of `seed`.
pub fn run_replication(cfg: &ExperimentConfig, cell: &Cell, seed: u64) -> Result<Replication> {
    let env = build_environment(cfg, seed)?;
    let mut agent = build_agent(cfg, cell, env.as_ref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let opts = LoopOptions { subsample: cfg.subsample, counter_top_fraction: cfg.counter_top_fraction };
    let ctx = || format!("seed {seed}");
    let (transcript, episodes) = match cfg.task {
        Task::Allocation => (run_stream(agent.as_mut(), env.as_ref(), cfg.steps, &opts, &mut rng).context(ctx)?, Vec::new()),
        Task::MultiIssue | Task::Trading => {
            let protocol = match cfg.mode {
                Mode::ProposeOnly => Protocol::ProposeOnly,
                Mode::Alternating => Protocol::Alternating,
            };
            let mut all = Transcript::default();
            let mut episodes = Vec::with_capacity(cfg.episodes);
            for _ in 0..cfg.episodes {
                let pair = rng.random_range(0..env.pair_count());
                let t = run_episode(agent.as_mut(), env.as_ref(), pair, protocol, cfg.max_rounds, &opts, &mut rng)
                    .context(ctx)?;
                episodes.push(EpisodeOutcome { pair, rounds: t.steps.len(), deal_round: t.deal_round });
                let offset = all.steps.len();
                all.steps.extend(t.steps.into_iter().map(|mut s| {
                    s.step += offset;
                    s
                }));
            }
            (all, episodes)
        }
    };
    let require_scores = cfg.task == Task::Allocation && cfg.agent != AgentKind::Rule;
    let rows = compute_metrics(&transcript, require_scores)?;
    Ok(Replication { seed, rows, episodes })
}

/// Runs every (cell, seed) pair, in parallel across replications.
pub fn run_grid(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let cells = cfg.cells();
    if cells.is_empty() {
        return Err(HarnessError::Config("empty parameter grid".into()));
    }
    let seeds: Vec<u64> = cfg.seeds.iter().map(|s| s.wrapping_add(opts.seed_offset)).collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallel)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let reps: Vec<Replication> =
        pool.install(|| jobs.par_iter().map(|&(c, s)| run_replication(cfg, &cells[c], s)).collect::<Result<_>>())?;
    let mut reps = reps.into_iter();
    let cells = cells
        .into_iter()
        .map(|cell| CellOutput { cell, replications: reps.by_ref().take(seeds.len()).collect() })
        .collect();
    Ok(RunOutput { config: cfg.clone(), cells })
}

/// Final per-replication values summarized across seeds.
pub fn final_metrics(rep: &Replication, max_rounds: usize) -> Vec<(&'static str, Option<f64>)> {
    let last = rep.rows.last();
    let mut out = vec![
        ("cum_theoretical_regret", last.and_then(|r| r.cum_theoretical_regret)),
        ("cum_acceptance_regret", last.and_then(|r| r.cum_acceptance_regret)),
        ("cum_oracle_regret", last.and_then(|r| r.cum_oracle_regret)),
        ("acceptance_rate", last.map(|r| r.acceptance_rate)),
    ];
    if !rep.episodes.is_empty() {
        let steps = rep.steps_to_deal(max_rounds);
        out.push(("deal_rate", rep.deal_rate()));
        out.push(("mean_steps_to_deal", Some(mean_std(&steps).0)));
        out.push(("median_steps_to_deal", Some(median(&steps))));
    }
    out
}

/// `(metric, mean, std, n)` over seeds; metrics missing for any seed are
/// dropped.
pub fn summarize(cell: &CellOutput, max_rounds: usize) -> Vec<(&'static str, f64, f64, usize)> {
    let finals: Vec<_> = cell.replications.iter().map(|r| final_metrics(r, max_rounds)).collect();
    let Some(first) = finals.first() else { return Vec::new() };
    let mut out = Vec::new();
    for (k, (name, _)) in first.iter().enumerate() {
        let vals: Option<Vec<f64>> = finals.iter().map(|f| f[k].1).collect();
        if let Some(v) = vals {
            let (m, s) = mean_std(&v);
            out.push((*name, m, s, v.len()));
        }
    }
    out
}

fn write_summary(path: &Path, cell: &CellOutput, max_rounds: usize) -> Result<()> {
    let header = ["metric", "mean", "std", "n"].map(String::from);
    let rows: Vec<Vec<String>> = summarize(cell, max_rounds)
        .into_iter()
        .map(|(m, mean, std, n)| vec![m.to_string(), mean.to_string(), std.to_string(), n.to_string()])
        .collect();
    write_table(create_file(path)?, &header, &rows)
}

fn write_cell(dir: &Path, cell: &CellOutput, max_rounds: usize) -> Result<()> {
    for rep in &cell.replications {
        write_series(create_file(&dir.join(format!("seed_{}.csv", rep.seed)))?, &rep.rows)?;
    }
    write_summary(&dir.join("summary.csv"), cell, max_rounds)
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let path = dir.join("config.txt");
    let mut f = create_file(&path)?;
    write!(f, "{cfg}").and_then(|_| f.flush()).map_err(crate::error::io_err(&path))
}

/// `out_dir/<name>/`: `seed_<s>.csv` per seed, `summary.csv`, and the
/// resolved `config.txt`. Returns the run directory.
pub fn write_run(out: &RunOutput, out_dir: &Path) -> Result<PathBuf> {
    let [cell] = out.cells.as_slice() else {
        return Err(HarnessError::Config(format!("`run` takes a single parameter cell, got {}; use `sweep`", out.cells.len())));
    };
    let dir = out_dir.join(&out.config.name);
    write_cell(&dir, cell, out.config.max_rounds)?;
    write_config(&dir, &out.config)?;
    Ok(dir)
}

/// `out_dir/<name>/cell_<i>/` per grid cell plus `sweep.csv` with one row per
/// cell (mean and std of every final metric).
pub fn write_sweep(out: &RunOutput, out_dir: &Path) -> Result<PathBuf> {
    let dir = out_dir.join(&out.config.name);
    let max_rounds = out.config.max_rounds;
    let mut header: Vec<String> =
        ["cell", "agent", "context_kernel", "hidden_kernel", "alpha_context", "alpha_hidden"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for (i, cell) in out.cells.iter().enumerate() {
        write_cell(&dir.join(format!("cell_{i}")), cell, max_rounds)?;
        let summary = summarize(cell, max_rounds);
        if i == 0 {
            for (m, ..) in &summary {
                header.push(format!("{m}_mean"));
                header.push(format!("{m}_std"));
            }
        }
        let c = &cell.cell;
        let mut row = vec![
            i.to_string(),
            out.config.agent.to_string(),
            c.context_kernel.to_string(),
            c.hidden_kernel.to_string(),
            c.alpha_context.to_string(),
            c.alpha_hidden.to_string(),
        ];
        for (_, mean, std, _) in summary {
            row.push(mean.to_string());
            row.push(std.to_string());
        }
        rows.push(row);
    }
    write_table(create_file(&dir.join("sweep.csv"))?, &header, &rows)?;
    write_config(&dir, &out.config)?;
    Ok(dir)
}

use negucb::metrics::mean_std;
use negucb::output::read_series;
use negucb::runner::{final_metrics, summarize};
use negucb::{run_grid, write_run, write_sweep, ExperimentConfig, HarnessError, RunOptions};
use std::fs;
use std::process::Command;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_text(text).unwrap()
}

const SMALL_ALLOCATION: &str = "name = small\ntask = allocation\nagent = negucb\nsteps = 10\nseeds = 3, 4\n";

#[test]
fn two_seeds_give_two_series_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_grid(&config(SMALL_ALLOCATION), &RunOptions::default()).unwrap();
    let run_dir = write_run(&out, dir.path()).unwrap();
    for seed in [3, 4] {
        let rows = read_series(fs::File::open(run_dir.join(format!("seed_{seed}.csv"))).unwrap()).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.score.is_some() && r.cum_theoretical_regret.is_some()));
    }
    let summary = fs::read_to_string(run_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("metric,mean,std,n\n"));
    assert!(summary.contains("cum_oracle_regret,"));
    let reloaded = ExperimentConfig::from_text(&fs::read_to_string(run_dir.join("config.txt")).unwrap()).unwrap();
    assert_eq!(reloaded, out.config);
}

#[test]
fn written_series_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_grid(&config(SMALL_ALLOCATION), &RunOptions::default()).unwrap();
    let run_dir = write_run(&out, dir.path()).unwrap();
    for rep in &out.cells[0].replications {
        let back = read_series(fs::File::open(run_dir.join(format!("seed_{}.csv", rep.seed))).unwrap()).unwrap();
        assert_eq!(back, rep.rows);
    }
}

#[test]
fn summary_mean_is_the_mean_of_seed_finals() {
    let cfg = config("task = multiissue\nissue_sizes = 3, 4, 2\nepisodes = 4\nseeds = 0..5\nagent = factorucb\n");
    let out = run_grid(&cfg, &RunOptions::default()).unwrap();
    let cell = &out.cells[0];
    for (name, mean, _, n) in summarize(cell, cfg.max_rounds) {
        let finals: Vec<f64> = cell
            .replications
            .iter()
            .map(|r| final_metrics(r, cfg.max_rounds).into_iter().find(|(m, _)| *m == name).unwrap().1.unwrap())
            .collect();
        assert_eq!(n, finals.len());
        let direct = finals.iter().sum::<f64>() / finals.len() as f64;
        assert!((mean - direct).abs() <= 1e-12, "{name}");
        assert_eq!(mean_std(&finals).0, mean);
    }
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let cfg = config("task = allocation\nagent = kernelucb\nsteps = 15\nseeds = 0..4\nalpha = 0, 1\n");
    let a = run_grid(&cfg, &RunOptions { seed_offset: 0, parallel: 1 }).unwrap();
    let b = run_grid(&cfg, &RunOptions { seed_offset: 0, parallel: 3 }).unwrap();
    assert_eq!(a, b);
    let c = run_grid(&cfg, &RunOptions { seed_offset: 10, parallel: 1 }).unwrap();
    assert_eq!(c.cells[0].replications[0].seed, 10);
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("name = grid\ntask = allocation\nsteps = 5\nalpha = 0, 0.1, 1\n");
    let out = run_grid(&cfg, &RunOptions::default()).unwrap();
    let sweep_dir = write_sweep(&out, dir.path()).unwrap();
    let table = fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(sweep_dir.join("cell_2/seed_0.csv").exists());
    // More than one cell is not a plain run.
    assert!(write_run(&out, dir.path()).is_err());
}

#[test]
fn trading_se_bandwidth_grid_has_four_cells() {
    let cfg = config(
        "task = trading\ncontext_kernel = se:0.5, se:1, se:2, se:5\nhidden_kernel = se:1\nepisodes = 2\nmax_rounds = 5\nsubsample = 50\nmode = alternating\n",
    );
    let out = run_grid(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(out.cells.len(), 4);
    for cell in &out.cells {
        let rep = &cell.replications[0];
        assert_eq!(rep.episodes.len(), 2);
        assert!(rep.rows.iter().all(|r| r.score.is_none() && r.cum_theoretical_regret.is_none()));
    }
}

#[test]
fn empty_grid_is_an_error() {
    assert!(ExperimentConfig::from_text("task = allocation\nalpha =\n").is_err());
    let mut cfg = config("task = allocation\n");
    cfg.alphas.clear();
    assert!(matches!(run_grid(&cfg, &RunOptions::default()), Err(HarnessError::Key { .. })));
}

#[test]
fn rule_agent_runs_without_estimates() {
    let cfg = config("task = multiissue\nagent = rule\nissue_sizes = 5, 5\nepisodes = 3\nmode = alternating\n");
    let rep = &run_grid(&cfg, &RunOptions::default()).unwrap().cells[0].replications[0];
    assert!(rep.rows.iter().all(|r| r.r_hat.is_none() && r.cum_acceptance_regret.is_none()));
    assert!(rep.rows.iter().all(|r| r.cum_oracle_regret.unwrap() >= 0.0));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_negucb")).args(args).output().unwrap()
}

#[test]
fn cli_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    fs::write(&conf, "name = twice\ntask = allocation\nagent = linucb\nsteps = 40\nseeds = 1, 2\n").unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("out{k}"));
        let o = cli(&["run", conf.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let files: Vec<Vec<u8>> = ["seed_1.csv", "seed_2.csv", "summary.csv"]
            .iter()
            .map(|f| fs::read(out_dir.join("twice").join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn cli_reports_config_errors_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "task = allocation\nsteps = many\n").unwrap();
    let o = cli(&["run", conf.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn cli_oracle_check_exit_codes() {
    let ok = cli(&["oracle-check", "--seeds", "3"]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("ok"));
    let bad = cli(&["oracle-check", "--seeds", "3", "--lambda-perturbation", "0.05"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stdout).contains("step"));
}

#[test]
fn cli_enumerate_prints_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("e.conf");
    fs::write(&conf, "task = allocation\ncategory_counts = 5, 5, 5\n").unwrap();
    let o = cli(&["enumerate", conf.to_str().unwrap(), "--samples", "2"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("counterpart 0: 216 valid bids"));
}

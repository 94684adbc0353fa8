use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::{preset_for, AgentKind, Config};
use super::metrics::{mean_std, RuntimeStats};
use super::plot::{line_plot, Series};
use super::run::{Run, RunContext, RunResult};
use crate::error::{Error, Result};
use crate::shield::ShieldKind;

/// One benchmark cell: a shield paired with an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub shield: ShieldKind,
    pub agent: AgentKind,
}

impl Cell {
    pub fn all() -> Vec<Cell> {
        ShieldKind::ALL
            .iter()
            .flat_map(|&shield| AgentKind::ALL.iter().map(move |&agent| Cell { shield, agent }))
            .collect()
    }

    pub fn name(&self) -> String {
        format!("{}-{}", self.shield, self.agent)
    }

    /// `base` with this cell's shield, agent and the matching preset.
    pub fn config(&self, base: &Config) -> Config {
        let mut cfg = base.clone();
        cfg.shield.kind = self.shield;
        cfg.agent.kind = self.agent;
        cfg.agent.apply_preset(preset_for(self.shield));
        cfg
    }
}

fn worker_count(requested: usize, jobs: usize) -> usize {
    let n = if requested == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        requested
    };
    n.clamp(1, jobs.max(1))
}

/// Runs `f` over `jobs` on up to `threads` workers; results keep job order.
pub fn run_parallel<J, T, F>(jobs: &[J], threads: usize, f: F) -> Vec<Result<T>>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> Result<T> + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..worker_count(threads, jobs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= jobs.len() {
                    break;
                }
                let r = f(&jobs[k]);
                slots.lock().expect("no worker panics while holding the lock")[k] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers have finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub step: usize,
    pub objective_mean: f64,
    pub objective_std: f64,
    pub tolerance_mean: f64,
    pub tolerance_std: f64,
}

/// Mean and std across runs at every evaluation step.
pub fn aggregate_curves(runs: &[RunResult]) -> Result<Vec<CurveRow>> {
    let first = runs.first().ok_or(Error::Empty("runs"))?;
    let steps: Vec<usize> = first.curve.iter().map(|p| p.step).collect();
    if runs
        .iter()
        .any(|r| r.curve.iter().map(|p| p.step).ne(steps.iter().copied()))
    {
        return Err(Error::Config("runs disagree on evaluation steps".into()));
    }
    Ok(steps
        .iter()
        .enumerate()
        .map(|(k, &step)| {
            let obj: Vec<f64> = runs.iter().map(|r| r.curve[k].metrics.objective).collect();
            let tol: Vec<f64> = runs.iter().map(|r| r.curve[k].metrics.tolerance).collect();
            let (objective_mean, objective_std) = mean_std(&obj);
            let (tolerance_mean, tolerance_std) = mean_std(&tol);
            CurveRow {
                step,
                objective_mean,
                objective_std,
                tolerance_mean,
                tolerance_std,
            }
        })
        .collect())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `learning_curve.csv`, `cost_curve.csv` and, if `plots`, SVGs of
/// both into `dir`.
pub fn write_curves(dir: &Path, label: &str, runs: &[RunResult], plots: bool) -> Result<Vec<CurveRow>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = aggregate_curves(runs)?;
    let mut learning = String::from("step,objective_mean,objective_std\n");
    let mut cost = String::from("step,tolerance_mean,tolerance_std\n");
    for r in &rows {
        learning.push_str(&format!("{},{},{}\n", r.step, r.objective_mean, r.objective_std));
        cost.push_str(&format!("{},{},{}\n", r.step, r.tolerance_mean, r.tolerance_std));
    }
    write_file(&dir.join("learning_curve.csv"), &learning)?;
    write_file(&dir.join("cost_curve.csv"), &cost)?;
    if plots {
        let x: Vec<f64> = rows.iter().map(|r| r.step as f64).collect();
        let om: Vec<f64> = rows.iter().map(|r| r.objective_mean).collect();
        let os: Vec<f64> = rows.iter().map(|r| r.objective_std).collect();
        let tm: Vec<f64> = rows.iter().map(|r| 100.0 * r.tolerance_mean).collect();
        let ts: Vec<f64> = rows.iter().map(|r| 100.0 * r.tolerance_std).collect();
        let svg = line_plot(
            &format!("Learning curve: {label}"),
            "training step",
            "evaluation objective",
            &[Series { label, x: &x, mean: &om, std: Some(&os) }],
        );
        write_file(&dir.join("learning_curve.svg"), &svg)?;
        let svg = line_plot(
            &format!("Cost curve: {label}"),
            "training step",
            "tolerance [% of demand]",
            &[Series { label, x: &x, mean: &tm, std: Some(&ts) }],
        );
        write_file(&dir.join("cost_curve.svg"), &svg)?;
    }
    Ok(rows)
}

/// Pools per-run step statistics into one set.
pub fn pool_runtime(stats: &[RuntimeStats]) -> Option<RuntimeStats> {
    let n: usize = stats.iter().map(|s| s.n).sum();
    if n == 0 {
        return None;
    }
    let total: f64 = stats.iter().map(|s| s.total).sum();
    let mean = total / n as f64;
    let second: f64 = stats.iter().map(|s| s.n as f64 * (s.std * s.std + s.mean * s.mean)).sum::<f64>() / n as f64;
    Some(RuntimeStats {
        min: stats.iter().map(|s| s.min).fold(f64::INFINITY, f64::min),
        mean,
        std: (second - mean * mean).max(0.0).sqrt(),
        max: stats.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max),
        total,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub n_runs: usize,
    /// Final evaluation, across runs.
    pub objective_mean: f64,
    pub objective_std: f64,
    pub objective_per_step_mean: f64,
    pub tolerance_mean: f64,
    pub tolerance_std: f64,
    /// Step-0 evaluation, across runs.
    pub initial_objective_mean: f64,
    pub initial_objective_std: f64,
    pub initial_tolerance_mean: f64,
    pub initial_tolerance_std: f64,
    /// Audited training plus evaluation steps whose action failed the check.
    pub n_violations: usize,
    pub step_runtime: Option<RuntimeStats>,
}

pub fn summarize(cell: Cell, runs: &[RunResult]) -> Result<CellSummary> {
    if runs.is_empty() {
        return Err(Error::Empty("runs"));
    }
    let col = |f: &dyn Fn(&RunResult) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
    let (objective_mean, objective_std) = col(&|r| r.last().objective);
    let (objective_per_step_mean, _) = col(&|r| r.last().objective_per_step);
    let (tolerance_mean, tolerance_std) = col(&|r| r.last().tolerance);
    let (initial_objective_mean, initial_objective_std) = col(&|r| r.initial().objective);
    let (initial_tolerance_mean, initial_tolerance_std) = col(&|r| r.initial().tolerance);
    let n_violations = runs
        .iter()
        .map(|r| r.stats.n_violations + r.curve.iter().map(|p| p.metrics.n_violations).sum::<usize>())
        .sum();
    let rt: Vec<RuntimeStats> = runs.iter().filter_map(|r| r.step_runtime).collect();
    Ok(CellSummary {
        cell,
        n_runs: runs.len(),
        objective_mean,
        objective_std,
        objective_per_step_mean,
        tolerance_mean,
        tolerance_std,
        initial_objective_mean,
        initial_objective_std,
        initial_tolerance_mean,
        initial_tolerance_std,
        n_violations,
        step_runtime: pool_runtime(&rt),
    })
}

const BENCHMARK_HEADER: &str = "cell,shield,agent,n_runs,objective_mean,objective_std,objective_per_step_mean,tolerance_mean,tolerance_std,initial_objective_mean,initial_objective_std,initial_tolerance_mean,initial_tolerance_std,n_violations";
const RUNTIME_HEADER: &str = "cell,n_steps,min_s,mean_s,std_s,max_s,total_s";

/// Deterministic summary table; wall-clock figures go to [`runtime_csv`].
pub fn benchmark_csv(summaries: &[CellSummary]) -> String {
    let mut s = format!("{BENCHMARK_HEADER}\n");
    for c in summaries {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.cell.name(),
            c.cell.shield,
            c.cell.agent,
            c.n_runs,
            c.objective_mean,
            c.objective_std,
            c.objective_per_step_mean,
            c.tolerance_mean,
            c.tolerance_std,
            c.initial_objective_mean,
            c.initial_objective_std,
            c.initial_tolerance_mean,
            c.initial_tolerance_std,
            c.n_violations
        ));
    }
    s
}

pub fn runtime_csv(rows: &[(String, Option<RuntimeStats>)]) -> String {
    let mut s = format!("{RUNTIME_HEADER}\n");
    for (name, rt) in rows {
        if let Some(r) = rt {
            s.push_str(&format!("{name},{},{},{},{},{},{}\n", r.n, r.min, r.mean, r.std, r.max, r.total));
        }
    }
    s
}

fn seeds(config: &Config) -> Vec<u64> {
    (0..config.harness.n_runs as u64)
        .map(|k| config.harness.seed + k)
        .collect()
}

/// Trains the configured cell once per seed (`harness.seed` onwards,
/// `harness.n_runs` runs). With `out`, writes curves, plots, per-run
/// checkpoints, `runs.csv` and `runtime.csv`.
pub fn train(config: &Config, out: Option<&Path>) -> Result<Vec<RunResult>> {
    let ctx = RunContext::prepare(config, false)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let seeds = seeds(config);
    let interval = config.harness.checkpoint_interval;
    let results = run_parallel(&seeds, config.harness.threads, |&seed| {
        let mut run = Run::new(ctx.clone(), seed)?;
        let budget = config.harness.budget;
        let ck_path = out.map(|d| d.join(format!("checkpoint_seed{seed}.bin")));
        while run.state().t < budget {
            let next = if interval > 0 { run.state().t + interval } else { budget };
            run.run_to(next)?;
            if let Some(p) = &ck_path {
                run.checkpoint()?.save(p)?;
            }
        }
        Ok(run.result())
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out {
        let label = format!("{}-{}", config.shield.kind, config.agent.kind);
        write_curves(dir, &label, &runs, config.harness.plots)?;
        let mut csv = String::from("seed,initial_objective,initial_tolerance,final_objective,final_tolerance,n_fallbacks,n_retries,n_violations\n");
        for r in &runs {
            let v = r.stats.n_violations + r.curve.iter().map(|p| p.metrics.n_violations).sum::<usize>();
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.seed,
                r.initial().objective,
                r.initial().tolerance,
                r.last().objective,
                r.last().tolerance,
                r.stats.n_fallbacks,
                r.stats.n_retries,
                v
            ));
        }
        write_file(&dir.join("runs.csv"), &csv)?;
        let rows: Vec<(String, Option<RuntimeStats>)> =
            runs.iter().map(|r| (format!("{label}-seed{}", r.seed), r.step_runtime)).collect();
        write_file(&dir.join("runtime.csv"), &runtime_csv(&rows))?;
    }
    Ok(runs)
}

/// Full shield × agent matrix with `harness.n_runs` seeds per cell. Every
/// cell shares the data and safety layer and uses the preset of its shield.
pub fn benchmark(config: &Config, out: Option<&Path>) -> Result<Vec<CellSummary>> {
    let ctx = RunContext::prepare(config, true)?;
    let cells = Cell::all();
    let jobs: Vec<(Cell, u64)> = cells
        .iter()
        .flat_map(|&c| seeds(config).into_iter().map(move |s| (c, s)))
        .collect();
    let results = run_parallel(&jobs, config.harness.threads, |&(cell, seed)| {
        Run::new(ctx.with_config(cell.config(config)), seed)?.run()
    });
    let mut by_cell: Vec<Vec<RunResult>> = vec![Vec::new(); cells.len()];
    for ((cell, _), r) in jobs.iter().zip(results) {
        let r = r.map_err(|e| Error::Cell {
            cell: cell.name(),
            source: Box::new(e),
        })?;
        let k = cells.iter().position(|c| c == cell).expect("job cells come from the cell list");
        by_cell[k].push(r);
    }
    let summaries = cells
        .iter()
        .zip(&by_cell)
        .map(|(&c, runs)| summarize(c, runs))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("benchmark.csv"), &benchmark_csv(&summaries))?;
        let rows: Vec<(String, Option<RuntimeStats>)> =
            summaries.iter().map(|s| (s.cell.name(), s.step_runtime)).collect();
        write_file(&dir.join("runtime.csv"), &runtime_csv(&rows))?;
        for (c, runs) in cells.iter().zip(&by_cell) {
            write_curves(&dir.join(c.name()), &c.name(), runs, config.harness.plots)?;
        }
    }
    Ok(summaries)
}

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ems_shield::agents::Preset;
use ems_shield::harness::{
    benchmark, build_safety, collect_safety_log, mean_std, preset_for, train, AgentKind, Checkpoint, Config,
    EpisodeMetrics,
};
use ems_shield::safety::Asset;
use ems_shield::shield::ShieldKind;
use ems_shield::timeseries::{synth_profiles, write_series, write_series_to, STEPS_PER_YEAR};

#[derive(Parser, Debug)]
#[command(name = "ems-shield", version, about = "Shielded TD3 testbed for multi-energy system dispatch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic exogenous series as CSV.
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = STEPS_PER_YEAR)]
        steps: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collect an operation log, fit the surrogates and save them.
    FitSafety(Common),
    /// Train one shield/agent cell for `harness.n_runs` seeds.
    Train(Common),
    /// Evaluate a checkpoint on the evaluation week.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Seed for GiveSafe re-proposal noise during evaluation.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full shield × agent matrix.
    Benchmark(Common),
    /// Print the effective configuration as TOML.
    DumpConfig(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    shield: Option<ShieldKind>,
    #[arg(long)]
    agent: Option<AgentKind>,
    /// Defaults to the preset matching `--shield`.
    #[arg(long)]
    preset: Option<Preset>,
    /// Number of seeds per cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => Config::default(),
        };
        if let Some(s) = self.seed {
            cfg.harness.seed = s;
        }
        if let Some(b) = self.budget {
            cfg.harness.budget = b;
            cfg.harness.eval_interval = cfg.harness.eval_interval.min(b);
        }
        if let Some(k) = self.shield {
            cfg.shield.kind = k;
        }
        if let Some(a) = self.agent {
            cfg.agent.kind = a;
        }
        match (self.preset, self.shield) {
            (Some(p), _) => cfg.agent.apply_preset(p),
            (None, Some(k)) => cfg.agent.apply_preset(preset_for(k)),
            (None, None) => {}
        }
        if let Some(n) = self.runs {
            cfg.harness.n_runs = n;
        }
        if let Some(t) = self.threads {
            cfg.harness.threads = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        match &self.out {
            Some(p) => Ok(p),
            None => bail!("--out <dir> is required"),
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Synth { seed, steps, out } => {
            let series = synth_profiles(seed, steps)?;
            match out {
                Some(p) => write_series(&series, &p)?,
                None => write_series_to(&series, &mut io::stdout().lock())?,
            }
        }
        Command::FitSafety(c) => fit_safety(&c)?,
        Command::Train(c) => {
            let cfg = c.config()?;
            let runs = train(&cfg, c.out.as_deref())?;
            let init: Vec<f64> = runs.iter().map(|r| r.initial().objective).collect();
            let last: Vec<f64> = runs.iter().map(|r| r.last().objective).collect();
            let tol: Vec<f64> = runs.iter().map(|r| r.last().tolerance).collect();
            let (m0, s0) = mean_std(&init);
            let (m1, s1) = mean_std(&last);
            let (mt, st) = mean_std(&tol);
            println!("cell {}-{} runs {}", cfg.shield.kind, cfg.agent.kind, runs.len());
            println!("objective step 0: {m0:.3} ± {s0:.3}");
            println!("objective step {}: {m1:.3} ± {s1:.3}", cfg.harness.budget);
            println!("final tolerance: {mt:.4} ± {st:.4}");
        }
        Command::Evaluate { checkpoint, seed, out } => {
            let ck = Checkpoint::load(&checkpoint)
                .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
            let m = match seed {
                Some(s) => ck.evaluate_with_seed(s)?,
                None => ck.evaluate()?,
            };
            let text = metrics_csv(&m);
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                    fs::write(dir.join("evaluation.csv"), &text)?;
                }
                None => io::stdout().lock().write_all(text.as_bytes())?,
            }
        }
        Command::Benchmark(c) => {
            let cfg = c.config()?;
            let summaries = benchmark(&cfg, c.out.as_deref())?;
            for s in &summaries {
                println!(
                    "{:<22} objective {:>10.3} ± {:<8.3} tolerance {:.4} ± {:.4}",
                    s.cell.name(),
                    s.objective_mean,
                    s.objective_std,
                    s.tolerance_mean,
                    s.tolerance_std
                );
            }
        }
        Command::DumpConfig(c) => {
            let cfg = if c.config.is_some() || c.shield.is_some() || c.preset.is_some() {
                c.config()?
            } else {
                Config::default()
            };
            print!("{}", cfg.to_toml()?);
        }
    }
    Ok(())
}

fn fit_safety(c: &Common) -> Result<()> {
    let mut cfg = c.config()?;
    let dir = c.out_dir()?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    cfg.safety.surrogates = None;
    let train = cfg.training_series()?;
    let log = collect_safety_log(&cfg, &train)?;
    log.write_csv(dir.join("operation_log.csv"))?;
    let layer = build_safety(&cfg, &train)?;
    layer.surrogates.save(dir.join("surrogates.json"))?;
    let mut csv = String::from("asset,r2,mae,nmae,n_train,n_test\n");
    for a in Asset::ALL {
        let m = layer.surrogates.get(a).fit_metrics;
        csv.push_str(&format!("{},{},{},{},{},{}\n", a.name(), m.r2, m.mae, m.nmae, m.n_train, m.n_test));
        println!("{:<10} r2 {:.4} nmae {:.4}", a.name(), m.r2, m.nmae);
    }
    fs::write(dir.join("fit_metrics.csv"), csv)?;
    println!("q_tol {:.4} MW_th", layer.q_tol);
    Ok(())
}

fn metrics_csv(m: &EpisodeMetrics) -> String {
    format!(
        "objective,objective_per_step,tolerance,energy_cost,comfort_loss,n_steps,n_fallbacks,n_retries,n_violations\n\
         {},{},{},{},{},{},{},{},{}\n",
        m.objective,
        m.objective_per_step,
        m.tolerance,
        m.energy_cost,
        m.comfort_loss,
        m.n_steps,
        m.n_fallbacks,
        m.n_retries,
        m.n_violations
    )
}

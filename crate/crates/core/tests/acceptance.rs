//! Acceptance suite. Prints one PASS/FAIL line per criterion to stderr and
//! fails at the end if any criterion failed. The full run trains eight
//! 100k-step agents and takes about an hour on one core.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ems_shield::agents::{
    grad, random_action, HiddenActivation, Mlp, OutputActivation, Td3Agent, Td3Hyper,
};
use ems_shield::harness::{
    benchmark, collect_safety_log, evaluate, mean_std, train, AgentKind, Cell, CellSummary, Checkpoint, Config,
    PlantEnv, Policy, Run, RunContext, RunResult,
};
use ems_shield::safety::{fit_surrogates, Asset, CheckInput, FitOptions, SafetyLayer};
use ems_shield::shield::{
    fallback_policy, give_safe_step, safe_fallback_step, EnvStep, ExperienceTuple, Proposer, ShieldConfig,
    ShieldEnv, ShieldKind,
};
use ems_shield::timeseries::{synth_profiles, write_series};
use ems_shield::{Action, Observation, Result};

struct Report {
    rows: Vec<(u8, bool)>,
}

impl Report {
    fn record(&mut self, id: u8, name: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        // bypasses the test harness capture so the lines always show
        let _ = writeln!(std::io::stderr(), "[{verdict}] criterion {id}: {name} ({detail})");
        self.rows.push((id, pass));
    }
}

fn stage<T>(name: &str, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    let _ = writeln!(std::io::stderr(), "  {name} took {:.1?}", t0.elapsed());
    out
}

// ---------------------------------------------------------------- 1 and 7

struct Trained {
    cell: Cell,
    seed: u64,
    result: std::result::Result<RunResult, String>,
    wall: Duration,
}

fn full_runs(ctx: &RunContext) -> Vec<Trained> {
    let base = &ctx.config;
    let sf = Cell {
        shield: ShieldKind::SafeFallback,
        agent: AgentKind::Td3,
    };
    let gs = Cell {
        shield: ShieldKind::GiveSafe,
        agent: AgentKind::Td3,
    };
    let jobs: Vec<(Cell, u64)> = (0..5).map(|s| (sf, s)).chain((0..3).map(|s| (gs, s))).collect();
    let results = ems_shield::harness::run_parallel(&jobs, 0, |&(cell, seed)| {
        let t0 = Instant::now();
        let result = Run::new(ctx.with_config(cell.config(base)), seed)
            .and_then(|r| r.run())
            .map_err(|e| e.to_string());
        let wall = t0.elapsed();
        let _ = match &result {
            Ok(r) => writeln!(
                std::io::stderr(),
                "  {} seed {seed}: {:.1?}, objective {:.2} -> {:.2}, tolerance {:.4} -> {:.4}",
                cell.name(),
                wall,
                r.initial().objective,
                r.last().objective,
                r.initial().tolerance,
                r.last().tolerance
            ),
            Err(e) => writeln!(std::io::stderr(), "  {} seed {seed}: {:.1?}, failed: {e}", cell.name(), wall),
        };
        Ok(Trained { cell, seed, result, wall })
    });
    results.into_iter().map(|r| r.expect("job returns Ok")).collect()
}

fn hard_constraint(report: &mut Report, runs: &[Trained], budget: usize) {
    let mut violations = 0;
    let mut audited_ok = true;
    let mut worst_tol: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    let mut failed = Vec::new();
    for t in runs.iter().filter(|t| t.seed < 3) {
        slowest = slowest.max(t.wall);
        let r = match &t.result {
            Ok(r) => r,
            Err(e) => {
                failed.push(format!("{} seed {}: {e}", t.cell.name(), t.seed));
                continue;
            }
        };
        violations += r.stats.n_violations + r.curve.iter().map(|p| p.metrics.n_violations).sum::<usize>();
        audited_ok &= r.stats.n_audited == budget && r.stats.steps == budget;
        worst_tol = r.curve.iter().map(|p| p.metrics.tolerance).fold(worst_tol, f64::max);
    }
    let pass = failed.is_empty()
        && violations == 0
        && audited_ok
        && worst_tol <= 0.16
        && slowest <= Duration::from_secs(30 * 60);
    report.record(
        1,
        "hard-constraint guarantee",
        pass,
        format!(
            "violations {violations}, every step audited {audited_ok}, max eval tolerance {worst_tol:.4}, slowest run {slowest:.0?}, failed runs {failed:?}"
        ),
    );
}

fn learning_progress(report: &mut Report, runs: &[Trained]) {
    let sf: Vec<&Trained> = runs
        .iter()
        .filter(|t| t.cell.shield == ShieldKind::SafeFallback)
        .collect();
    let done: Vec<&RunResult> = sf.iter().filter_map(|t| t.result.as_ref().ok()).collect();
    let improved = done.iter().filter(|r| r.last().objective > r.initial().objective).count();
    let worst_final = done.iter().map(|r| r.last().tolerance).fold(0.0, f64::max);
    let gains: Vec<String> = done
        .iter()
        .map(|r| format!("{:+.2}", r.last().objective - r.initial().objective))
        .collect();
    report.record(
        7,
        "SafeFallback-TD3 learning progress",
        improved >= 4 && done.len() == 5 && worst_final <= 0.15,
        format!(
            "{improved}/5 seeds improved, {} completed, gains [{}], max final tolerance {worst_final:.4}",
            done.len(),
            gains.join(", ")
        ),
    );
}

// ---------------------------------------------------------------- 2 and 3

fn random_step0(ctx: &RunContext, shield: ShieldKind) -> Vec<(f64, f64)> {
    let cfg = Cell {
        shield,
        agent: AgentKind::Random,
    }
    .config(&ctx.config);
    let c = ctx.with_config(cfg);
    (0..5)
        .map(|seed| {
            let m = evaluate(&c, Policy::Random, seed).expect("random evaluation");
            (m.objective, m.tolerance)
        })
        .collect()
}

fn unsafe_contrast(report: &mut Report, unsafe_rows: &[(f64, f64)]) {
    let min_tol = unsafe_rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    report.record(
        2,
        "unsafe random step-0 tolerance",
        min_tol > 1.0,
        format!("minimum over 5 seeds {min_tol:.4}"),
    );
}

fn initial_ordering(report: &mut Report, sf: &[(f64, f64)], gs: &[(f64, f64)], un: &[(f64, f64)]) {
    let ms = |rows: &[(f64, f64)]| mean_std(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let (a, b, c) = (ms(sf), ms(gs), ms(un));
    let pass = a.0 - a.1 > b.0 + b.1 && b.0 - b.1 > c.0 + c.1;
    report.record(
        3,
        "step-0 utility ordering",
        pass,
        format!(
            "safe_fallback {:.2} ± {:.2} > give_safe {:.2} ± {:.2} > none {:.2} ± {:.2}",
            a.0, a.1, b.0, b.1, c.0, c.1
        ),
    );
}

// ---------------------------------------------------------------------- 4

fn surrogate_quality(report: &mut Report, cfg: &Config) {
    let train = cfg.training_series().expect("training series");
    let log = collect_safety_log(cfg, &train).expect("operation log");
    let opts = FitOptions {
        holdout_frac: 0.25,
        forest: cfg.safety.forest.clone(),
        seed: cfg.safety.fit_seed,
    };
    let set = fit_surrogates(&log, &cfg.plant, &opts).expect("fit");
    let mut pass = log.len() == 10_000;
    let mut parts = vec![format!("{} rows", log.len())];
    for a in Asset::ALL {
        let m = set.get(a).fit_metrics;
        let cap = if a == Asset::Tess { 0.03 } else { 0.02 };
        pass &= m.nmae <= cap && m.n_test == 2500;
        parts.push(format!("{} {:.4}", a.name(), m.nmae));
    }
    report.record(4, "surrogate NMAE on 25% holdout", pass, parts.join(", "));
}

// ---------------------------------------------------------------------- 5

fn fd_relative_error(net: &Mlp, inputs: &[Vec<f64>], weights: &[f64]) -> f64 {
    let loss = |outs: &[Vec<f64>]| {
        let mut l = 0.0;
        let mut d = Vec::with_capacity(outs.len());
        for o in outs {
            let mut row = Vec::with_capacity(o.len());
            for (k, v) in o.iter().enumerate() {
                let w = weights[k % weights.len()];
                l += 0.5 * w * v * v + v;
                row.push(w * v + 1.0);
            }
            d.push(row);
        }
        (l, d)
    };
    let (_, g) = grad(net, inputs, loss).expect("gradient");
    let h = 1e-6;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut probe = net.clone();
    for i in 0..net.n_params() {
        let p = net.params()[i];
        probe.params_mut()[i] = p + h;
        let up = grad(&probe, inputs, loss).unwrap().0;
        probe.params_mut()[i] = p - h;
        let down = grad(&probe, inputs, loss).unwrap().0;
        probe.params_mut()[i] = p;
        let fd = (up - down) / (2.0 * h);
        num += (g[i] - fd).powi(2);
        den += g[i].powi(2).max(fd.powi(2));
    }
    (num / den.max(1e-300)).sqrt()
}

fn hand_target_error() -> f64 {
    let h = Td3Hyper {
        gamma: 0.7,
        hidden: vec![1],
        ..Td3Hyper::default()
    };
    let mut agent = Td3Agent::new(h, 0).unwrap();
    let mut ap = vec![-0.2; 9];
    ap.push(0.1);
    ap.extend([0.8; 5]);
    ap.extend((0..5).map(|k| -0.2 + 0.15 * k as f64));
    agent.actor_target = Mlp::from_params(&[9, 1, 5], OutputActivation::Tanh, ap).unwrap();
    let critic = |w: f64, b: f64| {
        let mut p = vec![-0.3; 14];
        p.push(0.2);
        p.push(w);
        p.push(b);
        Mlp::from_params(&[14, 1, 1], OutputActivation::Linear, p).unwrap()
    };
    agent.critic1_target = critic(1.5, -0.4);
    agent.critic2_target = critic(3.0, -0.9);
    let s_next = Observation([0.1, 0.9, 0.4, 0.0, 0.7, 0.3, 0.2, 0.6, 0.8]);
    let t = ExperienceTuple {
        s: Observation([0.0; 9]),
        a: Action([0.0; 5]),
        r: -1.75,
        s_next,
        done: false,
        synthetic: false,
    };
    let noise = [[0.9, -0.1, 0.3, -0.8, 0.05]];
    let y = agent.compute_targets(&[&t], &noise).unwrap()[0];

    let sum_s: f64 = s_next.0.iter().sum();
    let hid = (-0.2 * sum_s + 0.1).tanh();
    let mut sum_x = sum_s;
    for k in 0..5 {
        let mu = (0.8 * hid - 0.2 + 0.15 * k as f64).tanh();
        sum_x += (mu + noise[0][k].clamp(-0.5, 0.5)).clamp(-1.0, 1.0);
    }
    let hq = (-0.3 * sum_x + 0.2).tanh();
    let q = (1.5 * hq - 0.4).min(3.0 * hq - 0.9);
    (y - (-1.75 + 0.7 * q)).abs()
}

fn td3_correctness(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![rng.random_range(1..=14)];
        for _ in 0..depth {
            sizes.push(rng.random_range(1..=12));
        }
        sizes.push(rng.random_range(1..=5));
        let output = if k % 2 == 0 {
            OutputActivation::Tanh
        } else {
            OutputActivation::Linear
        };
        let hidden = if k % 4 < 2 {
            HiddenActivation::Tanh
        } else {
            HiddenActivation::Relu
        };
        let net = Mlp::new(&sizes, output, &mut rng).unwrap().with_hidden(hidden);
        let batch = rng.random_range(1..=6);
        let inputs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let weights: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..2.0)).collect();
        worst = worst.max(fd_relative_error(&net, &inputs, &weights));
    }
    let target_err = hand_target_error();

    // polyak: every target parameter equals ρ·t + (1−ρ)·s bit for bit
    let mut polyak_exact = true;
    for trial in 0..10 {
        let rho = rng.random_range(0.0..1.0);
        let mut target = Mlp::new(&[9, 16, 5], OutputActivation::Tanh, &mut rng).unwrap();
        let source = Mlp::new(&[9, 16, 5], OutputActivation::Tanh, &mut rng).unwrap();
        let before = target.clone();
        target.polyak_from(&source, if trial == 0 { 1.0 } else { rho });
        let r = if trial == 0 { 1.0 } else { rho };
        polyak_exact &= target
            .params()
            .iter()
            .zip(before.params().iter().zip(source.params()))
            .all(|(t, (b, s))| t.to_bits() == (r * b + (1.0 - r) * s).to_bits());
    }

    // terminal: d = 1 gives y = r exactly whatever the networks say
    let agent = Td3Agent::new(Td3Hyper::default(), 5).unwrap();
    let mut terminal_exact = true;
    for _ in 0..100 {
        let t = ExperienceTuple {
            s: Observation(std::array::from_fn(|_| rng.random_range(0.0..1.0))),
            a: random_action(&mut rng),
            r: rng.random_range(-100.0..10.0),
            s_next: Observation(std::array::from_fn(|_| rng.random_range(0.0..1.0))),
            done: true,
            synthetic: false,
        };
        let noise = [std::array::from_fn(|_| rng.random_range(-1.0..1.0))];
        terminal_exact &= agent.compute_targets(&[&t], &noise).unwrap()[0].to_bits() == t.r.to_bits();
    }

    report.record(
        5,
        "TD3 correctness",
        worst <= 1e-4 && target_err <= 1e-12 && polyak_exact && terminal_exact,
        format!(
            "max FD relative error {worst:.2e} over 20 nets, hand target error {target_err:.1e}, polyak exact {polyak_exact}, terminal exact {terminal_exact}"
        ),
    );
}

// ---------------------------------------------------------------------- 6

struct Counting {
    env: PlantEnv,
    executed: Vec<Action>,
}

impl ShieldEnv for Counting {
    fn observe(&self) -> Observation {
        self.env.observe()
    }

    fn check_input(&self) -> CheckInput {
        self.env.check_input()
    }

    fn execute(&mut self, action: &Action) -> Result<EnvStep> {
        self.executed.push(*action);
        self.env.execute(action)
    }
}

/// Uniform actions, fallback actions and jittered fallback actions, so both
/// feasible and infeasible proposals are frequent.
struct Mixed<'a> {
    rng: ChaCha8Rng,
    plant: &'a ems_shield::plant::PlantConfig,
    demand: f64,
    proposals: Vec<Action>,
}

impl Proposer for Mixed<'_> {
    fn propose(&mut self, _: &Observation) -> Result<Action> {
        let fb = fallback_policy(self.demand, self.plant)?.action;
        let a = match self.rng.random_range(0..3) {
            0 => random_action(&mut self.rng),
            1 => fb,
            _ => Action(std::array::from_fn(|k| (fb.0[k] + self.rng.random_range(-0.05..0.05)).clamp(-1.0, 1.0))),
        };
        self.proposals.push(a);
        Ok(a)
    }
}

fn shield_semantics(report: &mut Report, ctx: &RunContext) {
    let layer: &SafetyLayer = ctx.safety.as_deref().expect("safety layer");
    let cfg = ShieldConfig::default();
    let plant = &ctx.config.plant;
    let n = 10_000;
    let mut failures: BTreeMap<&str, usize> = BTreeMap::new();
    let mut fail = |what: &'static str| *failures.entry(what).or_default() += 1;
    let (mut n_dual, mut n_single, mut n_rejections) = (0, 0, 0);

    for kind in [ShieldKind::SafeFallback, ShieldKind::GiveSafe] {
        let env = PlantEnv::new(
            Arc::clone(&ctx.train),
            plant.clone(),
            ctx.norms,
            ctx.config.harness.reward,
        )
        .unwrap();
        let mut env = Counting { env, executed: Vec::new() };
        let mut agent = Mixed {
            rng: ChaCha8Rng::seed_from_u64(kind as u64 + 11),
            plant,
            demand: 0.0,
            proposals: Vec::new(),
        };
        for _ in 0..n {
            let input = env.check_input();
            let s = env.observe();
            agent.demand = input.thermal_demand;
            agent.proposals.clear();
            let before = env.executed.len();
            let out = match kind {
                ShieldKind::SafeFallback => safe_fallback_step(
                    &mut agent,
                    &mut env,
                    layer,
                    |i: &CheckInput| Ok(fallback_policy(i.thermal_demand, plant)?.action),
                    &cfg,
                ),
                _ => give_safe_step(&mut agent, &mut env, layer, &cfg),
            }
            .expect("shield step");
            if env.executed.len() != before + 1 {
                fail("plant transitions per step");
            }
            let a_exec = out.executed.a;
            if !env.executed.last().unwrap().bit_eq(&a_exec) || out.executed.synthetic {
                fail("executed tuple");
            }
            if !layer.check(&a_exec, &input).unwrap().feasible {
                fail("executed action infeasible");
            }
            if !out.executed.s.bit_eq(&s) {
                fail("executed state");
            }
            let rec = env.env.last_step().unwrap();
            if out.executed.r.to_bits() != rec.breakdown.reward.to_bits() {
                fail("executed reward");
            }
            match kind {
                ShieldKind::SafeFallback => {
                    let a = agent.proposals[0];
                    if agent.proposals.len() != 1 {
                        fail("one proposal per step");
                    }
                    if a_exec.bit_eq(&a) {
                        n_single += 1;
                        if !out.synthetic.is_empty() {
                            fail("synthetic without override");
                        }
                    } else {
                        n_dual += 1;
                        let fb = fallback_policy(input.thermal_demand, plant).unwrap().action;
                        match out.synthetic.as_slice() {
                            [syn] => {
                                let e = &out.executed;
                                let ok = syn.a.bit_eq(&a)
                                    && syn.synthetic
                                    && syn.s.bit_eq(&e.s)
                                    && syn.s_next.bit_eq(&e.s_next)
                                    && syn.done == e.done
                                    && syn.r.to_bits() == (e.r - cfg.cost_fallback).to_bits()
                                    && a_exec.bit_eq(&fb);
                                if !ok {
                                    fail("dual tuple contents");
                                }
                            }
                            _ => fail("dual tuple count"),
                        }
                    }
                }
                _ => {
                    let k = agent.proposals.len();
                    n_rejections += k - 1;
                    if out.synthetic.len() != k - 1 || out.retries != k - 1 {
                        fail("one synthetic tuple per rejection");
                    }
                    if !agent.proposals[k - 1].bit_eq(&a_exec) {
                        fail("last proposal executed");
                    }
                    for (syn, a) in out.synthetic.iter().zip(&agent.proposals) {
                        let r = if a.chp() > cfg.chp_bonus_threshold { -60.0 } else { -50.0 };
                        let ok = syn.a.bit_eq(a)
                            && syn.s.bit_eq(&s)
                            && syn.s_next.bit_eq(&s)
                            && !syn.done
                            && syn.synthetic
                            && syn.r == r
                            && !layer.check(a, &input).unwrap().feasible;
                        if !ok {
                            fail("rejection tuple contents");
                        }
                    }
                }
            }
        }
    }
    let bad: usize = failures.values().sum();
    report.record(
        6,
        "shield semantics over 10^4 steps per shield",
        bad == 0 && n_dual > 1000 && n_single > 1000 && n_rejections > 1000,
        format!(
            "SafeFallback {n_dual} overrides / {n_single} passes, GiveSafe {n_rejections} rejections, failures {failures:?}"
        ),
    );
}

// ---------------------------------------------------------------- 8 and 9

fn small_config() -> Config {
    let mut cfg = Config::default();
    cfg.harness.budget = 1500;
    cfg.harness.eval_interval = 500;
    cfg.harness.n_runs = 2;
    cfg.harness.series_len = 4000;
    cfg.harness.plots = false;
    cfg.safety.log_rows = 3000;
    cfg
}

fn csv_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") && !p.ends_with("runtime.csv") {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(report: &mut Report) -> Vec<CellSummary> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let mut checks: Vec<(String, bool)> = Vec::new();
    let mut summaries = Vec::new();

    for name in ["a", "b"] {
        let d = dir.path().join(name);
        let series = synth_profiles(9, 3000).unwrap();
        fs::create_dir_all(d.join("synth")).unwrap();
        write_series(&series, d.join("synth").join("series.csv")).unwrap();
        let train_series = cfg.training_series().unwrap();
        let log = collect_safety_log(&cfg, &train_series).unwrap();
        log.write_csv(d.join("operation_log.csv")).unwrap();
        let mut c = cfg.clone();
        c.shield.kind = ShieldKind::SafeFallback;
        c.agent.apply_preset(ems_shield::harness::preset_for(ShieldKind::SafeFallback));
        train(&c, Some(&d.join("train"))).unwrap();
        let ck = Checkpoint::load(d.join("train").join("checkpoint_seed0.bin")).unwrap();
        let m = ck.evaluate().unwrap();
        fs::write(
            d.join("evaluation.csv"),
            format!("{},{},{}\n", m.objective, m.tolerance, m.energy_cost),
        )
        .unwrap();
        summaries = benchmark(&cfg, Some(&d.join("benchmark"))).unwrap();
    }
    let a = csv_files(&dir.path().join("a"));
    let b = csv_files(&dir.path().join("b"));
    checks.push(("same file set".into(), a.keys().eq(b.keys())));
    for (k, v) in &a {
        checks.push((k.display().to_string(), b.get(k) == Some(v)));
    }
    let differing: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    report.record(
        8,
        "byte-identical CSV outputs",
        differing.is_empty() && a.len() == 19,
        format!("{} CSV files compared, differing {differing:?}", a.len()),
    );
    summaries
}

fn runtime_ordering(report: &mut Report, summaries: &[CellSummary]) {
    let mean = |shield: ShieldKind| {
        summaries
            .iter()
            .find(|s| s.cell.shield == shield && s.cell.agent == AgentKind::Random)
            .and_then(|s| s.step_runtime)
            .map(|r| r.mean)
            .unwrap_or(f64::NAN)
    };
    let (u, f, g) = (mean(ShieldKind::None), mean(ShieldKind::SafeFallback), mean(ShieldKind::GiveSafe));
    report.record(
        9,
        "per-step runtime ordering",
        u <= f && f <= g && g < 0.1,
        format!("none {u:.2e} s <= safe_fallback {f:.2e} s <= give_safe {g:.2e} s"),
    );
}

#[test]
fn acceptance() {
    let mut report = Report { rows: Vec::new() };
    let cfg = Config::default();
    let ctx = stage("prepare", || RunContext::prepare(&cfg, true).expect("run context"));

    stage("criterion 5", || td3_correctness(&mut report));
    stage("criterion 6", || shield_semantics(&mut report, &ctx));
    stage("criterion 4", || surrogate_quality(&mut report, &cfg));
    let un = stage("criterion 2", || random_step0(&ctx, ShieldKind::None));
    unsafe_contrast(&mut report, &un);
    stage("criterion 3", || {
        let sf = random_step0(&ctx, ShieldKind::SafeFallback);
        let gs = random_step0(&ctx, ShieldKind::GiveSafe);
        initial_ordering(&mut report, &sf, &gs, &un);
    });
    let summaries = stage("criterion 8", || determinism(&mut report));
    runtime_ordering(&mut report, &summaries);
    let runs = stage("criteria 1 and 7", || full_runs(&ctx));
    hard_constraint(&mut report, &runs, cfg.harness.budget);
    learning_progress(&mut report, &runs);

    report.rows.sort_by_key(|r| r.0);
    let failed: Vec<u8> = report.rows.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let _ = writeln!(
        std::io::stderr(),
        "acceptance: {}/{} criteria passed",
        report.rows.len() - failed.len(),
        report.rows.len()
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

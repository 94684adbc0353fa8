use std::sync::Arc;

use ems_shield::agents::RandomAgent;
use ems_shield::harness::{evaluate, AgentKind, Checkpoint, Config, PlantEnv, Policy, Run, RunContext, RunState};
use ems_shield::shield::{fallback_policy, safe_fallback_step, ShieldKind};
use ems_shield::timeseries::STEP_HOURS;

fn small(shield: ShieldKind, agent: AgentKind) -> Config {
    let mut cfg = Config::default();
    cfg.harness.budget = 1400;
    cfg.harness.eval_interval = 400;
    cfg.harness.series_len = 3000;
    cfg.safety.log_rows = 3000;
    cfg.shield.kind = shield;
    cfg.agent.kind = agent;
    cfg.agent.apply_preset(ems_shield::harness::preset_for(shield));
    cfg.agent.td3.warmup_steps = 300;
    cfg
}

fn same_progress(a: &RunState, b: &RunState) {
    assert_eq!(a.t, b.t);
    assert_eq!(a.env, b.env);
    assert_eq!(a.agent, b.agent);
    assert_eq!(a.explore_rng, b.explore_rng);
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.curve.len(), b.curve.len());
    for (p, q) in a.curve.iter().zip(&b.curve) {
        assert_eq!(p.step, q.step);
        assert_eq!(p.metrics.objective.to_bits(), q.metrics.objective.to_bits());
        assert_eq!(p.metrics.tolerance.to_bits(), q.metrics.tolerance.to_bits());
        assert_eq!(p.metrics.n_retries, q.metrics.n_retries);
    }
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    for shield in [ShieldKind::SafeFallback, ShieldKind::GiveSafe, ShieldKind::None] {
        let cfg = small(shield, AgentKind::Td3);
        let ctx = RunContext::prepare(&cfg, false).unwrap();
        let mut straight = Run::new(ctx.clone(), 3).unwrap();
        straight.run_to(cfg.harness.budget).unwrap();

        let mut first = Run::new(ctx, 3).unwrap();
        first.run_to(650).unwrap();
        let path = dir.path().join(format!("{shield}.bin"));
        first.checkpoint().unwrap().save(&path).unwrap();
        let mut resumed = Checkpoint::load(&path).unwrap().resume().unwrap();
        resumed.run_to(cfg.harness.budget).unwrap();

        same_progress(straight.state(), resumed.state());
        assert_eq!(straight.state().curve.len(), 5, "{shield}");
    }
}

#[test]
fn rejects_foreign_checkpoint_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("junk.bin");
    std::fs::write(&p, b"not a checkpoint at all").unwrap();
    assert!(Checkpoint::load(&p).is_err());
}

#[test]
fn evaluation_objective_decomposes() {
    let cfg = small(ShieldKind::SafeFallback, AgentKind::Random);
    let ctx = RunContext::prepare(&cfg, false).unwrap();
    let r = cfg.harness.reward;
    for policy in [Policy::Random, Policy::Fallback] {
        let m = evaluate(&ctx, policy, 1).unwrap();
        let comfort_w = m.comfort_loss / (1e-6 * STEP_HOURS);
        let rebuilt = -(r.a * m.energy_cost + r.b * comfort_w);
        assert!((m.objective - rebuilt).abs() <= 1e-9 * m.objective.abs().max(1.0));
        assert_eq!(m.n_steps, 672);
        let again = evaluate(&ctx, policy, 1).unwrap();
        assert_eq!(m.objective.to_bits(), again.objective.to_bits());
    }
    let fb = evaluate(&ctx, Policy::Fallback, 0).unwrap();
    assert!(fb.tolerance <= 0.15);
    assert_eq!(fb.n_violations, 0);
}

#[test]
fn training_rewards_decompose_with_shield_costs() {
    let cfg = small(ShieldKind::SafeFallback, AgentKind::Random);
    let ctx = RunContext::prepare(&cfg, false).unwrap();
    let layer = ctx.safety.as_deref().unwrap();
    let plant = &cfg.plant;
    let mut env = PlantEnv::new(Arc::clone(&ctx.train), plant.clone(), ctx.norms, cfg.harness.reward).unwrap();
    let mut agent = RandomAgent::new(4);
    let (mut tuple_sum, mut cost, mut comfort, mut shield) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..2000 {
        let out = safe_fallback_step(
            &mut agent,
            &mut env,
            layer,
            |i: &ems_shield::safety::CheckInput| Ok(fallback_policy(i.thermal_demand, plant)?.action),
            &cfg.shield.params,
        )
        .unwrap();
        let rec = env.last_step().unwrap();
        // a synthetic tuple repeats the executed step's reward
        let copies = (1 + out.synthetic.len()) as f64;
        cost += rec.breakdown.cost * copies;
        comfort += rec.breakdown.comfort * copies;
        shield += cfg.shield.params.cost_fallback * out.synthetic.len() as f64;
        tuple_sum += out.tuples().map(|t| t.r).sum::<f64>();
    }
    let r = cfg.harness.reward;
    let rebuilt = -(r.a * cost + r.b * comfort) - shield;
    assert!(shield > 0.0);
    assert!((tuple_sum - rebuilt).abs() <= 1e-9 * rebuilt.abs());
}

#[test]
fn untrained_td3_is_evaluated_as_its_warmup_policy() {
    for shield in [ShieldKind::SafeFallback, ShieldKind::GiveSafe] {
        let td3 = small(shield, AgentKind::Td3);
        let ctx = RunContext::prepare(&td3, false).unwrap();
        let mut run = Run::new(ctx.clone(), 2).unwrap();
        run.run_to(400).unwrap();
        let random = Run::new(ctx.with_config(small(shield, AgentKind::Random)), 2).unwrap();
        let a = run.state().curve[0].metrics;
        let b = random.evaluate().unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits(), "{shield}");
        assert_eq!(a.tolerance.to_bits(), b.tolerance.to_bits(), "{shield}");
        // warm-up ends at 300, so the step-400 point uses the actor
        run.run_to(800).unwrap();
        assert_ne!(run.state().curve[1].metrics.objective.to_bits(), b.objective.to_bits());
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use genctrl_core::dynamics::{ParamVector, PulseSequence, Scenario, ScenarioConfig, ScenarioKind};
use genctrl_core::fisher::{self, Evaluation};
use genctrl_core::grape::GrapeReport;
use genctrl_core::shift::{generalize, Generalization};
use genctrl_rl::{evaluate_policy, train, ActorCheckpoint, Mlp, TrainConfig};
use serde::Serialize;

use crate::config::{load_config, Method, RunConfig, TSweepConfig};
use crate::output::{num, write_csv, write_json};
use crate::runs::{self, Artifacts, RunContext};

#[derive(Debug, Parser)]
#[command(name = "genctrl", version, about = "Control pulses for two-qubit multiparameter estimation")]
pub struct Cli {
    /// JSON run configuration; example 1 defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; also replaces the training seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for sweeps (all cores by default).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write zero for every wall-time field.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Evaluate a pulse (zero by default) at the configured parameters.
    Simulate,
    /// Optimize a pulse by gradient ascent on f0.
    Grape,
    /// Train the actor-critic agent and save the actor.
    TrainRl,
    /// Roll out a saved actor at the configured parameters.
    EvaluateRl,
    /// Carry a pulse to new parameters through the control channels.
    Shift,
    /// Evaluate methods along a parameter, time or noise axis.
    Sweep,
    /// Bound as a function of time under one pulse.
    TimeResolved,
    /// Normalized bound as a function of the target time.
    TSweep,
    /// Simulated adaptive estimation rounds.
    Adaptive,
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::new(ScenarioKind::Example1),
    };
    let ctx = RunContext {
        seed: cli.seed.or(cfg.train.as_ref().map(|t| t.seed)).unwrap_or(0),
        deterministic: cli.deterministic,
    };
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    pool.build()?.install(|| dispatch(cli.command, &cfg, &ctx, &cli.out))
}

fn dispatch(command: Command, cfg: &RunConfig, ctx: &RunContext, out: &Path) -> Result<()> {
    let scenario = cfg.scenario()?;
    match command {
        Command::Simulate => simulate(cfg, &scenario, out),
        Command::Grape => grape(cfg, &scenario, ctx, out),
        Command::TrainRl => train_rl(cfg, &scenario, ctx, out),
        Command::EvaluateRl => evaluate_rl(cfg, &scenario, out),
        Command::Shift => shift(cfg, &scenario, ctx, out),
        Command::Sweep => sweep(cfg, &scenario, ctx, out),
        Command::TimeResolved => time_resolved(cfg, &scenario, out),
        Command::TSweep => t_sweep(cfg, &scenario, ctx, out),
        Command::Adaptive => adaptive(cfg, &scenario, ctx, out),
    }
}

pub fn load_pulse(path: &Path) -> Result<PulseSequence> {
    let text = fs::read_to_string(path).with_context(|| format!("reading pulse {}", path.display()))?;
    let p: PulseSequence = serde_json::from_str(&text).with_context(|| format!("parsing pulse {}", path.display()))?;
    p.check_bounds()?;
    Ok(p)
}

fn given_or_zero(cfg: &RunConfig, s: &Scenario) -> Result<PulseSequence> {
    match &cfg.pulse {
        Some(p) => load_pulse(p),
        None => Ok(PulseSequence::zeros(s.num_controls(), s.slices(), s.u_max)),
    }
}

fn load_actor(cfg: &RunConfig) -> Result<Mlp<f32>> {
    let path = cfg.actor.as_ref().context("no \"actor\" checkpoint configured")?;
    let ck = ActorCheckpoint::load(path).with_context(|| format!("loading actor {}", path.display()))?;
    Ok(ck.to_actor()?)
}

/// The configured pulse, or a fresh GRAPE optimum at the base parameters.
fn reference_pulse(cfg: &RunConfig, s: &Scenario, ctx: &RunContext, out: &Path) -> Result<PulseSequence> {
    if let Some(p) = &cfg.pulse {
        return load_pulse(p);
    }
    let report = runs::run_grape(s, &cfg.grape, ctx, &mut ctx.rng(0))?;
    write_json(&out.join("reference_pulse.json"), &report.best_pulse)?;
    Ok(report.best_pulse)
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    scenario: ScenarioConfig,
    #[serde(flatten)]
    evaluation: &'a Evaluation,
}

fn simulate(cfg: &RunConfig, s: &Scenario, out: &Path) -> Result<()> {
    let pulse = given_or_zero(cfg, s)?;
    let e = fisher::evaluate_scenario(s, &pulse)?;
    println!("tr F^-1 = {}  f0 = {}", num(e.cr_bound), num(e.f0));
    write_json(&out.join("simulate.json"), &EvaluationReport { scenario: s.to_config(), evaluation: &e })
}

#[derive(Serialize)]
struct GrapeOutput<'a> {
    scenario: ScenarioConfig,
    seed: u64,
    #[serde(flatten)]
    report: &'a GrapeReport,
}

fn grape(cfg: &RunConfig, s: &Scenario, ctx: &RunContext, out: &Path) -> Result<()> {
    let report = runs::run_grape(s, &cfg.grape, ctx, &mut ctx.rng(0))?;
    let best = report.best();
    println!(
        "best tr F^-1 = {} (f0 = {}) after {} iterations",
        num(best.cr_bound),
        num(best.best_f0),
        report.history.len() - 1
    );
    write_json(
        &out.join("grape_report.json"),
        &GrapeOutput { scenario: s.to_config(), seed: ctx.seed, report: &report },
    )?;
    write_json(&out.join("pulse.json"), &report.best_pulse)?;
    write_csv(
        &out.join("grape_history.csv"),
        &["iteration", "f0", "cr_bound", "best_f0"],
        report
            .history
            .iter()
            .map(|h| vec![h.iteration.to_string(), num(h.f0), num(h.cr_bound), num(h.best_f0)]),
    )
}

#[derive(Serialize)]
struct TrainSummary {
    episodes: usize,
    seed: u64,
    mean_reward_first_100: f64,
    mean_reward_last_100: f64,
    best_cr_bound: f64,
    eval_cr_bound: f64,
    wall_time: f64,
}

fn train_rl(cfg: &RunConfig, s: &Scenario, ctx: &RunContext, out: &Path) -> Result<()> {
    let mut tc = cfg.train.clone().unwrap_or_else(|| TrainConfig::for_kind(s.kind));
    tc.seed = ctx.seed;
    let start = Instant::now();
    let report = train(s, &tc)?;
    let n = report.curve.len();
    let eval = evaluate_policy(&report.actor, s)?;
    let summary = TrainSummary {
        episodes: n,
        seed: tc.seed,
        mean_reward_first_100: report.mean_reward(0..n.min(100)),
        mean_reward_last_100: report.mean_reward(n.saturating_sub(100)..n),
        best_cr_bound: report.curve.iter().map(|e| e.cr_bound).fold(f64::INFINITY, f64::min),
        eval_cr_bound: eval.cr_bound,
        wall_time: ctx.elapsed(start),
    };
    println!(
        "mean terminal reward {} -> {}, policy tr F^-1 = {}",
        num(summary.mean_reward_first_100),
        num(summary.mean_reward_last_100),
        num(eval.cr_bound)
    );
    ActorCheckpoint::from_actor(&report.actor, s.to_config(), tc).save(&out.join("actor.json"))?;
    write_json(&out.join("train_report.json"), &summary)?;
    write_csv(
        &out.join("learning_curve.csv"),
        &["episode", "terminal_reward", "cr_bound", "aborted", "seed"],
        report.curve.iter().map(|e| {
            vec![
                e.episode.to_string(),
                num(e.terminal_reward),
                num(e.cr_bound),
                e.aborted.to_string(),
                ctx.seed.to_string(),
            ]
        }),
    )
}

#[derive(Serialize)]
struct PolicyOutput {
    scenario: ScenarioConfig,
    cr_bound: f64,
    f0: f64,
    pulse: PulseSequence,
}

fn evaluate_rl(cfg: &RunConfig, s: &Scenario, out: &Path) -> Result<()> {
    let actor = load_actor(cfg)?;
    let run = evaluate_policy(&actor, s)?;
    let e = fisher::evaluate_scenario(s, &run.pulse)?;
    println!("policy tr F^-1 = {}", num(e.cr_bound));
    write_json(
        &out.join("evaluate_rl.json"),
        &PolicyOutput { scenario: s.to_config(), cr_bound: e.cr_bound, f0: e.f0, pulse: run.pulse },
    )
}

#[derive(Serialize)]
struct ShiftOutput<'a> {
    from: [f64; 3],
    to: [f64; 3],
    feasible: bool,
    #[serde(flatten)]
    generalization: &'a Generalization,
}

fn shift(cfg: &RunConfig, s: &Scenario, ctx: &RunContext, out: &Path) -> Result<()> {
    let target = cfg.shift.as_ref().context("no \"shift\" section configured")?.target;
    let pulse = reference_pulse(cfg, s, ctx, out)?;
    let g = generalize(s, &ParamVector(target), &pulse)?;
    println!(
        "feasible = {}  direct = {}  predicted = {}",
        g.feasible(),
        num(g.direct),
        num(g.predicted)
    );
    write_json(
        &out.join("shift.json"),
        &ShiftOutput { from: s.params.0, to: target, feasible: g.feasible(), generalization: &g },
    )
}

fn sweep(cfg: &RunConfig, s: &Scenario, ctx: &RunContext, out: &Path) -> Result<()> {
    let spec = cfg.sweep.as_ref().context("no \"sweep\" section configured")?;
    let actor = if spec.methods.contains(&Method::RlGeneralize) { Some(load_actor(cfg)?) } else { None };
    let reference = if spec.methods.contains(&Method::AnalyticShift) {
        Some(reference_pulse(cfg, s, ctx, out)?)
    } else {
        None
    };
    let artifacts = Artifacts { actor: actor.as_ref(), reference: reference.as_ref() };
    let rows = runs::run_sweep(s, spec, &cfg.grape, &artifacts, ctx)?;
    println!("{} rows", rows.len());
    write_csv(
        &out.join("sweep.csv"),
        &["axis_value", "method", "cr_bound", "f0", "feasible", "wall_time_s", "seed"],
        rows.iter().map(|r| {
            vec![
                r.axis_value.clone(),
                r.method.tag().to_string(),
                num(r.cr_bound),
                num(r.f0),
                r.feasible.to_string(),
                num(r.wall_time_s),
                r.seed.to_string(),
            ]
        }),
    )
}

fn time_resolved(cfg: &RunConfig, s: &Scenario, out: &Path) -> Result<()> {
    let pulse = given_or_zero(cfg, s)?;
    let (e, rows) = runs::run_time_resolved(s, &pulse)?;
    println!("tr F^-1(T) = {}", num(e.cr_bound));
    write_csv(
        &out.join("time_resolved.csv"),
        &["t", "cr_bound"],
        rows.iter().map(|(t, v)| vec![num(*t), num(*v)]),
    )
}

fn t_sweep(cfg: &RunConfig, s: &Scenario, ctx: &RunContext, out: &Path) -> Result<()> {
    let default = TSweepConfig { grid: None, method: Method::NoControl };
    let spec = cfg.t_sweep.as_ref().unwrap_or(&default);
    let rows = runs::run_t_sweep(s, spec, &cfg.grape, ctx)?;
    if let Some(peak) = runs::t_sweep_peak(&rows) {
        println!("peak (T tr F^-1)^-1 = {} at T = {}", num(peak.normalized), num(peak.total_time));
    }
    write_csv(
        &out.join("t_sweep.csv"),
        &["T", "method", "cr_bound", "normalized", "reference", "seed"],
        rows.iter().map(|r| {
            vec![
                num(r.total_time),
                r.method.tag().to_string(),
                num(r.cr_bound),
                num(r.normalized),
                num(r.reference),
                r.seed.to_string(),
            ]
        }),
    )
}

fn adaptive(cfg: &RunConfig, s: &Scenario, ctx: &RunContext, out: &Path) -> Result<()> {
    let spec = cfg.adaptive.as_ref().context("no \"adaptive\" section configured")?;
    let rounds = runs::run_adaptive(s, spec, &cfg.grape, ctx)?;
    let names = s.kind.param_names();
    let mut header = vec!["round", "method"];
    header.extend(names);
    header.extend(["cr_bound", "reoptimized", "wall_time_s", "seed"]);
    write_csv(
        &out.join("adaptive.csv"),
        &header,
        rounds.iter().map(|r| {
            let mut row = vec![r.round.to_string(), r.method.tag().to_string()];
            row.extend(r.estimate.iter().map(|v| num(*v)));
            row.extend([num(r.cr_bound), r.reoptimized.to_string(), num(r.wall_time_s), r.seed.to_string()]);
            row
        }),
    )
}

use std::f64::consts::PI;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use genctrl_core::dynamics::{ParamVector, PulseSequence, Scenario, ScenarioKind};
use genctrl_core::fisher::{self, Evaluation};
use genctrl_core::grape::{grape_optimize_scenario, GrapeReport};
use genctrl_core::shift::{generalize, Generalization};
use genctrl_core::CoreError;
use genctrl_rl::{evaluate_policy, Mlp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{linspace, AdaptiveConfig, GrapeSection, InitialPulse, Method, SweepAxis, SweepConfig, TSweepConfig};

/// Amplitude fraction of `u_max` for random starting pulses.
pub const RANDOM_INIT_FRACTION: f64 = 0.1;

/// Run-wide settings shared by every experiment.
#[derive(Debug, Clone, Copy)]
pub struct RunContext {
    pub seed: u64,
    /// Zero every wall-time field so reruns are byte-identical.
    pub deterministic: bool,
}

impl RunContext {
    pub fn elapsed(&self, start: Instant) -> f64 {
        if self.deterministic {
            0.0
        } else {
            start.elapsed().as_secs_f64()
        }
    }

    /// Independent stream for work item `index`; stream 0 is the run itself.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

pub fn initial_pulse(scenario: &Scenario, section: &GrapeSection, rng: &mut ChaCha8Rng) -> PulseSequence {
    let (p, n) = (scenario.num_controls(), scenario.slices());
    match section.initial_for(scenario.kind) {
        InitialPulse::Zero => PulseSequence::zeros(p, n, scenario.u_max),
        InitialPulse::Random => PulseSequence::random(p, n, scenario.u_max, RANDOM_INIT_FRACTION, rng),
    }
}

pub fn run_grape(scenario: &Scenario, section: &GrapeSection, ctx: &RunContext, rng: &mut ChaCha8Rng) -> Result<GrapeReport> {
    let init = initial_pulse(scenario, section, rng);
    let mut report = grape_optimize_scenario(scenario, &init, &section.to_config())?;
    if ctx.deterministic {
        report.wall_time = 0.0;
    }
    Ok(report)
}

/// One line of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub axis_value: String,
    pub method: Method,
    pub params: [f64; 3],
    pub cr_bound: f64,
    pub f0: f64,
    pub feasible: bool,
    pub wall_time_s: f64,
    pub seed: u64,
}

/// A sweep coordinate: one value, or `(ϑ′, φ′)` on the direction grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisPoint {
    Scalar(f64),
    Direction(f64, f64),
}

impl AxisPoint {
    pub fn label(&self) -> String {
        match self {
            AxisPoint::Scalar(v) => format!("{v}"),
            AxisPoint::Direction(t, p) => format!("{t}:{p}"),
        }
    }
}

pub fn default_grid(axis: SweepAxis, base: &Scenario) -> Vec<f64> {
    let t = base.horizon.total;
    let x = base.params.0;
    // c + w·s keeps the middle point exactly on the base value
    let around = |c: f64, w: f64| linspace(-1.0, 1.0, 41).into_iter().map(|s| c + w * s).collect();
    match axis {
        SweepAxis::B => around(x[0], 2.0 * PI / t),
        SweepAxis::Direction => linspace(0.0, PI, 33),
        SweepAxis::Omega1 => around(x[0], PI / t),
        SweepAxis::Omega2 => around(x[1], PI / t),
        SweepAxis::G => around(x[2], PI / t),
        SweepAxis::T => linspace(0.5, 8.0, 76),
        SweepAxis::Gamma => linspace(0.0, 0.5, 11),
    }
}

pub fn sweep_points(spec: &SweepConfig, base: &Scenario) -> Vec<AxisPoint> {
    let values = spec.grid.as_ref().map_or_else(|| default_grid(spec.axis, base), |g| g.points());
    if spec.axis == SweepAxis::Direction {
        let phis = spec.phi_grid.as_ref().map_or_else(|| linspace(0.0, 2.0 * PI, 65), |g| g.points());
        values
            .iter()
            .flat_map(|&t| phis.iter().map(move |&p| AxisPoint::Direction(t, p)))
            .collect()
    } else {
        values.into_iter().map(AxisPoint::Scalar).collect()
    }
}

/// The base scenario moved to `point` along `axis`.
pub fn scenario_at(base: &Scenario, axis: SweepAxis, point: AxisPoint) -> Result<Scenario> {
    let mut x = base.params.0;
    let v = match point {
        AxisPoint::Scalar(v) => v,
        AxisPoint::Direction(t, p) => {
            x[1] = t;
            x[2] = p;
            return Ok(base.with_params(ParamVector(x))?);
        }
    };
    Ok(match axis {
        SweepAxis::B | SweepAxis::Omega1 => {
            x[0] = v;
            base.with_params(ParamVector(x))?
        }
        SweepAxis::Omega2 => {
            x[1] = v;
            base.with_params(ParamVector(x))?
        }
        SweepAxis::G => {
            x[2] = v;
            base.with_params(ParamVector(x))?
        }
        SweepAxis::T => base.with_horizon(v)?,
        SweepAxis::Gamma => base.with_rates(&vec![v; base.noise.len()])?,
        SweepAxis::Direction => bail!("direction sweeps take angle pairs"),
    })
}

/// Inputs a sweep may need beyond the scenario.
pub struct Artifacts<'a> {
    pub actor: Option<&'a Mlp<f32>>,
    /// Pulse optimized at the base parameters, carried along by the shift.
    pub reference: Option<&'a PulseSequence>,
}

fn infeasible(feasible: bool) -> (f64, f64, bool) {
    (f64::NAN, f64::NAN, feasible)
}

fn shift_outcome(g: Result<Generalization, CoreError>) -> Result<(f64, f64, bool)> {
    match g {
        Ok(g) if g.feasible() => Ok((g.direct, g.f0, true)),
        Ok(_) => Ok(infeasible(false)),
        Err(CoreError::BoundViolation { .. }) => Ok(infeasible(false)),
        Err(e) => Err(e.into()),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_method(
    method: Method,
    base: &Scenario,
    point: &Scenario,
    grape: &GrapeSection,
    artifacts: &Artifacts,
    ctx: &RunContext,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64, bool)> {
    Ok(match method {
        Method::NoControl => {
            let zero = PulseSequence::zeros(point.num_controls(), point.slices(), point.u_max);
            let e = fisher::evaluate_scenario(point, &zero)?;
            (e.cr_bound, e.f0, true)
        }
        Method::Grape => {
            let report = run_grape(point, grape, ctx, rng)?;
            let best = report.best();
            (best.cr_bound, best.best_f0, true)
        }
        Method::RlGeneralize => {
            let actor = artifacts.actor.context("rl-generalize needs a trained actor (set \"actor\")")?;
            match evaluate_policy(actor, point) {
                Ok(run) => {
                    let e = fisher::evaluate_scenario(point, &run.pulse)?;
                    (e.cr_bound, e.f0, true)
                }
                Err(e) => {
                    log::warn!("policy rollout failed at {:?}: {e}", point.params.0);
                    infeasible(false)
                }
            }
        }
        Method::AnalyticShift => {
            let pulse = artifacts.reference.context("analytic-shift needs a reference pulse")?;
            shift_outcome(generalize(base, &point.params, pulse))?
        }
    })
}

/// Every method at every grid point, in grid order.
pub fn run_sweep(
    base: &Scenario,
    spec: &SweepConfig,
    grape: &GrapeSection,
    artifacts: &Artifacts,
    ctx: &RunContext,
) -> Result<Vec<RunRecord>> {
    let points = sweep_points(spec, base);
    let rows: Vec<Result<Vec<RunRecord>>> = points
        .par_iter()
        .enumerate()
        .map(|(k, &pt)| {
            let point = scenario_at(base, spec.axis, pt)?;
            let mut rng = ctx.rng(k as u64 + 1);
            spec.methods
                .iter()
                .map(|&method| {
                    let start = Instant::now();
                    let (cr_bound, f0, feasible) = run_method(method, base, &point, grape, artifacts, ctx, &mut rng)
                        .with_context(|| format!("{} at {}", method.tag(), pt.label()))?;
                    Ok(RunRecord {
                        axis_value: pt.label(),
                        method,
                        params: point.params.0,
                        cr_bound,
                        f0,
                        feasible,
                        wall_time_s: ctx.elapsed(start),
                        seed: ctx.seed,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(points.len() * spec.methods.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// `(t, tr F⁻¹(t))` for `t = jΔt`, `j = 0..=N`.
pub fn run_time_resolved(scenario: &Scenario, pulse: &PulseSequence) -> Result<(Evaluation, Vec<(f64, f64)>)> {
    let e = fisher::evaluate_scenario(scenario, pulse)?;
    let dt = scenario.horizon.dt;
    let rows = e.series.iter().enumerate().map(|(j, &v)| (j as f64 * dt, v)).collect();
    Ok((e, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TSweepRow {
    pub total_time: f64,
    pub method: Method,
    pub cr_bound: f64,
    /// `(T·tr F⁻¹)⁻¹`.
    pub normalized: f64,
    /// `4T/3`.
    pub reference: f64,
    pub seed: u64,
}

pub fn default_t_grid() -> Vec<f64> {
    linspace(0.5, 8.0, 76)
}

pub fn run_t_sweep(base: &Scenario, spec: &TSweepConfig, grape: &GrapeSection, ctx: &RunContext) -> Result<Vec<TSweepRow>> {
    let grid = spec.grid.as_ref().map_or_else(default_t_grid, |g| g.points());
    grid.par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let s = base.with_horizon(t)?;
            let cr_bound = match spec.method {
                Method::NoControl => {
                    let zero = PulseSequence::zeros(s.num_controls(), s.slices(), s.u_max);
                    fisher::evaluate_scenario(&s, &zero)?.cr_bound
                }
                Method::Grape => run_grape(&s, grape, ctx, &mut ctx.rng(k as u64 + 1))?.best().cr_bound,
                m => bail!("t-sweep does not support {}", m.tag()),
            };
            Ok(TSweepRow {
                total_time: t,
                method: spec.method,
                cr_bound,
                normalized: 1.0 / (t * cr_bound),
                reference: 4.0 * t / 3.0,
                seed: ctx.seed,
            })
        })
        .collect()
}

/// Index of the largest normalized value.
pub fn t_sweep_peak(rows: &[TSweepRow]) -> Option<&TSweepRow> {
    rows.iter()
        .filter(|r| r.normalized.is_finite())
        .max_by(|a, b| a.normalized.total_cmp(&b.normalized))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveRound {
    pub round: usize,
    pub method: Method,
    pub estimate: [f64; 3],
    pub cr_bound: f64,
    /// Whether a full GRAPE optimization ran this round.
    pub reoptimized: bool,
    pub wall_time_s: f64,
    pub seed: u64,
}

/// Keeps a sampled guess inside the parameter domain.
fn project(kind: ScenarioKind, mut x: [f64; 3]) -> [f64; 3] {
    if kind == ScenarioKind::Example1 {
        x[1] = x[1].clamp(0.0, PI);
        x[2] = x[2].rem_euclid(2.0 * PI);
    }
    x
}

/// Simulated adaptive estimation: each round controls and evaluates the
/// system at the current guess, then draws the next guess from a normal
/// centered on the hidden truth with the bound's per-axis spread.
pub fn run_adaptive(base: &Scenario, spec: &AdaptiveConfig, grape: &GrapeSection, ctx: &RunContext) -> Result<Vec<AdaptiveRound>> {
    let mut rng = ctx.rng(0);
    let mut guess = spec.initial_guess.unwrap_or(base.params.0);
    // Pulse and the parameters it was optimized for.
    let mut anchor: Option<(Scenario, PulseSequence)> = None;
    let mut log = Vec::with_capacity(spec.rounds);

    for round in 0..spec.rounds {
        let start = Instant::now();
        let here = base.with_params(ParamVector(guess))?;
        let mut reoptimized = false;
        let pulse = match spec.method {
            Method::NoControl => PulseSequence::zeros(here.num_controls(), here.slices(), here.u_max),
            Method::Grape => {
                reoptimized = true;
                run_grape(&here, grape, ctx, &mut rng)?.best_pulse
            }
            Method::AnalyticShift => {
                let shifted = match &anchor {
                    Some((at, p)) => generalize(at, &here.params, p)
                        .map(|g| g.shifted_pulse)
                        .or_else(|e| match e {
                            CoreError::BoundViolation { .. } => Ok(None),
                            e => Err(e),
                        })?,
                    None => None,
                };
                match shifted {
                    Some(p) => p,
                    None => {
                        reoptimized = true;
                        let p = run_grape(&here, grape, ctx, &mut rng)?.best_pulse;
                        anchor = Some((here.clone(), p.clone()));
                        p
                    }
                }
            }
            Method::RlGeneralize => bail!("adaptive rounds do not support rl-generalize"),
        };
        let e = fisher::evaluate_scenario(&here, &pulse)?;
        let wall_time_s = ctx.elapsed(start);
        log::info!("round {round}: estimate {guess:?}, tr F^-1 = {:.6}", e.cr_bound);
        log.push(AdaptiveRound {
            round,
            method: spec.method,
            estimate: guess,
            cr_bound: e.cr_bound,
            reoptimized,
            wall_time_s,
            seed: ctx.seed,
        });

        let inv = e.cfim.inverse();
        let mut next = [0.0; 3];
        for k in 0..3 {
            let sd = inv.map_or(f64::NAN, |fi| fi[k][k].max(0.0).sqrt());
            next[k] = if sd.is_finite() && sd > 0.0 {
                Normal::new(spec.true_params[k], sd)?.sample(&mut rng)
            } else {
                spec.true_params[k]
            };
        }
        guess = project(base.kind, next);
    }
    Ok(log)
}

//! Gradient ascent on `f₀` over piecewise-constant control amplitudes.
//!
//! The gradient is assembled with one forward sweep (state and parameter
//! sensitivities) and one backward sweep of adjoints, so every slice
//! exponential and its derivatives are formed once per gradient.

use std::time::Instant;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{OpenSystem, PulseSequence, Scenario, NUM_PARAMS};
use crate::error::{CoreError, Result};
use crate::fisher::{self, Cfim, SensitivityRecord, PROB_FLOOR};
use crate::linalg::{self, c, expm_frechet, expm_frechet2, outer, vectorize, CMatrix, C64};

#[derive(Debug, Clone)]
pub struct GradientResult {
    pub f0: f64,
    pub cr_bound: f64,
    pub cfim: Cfim,
    /// `∂f₀/∂u_i(jΔt)`, same shape as the pulse.
    pub gradient: Array2<f64>,
}

fn conj_mul(m: &CMatrix, v: &Array1<C64>) -> Array1<C64> {
    // m† v without forming m†
    let n = m.nrows();
    Array1::from_shape_fn(n, |k| (0..n).map(|r| m[[r, k]].conj() * v[r]).sum())
}

/// Terminal adjoints `g_y = ∂f₀/∂p_y`, `h_αy = ∂f₀/∂(∂_α p_y)`.
fn terminal_weights(probs: &[f64], dprobs: &[Vec<f64>; NUM_PARAMS], f: &Cfim, f0: f64) -> (Vec<f64>, [Vec<f64>; NUM_PARAMS]) {
    let diag = f.diagonal();
    let mut g = vec![0.0; probs.len()];
    let mut h = [vec![0.0; probs.len()], vec![0.0; probs.len()], vec![0.0; probs.len()]];
    if f0 == 0.0 {
        return (g, h);
    }
    for (y, &p) in probs.iter().enumerate() {
        if p < PROB_FLOOR {
            continue;
        }
        for a in 0..NUM_PARAMS {
            let w = f0 * f0 / (diag[a] * diag[a]);
            let d = dprobs[a][y];
            g[y] -= w * d * d / (p * p);
            h[a][y] = w * 2.0 * d / p;
        }
    }
    (g, h)
}

fn weighted_povm(weights: &[f64], povm: &[Array1<C64>]) -> Array1<C64> {
    let mut out = Array1::zeros(povm[0].len());
    for (w, p) in weights.iter().zip(povm) {
        out.scaled_add(c(*w, 0.0), p);
    }
    out
}

/// Exact gradient of `f₀(T)` with respect to every control amplitude.
pub fn grape_gradient(system: &OpenSystem, pulse: &PulseSequence) -> Result<GradientResult> {
    pulse.check_bounds()?;
    let rec = fisher::propagate_with_sensitivity(system, pulse)?;
    gradient_from_record(system, &rec)
}

pub fn grape_gradient_scenario(scenario: &Scenario, pulse: &PulseSequence) -> Result<GradientResult> {
    grape_gradient(&scenario.system()?, pulse)
}

fn gradient_from_record(system: &OpenSystem, rec: &SensitivityRecord) -> Result<GradientResult> {
    let n_slices = rec.slices();
    let p_channels = system.num_controls();
    let dt = c(system.dt(), 0.0);
    let (probs, dprobs) = rec.statistics(n_slices, &system.povm);
    let f = fisher::cfim(&probs, &dprobs);
    let f0 = fisher::f0_objective(&f);
    let cr = fisher::cr_bound(&f);
    let mut gradient = Array2::zeros((p_channels, n_slices));
    if f0 == 0.0 {
        return Ok(GradientResult { f0, cr_bound: cr, cfim: f, gradient });
    }

    let povm: Vec<Array1<C64>> = system.povm.iter().map(vectorize).collect();
    let (g, h) = terminal_weights(&probs, &dprobs, &f, f0);
    let mut lam = weighted_povm(&g, &povm);
    let mut mu: [Array1<C64>; NUM_PARAMS] = [0, 1, 2].map(|a| weighted_povm(&h[a], &povm));

    let controls: Vec<CMatrix> = (0..p_channels).map(|i| system.control_part(i) * dt).collect();
    let dirs: Vec<CMatrix> = (0..NUM_PARAMS).map(|a| system.param_part(a) * dt).collect();

    for j in (0..n_slices).rev() {
        let a = &rec.generators[j];
        let rho = &rec.states[j];
        let mut cmat = outer(&lam, rho);
        for al in 0..NUM_PARAMS {
            cmat = cmat + outer(&mu[al], &rec.derivs[j][al]);
        }
        let (_, gmat) = expm_frechet(&linalg::adjoint(a), &cmat)?;
        let mut q = linalg::adjoint(&gmat);
        for al in 0..NUM_PARAMS {
            q = q + expm_frechet2(a, &outer(rho, &mu[al]), &dirs[al])?;
        }
        for (i, k) in controls.iter().enumerate() {
            gradient[[i, j]] = linalg::re_trace_product(&q, k);
        }

        let prop = &rec.propagators[j];
        let mut next_lam = conj_mul(prop, &lam);
        for al in 0..NUM_PARAMS {
            next_lam = next_lam + conj_mul(&rec.slice_derivs[j][al], &mu[al]);
        }
        lam = next_lam;
        for m in mu.iter_mut() {
            *m = conj_mul(prop, m);
        }
    }
    if gradient.iter().any(|v: &f64| !v.is_finite()) {
        return Err(CoreError::NonFinite("control gradient"));
    }
    Ok(GradientResult { f0, cr_bound: cr, cfim: f, gradient })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrapeMethod {
    Gd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrapeConfig {
    pub method: GrapeMethod,
    pub learning_rate: f64,
    pub iterations: usize,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub clip_to_bounds: bool,
}

impl Default for GrapeConfig {
    fn default() -> Self {
        Self::adam()
    }
}

impl GrapeConfig {
    pub fn gd() -> Self {
        Self {
            method: GrapeMethod::Gd,
            learning_rate: 0.01,
            iterations: 200,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            clip_to_bounds: true,
        }
    }

    pub fn adam() -> Self {
        Self {
            method: GrapeMethod::Adam,
            learning_rate: 0.005,
            ..Self::gd()
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.adam_betas;
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(CoreError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) || !(self.adam_eps > 0.0) {
            return Err(CoreError::Config("adam betas must lie in [0, 1) and eps be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub f0: f64,
    pub cr_bound: f64,
    pub best_f0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrapeReport {
    pub best_pulse: PulseSequence,
    pub final_pulse: PulseSequence,
    /// Entry `k` describes the pulse after `k` updates.
    pub history: Vec<HistoryEntry>,
    pub wall_time: f64,
}

impl GrapeReport {
    pub fn best(&self) -> &HistoryEntry {
        self.history
            .iter()
            .rev()
            .find(|h| h.f0 == h.best_f0)
            .unwrap_or(&self.history[0])
    }

    pub fn last(&self) -> &HistoryEntry {
        self.history.last().expect("history holds the initial pulse")
    }
}

struct Adam {
    m: Array2<f64>,
    v: Array2<f64>,
    t: i32,
}

pub fn grape_optimize(system: &OpenSystem, initial: &PulseSequence, config: &GrapeConfig) -> Result<GrapeReport> {
    config.validate()?;
    initial.check_bounds()?;
    system.check_pulse(initial)?;
    let start = Instant::now();

    let mut pulse = initial.clone();
    let mut best_pulse = pulse.clone();
    let mut best_f0 = f64::NEG_INFINITY;
    let mut history = Vec::with_capacity(config.iterations + 1);
    let mut adam = Adam {
        m: Array2::zeros(pulse.shape()),
        v: Array2::zeros(pulse.shape()),
        t: 0,
    };
    let (b1, b2) = config.adam_betas;

    for k in 0..=config.iterations {
        let last = k == config.iterations;
        let grad = if last {
            let rec = fisher::propagate_with_sensitivity(system, &pulse)?;
            let f = rec.cfim_at(rec.slices(), &system.povm);
            GradientResult {
                f0: fisher::f0_objective(&f),
                cr_bound: fisher::cr_bound(&f),
                cfim: f,
                gradient: Array2::zeros((0, 0)),
            }
        } else {
            grape_gradient(system, &pulse)?
        };
        if grad.f0 > best_f0 {
            best_f0 = grad.f0;
            best_pulse = pulse.clone();
        }
        history.push(HistoryEntry {
            iteration: k,
            f0: grad.f0,
            cr_bound: grad.cr_bound,
            best_f0,
        });
        if last {
            break;
        }
        let eta = config.learning_rate;
        match config.method {
            GrapeMethod::Gd => pulse.amplitudes.scaled_add(eta, &grad.gradient),
            GrapeMethod::Adam => {
                adam.t += 1;
                let (c1, c2) = (1.0 - b1.powi(adam.t), 1.0 - b2.powi(adam.t));
                ndarray::Zip::from(&mut pulse.amplitudes)
                    .and(&mut adam.m)
                    .and(&mut adam.v)
                    .and(&grad.gradient)
                    .for_each(|u, m, v, &g| {
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        *u += eta * (*m / c1) / ((*v / c2).sqrt() + config.adam_eps);
                    });
            }
        }
        if config.clip_to_bounds {
            pulse.clip();
        }
    }

    Ok(GrapeReport {
        best_pulse,
        final_pulse: pulse,
        history,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

pub fn grape_optimize_scenario(scenario: &Scenario, initial: &PulseSequence, config: &GrapeConfig) -> Result<GrapeReport> {
    grape_optimize(&scenario.system()?, initial, config)
}

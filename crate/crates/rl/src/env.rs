use genctrl_core::dynamics::{DensityMatrix, OpenSystem, PulseSequence, NUM_PARAMS};
use genctrl_core::fisher;
use genctrl_core::linalg::{c, expm_frechet_multi, unvectorize, CMatrix, C64};
use ndarray::{Array1, Array2};

use crate::error::Result;

/// Real parts of the 16 entries, then the imaginary parts, row-major.
pub const OBS_DIM: usize = 32;

pub fn observe(rho: &CMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * rho.len());
    out.extend(rho.iter().map(|z| z.re));
    out.extend(rho.iter().map(|z| z.im));
    out
}

/// Terminal reward `100 Σ_{n=1..4} 10^{−10ⁿ·tr F⁻¹}`, zero before the last
/// slice and for a divergent bound.
pub fn reward(cr_bound: f64, step: usize, slices: usize) -> f64 {
    if step != slices || !cr_bound.is_finite() {
        return 0.0;
    }
    100.0 * (1..=4).map(|n| 10f64.powf(-(10f64.powi(n)) * cr_bound)).sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    /// `tr F⁻¹` at the final time, set on the terminal step.
    pub cr_bound: Option<f64>,
}

/// One slice per step; parameter sensitivities ride along so the terminal
/// bound needs no second pass.
pub struct Environment {
    pub system: OpenSystem,
    dirs: Vec<CMatrix>,
    step: usize,
    rho: Array1<C64>,
    derivs: [Array1<C64>; NUM_PARAMS],
    actions: Vec<Vec<f64>>,
}

impl Environment {
    pub fn new(system: OpenSystem) -> Self {
        let dt = c(system.dt(), 0.0);
        let dirs = (0..NUM_PARAMS).map(|a| system.param_part(a) * dt).collect();
        let rho = system.probe.vec();
        let zero = Array1::zeros(rho.len());
        Self {
            system,
            dirs,
            step: 0,
            rho,
            derivs: [zero.clone(), zero.clone(), zero],
            actions: Vec::new(),
        }
    }

    pub fn slices(&self) -> usize {
        self.system.slices()
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn state(&self) -> CMatrix {
        unvectorize(&self.rho, self.system.probe.dim())
    }

    pub fn observation(&self) -> Vec<f64> {
        observe(&self.state())
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.step = 0;
        self.rho = self.system.probe.vec();
        for d in &mut self.derivs {
            d.fill(C64::new(0.0, 0.0));
        }
        self.actions.clear();
        self.observation()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        assert!(self.step < self.slices(), "episode already finished");
        let a = self.system.liouvillian(action).0 * c(self.system.dt(), 0.0);
        let (prop, d) = expm_frechet_multi(&a, &self.dirs)?;
        let derivs = [0, 1, 2].map(|k| prop.dot(&self.derivs[k]) + d[k].dot(&self.rho));
        let rho = prop.dot(&self.rho);
        let n = self.system.probe.dim();
        DensityMatrix::new(unvectorize(&rho, n))
            .and_then(|s| s.check(self.step + 1))?;
        self.rho = rho;
        self.derivs = derivs;
        self.actions.push(action.to_vec());
        self.step += 1;

        let terminal = self.step == self.slices();
        let cr_bound = terminal.then(|| self.final_bound());
        Ok(StepOutcome {
            observation: self.observation(),
            reward: reward(cr_bound.unwrap_or(f64::INFINITY), self.step, self.slices()),
            terminal,
            cr_bound,
        })
    }

    fn final_bound(&self) -> f64 {
        let n = self.system.probe.dim();
        let povm = &self.system.povm;
        let probs = fisher::probabilities(&self.state(), povm);
        let dp = [0, 1, 2].map(|k| fisher::probabilities(&unvectorize(&self.derivs[k], n), povm));
        fisher::cr_bound(&fisher::cfim(&probs, &dp))
    }

    /// Actions taken so far as a pulse.
    pub fn pulse(&self) -> PulseSequence {
        let p = self.system.num_controls();
        let amplitudes = Array2::from_shape_fn((p, self.actions.len()), |(i, j)| self.actions[j][i]);
        PulseSequence {
            amplitudes,
            u_max: self.system.u_max,
        }
    }
}

#![allow(dead_code)]

use genctrl_core::dynamics::{propagate_scenario, OpenSystem, ParamVector, PulseSequence, Scenario};
use genctrl_core::fisher::{self, Cfim};
use genctrl_core::linalg::{self, CMatrix, C64};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_pulse(s: &Scenario, seed: u64) -> PulseSequence {
    PulseSequence::random(s.num_controls(), s.slices(), s.u_max, 0.8, &mut rng(seed))
}

/// `max|a - b| / max|b|`.
pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    linalg::max_abs_diff(a, b) / linalg::max_abs(b).max(1e-300)
}

pub fn rel_err_real(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    diff / scale.max(1e-300)
}

fn shifted(s: &Scenario, alpha: usize, h: f64) -> Scenario {
    let mut x = s.params;
    x.0[alpha] += h;
    s.with_params(ParamVector(x.0)).unwrap()
}

/// Central differences of `ρ(T)` over each parameter.
pub fn fd_state_derivs(s: &Scenario, pulse: &PulseSequence, h: f64) -> [CMatrix; 3] {
    [0, 1, 2].map(|a| {
        let plus = propagate_scenario(&shifted(s, a, h), pulse).unwrap();
        let minus = propagate_scenario(&shifted(s, a, -h), pulse).unwrap();
        (plus.final_state().matrix() - minus.final_state().matrix()) / C64::new(2.0 * h, 0.0)
    })
}

/// CFIM assembled from finite-difference probability derivatives.
pub fn fd_cfim(s: &Scenario, pulse: &PulseSequence, h: f64) -> Cfim {
    let rho = propagate_scenario(s, pulse).unwrap();
    let probs = fisher::probabilities(rho.final_state().matrix(), &s.povm);
    let d = fd_state_derivs(s, pulse, h);
    let dp = [0, 1, 2].map(|a| fisher::probabilities(&d[a], &s.povm));
    fisher::cfim(&probs, &dp)
}

pub fn f0_of(system: &OpenSystem, pulse: &PulseSequence) -> f64 {
    fisher::f0_objective(&fisher::final_cfim(system, pulse).unwrap())
}

/// Central differences of `f₀` over every amplitude.
pub fn fd_f0_gradient(system: &OpenSystem, pulse: &PulseSequence, h: f64) -> Array2<f64> {
    let mut g = Array2::zeros(pulse.shape());
    for ((i, j), v) in g.indexed_iter_mut() {
        let mut p = pulse.clone();
        p.amplitudes[[i, j]] += h;
        let fp = f0_of(system, &p);
        p.amplitudes[[i, j]] -= 2.0 * h;
        let fm = f0_of(system, &p);
        *v = (fp - fm) / (2.0 * h);
    }
    g
}

pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let a = Array2::from_shape_fn((n, n), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&a + &linalg::adjoint(&a)) * C64::new(0.5, 0.0)
}

pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    linalg::expm(&(random_hermitian(n, rng) * linalg::I)).unwrap()
}

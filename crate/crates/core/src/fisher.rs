//! Parameter sensitivities of the evolved state, the classical Fisher
//! information matrix of the fixed measurement, and the figures of merit
//! built on it.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{DensityMatrix, OpenSystem, PulseSequence, Scenario, NUM_PARAMS};
use crate::error::Result;
use crate::linalg::{
    self, c, expm_frechet_multi, symmetric_eigenvalues, unvectorize, vectorize, CMatrix, C64,
};

/// Outcomes with probability below this contribute nothing to the CFIM.
pub const PROB_FLOOR: f64 = 1e-12;
/// Above this condition number the CFIM is treated as singular.
pub const CONDITION_CAP: f64 = 1e12;

/// How the slice derivative `∂e^{ΔtL}/∂x` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensitivityMode {
    /// Fréchet derivative of the slice exponential.
    #[default]
    Exact,
    /// `e^{ΔtL}·Δt ∂L/∂x`, first order in `Δt`.
    FirstOrder,
}

/// Classical Fisher information matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cfim {
    pub entries: [[f64; NUM_PARAMS]; NUM_PARAMS],
    /// Set when an outcome below the probability floor carried a large
    /// derivative, i.e. the skipped term was not negligible.
    pub degenerate: bool,
}

impl Cfim {
    pub fn from_entries(entries: [[f64; NUM_PARAMS]; NUM_PARAMS]) -> Self {
        Self {
            entries,
            degenerate: false,
        }
    }

    pub fn zeros() -> Self {
        Self::from_entries([[0.0; NUM_PARAMS]; NUM_PARAMS])
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((NUM_PARAMS, NUM_PARAMS), |(i, j)| self.entries[i][j])
    }

    pub fn from_array(a: &Array2<f64>) -> Self {
        let mut entries = [[0.0; NUM_PARAMS]; NUM_PARAMS];
        for (i, row) in entries.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[[i, j]];
            }
        }
        Self::from_entries(entries)
    }

    pub fn diagonal(&self) -> [f64; NUM_PARAMS] {
        [self.entries[0][0], self.entries[1][1], self.entries[2][2]]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.to_array())
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..NUM_PARAMS {
            for j in 0..NUM_PARAMS {
                worst = worst.max((self.entries[i][j] - self.entries[j][i]).abs());
            }
        }
        worst
    }

    fn is_well_conditioned(&self) -> bool {
        if self.entries.iter().flatten().any(|v| !v.is_finite()) {
            return false;
        }
        let ev = self.eigenvalues();
        let (lo, hi) = (ev[0], ev[NUM_PARAMS - 1]);
        lo > 0.0 && hi / lo < CONDITION_CAP
    }

    /// `F⁻¹`, or `None` when singular or beyond the condition cap.
    pub fn inverse(&self) -> Option<[[f64; NUM_PARAMS]; NUM_PARAMS]> {
        if !self.is_well_conditioned() {
            return None;
        }
        let m = &self.entries;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
        Some(adj.map(|row| row.map(|v| v / det)))
    }
}

/// `p_y = tr(ρ Π_y)`.
pub fn probabilities(state: &CMatrix, povm: &[CMatrix]) -> Vec<f64> {
    povm.iter().map(|p| linalg::re_trace_product(state, p)).collect()
}

/// `F_αβ = Σ_y ∂_α p_y ∂_β p_y / p_y`, skipping outcomes below [`PROB_FLOOR`].
pub fn cfim(probs: &[f64], dprobs: &[Vec<f64>; NUM_PARAMS]) -> Cfim {
    let mut f = Cfim::zeros();
    for (y, &p) in probs.iter().enumerate() {
        if p < PROB_FLOOR {
            let d2: f64 = dprobs.iter().map(|d| d[y] * d[y]).sum();
            if d2 > PROB_FLOOR && d2 > 1e12 * p.max(0.0) {
                f.degenerate = true;
            }
            continue;
        }
        for a in 0..NUM_PARAMS {
            for b in a..NUM_PARAMS {
                let v = dprobs[a][y] * dprobs[b][y] / p;
                f.entries[a][b] += v;
                if a != b {
                    f.entries[b][a] += v;
                }
            }
        }
    }
    f
}

/// `tr F⁻¹`, `+∞` for singular or ill-conditioned `F`.
pub fn cr_bound(f: &Cfim) -> f64 {
    match f.inverse() {
        Some(inv) => (0..NUM_PARAMS).map(|i| inv[i][i]).sum(),
        None => f64::INFINITY,
    }
}

/// `f₀ = (Σ_α 1/F_αα)⁻¹`, zero unless every diagonal entry is positive.
pub fn f0_objective(f: &Cfim) -> f64 {
    let d = f.diagonal();
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return 0.0;
    }
    1.0 / d.iter().map(|v| 1.0 / v).sum::<f64>()
}

/// State and its parameter derivatives at one time.
#[derive(Debug, Clone)]
pub struct StateSensitivity {
    pub state: DensityMatrix,
    pub derivs: [CMatrix; NUM_PARAMS],
}

/// Forward pass with sensitivities, in vectorized form, for every slice.
#[derive(Debug, Clone)]
pub struct SensitivityRecord {
    pub states: Vec<Array1<C64>>,
    pub derivs: Vec<[Array1<C64>; NUM_PARAMS]>,
    /// `e^{ΔtL_j}`.
    pub propagators: Vec<CMatrix>,
    /// `∂e^{ΔtL_j}/∂x_α`.
    pub slice_derivs: Vec<[CMatrix; NUM_PARAMS]>,
    /// `ΔtL_j`.
    pub generators: Vec<CMatrix>,
    pub dim: usize,
}

impl SensitivityRecord {
    pub fn slices(&self) -> usize {
        self.propagators.len()
    }

    pub fn at(&self, j: usize) -> StateSensitivity {
        let n = self.dim;
        StateSensitivity {
            state: DensityMatrix::from_raw(unvectorize(&self.states[j], n)),
            derivs: [
                unvectorize(&self.derivs[j][0], n),
                unvectorize(&self.derivs[j][1], n),
                unvectorize(&self.derivs[j][2], n),
            ],
        }
    }

    pub fn final_sensitivity(&self) -> StateSensitivity {
        self.at(self.slices())
    }

    /// Measurement statistics at slice `j`: probabilities and their derivatives.
    pub fn statistics(&self, j: usize, povm: &[CMatrix]) -> (Vec<f64>, [Vec<f64>; NUM_PARAMS]) {
        let vp: Vec<Array1<C64>> = povm.iter().map(vectorize).collect();
        let re_dot = |a: &Array1<C64>, b: &Array1<C64>| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
        };
        let probs = vp.iter().map(|p| re_dot(p, &self.states[j])).collect();
        let d = |alpha: usize| vp.iter().map(|p| re_dot(p, &self.derivs[j][alpha])).collect();
        (probs, [d(0), d(1), d(2)])
    }

    pub fn cfim_at(&self, j: usize, povm: &[CMatrix]) -> Cfim {
        let (p, dp) = self.statistics(j, povm);
        cfim(&p, &dp)
    }
}

pub fn propagate_with_sensitivity(system: &OpenSystem, pulse: &PulseSequence) -> Result<SensitivityRecord> {
    propagate_with_sensitivity_mode(system, pulse, SensitivityMode::Exact)
}

/// `ρ_{j+1} = e^{A_j}ρ_j`, `∂ρ_{j+1} = e^{A_j}∂ρ_j + L(A_j, Δt∂L/∂x)ρ_j`.
pub fn propagate_with_sensitivity_mode(
    system: &OpenSystem,
    pulse: &PulseSequence,
    mode: SensitivityMode,
) -> Result<SensitivityRecord> {
    system.check_pulse(pulse)?;
    let dt = c(system.dt(), 0.0);
    let n = system.probe.dim();
    let slices = system.slices();
    let dirs: Vec<CMatrix> = (0..NUM_PARAMS).map(|a| system.param_part(a) * dt).collect();

    let mut rec = SensitivityRecord {
        states: Vec::with_capacity(slices + 1),
        derivs: Vec::with_capacity(slices + 1),
        propagators: Vec::with_capacity(slices),
        slice_derivs: Vec::with_capacity(slices),
        generators: Vec::with_capacity(slices),
        dim: n,
    };
    let zero = Array1::<C64>::zeros(n * n);
    rec.states.push(system.probe.vec());
    rec.derivs.push([zero.clone(), zero.clone(), zero]);

    for j in 0..slices {
        let a = system.liouvillian(&pulse.column(j)).0 * dt;
        let (prop, d) = match mode {
            SensitivityMode::Exact => expm_frechet_multi(&a, &dirs)?,
            SensitivityMode::FirstOrder => {
                let prop = linalg::expm(&a)?;
                let d = dirs.iter().map(|e| prop.dot(e)).collect();
                (prop, d)
            }
        };
        let rho = &rec.states[j];
        let next_rho = prop.dot(rho);
        let next_d = [0, 1, 2].map(|al| prop.dot(&rec.derivs[j][al]) + d[al].dot(rho));

        let state = DensityMatrix::from_raw(unvectorize(&next_rho, n));
        state.check(j + 1)?;

        rec.states.push(next_rho);
        rec.derivs.push(next_d);
        rec.propagators.push(prop);
        rec.slice_derivs.push([d[0].clone(), d[1].clone(), d[2].clone()]);
        rec.generators.push(a);
    }
    Ok(rec)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub cfim: Cfim,
    pub cr_bound: f64,
    pub f0: f64,
    pub probabilities: Vec<f64>,
    /// `tr F⁻¹` at `t = jΔt` for `j = 0..=N`.
    pub series: Vec<f64>,
}

pub fn evaluate_record(record: &SensitivityRecord, povm: &[CMatrix]) -> Evaluation {
    let series: Vec<f64> = (0..=record.slices())
        .map(|j| cr_bound(&record.cfim_at(j, povm)))
        .collect();
    let last = record.slices();
    let (probs, dprobs) = record.statistics(last, povm);
    let f = cfim(&probs, &dprobs);
    Evaluation {
        cfim: f,
        cr_bound: cr_bound(&f),
        f0: f0_objective(&f),
        probabilities: probs,
        series,
    }
}

pub fn evaluate(system: &OpenSystem, pulse: &PulseSequence) -> Result<Evaluation> {
    let rec = propagate_with_sensitivity(system, pulse)?;
    Ok(evaluate_record(&rec, &system.povm))
}

pub fn evaluate_scenario(scenario: &Scenario, pulse: &PulseSequence) -> Result<Evaluation> {
    evaluate(&scenario.system()?, pulse)
}

/// Final-time CFIM only, skipping the time series.
pub fn final_cfim(system: &OpenSystem, pulse: &PulseSequence) -> Result<Cfim> {
    let rec = propagate_with_sensitivity(system, pulse)?;
    Ok(rec.cfim_at(rec.slices(), &system.povm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DensityMatrix, Scenario};

    fn diag(a: f64, b: f64, c_: f64) -> Cfim {
        Cfim::from_entries([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c_]])
    }

    #[test]
    fn probabilities_of_matching_probes() {
        for s in [Scenario::example1_default(), Scenario::example2_default()] {
            let p = probabilities(s.probe.matrix(), &s.povm);
            assert!((p[0] - 1.0).abs() < 1e-15);
            assert!(p[1..].iter().all(|v| v.abs() < 1e-15));
            let mixed = DensityMatrix::maximally_mixed(4);
            let p = probabilities(mixed.matrix(), &s.povm);
            assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn cfim_cases() {
        let zero = [vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]];
        assert_eq!(cfim(&[0.25; 4], &zero).entries, [[0.0; 3]; 3]);
        // binomial: (p')² / (p(1 - p)) at p = p' = 1/2
        let d = [vec![-0.5, 0.5, 0.0, 0.0], vec![0.0; 4], vec![0.0; 4]];
        let f = cfim(&[0.5, 0.5, 0.0, 0.0], &d);
        assert!((f.entries[0][0] - 1.0).abs() < 1e-15);
        assert!(!f.degenerate);
        let d = [
            vec![0.1, -0.2, 0.05, 0.05],
            vec![0.3, 0.0, -0.1, -0.2],
            vec![-0.05, 0.1, 0.0, -0.05],
        ];
        let f = cfim(&[0.1, 0.2, 0.3, 0.4], &d);
        assert_eq!(f.asymmetry(), 0.0);
    }

    #[test]
    fn cfim_flags_large_skipped_terms() {
        let d = [vec![0.0, 0.0, 0.5, -0.5], vec![0.0; 4], vec![0.0; 4]];
        let f = cfim(&[0.5, 0.5, 0.0, 0.0], &d);
        assert!(f.degenerate);
    }

    #[test]
    fn cr_bound_cases() {
        assert!((cr_bound(&diag(1.0, 1.0, 1.0)) - 3.0).abs() < 1e-15);
        assert!((cr_bound(&diag(1.0, 2.0, 4.0)) - 1.75).abs() < 1e-15);
        assert!(cr_bound(&diag(1.0, 0.0, 4.0)).is_infinite());
        assert!(cr_bound(&diag(1.0, 1e-13, 4.0)).is_infinite());
    }

    #[test]
    fn f0_cases() {
        assert!((f0_objective(&diag(1.0, 2.0, 4.0)) - 4.0 / 7.0).abs() < 1e-15);
        let f = diag(0.3, 2.0, 5.0);
        assert!((1.0 / f0_objective(&f) - cr_bound(&f)).abs() < 1e-14);
        assert_eq!(f0_objective(&diag(1.0, 0.0, 1.0)), 0.0);
    }

    #[test]
    fn zero_pulse_example2_cfim_is_symmetric() {
        let s = Scenario::example2_default();
        let e = evaluate_scenario(&s, &PulseSequence::zeros(6, 50, 5.0)).unwrap();
        assert!(e.cfim.asymmetry() < 1e-10);
        assert!(e.series[0].is_infinite());
    }

    #[test]
    fn deterministic_evaluation() {
        let s = Scenario::example1_default();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let p = PulseSequence::random(6, 50, 3.0, 1.0, &mut rng);
        let a = evaluate_scenario(&s, &p).unwrap();
        let b = evaluate_scenario(&s, &p.clone()).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.cfim, b.cfim);
    }
}

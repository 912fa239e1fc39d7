//! Piecewise-constant Lindblad evolution of two-qubit density matrices.

mod pulse;
mod scenario;
pub mod superop;

pub use pulse::PulseSequence;
pub use scenario::{
    all_local_controls, free_hamiltonian, free_hamiltonian_derivs, make_example1, make_example2,
    transverse_controls, unit_vector, DephasingChannel, Horizon, ParamVector, Scenario,
    ScenarioConfig, ScenarioKind, NUM_PARAMS,
};

use ndarray::Array1;

use crate::error::{CoreError, Result};
use crate::linalg::{
    self, c, expm, hermitian_eigenvalues, hermiticity_defect, unvectorize, vectorize, CMatrix, C64,
};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = -1e-10;

/// A 4×4 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let rho = Self(m);
        rho.check(0)?;
        Ok(rho)
    }

    /// Wraps without checking; used for intermediate propagation results
    /// that are validated by the caller.
    pub(crate) fn from_raw(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn from_pure(v: &[C64]) -> Result<Self> {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v: Vec<C64> = v.iter().map(|z| z / norm).collect();
        Self::new(linalg::projector(&v))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(linalg::identity(n) / c(n as f64, 0.0))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.0).re
    }

    pub fn purity(&self) -> f64 {
        linalg::re_trace_product(&self.0, &self.0)
    }

    pub fn vec(&self) -> Array1<C64> {
        vectorize(&self.0)
    }

    /// Checks Hermiticity, unit trace and positivity; `slice` labels the error.
    pub fn check(&self, slice: usize) -> Result<()> {
        let err = |reason: String| Err(CoreError::InvalidState { slice, reason });
        if !linalg::is_finite(&self.0) {
            return err("non-finite entries".into());
        }
        let herm = hermiticity_defect(&self.0);
        if herm > HERMITIAN_TOL {
            return err(format!("Hermiticity defect {herm:.3e}"));
        }
        let tr = linalg::trace(&self.0);
        if (tr - c(1.0, 0.0)).norm() > TRACE_TOL {
            return err(format!("trace {tr}"));
        }
        let min_ev = hermitian_eigenvalues(&self.0)[0];
        if min_ev < POSITIVITY_TOL {
            return err(format!("negative eigenvalue {min_ev:.3e}"));
        }
        Ok(())
    }
}

/// Generator of the vectorized master equation, `d vec(ρ)/dt = L vec(ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian(pub CMatrix);

impl Liouvillian {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// `‖vec(I)† L‖`, zero for trace-preserving generators.
    pub fn trace_defect(&self) -> f64 {
        let n = (self.0.nrows() as f64).sqrt() as usize;
        let id = vectorize(&linalg::identity(n));
        let row = id.mapv(|z| z.conj()).dot(&self.0);
        row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `L = -i[H, ·] + Σ (γ_k/2)(A_k · A_k − ·)` for Hermitian involutions `A_k`.
pub fn build_liouvillian(h: &CMatrix, channels: &[(f64, CMatrix)]) -> Result<Liouvillian> {
    let defect = hermiticity_defect(h);
    if defect > 1e-12 {
        return Err(CoreError::NotHermitian(defect));
    }
    let mut l = superop::hamiltonian_part(h);
    for (rate, op) in channels {
        l = l + superop::dephasing_part(*rate, op);
    }
    Ok(Liouvillian(l))
}

/// A scenario reduced to explicit operators: everything downstream works
/// against this form, so any basis or operator choice can be plugged in.
#[derive(Debug, Clone)]
pub struct OpenSystem {
    pub h0: CMatrix,
    pub h0_derivs: [CMatrix; NUM_PARAMS],
    pub controls: Vec<CMatrix>,
    pub jumps: Vec<(f64, CMatrix)>,
    pub probe: DensityMatrix,
    pub povm: Vec<CMatrix>,
    pub horizon: Horizon,
    pub u_max: f64,
    free_part: CMatrix,
    control_parts: Vec<CMatrix>,
    param_parts: [CMatrix; NUM_PARAMS],
}

impl OpenSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        h0: CMatrix,
        h0_derivs: [CMatrix; NUM_PARAMS],
        controls: Vec<CMatrix>,
        jumps: Vec<(f64, CMatrix)>,
        probe: DensityMatrix,
        povm: Vec<CMatrix>,
        horizon: Horizon,
        u_max: f64,
    ) -> Result<Self> {
        let free_part = build_liouvillian(&h0, &jumps)?.0;
        let control_parts = controls.iter().map(superop::hamiltonian_part).collect();
        let param_parts = [
            superop::hamiltonian_part(&h0_derivs[0]),
            superop::hamiltonian_part(&h0_derivs[1]),
            superop::hamiltonian_part(&h0_derivs[2]),
        ];
        Ok(Self {
            h0,
            h0_derivs,
            controls,
            jumps,
            probe,
            povm,
            horizon,
            u_max,
            free_part,
            control_parts,
            param_parts,
        })
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn slices(&self) -> usize {
        self.horizon.slices
    }

    pub fn dt(&self) -> f64 {
        self.horizon.dt
    }

    /// Applies `ρ ↦ U ρ U†` to every operator; bounds are basis independent.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        let ud = linalg::adjoint(u);
        let conj = |m: &CMatrix| u.dot(m).dot(&ud);
        Self::new(
            conj(&self.h0),
            [
                conj(&self.h0_derivs[0]),
                conj(&self.h0_derivs[1]),
                conj(&self.h0_derivs[2]),
            ],
            self.controls.iter().map(conj).collect(),
            self.jumps.iter().map(|(r, a)| (*r, conj(a))).collect(),
            DensityMatrix::from_raw(conj(self.probe.matrix())),
            self.povm.iter().map(conj).collect(),
            self.horizon,
            self.u_max,
        )
    }

    /// Superoperator of `-i[Hᵢ, ·]` for control channel `i`.
    pub fn control_part(&self, i: usize) -> &CMatrix {
        &self.control_parts[i]
    }

    /// Superoperator of `-i[∂H₀/∂x_α, ·]`, i.e. `∂L/∂x_α`.
    pub fn param_part(&self, alpha: usize) -> &CMatrix {
        &self.param_parts[alpha]
    }

    /// Liouvillian of the slice driven by `column`.
    pub fn liouvillian(&self, column: &[f64]) -> Liouvillian {
        let mut l = self.free_part.clone();
        for (part, &u) in self.control_parts.iter().zip(column) {
            if u != 0.0 {
                l.scaled_add(c(u, 0.0), part);
            }
        }
        Liouvillian(l)
    }

    pub fn check_pulse(&self, pulse: &PulseSequence) -> Result<()> {
        let (p, n) = pulse.shape();
        if p != self.num_controls() || n != self.slices() {
            return Err(CoreError::DimensionMismatch {
                expected: format!("{}x{} pulse", self.num_controls(), self.slices()),
                got: format!("{p}x{n}"),
            });
        }
        Ok(())
    }
}

/// `ρ(0), ρ(Δt), …, ρ(T)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DensityMatrix>,
    pub dt: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory always holds the probe")
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|j| j as f64 * self.dt).collect()
    }
}

/// Per-slice propagators `e^{ΔtL_j}` of one pulse, reused by later passes.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub trajectory: Trajectory,
    pub propagators: Vec<CMatrix>,
}

pub(crate) fn apply(prop: &CMatrix, rho: &CMatrix) -> CMatrix {
    let n = rho.nrows();
    unvectorize(&prop.dot(&vectorize(rho)), n)
}

/// Evolves the probe through every slice of `pulse`.
pub fn propagate(system: &OpenSystem, pulse: &PulseSequence) -> Result<Propagation> {
    system.check_pulse(pulse)?;
    let dt = system.dt();
    let mut states = Vec::with_capacity(system.slices() + 1);
    let mut propagators = Vec::with_capacity(system.slices());
    states.push(system.probe.clone());
    for j in 0..system.slices() {
        let generator = system.liouvillian(&pulse.column(j)).0 * c(dt, 0.0);
        let prop = expm(&generator)?;
        let next = DensityMatrix::from_raw(apply(&prop, states[j].matrix()));
        next.check(j + 1)?;
        states.push(next);
        propagators.push(prop);
    }
    Ok(Propagation {
        trajectory: Trajectory { states, dt },
        propagators,
    })
}

pub fn propagate_scenario(scenario: &Scenario, pulse: &PulseSequence) -> Result<Trajectory> {
    Ok(propagate(&scenario.system()?, pulse)?.trajectory)
}

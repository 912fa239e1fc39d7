//! Moving an optimized pulse to new parameter values by absorbing the
//! Hamiltonian change into the control channels, and the matching
//! transformation of the Fisher information.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    free_hamiltonian, unit_vector, ParamVector, PulseSequence, Scenario, ScenarioKind, NUM_PARAMS,
};
use crate::error::{CoreError, Result};
use crate::fisher::{self, Cfim};
use crate::linalg::{self, c, CMatrix, LuFactor};

/// A shift is exact when the Frobenius residual is below this.
pub const FEASIBILITY_TOL: f64 = 1e-10;
/// `|sin ϑ|` below this is treated as a pole of the spherical chart.
pub const POLE_GUARD: f64 = 1e-8;

type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDecomposition {
    /// `δuᵢ`; the shifted pulse is `uᵢ − δuᵢ`.
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
}

impl ShiftDecomposition {
    pub fn feasible(&self) -> bool {
        self.residual_norm <= FEASIBILITY_TOL
    }
}

/// Least-squares fit of `H₀(x′) − H₀(x)` by the control Hamiltonians.
pub fn decompose_shift(scenario: &Scenario, x: &ParamVector, x_new: &ParamVector) -> Result<ShiftDecomposition> {
    x.validate(scenario.kind)?;
    x_new.validate(scenario.kind)?;
    let dh = free_hamiltonian(scenario.kind, x_new) - free_hamiltonian(scenario.kind, x);
    decompose_operator(&dh, &scenario.control_operators())
}

pub fn decompose_operator(dh: &CMatrix, controls: &[CMatrix]) -> Result<ShiftDecomposition> {
    let p = controls.len();
    if p == 0 {
        return Ok(ShiftDecomposition {
            coefficients: vec![],
            residual_norm: linalg::frobenius_norm(dh),
        });
    }
    let gram = ndarray::Array2::from_shape_fn((p, p), |(k, l)| c(linalg::inner(&controls[k], &controls[l]).re, 0.0));
    let rhs = ndarray::Array2::from_shape_fn((p, 1), |(k, _)| c(linalg::inner(&controls[k], dh).re, 0.0));
    let sol = LuFactor::new(&gram)?.solve(&rhs);
    let coefficients: Vec<f64> = sol.column(0).iter().map(|v| v.re).collect();
    let mut residual = dh.clone();
    for (h, &u) in controls.iter().zip(&coefficients) {
        residual.scaled_add(c(-u, 0.0), h);
    }
    Ok(ShiftDecomposition {
        coefficients,
        residual_norm: linalg::frobenius_norm(&residual),
    })
}

/// `uᵢ(jΔt) − δuᵢ` on every slice. Amplitudes pushed past the bound are an
/// error: clipping would break the exact cancellation.
pub fn shift_pulse(pulse: &PulseSequence, dec: &ShiftDecomposition) -> Result<PulseSequence> {
    if !dec.feasible() {
        return Err(CoreError::InfeasibleShift {
            residual: dec.residual_norm,
        });
    }
    if dec.coefficients.len() != pulse.channels() {
        return Err(CoreError::DimensionMismatch {
            expected: format!("{} shift coefficients", pulse.channels()),
            got: dec.coefficients.len().to_string(),
        });
    }
    let mut amplitudes = pulse.amplitudes.clone();
    for (mut row, &d) in amplitudes.rows_mut().into_iter().zip(&dec.coefficients) {
        row.mapv_inplace(|u| u - d);
    }
    PulseSequence::new(amplitudes, pulse.u_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformMatrix {
    pub entries: Mat3,
    /// `(C(x), C(x′))` when `R` comes from a change of variables.
    pub jacobian_pair: Option<(Mat3, Mat3)>,
}

impl TransformMatrix {
    pub fn identity() -> Self {
        Self {
            entries: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            jacobian_pair: None,
        }
    }

    pub fn inverse(&self) -> Option<Mat3> {
        invert3(&self.entries)
    }
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn invert3(m: &Mat3) -> Option<Mat3> {
    let det = det3(m);
    let scale = m.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    if !(det.abs() > 1e-14 * scale.powi(3)) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *v = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    Some(inv)
}

fn matmul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose3(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

/// Jacobian of `(B_x, B_y, B_z)` with respect to `(B, ϑ, φ)`.
pub fn spherical_jacobian(x: &ParamVector) -> Mat3 {
    let [b, theta, phi] = x.0;
    let n = unit_vector(theta, phi);
    let e_theta = [theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin()];
    let e_phi = [-phi.sin(), phi.cos(), 0.0];
    let mut m = [[0.0; 3]; 3];
    for k in 0..3 {
        m[k] = [n[k], b * e_theta[k], b * theta.sin() * e_phi[k]];
    }
    m
}

/// `R = C⁻¹(x)·C(x′)`, so that `F(x′) = Rᵀ F(x) R`.
pub fn transform_matrix(scenario: &Scenario, x: &ParamVector, x_new: &ParamVector) -> Result<TransformMatrix> {
    x.validate(scenario.kind)?;
    x_new.validate(scenario.kind)?;
    match scenario.kind {
        ScenarioKind::Example2 => Ok(TransformMatrix::identity()),
        ScenarioKind::Example1 => {
            for theta in [x.0[1], x_new.0[1]] {
                if theta.sin().abs() < POLE_GUARD {
                    return Err(CoreError::PoleSingularity { theta });
                }
            }
            let cx = spherical_jacobian(x);
            let cx_new = spherical_jacobian(x_new);
            let cx_inv = invert3(&cx).ok_or(CoreError::Singular("spherical Jacobian at the reference point"))?;
            Ok(TransformMatrix {
                entries: matmul3(&cx_inv, &cx_new),
                jacobian_pair: Some((cx, cx_new)),
            })
        }
    }
}

/// `F(x′) = Rᵀ F(x) R` and `tr F⁻¹(x′) = tr[R⁻¹ F⁻¹(x) R⁻ᵀ]`.
pub fn predict_bound(f: &Cfim, r: &TransformMatrix) -> (Cfim, f64) {
    let rt = transpose3(&r.entries);
    let moved = Cfim::from_entries(matmul3(&rt, &matmul3(&f.entries, &r.entries)));
    let bound = match (r.inverse(), f.inverse()) {
        (Some(ri), Some(fi)) => {
            let m = matmul3(&ri, &matmul3(&fi, &transpose3(&ri)));
            (0..NUM_PARAMS).map(|i| m[i][i]).sum()
        }
        _ => f64::INFINITY,
    };
    (moved, bound)
}

/// Coefficients `(C₁, C₂, C₃)` for a direction change at fixed field strength.
pub fn direction_coefficients(theta: f64, phi: f64, theta_new: f64, phi_new: f64) -> Result<[f64; 3]> {
    let s_new = theta_new.sin();
    if s_new.abs() < POLE_GUARD {
        return Err(CoreError::PoleSingularity { theta: theta_new });
    }
    let dphi = phi_new - phi;
    let cot2 = (theta_new.cos() / s_new).powi(2);
    let csc2 = 1.0 / (s_new * s_new);
    let (s2, c2) = (theta.sin().powi(2), theta.cos().powi(2));
    let (sd2, cd2) = (dphi.sin().powi(2), dphi.cos().powi(2));
    Ok([
        1.0 + s2 * sd2 * cot2,
        1.0 + c2 * sd2 * cot2,
        s2 * (sd2 + csc2 * cd2),
    ])
}

/// Closed-form `tr F⁻¹` after moving the field direction with `B′ = B`,
/// using the diagonal of `F⁻¹(x)`.
pub fn predict_bound_direction(f: &Cfim, theta: f64, phi: f64, theta_new: f64, phi_new: f64) -> Result<f64> {
    let cs = direction_coefficients(theta, phi, theta_new, phi_new)?;
    Ok(match f.inverse() {
        Some(fi) => (0..3).map(|k| cs[k] * fi[k][k]).sum(),
        None => f64::INFINITY,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Generalization {
    pub decomposition: ShiftDecomposition,
    pub shifted_pulse: Option<PulseSequence>,
    /// `tr F⁻¹` evaluated at `x′` under the shifted pulse.
    pub direct: f64,
    /// `tr F⁻¹` predicted from `F(x)` and `R`.
    pub predicted: f64,
    pub f0: f64,
}

impl Generalization {
    pub fn feasible(&self) -> bool {
        self.shifted_pulse.is_some()
    }
}

/// Carries `pulse`, optimal at the scenario's parameters, over to `x′`.
/// Infeasible decompositions come back with NaN bounds and no pulse.
pub fn generalize(scenario: &Scenario, x_new: &ParamVector, pulse: &PulseSequence) -> Result<Generalization> {
    let x = scenario.params;
    let decomposition = decompose_shift(scenario, &x, x_new)?;
    if !decomposition.feasible() {
        return Ok(Generalization {
            decomposition,
            shifted_pulse: None,
            direct: f64::NAN,
            predicted: f64::NAN,
            f0: f64::NAN,
        });
    }
    let shifted = shift_pulse(pulse, &decomposition)?;
    let base = fisher::final_cfim(&scenario.system()?, pulse)?;
    // On a pole the coordinates degenerate and so does the bound.
    let predicted = match transform_matrix(scenario, &x, x_new) {
        Ok(r) => predict_bound(&base, &r).1,
        Err(CoreError::PoleSingularity { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let moved = fisher::final_cfim(&scenario.with_params(*x_new)?.system()?, &shifted)?;
    Ok(Generalization {
        decomposition,
        shifted_pulse: Some(shifted),
        direct: fisher::cr_bound(&moved),
        predicted,
        f0: fisher::f0_objective(&moved),
    })
}

//! The two estimation problems: a field of unknown strength and direction
//! on one qubit of a Bell pair, and a ZZ-coupled pair with unknown local
//! fields and coupling.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use super::{DensityMatrix, OpenSystem};
use crate::error::{CoreError, Result};
use crate::linalg::{c, pauli_embed, projector, CMatrix, PauliAxis, PauliLabel, C64};

pub const NUM_PARAMS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// `H₀ = B·σ⁽¹⁾`, parameters `(B, ϑ, φ)`.
    Example1,
    /// `H₀ = ω₁σz⁽¹⁾ + ω₂σz⁽²⁾ + g σz⁽¹⁾σz⁽²⁾`, parameters `(ω₁, ω₂, g)`.
    Example2,
}

impl ScenarioKind {
    pub fn default_params(self) -> ParamVector {
        match self {
            ScenarioKind::Example1 => ParamVector([1.0, PI / 4.0, PI / 4.0]),
            ScenarioKind::Example2 => ParamVector([1.0, 1.2, 0.1]),
        }
    }

    pub fn param_names(self) -> [&'static str; NUM_PARAMS] {
        match self {
            ScenarioKind::Example1 => ["B", "theta", "phi"],
            ScenarioKind::Example2 => ["omega1", "omega2", "g"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub [f64; NUM_PARAMS]);

impl ParamVector {
    /// Field strength may be negative (field antiparallel to the direction)
    /// so that sweeps can cross zero; angles are kept to their closed ranges.
    pub fn validate(&self, kind: ScenarioKind) -> Result<()> {
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Config(format!("non-finite parameters {:?}", self.0)));
        }
        if kind == ScenarioKind::Example1 {
            let [_, theta, phi] = self.0;
            if !(0.0..=PI).contains(&theta) {
                return Err(CoreError::Config(format!("theta = {theta} outside [0, pi]")));
            }
            if !(0.0..=2.0 * PI).contains(&phi) {
                return Err(CoreError::Config(format!("phi = {phi} outside [0, 2pi]")));
            }
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingChannel {
    pub qubit: usize,
    pub rate: f64,
}

/// `T = N·Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub total: f64,
    pub dt: f64,
    pub slices: usize,
}

impl Horizon {
    pub fn new(total: f64, dt: f64) -> Result<Self> {
        if !(total > 0.0 && dt > 0.0 && total.is_finite() && dt.is_finite()) {
            return Err(CoreError::Config(format!("need T > 0 and dt > 0 (T = {total}, dt = {dt})")));
        }
        let n = (total / dt).round();
        if n < 1.0 || (n * dt - total).abs() > 1e-9 * total.max(1.0) {
            return Err(CoreError::Config(format!(
                "T = {total} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(Self {
            total,
            dt,
            slices: n as usize,
        })
    }
}

/// Field direction `(sinϑ cosφ, sinϑ sinφ, cosϑ)`.
pub fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn field_operator(v: [f64; 3]) -> CMatrix {
    PauliAxis::ALL
        .iter()
        .zip(v)
        .map(|(&axis, comp)| pauli_embed(PauliLabel::new(1, axis, 2)).unwrap() * c(comp, 0.0))
        .fold(CMatrix::zeros((4, 4)), |acc, m| acc + m)
}

fn sz(q: usize) -> CMatrix {
    pauli_embed(PauliLabel::new(q, PauliAxis::Z, 2)).unwrap()
}

/// Free Hamiltonian `H₀(x)`.
pub fn free_hamiltonian(kind: ScenarioKind, x: &ParamVector) -> CMatrix {
    match kind {
        ScenarioKind::Example1 => {
            let [b, theta, phi] = x.0;
            field_operator(unit_vector(theta, phi).map(|v| b * v))
        }
        ScenarioKind::Example2 => {
            let [w1, w2, g] = x.0;
            sz(1) * c(w1, 0.0) + sz(2) * c(w2, 0.0) + sz(1).dot(&sz(2)) * c(g, 0.0)
        }
    }
}

/// `∂H₀/∂x_α` for each parameter.
pub fn free_hamiltonian_derivs(kind: ScenarioKind, x: &ParamVector) -> [CMatrix; NUM_PARAMS] {
    match kind {
        ScenarioKind::Example1 => {
            let [b, theta, phi] = x.0;
            let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
            [
                field_operator([st * cp, st * sp, ct]),
                field_operator([b * ct * cp, b * ct * sp, -b * st]),
                field_operator([-b * st * sp, b * st * cp, 0.0]),
            ]
        }
        ScenarioKind::Example2 => [sz(1), sz(2), sz(1).dot(&sz(2))],
    }
}

fn bell_basis() -> [[C64; 4]; 4] {
    let h = c(FRAC_1_SQRT_2, 0.0);
    let z = c(0.0, 0.0);
    [
        [h, z, z, h],
        [h, z, z, -h],
        [z, h, h, z],
        [z, h, -h, z],
    ]
}

fn plus_minus_basis() -> [[C64; 4]; 4] {
    let signs = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
    signs.map(|(s1, s2)| {
        // |a> ⊗ |b> with |±> = (|0> ± |1>)/√2, basis order 00, 01, 10, 11
        [
            c(0.5, 0.0),
            c(0.5 * s2, 0.0),
            c(0.5 * s1, 0.0),
            c(0.5 * s1 * s2, 0.0),
        ]
    })
}

/// Full problem statement for one of the two examples.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub params: ParamVector,
    pub noise: Vec<DephasingChannel>,
    pub controls: Vec<PauliLabel>,
    pub probe: DensityMatrix,
    pub povm: Vec<CMatrix>,
    pub horizon: Horizon,
    pub u_max: f64,
    pub restricted: bool,
}

pub fn all_local_controls() -> Vec<PauliLabel> {
    (1..=2)
        .flat_map(|q| PauliAxis::ALL.map(|a| PauliLabel::new(q, a, 2)))
        .collect()
}

/// `σx, σy` on each qubit.
pub fn transverse_controls() -> Vec<PauliLabel> {
    (1..=2)
        .flat_map(|q| [PauliAxis::X, PauliAxis::Y].map(|a| PauliLabel::new(q, a, 2)))
        .collect()
}

pub fn make_example1(
    params: ParamVector,
    gamma: f64,
    total: f64,
    dt: f64,
    u_max: f64,
) -> Result<Scenario> {
    let bell = bell_basis();
    let s = Scenario {
        kind: ScenarioKind::Example1,
        params,
        noise: vec![DephasingChannel { qubit: 1, rate: gamma }],
        controls: all_local_controls(),
        probe: DensityMatrix::from_pure(&bell[0])?,
        povm: bell.iter().map(|v| projector(v)).collect(),
        horizon: Horizon::new(total, dt)?,
        u_max,
        restricted: false,
    };
    s.validate()?;
    Ok(s)
}

#[allow(clippy::too_many_arguments)]
pub fn make_example2(
    params: ParamVector,
    gamma1: f64,
    gamma2: f64,
    total: f64,
    dt: f64,
    u_max: f64,
    restricted: bool,
) -> Result<Scenario> {
    let basis = plus_minus_basis();
    let s = Scenario {
        kind: ScenarioKind::Example2,
        params,
        noise: vec![
            DephasingChannel { qubit: 1, rate: gamma1 },
            DephasingChannel { qubit: 2, rate: gamma2 },
        ],
        controls: if restricted {
            transverse_controls()
        } else {
            all_local_controls()
        },
        probe: DensityMatrix::from_pure(&basis[0])?,
        povm: basis.iter().map(|v| projector(v)).collect(),
        horizon: Horizon::new(total, dt)?,
        u_max,
        restricted,
    };
    s.validate()?;
    Ok(s)
}

impl Scenario {
    pub fn example1_default() -> Self {
        make_example1(ScenarioKind::Example1.default_params(), 0.2, 5.0, 0.1, 3.0).unwrap()
    }

    pub fn example2_default() -> Self {
        make_example2(ScenarioKind::Example2.default_params(), 0.1, 0.1, 5.0, 0.1, 5.0, false)
            .unwrap()
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn slices(&self) -> usize {
        self.horizon.slices
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate(self.kind)?;
        if !(self.u_max > 0.0 && self.u_max.is_finite()) {
            return Err(CoreError::Config(format!("u_max must be positive, got {}", self.u_max)));
        }
        for ch in &self.noise {
            if !(ch.rate >= 0.0 && ch.rate.is_finite()) {
                return Err(CoreError::Config(format!("dephasing rate {} must be >= 0", ch.rate)));
            }
            if ch.qubit == 0 || ch.qubit > 2 {
                return Err(CoreError::QubitIndex { index: ch.qubit, qubits: 2 });
            }
        }
        let mut total = CMatrix::zeros((4, 4));
        for p in &self.povm {
            total += p;
            if crate::linalg::hermitian_eigenvalues(p)[0] < -1e-12 {
                return Err(CoreError::Config("POVM element is not positive".into()));
            }
        }
        if crate::linalg::max_abs_diff(&total, &crate::linalg::identity(4)) > 1e-12 {
            return Err(CoreError::Config("POVM elements do not sum to identity".into()));
        }
        self.probe.check(0)?;
        Ok(())
    }

    pub fn with_params(&self, params: ParamVector) -> Result<Self> {
        params.validate(self.kind)?;
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    /// Replaces every dephasing rate, keeping the channel layout.
    pub fn with_rates(&self, rates: &[f64]) -> Result<Self> {
        if rates.len() != self.noise.len() {
            return Err(CoreError::Config(format!(
                "expected {} dephasing rates, got {}",
                self.noise.len(),
                rates.len()
            )));
        }
        let mut s = self.clone();
        for (ch, &r) in s.noise.iter_mut().zip(rates) {
            ch.rate = r;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn with_horizon(&self, total: f64) -> Result<Self> {
        let mut s = self.clone();
        s.horizon = Horizon::new(total, self.horizon.dt)?;
        Ok(s)
    }

    pub fn control_operators(&self) -> Vec<CMatrix> {
        self.controls.iter().map(|l| l.embed().unwrap()).collect()
    }

    /// `H₀(x) + Σ uᵢHᵢ`.
    pub fn build_hamiltonian(&self, column: &[f64]) -> Result<CMatrix> {
        if column.len() != self.controls.len() {
            return Err(CoreError::DimensionMismatch {
                expected: format!("{} control amplitudes", self.controls.len()),
                got: column.len().to_string(),
            });
        }
        let mut h = free_hamiltonian(self.kind, &self.params);
        for (op, &u) in self.control_operators().iter().zip(column) {
            h = h + op * c(u, 0.0);
        }
        Ok(h)
    }

    /// Compiles the scenario into explicit operators.
    pub fn system(&self) -> Result<OpenSystem> {
        OpenSystem::new(
            free_hamiltonian(self.kind, &self.params),
            free_hamiltonian_derivs(self.kind, &self.params),
            self.control_operators(),
            self.noise.iter().map(|ch| (ch.rate, sz(ch.qubit))).collect(),
            self.probe.clone(),
            self.povm.clone(),
            self.horizon,
            self.u_max,
        )
    }

    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            kind: self.kind,
            params: Some(self.params.0),
            gamma: Some(self.noise.iter().map(|n| n.rate).collect()),
            total_time: Some(self.horizon.total),
            dt: Some(self.horizon.dt),
            u_max: Some(self.u_max),
            restricted: Some(self.restricted),
        }
    }
}

/// JSON form of a scenario; omitted fields take the per-example defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<[f64; NUM_PARAMS]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub total_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restricted: Option<bool>,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            params: None,
            gamma: None,
            total_time: None,
            dt: None,
            u_max: None,
            restricted: None,
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let params = ParamVector(self.params.unwrap_or(self.kind.default_params().0));
        let total = self.total_time.unwrap_or(5.0);
        let dt = self.dt.unwrap_or(0.1);
        let restricted = self.restricted.unwrap_or(false);
        match self.kind {
            ScenarioKind::Example1 => {
                if restricted {
                    return Err(CoreError::Config(
                        "restricted control channels are only defined for example2".into(),
                    ));
                }
                let gamma = match self.gamma.as_deref() {
                    None => 0.2,
                    Some([g]) => *g,
                    Some(other) => {
                        return Err(CoreError::Config(format!(
                            "example1 takes one dephasing rate, got {}",
                            other.len()
                        )))
                    }
                };
                make_example1(params, gamma, total, dt, self.u_max.unwrap_or(3.0))
            }
            ScenarioKind::Example2 => {
                let (g1, g2) = match self.gamma.as_deref() {
                    None => (0.1, 0.1),
                    Some([g]) => (*g, *g),
                    Some([g1, g2]) => (*g1, *g2),
                    Some(other) => {
                        return Err(CoreError::Config(format!(
                            "example2 takes one or two dephasing rates, got {}",
                            other.len()
                        )))
                    }
                };
                make_example2(params, g1, g2, total, dt, self.u_max.unwrap_or(5.0), restricted)
            }
        }
    }
}

use serde::{Deserialize, Serialize};

use super::{c, identity, kron, CMatrix};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
}

/// Single-qubit Pauli `axis` acting on qubit `qubit` (1-based) of a register
/// of `qubits` qubits; qubit 1 is the leftmost tensor factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliLabel {
    pub qubit: usize,
    pub axis: PauliAxis,
    pub qubits: usize,
}

impl PauliLabel {
    pub fn new(qubit: usize, axis: PauliAxis, qubits: usize) -> Self {
        Self { qubit, axis, qubits }
    }

    pub fn embed(&self) -> Result<CMatrix> {
        pauli_embed(*self)
    }
}

impl std::fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = match self.axis {
            PauliAxis::X => 'x',
            PauliAxis::Y => 'y',
            PauliAxis::Z => 'z',
        };
        write!(f, "s{}{}", a, self.qubit)
    }
}

pub fn pauli(axis: PauliAxis) -> CMatrix {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match axis {
        PauliAxis::X => ndarray::arr2(&[[z, o], [o, z]]),
        PauliAxis::Y => ndarray::arr2(&[[z, -i], [i, z]]),
        PauliAxis::Z => ndarray::arr2(&[[o, z], [z, -o]]),
    }
}

/// `I ⊗ … ⊗ σ_axis ⊗ … ⊗ I` with the Pauli in slot `qubit`.
pub fn pauli_embed(label: PauliLabel) -> Result<CMatrix> {
    let PauliLabel { qubit, axis, qubits } = label;
    if qubits == 0 || qubits > 2 || qubit == 0 || qubit > qubits {
        return Err(CoreError::QubitIndex {
            index: qubit,
            qubits,
        });
    }
    let mut out = identity(1);
    for slot in 1..=qubits {
        let factor = if slot == qubit {
            pauli(axis)
        } else {
            identity(2)
        };
        out = kron(&out, &factor);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, hermiticity_defect, max_abs, max_abs_diff};

    fn diag_re(m: &CMatrix) -> Vec<f64> {
        m.diag().iter().map(|z| z.re).collect()
    }

    #[test]
    fn z_on_first_qubit() {
        let m = pauli_embed(PauliLabel::new(1, PauliAxis::Z, 2)).unwrap();
        assert_eq!(diag_re(&m), vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn z_on_second_qubit() {
        let m = pauli_embed(PauliLabel::new(2, PauliAxis::Z, 2)).unwrap();
        assert_eq!(diag_re(&m), vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn out_of_range() {
        assert!(pauli_embed(PauliLabel::new(2, PauliAxis::X, 1)).is_err());
        assert!(pauli_embed(PauliLabel::new(0, PauliAxis::X, 2)).is_err());
        assert!(pauli_embed(PauliLabel::new(1, PauliAxis::X, 3)).is_err());
    }

    #[test]
    fn hermitian_involutions_and_locality() {
        let labels: Vec<_> = (1..=2)
            .flat_map(|q| PauliAxis::ALL.map(|a| PauliLabel::new(q, a, 2)))
            .collect();
        for l in &labels {
            let m = l.embed().unwrap();
            assert_eq!(hermiticity_defect(&m), 0.0);
            assert_eq!(max_abs_diff(&m.dot(&m), &identity(4)), 0.0);
        }
        for a in labels.iter().filter(|l| l.qubit == 1) {
            for b in labels.iter().filter(|l| l.qubit == 2) {
                let comm = commutator(&a.embed().unwrap(), &b.embed().unwrap());
                assert_eq!(max_abs(&comm), 0.0);
            }
        }
    }
}

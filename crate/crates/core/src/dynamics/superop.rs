//! Superoperators in the column-stacking convention, `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.

use crate::linalg::{identity, kron, transpose, CMatrix, C64};

/// Matrix of `ρ ↦ a ρ b`.
pub fn sandwich(a: &CMatrix, b: &CMatrix) -> CMatrix {
    kron(&transpose(b), a)
}

/// Matrix of `ρ ↦ -i[h, ρ]`.
pub fn hamiltonian_part(h: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let eye = identity(n);
    (kron(&eye, h) - kron(&transpose(h), &eye)) * C64::new(0.0, -1.0)
}

/// Matrix of `ρ ↦ (rate/2)(a ρ a − ρ)` for a Hermitian involution `a`.
pub fn dephasing_part(rate: f64, a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    (sandwich(a, a) - identity(n * n)) * (0.5 * rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, commutator, max_abs_diff, unvectorize, vectorize};

    fn sample(n: usize, seed: f64) -> CMatrix {
        CMatrix::from_shape_fn((n, n), |(i, j)| {
            c(((i * 7 + j * 3) as f64 * seed).sin(), ((i + 2 * j) as f64 * seed).cos())
        })
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let (a, b, rho) = (sample(4, 0.3), sample(4, 0.7), sample(4, 1.1));
        let lhs = unvectorize(&sandwich(&a, &b).dot(&vectorize(&rho)), 4);
        assert!(max_abs_diff(&lhs, &a.dot(&rho).dot(&b)) < 1e-13);
    }

    #[test]
    fn commutator_superoperator() {
        let (h, rho) = (sample(4, 0.4), sample(4, 0.9));
        let lhs = unvectorize(&hamiltonian_part(&h).dot(&vectorize(&rho)), 4);
        let rhs = commutator(&h, &rho) * C64::new(0.0, -1.0);
        assert!(max_abs_diff(&lhs, &rhs) < 1e-13);
    }
}

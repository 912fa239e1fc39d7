//! Dense complex linear algebra for the small (4, 16 and block-augmented)
//! matrices that appear in two-qubit open-system dynamics.

mod eig;
mod expm;
mod lu;
mod pauli;

pub use eig::{hermitian_eigenvalues, symmetric_eigenvalues};
pub use expm::{expm, expm_frechet, expm_frechet2, expm_frechet_multi};
pub use lu::LuFactor;
pub use pauli::{pauli, pauli_embed, PauliAxis, PauliLabel};

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::eye(n)
}

pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros((n, n))
}

pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn transpose(m: &CMatrix) -> CMatrix {
    m.t().to_owned()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMatrix::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// `[a, b] = ab - ba`
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.dot(b) - b.dot(a)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diag().sum()
}

/// Frobenius inner product `tr(a† b)`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> C64 {
    Zip::from(a)
        .and(b)
        .fold(C64::new(0.0, 0.0), |acc, x, y| acc + x.conj() * y)
}

/// Real part of `tr(a b)` without forming the product.
pub fn re_trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = a[[i, k]];
            let y = b[[k, i]];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute column sum.
pub fn norm1(m: &CMatrix) -> f64 {
    m.columns()
        .into_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    Zip::from(a)
        .and(b)
        .fold(0.0_f64, |acc, x, y| acc.max((x - y).norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_square(m: &CMatrix, what: &'static str) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(CoreError::DimensionMismatch {
            expected: format!("square {what}"),
            got: format!("{r}x{c}"),
        });
    }
    Ok(r)
}

pub fn ensure_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: format!("{:?}", a.dim()),
            got: format!("{:?}", b.dim()),
        });
    }
    Ok(())
}

/// Column-stacking vectorization: `vec(m)[i + n*j] = m[i, j]`.
pub fn vectorize(m: &CMatrix) -> ndarray::Array1<C64> {
    let (r, c) = m.dim();
    let mut v = ndarray::Array1::zeros(r * c);
    for j in 0..c {
        for i in 0..r {
            v[i + r * j] = m[[i, j]];
        }
    }
    v
}

pub fn unvectorize(v: &ndarray::Array1<C64>, n: usize) -> CMatrix {
    let mut m = CMatrix::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            m[[i, j]] = v[i + n * j];
        }
    }
    m
}

/// Outer product `x y†` of two vectors.
pub fn outer(x: &ndarray::Array1<C64>, y: &ndarray::Array1<C64>) -> CMatrix {
    let mut m = CMatrix::zeros((x.len(), y.len()));
    for i in 0..x.len() {
        for j in 0..y.len() {
            m[[i, j]] = x[i] * y[j].conj();
        }
    }
    m
}

/// Projector `|v><v|`.
pub fn projector(v: &[C64]) -> CMatrix {
    let n = v.len();
    CMatrix::from_shape_fn((n, n), |(i, j)| v[i] * v[j].conj())
}

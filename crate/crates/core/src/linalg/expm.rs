//! Scaling-and-squaring matrix exponential with a fixed [13/13] Padé
//! approximant, evaluated over small graded matrix algebras so that
//! directional derivatives come out of the same computation.
//!
//! An element of an algebra is a list of `n×n` parts `(a₀, a₁, …)`. Each
//! algebra stands for a block upper-triangular matrix with `a₀` on every
//! diagonal block:
//!
//! * dense: `[a₀]`
//! * first-order jet with `k` directions: `[[A, 0, …, X₁], …, [0, …, A]]`;
//!   `exp` yields `(e^A, L(A, X₁), …, L(A, X_k))`
//! * hyper-dual `(A, X, Y, Z)` with `ε₁² = ε₂² = 0`: the `ε₁ε₂` part of
//!   `exp` is `∂²/∂s∂t e^{A+sX+tY}`, the sum of the two corner blocks of
//!   `exp([[A,X,0],[0,A,Y],[0,0,A]])` and `exp([[A,Y,0],[0,A,X],[0,0,A]])`.
//!
//! Products only touch the distinct blocks, so a jet with three directions
//! costs 7 block products instead of the 64 of the dense 64×64 matrix.

use super::{identity, is_finite, CMatrix, LuFactor};
use crate::error::{CoreError, Result};

const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Multiplication table: `out[k] = Σ a[i]·b[j]` over `rules[k]`. Every rule
/// other than `(0, k)` must have `j < k` so that division is triangular.
struct Algebra {
    rules: Vec<Vec<(usize, usize)>>,
}

impl Algebra {
    fn dense() -> Self {
        Self {
            rules: vec![vec![(0, 0)]],
        }
    }

    fn jet(directions: usize) -> Self {
        let mut rules = vec![vec![(0, 0)]];
        for k in 1..=directions {
            rules.push(vec![(0, k), (k, 0)]);
        }
        Self { rules }
    }

    fn hyper_dual() -> Self {
        Self {
            rules: vec![
                vec![(0, 0)],
                vec![(0, 1), (1, 0)],
                vec![(0, 2), (2, 0)],
                vec![(0, 3), (1, 2), (2, 1), (3, 0)],
            ],
        }
    }

    fn mul(&self, a: &[CMatrix], b: &[CMatrix]) -> Vec<CMatrix> {
        self.rules
            .iter()
            .map(|terms| {
                let mut acc: Option<CMatrix> = None;
                for &(i, j) in terms {
                    let prod = a[i].dot(&b[j]);
                    acc = Some(match acc {
                        None => prod,
                        Some(s) => s + prod,
                    });
                }
                acc.expect("empty multiplication rule")
            })
            .collect()
    }

    /// Solves `q · r = p` for `r`.
    fn solve(&self, q: &[CMatrix], p: &[CMatrix]) -> Result<Vec<CMatrix>> {
        let lu = LuFactor::new(&q[0])?;
        let mut r: Vec<CMatrix> = Vec::with_capacity(p.len());
        for (k, terms) in self.rules.iter().enumerate() {
            let mut rhs = p[k].clone();
            for &(i, j) in terms {
                if i == 0 && j == k {
                    continue;
                }
                rhs = rhs - q[i].dot(&r[j]);
            }
            r.push(lu.solve(&rhs));
        }
        Ok(r)
    }

    /// 1-norm bound of the represented block matrix.
    fn norm1(&self, a: &[CMatrix]) -> f64 {
        let n = a[0].ncols();
        (0..n)
            .map(|j| {
                a.iter()
                    .map(|part| part.column(j).iter().map(|z| z.norm()).sum::<f64>())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn exp(&self, parts: &[CMatrix]) -> Result<Vec<CMatrix>> {
        if parts.iter().any(|p| !is_finite(p)) {
            return Err(CoreError::NonFinite("matrix exponential input"));
        }
        let n = parts[0].nrows();
        let norm = self.norm1(parts);
        let squarings = if norm > THETA_13 {
            (norm / THETA_13).log2().ceil() as i32
        } else {
            0
        };
        let scale = 0.5_f64.powi(squarings);
        let a: Vec<CMatrix> = parts.iter().map(|p| p * scale).collect();

        let a2 = self.mul(&a, &a);
        let a4 = self.mul(&a2, &a2);
        let a6 = self.mul(&a4, &a2);
        let b = &PADE_13;
        let eye = identity(n);

        let combo = |c6: f64, c4: f64, c2: f64, c0: f64, k: usize| -> CMatrix {
            let mut m = &a6[k] * c6 + &a4[k] * c4 + &a2[k] * c2;
            if k == 0 && c0 != 0.0 {
                m = m + &eye * c0;
            }
            m
        };
        let len = parts.len();
        let inner_u: Vec<CMatrix> = (0..len).map(|k| combo(b[13], b[11], b[9], 0.0, k)).collect();
        let outer_u: Vec<CMatrix> = (0..len).map(|k| combo(b[7], b[5], b[3], b[1], k)).collect();
        let u_poly: Vec<CMatrix> = self
            .mul(&a6, &inner_u)
            .into_iter()
            .zip(outer_u)
            .map(|(x, y)| x + y)
            .collect();
        let u = self.mul(&a, &u_poly);

        let inner_v: Vec<CMatrix> = (0..len).map(|k| combo(b[12], b[10], b[8], 0.0, k)).collect();
        let outer_v: Vec<CMatrix> = (0..len).map(|k| combo(b[6], b[4], b[2], b[0], k)).collect();
        let v: Vec<CMatrix> = self
            .mul(&a6, &inner_v)
            .into_iter()
            .zip(outer_v)
            .map(|(x, y)| x + y)
            .collect();

        let numer: Vec<CMatrix> = v.iter().zip(&u).map(|(x, y)| x + y).collect();
        let denom: Vec<CMatrix> = v.iter().zip(&u).map(|(x, y)| x - y).collect();
        let mut r = self.solve(&denom, &numer)?;
        for _ in 0..squarings {
            r = self.mul(&r, &r);
        }
        if r.iter().any(|p| !is_finite(p)) {
            return Err(CoreError::NonFinite("matrix exponential output"));
        }
        Ok(r)
    }
}

fn check_square(a: &CMatrix) -> Result<()> {
    super::ensure_square(a, "matrix").map(|_| ())
}

/// Scale factor that brings a direction to the size of the base matrix.
/// Derivatives are linear in each direction, so the result is rescaled
/// exactly afterwards.
fn direction_scale(base_norm: f64, dir: &CMatrix) -> f64 {
    let n = super::norm1(dir);
    if n == 0.0 {
        1.0
    } else {
        base_norm.max(0.5) / n
    }
}

pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    check_square(a)?;
    let mut out = Algebra::dense().exp(std::slice::from_ref(a))?;
    Ok(out.pop().unwrap())
}

/// Returns `(e^A, L(A, E))` with `L(A, E) = d/ds e^{A+sE}` at `s = 0`.
pub fn expm_frechet(a: &CMatrix, e: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let (exp_a, mut derivs) = expm_frechet_multi(a, std::slice::from_ref(e))?;
    Ok((exp_a, derivs.pop().unwrap()))
}

/// `e^A` together with `L(A, E_k)` for every direction.
pub fn expm_frechet_multi(a: &CMatrix, dirs: &[CMatrix]) -> Result<(CMatrix, Vec<CMatrix>)> {
    check_square(a)?;
    for e in dirs {
        super::ensure_same_dim(a, e)?;
    }
    let base = super::norm1(a);
    let scales: Vec<f64> = dirs.iter().map(|e| direction_scale(base, e)).collect();
    let mut parts = Vec::with_capacity(dirs.len() + 1);
    parts.push(a.clone());
    parts.extend(dirs.iter().zip(&scales).map(|(e, s)| e * *s));
    let out = Algebra::jet(dirs.len()).exp(&parts)?;
    let mut it = out.into_iter();
    let exp_a = it.next().unwrap();
    let derivs = it.zip(&scales).map(|(l, s)| l / *s).collect();
    Ok((exp_a, derivs))
}

/// Mixed second derivative `∂²/∂s∂t e^{A + sE₁ + tE₂}` at zero.
pub fn expm_frechet2(a: &CMatrix, e1: &CMatrix, e2: &CMatrix) -> Result<CMatrix> {
    check_square(a)?;
    super::ensure_same_dim(a, e1)?;
    super::ensure_same_dim(a, e2)?;
    let base = super::norm1(a);
    let s1 = direction_scale(base, e1);
    let s2 = direction_scale(base, e2);
    let parts = vec![a.clone(), e1 * s1, e2 * s2, super::zeros(a.nrows())];
    let out = Algebra::hyper_dual().exp(&parts)?;
    Ok(&out[3] / (s1 * s2))
}

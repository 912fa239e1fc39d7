use super::{CMatrix, C64};
use crate::error::{CoreError, Result};

/// LU factorization with partial pivoting, `P A = L U`, packed in one matrix.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: CMatrix,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[[k, k]].norm();
            for r in k + 1..n {
                let v = lu[[r, k]].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= f64::EPSILON * scale * n as f64 || best == 0.0 {
                return Err(CoreError::Singular("LU factorization"));
            }
            if piv != k {
                perm.swap(k, piv);
                for c in 0..n {
                    lu.swap([k, c], [piv, c]);
                }
            }
            let inv = C64::new(1.0, 0.0) / lu[[k, k]];
            for r in k + 1..n {
                let f = lu[[r, k]] * inv;
                lu[[r, k]] = f;
                if f.re == 0.0 && f.im == 0.0 {
                    continue;
                }
                for c in k + 1..n {
                    let t = lu[[k, c]];
                    lu[[r, c]] -= f * t;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    /// Solves `A X = B` for a matrix right-hand side.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        let n = self.lu.nrows();
        let m = b.ncols();
        let mut x = CMatrix::zeros((n, m));
        for (i, &p) in self.perm.iter().enumerate() {
            x.row_mut(i).assign(&b.row(p));
        }
        for col in 0..m {
            for i in 0..n {
                let mut s = x[[i, col]];
                for k in 0..i {
                    s -= self.lu[[i, k]] * x[[k, col]];
                }
                x[[i, col]] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[[i, col]];
                for k in i + 1..n {
                    s -= self.lu[[i, k]] * x[[k, col]];
                }
                x[[i, col]] = s / self.lu[[i, i]];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff};

    #[test]
    fn solves_small_system() {
        let a = ndarray::arr2(&[
            [c(0.0, 0.0), c(2.0, 1.0), c(1.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)],
            [c(3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)],
        ]);
        let x = ndarray::arr2(&[
            [c(1.0, 0.0), c(0.5, 0.0)],
            [c(0.0, 2.0), c(-1.0, 0.0)],
            [c(-1.0, 1.0), c(0.0, 0.0)],
        ]);
        let b = a.dot(&x);
        let lu = LuFactor::new(&a).unwrap();
        assert!(max_abs_diff(&lu.solve(&b), &x) < 1e-14);
    }

    #[test]
    fn singular_is_rejected() {
        let a = ndarray::arr2(&[[c(1.0, 0.0), c(2.0, 0.0)], [c(2.0, 0.0), c(4.0, 0.0)]]);
        assert!(LuFactor::new(&a).is_err());
    }
}

//! Dense LU factorization with partial pivoting.

#![allow(clippy::needless_range_loop)]

use crate::error::{GvrError, Result};

#[derive(Clone, Debug)]
pub struct Lu {
    dim: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factors a row-major `dim × dim` matrix.
    ///
    /// Pivots below `rel_tol` times the largest absolute entry are treated as singular.
    pub fn factor(mut a: Vec<f64>, dim: usize, rel_tol: f64) -> Result<Self> {
        assert_eq!(a.len(), dim * dim);
        let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..dim).collect();
        for col in 0..dim {
            let mut piv = col;
            for r in col + 1..dim {
                if a[r * dim + col].abs() > a[piv * dim + col].abs() {
                    piv = r;
                }
            }
            if a[piv * dim + col].abs() <= rel_tol * scale {
                return Err(GvrError::Degenerate(format!(
                    "pivot {:.3e} in column {col} of a {dim}x{dim} system",
                    a[piv * dim + col]
                )));
            }
            if piv != col {
                for k in 0..dim {
                    a.swap(col * dim + k, piv * dim + k);
                }
                perm.swap(col, piv);
            }
            let p = a[col * dim + col];
            for r in col + 1..dim {
                let f = a[r * dim + col] / p;
                if f == 0.0 {
                    continue;
                }
                a[r * dim + col] = f;
                for k in col + 1..dim {
                    a[r * dim + k] -= f * a[col * dim + k];
                }
            }
        }
        Ok(Lu { dim, a, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for r in 0..d {
            let mut s = x[r];
            for k in 0..r {
                s -= self.a[r * d + k] * x[k];
            }
            x[r] = s;
        }
        for r in (0..d).rev() {
            let mut s = x[r];
            for k in r + 1..d {
                s -= self.a[r * d + k] * x[k];
            }
            x[r] = s / self.a[r * d + r];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_row_swaps() {
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = Lu::factor(a.clone(), 3, 1e-12).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        for r in 0..3 {
            let lhs: f64 = (0..3).map(|k| a[r * 3 + k] * x[k]).sum();
            assert!((lhs - [3.0, 2.0, 4.0][r]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_singular() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(Lu::factor(a, 2, 1e-12), Err(GvrError::Degenerate(_))));
    }
}

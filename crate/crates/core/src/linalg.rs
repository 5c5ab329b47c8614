//! Thin wrappers over the dense eigensolvers.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Eigendecomposition of a real symmetric matrix, values ascending.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

pub fn sym_eigen(a: &Mat<f64>) -> Result<SymEigen> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    Ok(SymEigen {
        values: e.S().column_vector().iter().copied().collect(),
        vectors: e.U().to_owned(),
    })
}

pub fn sym_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

impl SymEigen {
    /// `Q f(Lambda) Q^T`.
    pub fn function(&self, f: impl Fn(f64) -> f64) -> Mat<f64> {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * fv[j]);
        &scaled * self.vectors.transpose()
    }

    /// `Q f(Lambda) Q^T v` without forming the matrix.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64, v: &[f64]) -> Vec<f64> {
        let n = self.values.len();
        let mut coef = vec![0.0; n];
        for (j, c) in coef.iter_mut().enumerate() {
            let col = self.vectors.col_as_slice(j);
            *c = col.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * f(self.values[j]);
        }
        let mut out = vec![0.0; n];
        for (j, c) in coef.iter().enumerate() {
            for (o, q) in out.iter_mut().zip(self.vectors.col_as_slice(j)) {
                *o += q * c;
            }
        }
        out
    }
}

/// `A v`.
pub fn mat_vec(a: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), v.len());
    let mut out = vec![0.0; a.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == 0.0 {
            continue;
        }
        for (o, aij) in out.iter_mut().zip(a.col_as_slice(j)) {
            *o += aij * vj;
        }
    }
    out
}

/// `A^T v`.
pub fn mat_t_vec(a: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    assert_eq!(a.nrows(), v.len());
    (0..a.ncols())
        .map(|j| a.col_as_slice(j).iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Symmetric part `(A + A^T) / 2`.
pub fn symmetric_part(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Relative asymmetry `|A - A^T|_F / |A|_F`.
pub fn asymmetry(a: &Mat<f64>) -> f64 {
    let n = a.nrows();
    let mut num = 0.0;
    for j in 0..n {
        for i in 0..n {
            let d = a[(i, j)] - a[(j, i)];
            num += d * d;
        }
    }
    num.sqrt() / a.norm_l2()
}

/// `D_l A D_r` for diagonal scalings given as vectors.
pub fn scale_rows_cols(a: &Mat<f64>, left: &[f64], right: &[f64]) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| left[i] * a[(i, j)] * right[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_function_square_root() {
        let a = Mat::from_fn(4, 4, |i, j| if i == j { 3.0 } else { 1.0 / (1.0 + (i + j) as f64) });
        let e = sym_eigen(&a).unwrap();
        let r = e.function(f64::sqrt);
        let rr = &r * &r;
        assert!((&rr - &a).norm_l2() < 1e-12);
        let v = [1.0, -2.0, 0.5, 3.0];
        let direct = mat_vec(&r, &v);
        let lazy = e.apply_function(f64::sqrt, &v);
        for (x, y) in direct.iter().zip(&lazy) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
